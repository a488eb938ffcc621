#include "convpoint/digits.hpp"

#include <algorithm>
#include <cmath>

#include "convpoint/errors.hpp"

namespace convpoint {

namespace {

struct Seg {
    double x0, y0, x1, y1;
};

// Seven-segment layout in 28x28 pixel coordinates (col, row).
constexpr Seg kSegments[7] = {
    {8, 5, 20, 5},    // A  top
    {20, 5, 20, 14},  // B  top right
    {20, 14, 20, 23}, // C  bottom right
    {8, 23, 20, 23},  // D  bottom
    {8, 14, 8, 23},   // E  bottom left
    {8, 5, 8, 14},    // F  top left
    {8, 14, 20, 14},  // G  middle
};

// Active segments per digit, bit i = segment i.
constexpr unsigned kDigitSegs[10] = {
    0b0111111, // 0 ABCDEF
    0b0000110, // 1 BC
    0b1011011, // 2 ABGED
    0b1001111, // 3 ABGCD
    0b1100110, // 4 FGBC
    0b1101101, // 5 AFGCD
    0b1111101, // 6 AFGEDC
    0b0000111, // 7 ABC
    0b1111111, // 8 all
    0b1101111, // 9 ABCDFG
};

double dist_to_segment(double px, double py, const Seg& s) {
    const double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
    const double wx = px - s.x0, wy = py - s.y0;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = wx - t * vx, dy = wy - t * vy;
    return std::sqrt(dx * dx + dy * dy);
}

} // namespace

void render_digit(std::uint8_t digit, std::uint8_t* out, double angle,
                  double scale, double dx, double dy) {
    if (digit > 9) throw IndexError("render_digit: digit out of range");
    const unsigned mask = kDigitSegs[digit];
    const double cx = 14.0, cy = 14.0;
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double stroke = 1.4;
    for (int r = 0; r < 28; ++r)
        for (int c = 0; c < 28; ++c) {
            // pull the sample position back through the glyph transform
            const double ox = (static_cast<double>(c) - cx - dx) / scale;
            const double oy = (static_cast<double>(r) - cy - dy) / scale;
            const double gx = ca * ox + sa * oy + cx;
            const double gy = -sa * ox + ca * oy + cy;
            double best = 1e30;
            for (int s = 0; s < 7; ++s)
                if (mask & (1u << s))
                    best = std::min(best, dist_to_segment(gx, gy, kSegments[s]));
            const double v = 255.0 * std::clamp(1.0 - (best - stroke + 1.0), 0.0, 1.0);
            out[r * 28 + c] = static_cast<std::uint8_t>(std::lround(v));
        }
}

DigitSet generate_digits(std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    DigitSet set;
    set.images.rows = 28;
    set.images.cols = 28;
    set.images.pixels.resize(count * 784);
    set.labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto digit = static_cast<std::uint8_t>(i % 10);
        const double angle = rng.uniform(-0.15, 0.15);
        const double scale = rng.uniform(0.85, 1.1);
        const double dx = rng.uniform(-1.5, 1.5);
        const double dy = rng.uniform(-1.5, 1.5);
        std::uint8_t* img = set.images.pixels.data() + i * 784;
        render_digit(digit, img, angle, scale, dx, dy);
        // roughen the stroke a little without touching the background
        for (std::size_t p = 0; p < 784; ++p)
            if (img[p] > 0)
                img[p] = static_cast<std::uint8_t>(
                    std::max(1.0, img[p] * rng.uniform(0.75, 1.0)));
        set.labels[i] = digit;
    }
    return set;
}

} // namespace convpoint
