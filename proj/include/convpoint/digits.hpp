#pragma once

#include <cstdint>
#include <vector>

#include "convpoint/dataset.hpp"
#include "convpoint/rng.hpp"

namespace convpoint {

// Synthetic 28x28 grayscale digit images rendered from seven-segment glyphs
// with random rotation, scale, translation and stroke noise. Labels cycle
// through 0..9 so classes stay balanced.
struct DigitSet {
    IdxImages images;
    std::vector<std::uint8_t> labels;
};

DigitSet generate_digits(std::size_t count, std::uint64_t seed);

// Render one digit without jitter (used as a reference in tests).
void render_digit(std::uint8_t digit, std::uint8_t* out28x28,
                  double angle = 0.0, double scale = 1.0,
                  double dx = 0.0, double dy = 0.0);

} // namespace convpoint
