#include "convpoint/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "convpoint/errors.hpp"

namespace convpoint {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("truncated idx file: " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

} // namespace

IdxImages load_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    if (read_u32_be(in, path) != kIdxImagesMagic)
        throw IoError("bad idx image magic in " + path);
    const std::uint32_t count = read_u32_be(in, path);
    IdxImages images;
    images.rows = read_u32_be(in, path);
    images.cols = read_u32_be(in, path);
    if (images.rows == 0 || images.cols == 0)
        throw IoError("bad idx image dimensions in " + path);
    images.pixels.resize(std::size_t(count) * images.rows * images.cols);
    in.read(reinterpret_cast<char*>(images.pixels.data()),
            static_cast<std::streamsize>(images.pixels.size()));
    if (!in) throw IoError("truncated idx file: " + path);
    return images;
}

std::vector<std::uint8_t> load_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    if (read_u32_be(in, path) != kIdxLabelsMagic)
        throw IoError("bad idx label magic in " + path);
    const std::uint32_t count = read_u32_be(in, path);
    std::vector<std::uint8_t> labels(count);
    in.read(reinterpret_cast<char*>(labels.data()), count);
    if (!in) throw IoError("truncated idx file: " + path);
    return labels;
}

void save_idx_images(const std::string& path, const IdxImages& images) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_u32_be(out, kIdxImagesMagic);
    write_u32_be(out, static_cast<std::uint32_t>(images.count()));
    write_u32_be(out, static_cast<std::uint32_t>(images.rows));
    write_u32_be(out, static_cast<std::uint32_t>(images.cols));
    out.write(reinterpret_cast<const char*>(images.pixels.data()),
              static_cast<std::streamsize>(images.pixels.size()));
    if (!out) throw IoError("write failed: " + path);
}

void save_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_u32_be(out, kIdxLabelsMagic);
    write_u32_be(out, static_cast<std::uint32_t>(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
    if (!out) throw IoError("write failed: " + path);
}

PointCloud mnist_to_pointcloud(const std::uint8_t* image, std::size_t rows,
                               std::size_t cols, MnistMode mode) {
    const double sx = 1.0 / static_cast<double>(cols - 1);
    const double sy = 1.0 / static_cast<double>(rows - 1);
    PointCloud cloud;
    cloud.dim = 2;
    cloud.fdim = 1;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const std::uint8_t px = image[r * cols + c];
            if (mode == MnistMode::BlackPoints && px == 0) continue;
            cloud.positions.push_back(static_cast<double>(c) * sx);
            cloud.positions.push_back(static_cast<double>(r) * sy);
            cloud.features.push_back(mode == MnistMode::GrayLevels
                                         ? static_cast<double>(px) / 255.0
                                         : 1.0);
        }
    if (cloud.size() == 0)
        throw DimensionError("mnist_to_pointcloud: image has no usable points");
    return cloud;
}

Dataset make_mnist_dataset(const IdxImages& images, const std::vector<std::uint8_t>& labels,
                           MnistMode mode, std::size_t max_count) {
    if (images.count() != labels.size())
        throw IoError("image/label count mismatch");
    Dataset ds;
    ds.num_classes = 10;
    ds.dim = 2;
    ds.feature_dim = 1;
    const std::size_t stride = images.rows * images.cols;
    std::size_t limit = images.count();
    if (max_count && max_count < limit) limit = max_count;
    ds.samples.reserve(limit);
    for (std::size_t i = 0; i < limit; ++i) {
        const std::uint8_t* img = images.pixels.data() + i * stride;
        if (mode == MnistMode::BlackPoints) {
            const bool blank = std::all_of(img, img + stride,
                                           [](std::uint8_t p) { return p == 0; });
            if (blank) continue;
        }
        Sample s;
        s.cloud = mnist_to_pointcloud(img, images.rows, images.cols, mode);
        s.label = labels[i];
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

SelectedCloud fixed_size_select(const PointCloud& cloud, std::size_t s, Rng& rng) {
    const std::size_t n = cloud.size();
    if (n == 0) throw DimensionError("fixed_size_select: empty cloud");
    if (s == 0) throw DimensionError("fixed_size_select: s must be >= 1");

    SelectedCloud out;
    out.index_map.reserve(s);
    std::vector<std::uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    while (out.index_map.size() < s) {
        // fresh shuffle per round so short clouds repeat as evenly as possible
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(perm[i], perm[rng.below(i + 1)]);
        const std::size_t take = std::min(n, s - out.index_map.size());
        out.index_map.insert(out.index_map.end(), perm.begin(), perm.begin() + take);
    }

    out.cloud.dim = cloud.dim;
    out.cloud.fdim = cloud.fdim;
    out.cloud.positions.resize(s * cloud.dim);
    out.cloud.features.resize(s * cloud.fdim);
    for (std::size_t i = 0; i < s; ++i) {
        const std::uint32_t src = out.index_map[i];
        std::copy(cloud.positions.begin() + src * cloud.dim,
                  cloud.positions.begin() + (src + 1) * cloud.dim,
                  out.cloud.positions.begin() + i * cloud.dim);
        std::copy(cloud.features.begin() + src * cloud.fdim,
                  cloud.features.begin() + (src + 1) * cloud.fdim,
                  out.cloud.features.begin() + i * cloud.fdim);
    }
    return out;
}

} // namespace convpoint
