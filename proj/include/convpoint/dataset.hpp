#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "convpoint/pointcloud.hpp"
#include "convpoint/rng.hpp"

namespace convpoint {

struct Sample {
    PointCloud cloud;
    std::uint32_t label = 0;                  // classification
    std::vector<std::uint32_t> point_labels;  // segmentation
};

struct Dataset {
    std::vector<Sample> samples;
    std::size_t num_classes = 0;
    std::size_t dim = 2;
    std::size_t feature_dim = 1;
};

// Standard IDX files (big-endian magic 0x00000803 / 0x00000801).
struct IdxImages {
    std::size_t rows = 0, cols = 0;
    std::vector<std::uint8_t> pixels;  // count * rows * cols
    std::size_t count() const { return rows * cols ? pixels.size() / (rows * cols) : 0; }
};
IdxImages load_idx_images(const std::string& path);
std::vector<std::uint8_t> load_idx_labels(const std::string& path);
void save_idx_images(const std::string& path, const IdxImages& images);
void save_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

enum class MnistMode { GrayLevels, BlackPoints };

// gray_levels: all 784 pixels become points with the gray value as feature;
// black_points: one all-ones-feature point per pixel with intensity > 0.
// Pixel coordinates are scaled to [0,1]^2.
PointCloud mnist_to_pointcloud(const std::uint8_t* image, std::size_t rows,
                               std::size_t cols, MnistMode mode);

// Blank images (no usable points in black_points mode) are skipped.
Dataset make_mnist_dataset(const IdxImages& images, const std::vector<std::uint8_t>& labels,
                           MnistMode mode, std::size_t max_count = 0);

// Exactly s points: without replacement when |P| >= s, otherwise whole
// permutations are concatenated so duplication stays as even as possible.
// index_map[i] is the source row in the original cloud.
struct SelectedCloud {
    PointCloud cloud;
    std::vector<std::uint32_t> index_map;
};
SelectedCloud fixed_size_select(const PointCloud& cloud, std::size_t s, Rng& rng);

} // namespace convpoint
