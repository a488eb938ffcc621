#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "convpoint/pointcloud.hpp"

namespace convpoint {

// All points whose horizontal coordinates fall inside the axis-aligned square
// of side `width` centered at (cx, cy); the vertical extent is unbounded.
// `indices` maps rows of `cloud` back to rows of the scene.
struct SceneColumn {
    PointCloud cloud;
    std::vector<std::uint32_t> indices;
};
SceneColumn extract_column(const PointCloud& scene, double cx, double cy, double width);

// Centers of the occupied cells of a horizontal grid with the given pixel
// size, sorted by (ix, iy) for determinism.
std::vector<std::array<double, 2>> occupancy_grid_centers(const PointCloud& scene,
                                                          double pixel_size);

// Assign each point of `cloud` the label of its nearest labeled position.
std::vector<std::uint32_t> propagate_labels_nn(const double* labeled_positions,
                                               const std::uint32_t* labels,
                                               std::size_t labeled_count,
                                               const PointCloud& cloud);

} // namespace convpoint
