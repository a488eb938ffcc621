#pragma once

#include <cstdint>
#include <vector>

#include "convpoint/kdtree.hpp"
#include "convpoint/pointcloud.hpp"
#include "convpoint/rng.hpp"

namespace convpoint {

// Score-based output-point selection. Every point starts at score 0 and
// unselected; each iteration picks uniformly among the unselected points of
// minimal score (or among all minimal-score points once everything has been
// selected), then bumps the pick by 100 and its k nearest neighbors by 1.
std::vector<std::uint32_t> sample_output_points(const double* positions,
                                                std::size_t count, std::size_t dim,
                                                const KdTree& tree,
                                                std::size_t m, std::size_t k,
                                                Rng& rng);

inline std::vector<std::uint32_t> sample_output_points(const PointCloud& cloud,
                                                       const KdTree& tree,
                                                       std::size_t m, std::size_t k,
                                                       Rng& rng) {
    return sample_output_points(cloud.positions.data(), cloud.size(), cloud.dim,
                                tree, m, k, rng);
}

// Center a neighborhood on `center` and scale so the farthest point has
// norm 1. A fully degenerate neighborhood (all points at the center) maps
// to all zeros.
std::vector<double> normalize_to_unit_ball(const double* positions,
                                           std::size_t count, std::size_t dim,
                                           const double* center);

} // namespace convpoint
