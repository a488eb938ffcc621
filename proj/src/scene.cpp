#include "convpoint/scene.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "convpoint/errors.hpp"
#include "convpoint/kdtree.hpp"

namespace convpoint {

SceneColumn extract_column(const PointCloud& scene, double cx, double cy, double width) {
    if (scene.dim < 2) throw DimensionError("extract_column: scene must be at least 2-D");
    if (width <= 0.0) throw DimensionError("extract_column: width must be positive");
    const double half = width / 2.0;
    SceneColumn col;
    col.cloud.dim = scene.dim;
    col.cloud.fdim = scene.fdim;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const double x = scene.positions[i * scene.dim];
        const double y = scene.positions[i * scene.dim + 1];
        if (std::abs(x - cx) > half || std::abs(y - cy) > half) continue;
        col.indices.push_back(static_cast<std::uint32_t>(i));
        col.cloud.positions.insert(col.cloud.positions.end(),
                                   scene.positions.begin() + i * scene.dim,
                                   scene.positions.begin() + (i + 1) * scene.dim);
        col.cloud.features.insert(col.cloud.features.end(),
                                  scene.features.begin() + i * scene.fdim,
                                  scene.features.begin() + (i + 1) * scene.fdim);
    }
    return col;
}

std::vector<std::array<double, 2>> occupancy_grid_centers(const PointCloud& scene,
                                                          double pixel_size) {
    if (scene.dim < 2) throw DimensionError("occupancy_grid_centers: scene must be at least 2-D");
    if (pixel_size <= 0.0) throw DimensionError("occupancy_grid_centers: pixel size must be positive");
    std::set<std::pair<std::int64_t, std::int64_t>> cells;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const auto ix = static_cast<std::int64_t>(
            std::floor(scene.positions[i * scene.dim] / pixel_size));
        const auto iy = static_cast<std::int64_t>(
            std::floor(scene.positions[i * scene.dim + 1] / pixel_size));
        cells.emplace(ix, iy);
    }
    std::vector<std::array<double, 2>> centers;
    centers.reserve(cells.size());
    for (const auto& [ix, iy] : cells)
        centers.push_back({(static_cast<double>(ix) + 0.5) * pixel_size,
                           (static_cast<double>(iy) + 0.5) * pixel_size});
    return centers;
}

std::vector<std::uint32_t> propagate_labels_nn(const double* labeled_positions,
                                               const std::uint32_t* labels,
                                               std::size_t labeled_count,
                                               const PointCloud& cloud) {
    if (labeled_count == 0)
        throw DimensionError("propagate_labels_nn: no labeled positions");
    const KdTree tree(labeled_positions, labeled_count, cloud.dim);
    std::vector<std::uint32_t> out(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto nn = tree.knn(cloud.positions.data() + i * cloud.dim, 1);
        out[i] = labels[nn[0]];
    }
    return out;
}

} // namespace convpoint
