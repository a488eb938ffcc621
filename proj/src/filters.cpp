#include "convpoint/filters.hpp"

#include <cstdio>
#include <fstream>

#include "convpoint/errors.hpp"
#include "convpoint/kernels.hpp"

namespace convpoint {

namespace {

double grid_coord(std::size_t i, std::size_t r) {
    return -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(r - 1);
}

} // namespace

Tensor weighting_response_grid(const ConvKernel& kernel, const WeightingNetwork& net,
                               std::size_t resolution) {
    if (kernel.dim != 2)
        throw DimensionError("weighting_response_grid: only 2-D kernels can be rendered");
    if (resolution < 2)
        throw DimensionError("weighting_response_grid: resolution must be >= 2");
    const std::size_t R = resolution, K = kernel.kernel_size;
    Tensor rel({R * R, K * 2});
    const double* c = kernel.positions.value.data();
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t col = 0; col < R; ++col) {
            const double x = grid_coord(col, R), y = grid_coord(r, R);
            double* row = rel.data() + (r * R + col) * K * 2;
            for (std::size_t i = 0; i < K; ++i) {
                row[i * 2] = x - c[i * 2];
                row[i * 2 + 1] = y - c[i * 2 + 1];
            }
        }
    return net.forward(rel, nullptr);
}

Tensor composed_filter_grid(const ConvKernel& kernel, const Tensor& response) {
    const std::size_t K = kernel.kernel_size, n = kernel.in_features,
                      C = kernel.out_channels;
    if (response.shape.size() != 2 || response.shape[1] != K)
        throw DimensionError("composed_filter_grid: response shape mismatch");
    const std::size_t rows = response.shape[0];
    Tensor out({rows, n * C});
    for (std::size_t g = 0; g < rows; ++g)
        for (std::size_t i = 0; i < K; ++i)
            kern::axpy(response.v[g * K + i], kernel.weights.value.data() + i * n * C,
                       out.data() + g * n * C, n * C);
    return out;
}

void dump_filters_csv(const std::string& response_path, const std::string& composed_path,
                      const ConvKernel& kernel, const WeightingNetwork& net,
                      std::size_t resolution) {
    const Tensor response = weighting_response_grid(kernel, net, resolution);
    const Tensor composed = composed_filter_grid(kernel, response);
    const std::size_t R = resolution;

    const auto write = [&](const std::string& path, const Tensor& grid,
                           const std::string& prefix) {
        std::ofstream out(path);
        if (!out) throw IoError("cannot open " + path + " for writing");
        out << "x,y";
        for (std::size_t j = 0; j < grid.shape[1]; ++j) out << "," << prefix << j;
        out << "\n";
        char buf[32];
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t col = 0; col < R; ++col) {
                std::snprintf(buf, sizeof buf, "%.17g", grid_coord(col, R));
                out << buf;
                std::snprintf(buf, sizeof buf, "%.17g", grid_coord(r, R));
                out << "," << buf;
                const double* row = grid.data() + (r * R + col) * grid.shape[1];
                for (std::size_t j = 0; j < grid.shape[1]; ++j) {
                    std::snprintf(buf, sizeof buf, "%.17g", row[j]);
                    out << "," << buf;
                }
                out << "\n";
            }
        if (!out) throw IoError("write failed: " + path);
    };
    write(response_path, response, "phi");
    write(composed_path, composed, "w");
}

} // namespace convpoint
