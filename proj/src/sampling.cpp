#include "convpoint/sampling.hpp"

#include <cmath>
#include <limits>

namespace convpoint {

std::vector<std::uint32_t> sample_output_points(const double* positions,
                                                std::size_t count, std::size_t dim,
                                                const KdTree& tree,
                                                std::size_t m, std::size_t k,
                                                Rng& rng) {
    const std::size_t n = count;
    if (n == 0) throw DimensionError("sample_output_points: empty cloud");
    if (m == 0) throw DimensionError("sample_output_points: m must be >= 1");
    std::vector<std::int64_t> score(n, 0);
    std::vector<char> selected(n, 0);
    std::size_t num_selected = 0;
    std::vector<std::uint32_t> picks;
    picks.reserve(m);

    for (std::size_t iter = 0; iter < m; ++iter) {
        const bool pool_all = num_selected == n;
        std::int64_t min_score = std::numeric_limits<std::int64_t>::max();
        std::size_t candidates = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!pool_all && selected[i]) continue;
            if (score[i] < min_score) {
                min_score = score[i];
                candidates = 1;
            } else if (score[i] == min_score) {
                ++candidates;
            }
        }
        std::size_t nth = rng.below(candidates);
        std::uint32_t pick = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!pool_all && selected[i]) continue;
            if (score[i] == min_score) {
                if (nth == 0) {
                    pick = static_cast<std::uint32_t>(i);
                    break;
                }
                --nth;
            }
        }
        if (!selected[pick]) {
            selected[pick] = 1;
            ++num_selected;
        }
        score[pick] += 100;
        for (std::uint32_t nb : tree.knn(positions + pick * dim, std::min(k, n)))
            score[nb] += 1;
        picks.push_back(pick);
    }
    return picks;
}

std::vector<double> normalize_to_unit_ball(const double* positions,
                                           std::size_t count, std::size_t dim,
                                           const double* center) {
    std::vector<double> out(count * dim);
    double max_norm2 = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        double n2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double r = positions[i * dim + j] - center[j];
            out[i * dim + j] = r;
            n2 += r * r;
        }
        max_norm2 = std::max(max_norm2, n2);
    }
    if (max_norm2 == 0.0) return out;  // already all zeros
    const double inv = 1.0 / std::sqrt(max_norm2);
    for (double& x : out) x *= inv;
    return out;
}

} // namespace convpoint
