#pragma once

#include <cstdint>
#include <vector>

#include "convpoint/errors.hpp"

namespace convpoint {

// Exact k-NN index over |P| x d positions (Euclidean distance).
// Ties are broken by ascending point index; when k > |P| the sorted
// neighbor list is repeated cyclically so queries always return k indices.
class KdTree {
public:
    KdTree(const double* positions, std::size_t count, std::size_t dim,
           std::size_t leaf_size = 16);

    std::vector<std::uint32_t> knn(const double* query, std::size_t k) const;

    std::size_t size() const { return count_; }
    std::size_t dim() const { return dim_; }

private:
    struct Node {
        std::uint32_t begin = 0, end = 0;  // leaf range into order_
        std::int32_t left = -1, right = -1;
        std::uint32_t axis = 0;
        double split = 0.0;
        bool leaf() const { return left < 0; }
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end);
    void search(std::int32_t node, const double* query, std::size_t k,
                std::vector<std::pair<double, std::uint32_t>>& heap) const;

    const double* pts_;
    std::size_t count_, dim_, leaf_size_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

} // namespace convpoint
