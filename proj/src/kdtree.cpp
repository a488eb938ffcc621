#include "convpoint/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace convpoint {

namespace {

double dist2(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double t = a[i] - b[i];
        s += t * t;
    }
    return s;
}

} // namespace

KdTree::KdTree(const double* positions, std::size_t count, std::size_t dim,
               std::size_t leaf_size)
    : pts_(positions), count_(count), dim_(dim), leaf_size_(leaf_size) {
    if (count == 0) throw DimensionError("KdTree: empty point set");
    order_.resize(count);
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(2 * count / leaf_size + 2);
    build(0, static_cast<std::uint32_t>(count));
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    if (end - begin <= leaf_size_) {
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        return id;
    }
    // split along the axis of largest extent
    std::uint32_t axis = 0;
    double best_spread = -1.0;
    for (std::size_t a = 0; a < dim_; ++a) {
        double lo = pts_[order_[begin] * dim_ + a], hi = lo;
        for (std::uint32_t i = begin + 1; i < end; ++i) {
            const double v = pts_[order_[i] * dim_ + a];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo > best_spread) {
            best_spread = hi - lo;
            axis = static_cast<std::uint32_t>(a);
        }
    }
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         const double va = pts_[a * dim_ + axis];
                         const double vb = pts_[b * dim_ + axis];
                         return va < vb || (va == vb && a < b);
                     });
    const double split = pts_[order_[mid] * dim_ + axis];
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void KdTree::search(std::int32_t node, const double* query, std::size_t k,
                    std::vector<std::pair<double, std::uint32_t>>& heap) const {
    const Node& nd = nodes_[node];
    if (nd.leaf()) {
        for (std::uint32_t i = nd.begin; i < nd.end; ++i) {
            const std::uint32_t idx = order_[i];
            const std::pair<double, std::uint32_t> cand{dist2(query, pts_ + idx * dim_, dim_), idx};
            if (heap.size() < k) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end());
            } else if (cand < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end());
            }
        }
        return;
    }
    const double delta = query[nd.axis] - nd.split;
    const std::int32_t near = delta < 0.0 ? nd.left : nd.right;
    const std::int32_t far = delta < 0.0 ? nd.right : nd.left;
    search(near, query, k, heap);
    // descend the far side on equality so distance ties resolve by index
    if (heap.size() < k || delta * delta <= heap.front().first)
        search(far, query, k, heap);
}

std::vector<std::uint32_t> KdTree::knn(const double* query, std::size_t k) const {
    if (k == 0) throw DimensionError("knn: k must be >= 1");
    const std::size_t kk = std::min(k, count_);
    std::vector<std::pair<double, std::uint32_t>> heap;
    heap.reserve(kk);
    search(0, query, kk, heap);
    std::sort(heap.begin(), heap.end());
    std::vector<std::uint32_t> out;
    out.reserve(k);
    for (const auto& e : heap) out.push_back(e.second);
    // cyclic padding when k exceeds the point count
    for (std::size_t i = kk; i < k; ++i) out.push_back(out[i % kk]);
    return out;
}

} // namespace convpoint
