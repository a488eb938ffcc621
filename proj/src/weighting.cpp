#include "convpoint/weighting.hpp"

#include <cmath>

#include "convpoint/errors.hpp"

namespace convpoint {

namespace {

Parameter glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return Parameter(Tensor::uniform({fan_in, fan_out}, -bound, bound, rng));
}

} // namespace

WeightingNetwork::WeightingNetwork(std::size_t kernel_size, std::size_t dim, Rng& rng)
    : kernel_size_(kernel_size), dim_(dim) {
    const std::size_t in = kernel_size * dim;
    const std::size_t h1 = 2 * kernel_size;
    const std::size_t h2 = kernel_size;
    w1 = glorot(in, h1, rng);
    b1 = Parameter(Tensor::zeros({h1}));
    w2 = glorot(h1, h2, rng);
    b2 = Parameter(Tensor::zeros({h2}));
    w3 = glorot(h2, kernel_size, rng);
    b3 = Parameter(Tensor::zeros({kernel_size}));
}

Tensor WeightingNetwork::forward(const Tensor& relcoords, WeightingCache* cache) const {
    if (relcoords.shape.size() != 2 || relcoords.shape[1] != kernel_size_ * dim_)
        throw DimensionError("WeightingNetwork: bad input width");
    Tensor z1 = affine_forward(relcoords, w1, b1);
    Tensor a1 = relu_forward(z1);
    Tensor z2 = affine_forward(a1, w2, b2);
    Tensor a2 = relu_forward(z2);
    Tensor phi = affine_forward(a2, w3, b3);
    if (cache) {
        cache->input = relcoords;
        cache->z1 = std::move(z1);
        cache->a1 = std::move(a1);
        cache->z2 = std::move(z2);
        cache->a2 = std::move(a2);
    }
    return phi;
}

Tensor WeightingNetwork::backward(const WeightingCache& cache, const Tensor& dphi) {
    Tensor da2 = affine_backward(cache.a2, w3, b3, dphi);
    Tensor dz2 = relu_backward(cache.z2, da2);
    Tensor da1 = affine_backward(cache.a1, w2, b2, dz2);
    Tensor dz1 = relu_backward(cache.z1, da1);
    return affine_backward(cache.input, w1, b1, dz1);
}

std::vector<Parameter*> WeightingNetwork::params() {
    return {&w1, &b1, &w2, &b2, &w3, &b3};
}

Tensor IndicatorWeighting::evaluate(const Tensor& relcoords) const {
    const std::size_t npts = relcoords.shape[0];
    Tensor phi({npts, kernel_size_});
    for (std::size_t j = 0; j < npts; ++j)
        for (std::size_t i = 0; i < kernel_size_; ++i) {
            bool match = true;
            for (std::size_t dd = 0; dd < dim_; ++dd)
                if (relcoords.v[j * kernel_size_ * dim_ + i * dim_ + dd] != 0.0) {
                    match = false;
                    break;
                }
            phi.v[j * kernel_size_ + i] = match ? 1.0 : 0.0;
        }
    return phi;
}

} // namespace convpoint
