#pragma once

#include <vector>

#include "convpoint/ops.hpp"
#include "convpoint/tensor.hpp"

namespace convpoint {

// Geometric weighting function: maps each point's relative coordinates to
// all kernel elements (a flattened |K| x d row) to |K| scalar weights.
class WeightingFunction {
public:
    virtual ~WeightingFunction() = default;
    virtual std::size_t kernel_size() const = 0;
    // relcoords: npts x (|K|*d)  ->  npts x |K|
    virtual Tensor evaluate(const Tensor& relcoords) const = 0;
};

struct WeightingCache {
    Tensor input;    // npts x K*d
    Tensor z1, a1;   // hidden pre/post activations
    Tensor z2, a2;
};

// The learned weighting function: affine layers K*d -> 2K -> K -> K with
// ReLU after the first two and identity output. Each input row is mapped
// independently, which is what makes the convolution permutation equivariant.
class WeightingNetwork : public WeightingFunction {
public:
    WeightingNetwork() = default;
    WeightingNetwork(std::size_t kernel_size, std::size_t dim, Rng& rng);

    std::size_t kernel_size() const override { return kernel_size_; }
    std::size_t dim() const { return dim_; }

    Tensor forward(const Tensor& relcoords, WeightingCache* cache) const;
    Tensor evaluate(const Tensor& relcoords) const override {
        return forward(relcoords, nullptr);
    }

    // Accumulates parameter grads; returns the gradient w.r.t. the input
    // relative coordinates (npts x K*d).
    Tensor backward(const WeightingCache& cache, const Tensor& dphi);

    std::vector<Parameter*> params();

    Parameter w1, b1, w2, b2, w3, b3;

private:
    std::size_t kernel_size_ = 0, dim_ = 0;
};

// Exact-match weighting: phi[j,i] = 1 iff point j coincides with kernel
// element i. Plugging this in recovers the discrete convolution.
class IndicatorWeighting : public WeightingFunction {
public:
    explicit IndicatorWeighting(std::size_t kernel_size, std::size_t dim)
        : kernel_size_(kernel_size), dim_(dim) {}

    std::size_t kernel_size() const override { return kernel_size_; }
    Tensor evaluate(const Tensor& relcoords) const override;

private:
    std::size_t kernel_size_, dim_;
};

} // namespace convpoint
