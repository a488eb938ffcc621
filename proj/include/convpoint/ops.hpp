#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "convpoint/rng.hpp"
#include "convpoint/tensor.hpp"

namespace convpoint {

// y[i,j] = sum_k x[i,k] * W[k,j] + b[j]
Tensor affine_forward(const Tensor& x, const Parameter& W, const Parameter& b);

// Accumulates dW, db into the parameters' grads; returns dx.
Tensor affine_backward(const Tensor& x, Parameter& W, Parameter& b, const Tensor& dy);

Tensor relu_forward(const Tensor& x);
// dx = dy where x > 0, else 0 (subgradient at 0 is 0).
Tensor relu_backward(const Tensor& x, const Tensor& dy);

// Inverted dropout: training mode zeroes each element with probability p and
// scales survivors by 1/(1-p); eval mode is the identity. The mask (scale
// factor per element) is returned for the backward pass.
struct DropoutResult {
    Tensor y;
    Tensor mask;
};
DropoutResult dropout_forward(const Tensor& x, double p, bool training, Rng& rng);
Tensor dropout_backward(const Tensor& mask, const Tensor& dy);

// Mean over the batch of -log softmax(logits)[target]; grad has the shape of
// logits and equals (softmax - onehot) / B.
struct CrossEntropyResult {
    double loss;
    Tensor grad;
};
CrossEntropyResult softmax_cross_entropy(const Tensor& logits,
                                         const std::vector<std::uint32_t>& targets);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-parameter first/second moment state with bias correction.
class AdamState {
public:
    explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

    // Applies one Adam update to every trainable parameter. Gradients are
    // left untouched; the caller zeroes them.
    void step(const std::vector<Parameter*>& params);

    std::uint64_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::uint64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

// Central finite-difference check of analytic gradients stored in the
// parameters' grads. Returns max over coordinates of
// |analytic - central| / max(1, |central|).
double finite_diff_check(const std::function<double()>& f,
                         const std::vector<Parameter*>& params,
                         double eps = 1e-5);

} // namespace convpoint
