#include "convpoint/ops.hpp"

#include <algorithm>
#include <cmath>

#include "convpoint/errors.hpp"
#include "convpoint/kernels.hpp"

namespace convpoint {

Tensor affine_forward(const Tensor& x, const Parameter& W, const Parameter& b) {
    if (x.shape.size() != 2 || W.value.shape.size() != 2 || b.value.shape.size() != 1)
        throw DimensionError("affine_forward: expected x[BxM], W[MxH], b[H]");
    const std::size_t B = x.shape[0], M = x.shape[1];
    const std::size_t H = W.value.shape[1];
    if (W.value.shape[0] != M || b.value.shape[0] != H)
        throw DimensionError("affine_forward: inner dimensions disagree");
    Tensor y({B, H});
    for (std::size_t i = 0; i < B; ++i)
        std::copy(b.value.v.begin(), b.value.v.end(), y.v.begin() + i * H);
    kern::matmul(x.data(), W.value.data(), y.data(), B, M, H);
    return y;
}

Tensor affine_backward(const Tensor& x, Parameter& W, Parameter& b, const Tensor& dy) {
    const std::size_t B = x.shape[0], M = x.shape[1], H = W.value.shape[1];
    if (dy.shape.size() != 2 || dy.shape[0] != B || dy.shape[1] != H)
        throw DimensionError("affine_backward: dy shape mismatch");
    // dW += x^T dy ; db += colsum(dy) ; dx = dy W^T
    kern::matmul_tn(x.data(), dy.data(), W.grad.data(), M, B, H);
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < H; ++j) b.grad.v[j] += dy.v[i * H + j];
    Tensor dx({B, M});
    kern::matmul_nt(dy.data(), W.value.data(), dx.data(), B, H, M);
    return dx;
}

Tensor relu_forward(const Tensor& x) {
    Tensor y(x.shape);
    kern::relu(x.data(), y.data(), x.size());
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    Tensor dx(x.shape);
    kern::relu_grad(x.data(), dy.data(), dx.data(), x.size());
    return dx;
}

DropoutResult dropout_forward(const Tensor& x, double p, bool training, Rng& rng) {
    if (p < 0.0 || p >= 1.0)
        throw ConfigError("dropout: probability must satisfy 0 <= p < 1");
    DropoutResult r;
    if (!training || p == 0.0) {
        r.y = x;
        r.mask = Tensor::filled(x.shape, 1.0);
        return r;
    }
    const double keep_scale = 1.0 / (1.0 - p);
    r.y = Tensor(x.shape);
    r.mask = Tensor(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double m = rng.uniform() < p ? 0.0 : keep_scale;
        r.mask.v[i] = m;
        r.y.v[i] = m * x.v[i];
    }
    return r;
}

Tensor dropout_backward(const Tensor& mask, const Tensor& dy) {
    Tensor dx(dy.shape);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.v[i] = mask.v[i] * dy.v[i];
    return dx;
}

CrossEntropyResult softmax_cross_entropy(const Tensor& logits,
                                         const std::vector<std::uint32_t>& targets) {
    if (logits.shape.size() != 2)
        throw DimensionError("softmax_cross_entropy: logits must be BxC");
    const std::size_t B = logits.shape[0], C = logits.shape[1];
    if (targets.size() != B)
        throw DimensionError("softmax_cross_entropy: target count mismatch");
    CrossEntropyResult r;
    r.grad = Tensor({B, C});
    double loss = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        if (targets[i] >= C)
            throw IndexError("softmax_cross_entropy: target out of range");
        const double* row = logits.data() + i * C;
        const double mx = *std::max_element(row, row + C);
        double denom = 0.0;
        for (std::size_t j = 0; j < C; ++j) denom += std::exp(row[j] - mx);
        const double log_denom = std::log(denom);
        loss += log_denom - (row[targets[i]] - mx);
        double* grow = r.grad.data() + i * C;
        for (std::size_t j = 0; j < C; ++j)
            grow[j] = std::exp(row[j] - mx) / denom / static_cast<double>(B);
        grow[targets[i]] -= 1.0 / static_cast<double>(B);
    }
    r.loss = loss / static_cast<double>(B);
    if (!std::isfinite(r.loss))
        throw NumericError("softmax_cross_entropy: non-finite loss");
    return r;
}

void AdamState::step(const std::vector<Parameter*>& params) {
    if (m_.empty()) {
        for (const Parameter* p : params) {
            m_.push_back(Tensor::zeros(p->value.shape));
            v_.push_back(Tensor::zeros(p->value.shape));
        }
    }
    if (m_.size() != params.size())
        throw DimensionError("AdamState: parameter list changed size");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        if (!p.trainable) continue;
        if (!p.value.same_shape(m_[i]))
            throw DimensionError("AdamState: moment shape mismatch");
        kern::adam(p.value.data(), p.grad.data(), m_[i].data(), v_[i].data(),
                   p.size(), cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.eps, bc1, bc2);
    }
}

double finite_diff_check(const std::function<double()>& f,
                         const std::vector<Parameter*>& params,
                         double eps) {
    double worst = 0.0;
    for (Parameter* p : params) {
        for (std::size_t i = 0; i < p->size(); ++i) {
            const double orig = p->value.v[i];
            p->value.v[i] = orig + eps;
            const double fp = f();
            p->value.v[i] = orig - eps;
            const double fm = f();
            p->value.v[i] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw NumericError("finite_diff_check: non-finite function value");
            const double central = (fp - fm) / (2.0 * eps);
            const double rel = std::abs(p->grad.v[i] - central) /
                               std::max(1.0, std::abs(central));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

} // namespace convpoint
