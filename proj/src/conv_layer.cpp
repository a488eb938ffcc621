#include "convpoint/conv_layer.hpp"

#include <cmath>

#include "convpoint/errors.hpp"
#include "convpoint/kernels.hpp"

namespace convpoint {

ConvKernel::ConvKernel(std::size_t k, std::size_t n, std::size_t c, std::size_t d, Rng& rng)
    : kernel_size(k), in_features(n), out_channels(c), dim(d) {
    // kernel element positions: uniform in the unit ball (rejection)
    Tensor pos({k, d});
    for (std::size_t i = 0; i < k; ++i) {
        double norm2;
        do {
            norm2 = 0.0;
            for (std::size_t dd = 0; dd < d; ++dd) {
                const double x = rng.uniform(-1.0, 1.0);
                pos.v[i * d + dd] = x;
                norm2 += x * x;
            }
        } while (norm2 > 1.0);
    }
    positions = Parameter(std::move(pos));
    const double bound = std::sqrt(6.0 / static_cast<double>(k * n + c));
    weights = Parameter(Tensor::uniform({k, n, c}, -bound, bound, rng));
    bias = Parameter(Tensor::zeros({c}));
}

namespace {

// relcoords[j, i*d + dd] = u[j, dd] - c[i, dd]
Tensor relative_coords(const std::vector<double>& normalized, std::size_t npts,
                       const ConvKernel& kernel) {
    const std::size_t K = kernel.kernel_size, d = kernel.dim;
    Tensor rel({npts, K * d});
    const double* c = kernel.positions.value.data();
    for (std::size_t j = 0; j < npts; ++j)
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t dd = 0; dd < d; ++dd)
                rel.v[(j * K + i) * d + dd] = normalized[j * d + dd] - c[i * d + dd];
    return rel;
}

std::vector<double> normalized_or_centered(const double* positions, std::size_t npts,
                                           std::size_t d, const double* center,
                                           bool normalize) {
    if (normalize) return normalize_to_unit_ball(positions, npts, d, center);
    std::vector<double> out(npts * d);
    for (std::size_t j = 0; j < npts; ++j)
        for (std::size_t dd = 0; dd < d; ++dd)
            out[j * d + dd] = positions[j * d + dd] - center[dd];
    return out;
}

std::vector<double> combine(const Tensor& phi, const double* features,
                            std::size_t npts, const ConvKernel& kernel,
                            Tensor* agg_out) {
    const std::size_t K = kernel.kernel_size, n = kernel.in_features, C = kernel.out_channels;
    Tensor agg({K, n});
    for (std::size_t j = 0; j < npts; ++j)
        for (std::size_t i = 0; i < K; ++i)
            kern::axpy(phi.v[j * K + i], features + j * n, agg.data() + i * n, n);
    std::vector<double> y(C, 0.0);
    kern::matmul(agg.data(), kernel.weights.value.data(), y.data(), 1, K * n, C);
    const double inv = 1.0 / static_cast<double>(npts);
    for (std::size_t t = 0; t < C; ++t)
        y[t] = kernel.bias.value.v[t] + inv * y[t];
    if (agg_out) *agg_out = std::move(agg);
    return y;
}

} // namespace

std::vector<double> conv_forward(const double* positions, const double* features,
                                 std::size_t npts, const double* center,
                                 const ConvKernel& kernel, const WeightingNetwork& net,
                                 ConvCache* cache, ConvOptions opts) {
    if (npts == 0) throw DimensionError("conv_forward: empty neighborhood");
    const auto norm = normalized_or_centered(positions, npts, kernel.dim, center, opts.normalize);
    Tensor rel = relative_coords(norm, npts, kernel);
    Tensor phi = net.forward(rel, cache ? &cache->mlp : nullptr);
    auto y = combine(phi, features, npts, kernel, cache ? &cache->agg : nullptr);
    if (cache) {
        cache->npts = npts;
        cache->relcoords = std::move(rel);
        cache->features = Tensor({npts, kernel.in_features});
        std::copy(features, features + npts * kernel.in_features, cache->features.v.begin());
        cache->phi = std::move(phi);
    }
    return y;
}

std::vector<double> conv_forward_with(const double* positions, const double* features,
                                      std::size_t npts, const double* center,
                                      const ConvKernel& kernel,
                                      const WeightingFunction& weighting,
                                      ConvOptions opts) {
    if (npts == 0) throw DimensionError("conv_forward: empty neighborhood");
    const auto norm = normalized_or_centered(positions, npts, kernel.dim, center, opts.normalize);
    const Tensor rel = relative_coords(norm, npts, kernel);
    const Tensor phi = weighting.evaluate(rel);
    return combine(phi, features, npts, kernel, nullptr);
}

Tensor conv_backward(const double* upstream, ConvKernel& kernel,
                     WeightingNetwork& net, const ConvCache& cache) {
    const std::size_t K = kernel.kernel_size, n = kernel.in_features,
                      C = kernel.out_channels, d = kernel.dim;
    const std::size_t npts = cache.npts;
    if (npts == 0) throw DimensionError("conv_backward: missing forward cache");
    const double inv = 1.0 / static_cast<double>(npts);

    kern::axpy(1.0, upstream, kernel.bias.grad.data(), C);

    // dW[i,f,:] += inv * agg[i,f] * g ; dagg[i,f] = inv * dot(W[i,f,:], g)
    Tensor dagg({K, n});
    kern::matmul_nt(kernel.weights.value.data(), upstream, dagg.data(), K * n, C, 1);
    kern::scale(inv, dagg.data(), K * n);
    for (std::size_t r = 0; r < K * n; ++r)
        kern::axpy(inv * cache.agg.v[r], upstream, kernel.weights.grad.data() + r * C, C);

    // dphi[j,i] = dot(x_j, dagg_i) ; dx[j,:] += phi[j,i] * dagg_i
    Tensor dphi({npts, K});
    Tensor dx({npts, n});
    for (std::size_t j = 0; j < npts; ++j) {
        const double* xj = cache.features.data() + j * n;
        for (std::size_t i = 0; i < K; ++i) {
            const double* ai = dagg.data() + i * n;
            dphi.v[j * K + i] = kern::dot(xj, ai, n);
            kern::axpy(cache.phi.v[j * K + i], ai, dx.data() + j * n, n);
        }
    }

    // through the MLP into the relative coordinates, then into {c}
    const Tensor drel = net.backward(cache.mlp, dphi);
    double* dc = kernel.positions.grad.data();
    for (std::size_t j = 0; j < npts; ++j)
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t dd = 0; dd < d; ++dd)
                dc[i * d + dd] -= drel.v[(j * K + i) * d + dd];
    return dx;
}

std::vector<double> discrete_conv_oracle(const double* positions, const double* features,
                                         std::size_t npts, const ConvKernel& kernel) {
    const std::size_t K = kernel.kernel_size, n = kernel.in_features,
                      C = kernel.out_channels, d = kernel.dim;
    std::vector<double> y(kernel.bias.value.v.begin(), kernel.bias.value.v.end());
    for (std::size_t j = 0; j < npts; ++j)
        for (std::size_t i = 0; i < K; ++i) {
            bool match = true;
            for (std::size_t dd = 0; dd < d; ++dd)
                if (kernel.positions.value.v[i * d + dd] != positions[j * d + dd]) {
                    match = false;
                    break;
                }
            if (!match) continue;
            for (std::size_t f = 0; f < n; ++f)
                for (std::size_t t = 0; t < C; ++t)
                    y[t] += kernel.weights.value.v[(i * n + f) * C + t] * features[j * n + f];
        }
    return y;
}

ConvPointLayer::ConvPointLayer(LayerSpec s, std::size_t dim, std::size_t in_features, Rng& rng)
    : spec(s),
      kernel(s.kernel_size, in_features, s.channels, dim, rng),
      mlp(s.kernel_size, dim, rng) {
    // Without this rescaling the 1/|X| averaging and the small weighting
    // responses shrink activations several-fold per layer, which stalls
    // training. Estimate E[phi^2] on synthetic neighborhoods and scale the
    // feature weights so a layer's output variance matches its input's.
    const std::size_t K = s.kernel_size, probes = 64;
    Tensor rel({probes, K * dim});
    const double* c = kernel.positions.value.data();
    for (std::size_t p = 0; p < probes; ++p) {
        double u[3], norm2;
        do {
            norm2 = 0.0;
            for (std::size_t dd = 0; dd < dim; ++dd) {
                u[dd] = rng.uniform(-1.0, 1.0);
                norm2 += u[dd] * u[dd];
            }
        } while (norm2 > 1.0);
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t dd = 0; dd < dim; ++dd)
                rel.v[p * K * dim + i * dim + dd] = u[dd] - c[i * dim + dd];
    }
    const Tensor phi = mlp.forward(rel, nullptr);
    const double e2 = kern::dot(phi.data(), phi.data(), phi.size()) /
                      static_cast<double>(phi.size());
    if (e2 > 0.0) {
        // The 0.35 damping accounts for correlation between neighboring
        // points, which the independence estimate below ignores.
        const double target_var = 0.35 * static_cast<double>(s.neighbors) /
                                  (static_cast<double>(K * in_features) * e2);
        const double cur_var = 2.0 / static_cast<double>(K * in_features + s.channels);
        kern::scale(std::sqrt(target_var / cur_var), kernel.weights.value.data(),
                    kernel.weights.value.size());
    }
}

Points ConvPointLayer::apply(const Points& input, const Tensor* explicit_q, Rng& rng,
                             ConvLayerCache* cache) const {
    const std::size_t npts = input.size();
    if (npts == 0) throw DimensionError("conv_layer_apply: empty input");
    const std::size_t d = kernel.dim;
    if (input.features.shape[1] != kernel.in_features)
        throw DimensionError("conv_layer_apply: input feature width mismatch");

    const KdTree tree(input.positions.data(), npts, d);

    Points out;
    if (explicit_q) {
        out.positions = *explicit_q;
    } else if (spec.q_same) {
        out.positions = input.positions;
    } else {
        const auto picks = sample_output_points(input.positions.data(), npts, d, tree,
                                                spec.q_size, spec.neighbors, rng);
        out.positions = Tensor({picks.size(), d});
        for (std::size_t i = 0; i < picks.size(); ++i)
            std::copy(input.positions.data() + picks[i] * d,
                      input.positions.data() + (picks[i] + 1) * d,
                      out.positions.data() + i * d);
    }

    const std::size_t q_count = out.positions.shape[0];
    out.features = Tensor({q_count, spec.channels});
    if (cache) {
        cache->neighbors.assign(q_count, {});
        cache->conv.assign(q_count, {});
    }

    std::vector<double> nb_pos(spec.neighbors * d);
    std::vector<double> nb_feat(spec.neighbors * kernel.in_features);
    for (std::size_t qi = 0; qi < q_count; ++qi) {
        const double* center = out.positions.data() + qi * d;
        auto nbrs = tree.knn(center, spec.neighbors);
        for (std::size_t j = 0; j < nbrs.size(); ++j) {
            std::copy(input.positions.data() + nbrs[j] * d,
                      input.positions.data() + (nbrs[j] + 1) * d, nb_pos.begin() + j * d);
            std::copy(input.features.data() + nbrs[j] * kernel.in_features,
                      input.features.data() + (nbrs[j] + 1) * kernel.in_features,
                      nb_feat.begin() + j * kernel.in_features);
        }
        const auto y = conv_forward(nb_pos.data(), nb_feat.data(), nbrs.size(), center,
                                    kernel, mlp, cache ? &cache->conv[qi] : nullptr);
        std::copy(y.begin(), y.end(), out.features.data() + qi * spec.channels);
        if (cache) cache->neighbors[qi] = std::move(nbrs);
    }
    return out;
}

Tensor ConvPointLayer::backward(const Points& input, const ConvLayerCache& cache,
                                const Tensor& upstream) {
    const std::size_t q_count = cache.conv.size();
    if (upstream.shape.size() != 2 || upstream.shape[0] != q_count ||
        upstream.shape[1] != spec.channels)
        throw DimensionError("ConvPointLayer::backward: upstream shape mismatch");
    Tensor dfeat({input.size(), kernel.in_features});
    for (std::size_t qi = 0; qi < q_count; ++qi) {
        const Tensor dx = conv_backward(upstream.data() + qi * spec.channels,
                                        kernel, mlp, cache.conv[qi]);
        const auto& nbrs = cache.neighbors[qi];
        for (std::size_t j = 0; j < nbrs.size(); ++j)
            kern::axpy(1.0, dx.data() + j * kernel.in_features,
                       dfeat.data() + nbrs[j] * kernel.in_features, kernel.in_features);
    }
    return dfeat;
}

std::vector<Parameter*> ConvPointLayer::params() {
    auto out = kernel.params();
    for (Parameter* p : mlp.params()) out.push_back(p);
    return out;
}

} // namespace convpoint
