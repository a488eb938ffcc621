#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "convpoint/pointcloud.hpp"
#include "convpoint/sampling.hpp"
#include "convpoint/tensor.hpp"
#include "convpoint/weighting.hpp"

namespace convpoint {

// Kernel of a ConvPoint layer: |K| learnable positions shared by all output
// channels, per-channel feature weights, and a bias.
struct ConvKernel {
    std::size_t kernel_size = 0, in_features = 0, out_channels = 0, dim = 0;
    Parameter positions;  // K x d, initialized inside the unit ball
    Parameter weights;    // K x n x C
    Parameter bias;       // C

    ConvKernel() = default;
    ConvKernel(std::size_t k, std::size_t n, std::size_t c, std::size_t d, Rng& rng);

    std::vector<Parameter*> params() { return {&positions, &weights, &bias}; }
};

struct ConvCache {
    std::size_t npts = 0;
    Tensor relcoords;  // npts x K*d
    Tensor phi;        // npts x K
    Tensor features;   // npts x n
    Tensor agg;        // K x n, agg[i,f] = sum_j phi[j,i] * x[j,f]
    WeightingCache mlp;
};

struct ConvOptions {
    bool normalize = true;  // unit-ball normalization about the center
};

// One evaluation of the point-set convolution on a neighborhood:
//   y_t = beta_t + (1/|X|) sum_j sum_i sum_f w[i,f,t] * x[j,f] * phi[j,i]
// with neighborhood positions unit-ball normalized about `center` first.
std::vector<double> conv_forward(const double* positions, const double* features,
                                 std::size_t npts, const double* center,
                                 const ConvKernel& kernel, const WeightingNetwork& net,
                                 ConvCache* cache, ConvOptions opts = {});

// Same computation with an arbitrary weighting function (forward only).
std::vector<double> conv_forward_with(const double* positions, const double* features,
                                      std::size_t npts, const double* center,
                                      const ConvKernel& kernel,
                                      const WeightingFunction& weighting,
                                      ConvOptions opts = {});

// Reverse-mode gradients of conv_forward: accumulates into the kernel and
// weighting-network parameters and returns the input-feature gradient
// (npts x n).
Tensor conv_backward(const double* upstream, ConvKernel& kernel,
                     WeightingNetwork& net, const ConvCache& cache);

// Discrete convolution on grid-coincident kernel/input positions:
//   y_t = beta_t + sum_j sum_i sum_f w[i,f,t] * x[j,f] * 1(c_i == p_j)
std::vector<double> discrete_conv_oracle(const double* positions, const double* features,
                                         std::size_t npts, const ConvKernel& kernel);

// Layer configuration: output channels, output point count (or q = p when
// q_same), kernel elements, neighborhood size.
struct LayerSpec {
    std::size_t channels = 0;
    std::size_t q_size = 0;
    std::size_t kernel_size = 0;
    std::size_t neighbors = 0;
    bool q_same = false;
};

struct Points {
    Tensor positions;  // N x d
    Tensor features;   // N x n
    std::size_t size() const { return positions.shape.empty() ? 0 : positions.shape[0]; }
};

struct ConvLayerCache {
    std::vector<std::vector<std::uint32_t>> neighbors;  // per output point
    std::vector<ConvCache> conv;
};

// A full layer: output-point selection, kd-tree neighborhoods, and the
// convolution at every output point.
class ConvPointLayer {
public:
    ConvPointLayer() = default;
    ConvPointLayer(LayerSpec spec, std::size_t dim, std::size_t in_features, Rng& rng);

    // Output positions come from explicit_q when given, from the input when
    // q_same, and from the score-based sampler otherwise.
    Points apply(const Points& input, const Tensor* explicit_q, Rng& rng,
                 ConvLayerCache* cache) const;

    // upstream: |Q| x C. Accumulates parameter grads; returns the gradient
    // w.r.t. the input features (|P| x n).
    Tensor backward(const Points& input, const ConvLayerCache& cache,
                    const Tensor& upstream);

    std::vector<Parameter*> params();

    LayerSpec spec;
    ConvKernel kernel;
    WeightingNetwork mlp;
};

} // namespace convpoint
