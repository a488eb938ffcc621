#pragma once

#include <cstdint>
#include <vector>

#include "convpoint/conv_layer.hpp"
#include "convpoint/ops.hpp"

namespace convpoint {

// ---------------------------------------------------------------------------
// Classification network: a ladder of convolutions reducing the cloud to a
// single point, followed by a fully connected layer.
// ---------------------------------------------------------------------------

struct ClassificationConfig {
    struct Stage {
        std::size_t channels, q_size, neighbors;
    };
    std::size_t dim = 3;
    std::size_t input_features = 1;
    std::size_t num_classes = 0;
    std::size_t kernel_size = 16;
    std::vector<Stage> ladder;  // empty -> default five-stage ladder
};

// Default five-stage reduction ending at a single point.
std::vector<ClassificationConfig::Stage> default_classification_ladder();

class ClassificationNet {
public:
    ClassificationNet() = default;
    ClassificationNet(ClassificationConfig cfg, Rng& rng);

    struct Cache {
        std::vector<Points> stages;  // stages[0] = input, then post-ReLU outputs
        std::vector<Tensor> preact;
        std::vector<ConvLayerCache> convs;
    };

    // Returns logits of shape 1 x num_classes.
    Tensor forward(const Points& input, Rng& rng, Cache* cache = nullptr) const;
    void backward(Cache& cache, const Tensor& dlogits);

    std::vector<Parameter*> params();
    const ClassificationConfig& config() const { return cfg_; }

    std::vector<ConvPointLayer> layers;
    Parameter fc_w, fc_b;

private:
    ClassificationConfig cfg_;
};

ClassificationNet build_classification_net(std::size_t num_classes,
                                           std::size_t input_feature_dim, Rng& rng,
                                           std::size_t dim = 3,
                                           std::vector<ClassificationConfig::Stage> ladder = {},
                                           std::size_t kernel_size = 16);

// ---------------------------------------------------------------------------
// Segmentation network: encoder ladder, mirrored decoder reusing encoder
// positions (skip connections concatenate encoder features), dropout and a
// point-wise linear head emitting one logit row per input point.
// ---------------------------------------------------------------------------

struct SegmentationConfig {
    struct Encoder {
        std::size_t channels, q_size, neighbors;
        bool q_same = false;
    };
    struct Decoder {
        std::size_t channels, neighbors;
        std::size_t target_stage;  // index into recorded stages; 0 = input
    };
    std::size_t dim = 3;
    std::size_t input_features = 1;
    std::size_t num_classes = 0;
    std::size_t kernel_size = 16;
    bool large = false;
    double dropout_p = 0.5;
    std::vector<Encoder> encoder;
    std::vector<Decoder> decoder;
};

SegmentationConfig make_segmentation_config(std::size_t num_classes,
                                            std::size_t input_feature_dim,
                                            bool large, std::size_t dim = 3);

class SegmentationNet {
public:
    SegmentationNet() = default;
    SegmentationNet(SegmentationConfig cfg, Rng& rng);

    struct Cache {
        std::vector<Points> enc_stages;  // [0] = input
        std::vector<Tensor> enc_preact;
        std::vector<ConvLayerCache> enc_convs;
        std::vector<Points> dec_inputs;  // post-concatenation decoder inputs
        std::vector<Tensor> dec_preact;
        std::vector<ConvLayerCache> dec_convs;
        Tensor tap;  // features before dropout + linear head (|P| x C)
        Tensor dropout_mask;
        Tensor lin_in;
    };

    // Returns per-point logits, |P| x num_classes, one row per input point.
    Tensor forward(const Points& input, Rng& rng, bool training, Cache* cache = nullptr) const;
    void backward(Cache& cache, const Tensor& dlogits);

    std::vector<Parameter*> params();
    const SegmentationConfig& config() const { return cfg_; }
    std::size_t conv_layer_count() const { return encoder.size() + decoder.size(); }
    std::size_t tap_width() const { return cfg_.decoder.back().channels; }

    std::vector<ConvPointLayer> encoder;
    std::vector<ConvPointLayer> decoder;
    Parameter lin_w, lin_b;

private:
    SegmentationConfig cfg_;
};

SegmentationNet build_segmentation_net(std::size_t num_classes,
                                       std::size_t input_feature_dim, bool large,
                                       Rng& rng, std::size_t dim = 3);

// ---------------------------------------------------------------------------
// Residual fusion of two segmentation networks: the concatenation of both
// nets' pre-head features feeds two convolutions and a point-wise linear;
// the result is added to the sum of the two base outputs. Base networks
// stay frozen; only the residual branch trains.
// ---------------------------------------------------------------------------

class FusionNet {
public:
    FusionNet() = default;
    FusionNet(SegmentationNet a, SegmentationNet b, std::size_t num_classes, Rng& rng);

    struct Cache {
        Points conv1_in;
        Tensor pre1, post1;
        Points conv2_in;
        Tensor pre2, post2;
        ConvLayerCache conv1_cache, conv2_cache;
        Tensor dropout_mask;
        Tensor lin_in;
    };

    Tensor forward(const Points& input, Rng& rng, bool training, Cache* cache = nullptr) const;
    // Residual branch only; base networks receive no gradient.
    void backward(Cache& cache, const Tensor& dlogits);

    std::vector<Parameter*> params();             // trainable (residual branch)
    std::vector<Parameter*> frozen_base_params(); // base networks

    SegmentationNet net_a, net_b;
    ConvPointLayer conv1, conv2;
    Parameter lin_w, lin_b;
    double dropout_p = 0.5;
    std::size_t num_classes = 0;
};

FusionNet build_fusion(SegmentationNet a, SegmentationNet b,
                       std::size_t num_classes, Rng& rng);

// Concatenate feature tensors column-wise (equal row counts).
Tensor concat_features(const Tensor& a, const Tensor& b);

} // namespace convpoint
