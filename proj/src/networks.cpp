#include "convpoint/networks.hpp"

#include <cmath>

#include "convpoint/errors.hpp"
#include "convpoint/kernels.hpp"

namespace convpoint {

namespace {

Parameter glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return Parameter(Tensor::uniform({fan_in, fan_out}, -bound, bound, rng));
}

} // namespace

Tensor concat_features(const Tensor& a, const Tensor& b) {
    if (a.shape[0] != b.shape[0])
        throw DimensionError("concat_features: row counts disagree");
    const std::size_t rows = a.shape[0], ca = a.shape[1], cb = b.shape[1];
    Tensor out({rows, ca + cb});
    for (std::size_t i = 0; i < rows; ++i) {
        std::copy(a.data() + i * ca, a.data() + (i + 1) * ca, out.data() + i * (ca + cb));
        std::copy(b.data() + i * cb, b.data() + (i + 1) * cb, out.data() + i * (ca + cb) + ca);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

std::vector<ClassificationConfig::Stage> default_classification_ladder() {
    return {{64, 512, 32}, {128, 128, 32}, {256, 32, 16}, {256, 8, 16}, {512, 1, 8}};
}

ClassificationNet::ClassificationNet(ClassificationConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    if (cfg_.ladder.empty()) cfg_.ladder = default_classification_ladder();
    if (cfg_.ladder.back().q_size != 1)
        throw ConfigError("classification ladder must end at a single point");
    std::size_t in_features = cfg_.input_features;
    for (const auto& st : cfg_.ladder) {
        LayerSpec spec{st.channels, st.q_size, cfg_.kernel_size, st.neighbors, false};
        layers.emplace_back(spec, cfg_.dim, in_features, rng);
        in_features = st.channels;
    }
    fc_w = glorot(in_features, cfg_.num_classes, rng);
    fc_b = Parameter(Tensor::zeros({cfg_.num_classes}));
}

Tensor ClassificationNet::forward(const Points& input, Rng& rng, Cache* cache) const {
    Points cur = input;
    if (cache) {
        cache->stages.clear();
        cache->preact.clear();
        cache->convs.assign(layers.size(), {});
        cache->stages.push_back(cur);
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Points out = layers[i].apply(cur, nullptr, rng, cache ? &cache->convs[i] : nullptr);
        Tensor pre = std::move(out.features);
        out.features = relu_forward(pre);
        if (cache) {
            cache->preact.push_back(std::move(pre));
            cache->stages.push_back(out);
        }
        cur = std::move(out);
    }
    return affine_forward(cur.features, fc_w, fc_b);
}

void ClassificationNet::backward(Cache& cache, const Tensor& dlogits) {
    Tensor d = affine_backward(cache.stages.back().features, fc_w, fc_b, dlogits);
    for (std::size_t i = layers.size(); i-- > 0;) {
        Tensor dpre = relu_backward(cache.preact[i], d);
        d = layers[i].backward(cache.stages[i], cache.convs[i], dpre);
    }
}

std::vector<Parameter*> ClassificationNet::params() {
    std::vector<Parameter*> out;
    for (auto& l : layers)
        for (Parameter* p : l.params()) out.push_back(p);
    out.push_back(&fc_w);
    out.push_back(&fc_b);
    return out;
}

ClassificationNet build_classification_net(std::size_t num_classes,
                                           std::size_t input_feature_dim, Rng& rng,
                                           std::size_t dim,
                                           std::vector<ClassificationConfig::Stage> ladder,
                                           std::size_t kernel_size) {
    ClassificationConfig cfg;
    cfg.dim = dim;
    cfg.input_features = input_feature_dim;
    cfg.num_classes = num_classes;
    cfg.kernel_size = kernel_size;
    cfg.ladder = std::move(ladder);
    return ClassificationNet(std::move(cfg), rng);
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

SegmentationConfig make_segmentation_config(std::size_t num_classes,
                                            std::size_t input_feature_dim,
                                            bool large, std::size_t dim) {
    SegmentationConfig cfg;
    cfg.dim = dim;
    cfg.input_features = input_feature_dim;
    cfg.num_classes = num_classes;
    cfg.large = large;
    // encoder ladder (C, |Q|, k); the decoder mirrors the recorded encoder
    // stages, the last decoder convolution landing back on the input points.
    std::vector<SegmentationConfig::Encoder> core = {
        {64, 2048, 16, false}, {64, 1024, 16, false}, {64, 256, 16, false},
        {128, 64, 8, false},   {128, 16, 8, false},   {128, 8, 4, false},
    };
    if (large) {
        cfg.encoder.push_back({64, 0, 16, true});       // conv0: |Q| = |P|
        cfg.encoder.push_back({64, 2048, 16, false});   // conv1
    }
    for (const auto& e : core) cfg.encoder.push_back(e);
    const std::size_t off = large ? 2 : 0;  // stage index shift from the added convs
    cfg.decoder = {
        {128, 4, off + 5}, {128, 4, off + 4}, {64, 4, off + 3}, {64, 4, off + 2},
    };
    if (large) {
        cfg.decoder.push_back({64, 8, 2});  // back to conv1's output
        cfg.decoder.push_back({64, 8, 0});  // deconv0: back to the input points
    } else {
        cfg.decoder.push_back({64, 8, 0});
    }
    return cfg;
}

SegmentationNet::SegmentationNet(SegmentationConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    std::size_t in_features = cfg_.input_features;
    std::vector<std::size_t> stage_width{in_features};
    for (const auto& e : cfg_.encoder) {
        LayerSpec spec{e.channels, e.q_size, cfg_.kernel_size, e.neighbors, e.q_same};
        encoder.emplace_back(spec, cfg_.dim, in_features, rng);
        in_features = e.channels;
        stage_width.push_back(e.channels);
    }
    // decoder input widths: previous decoder output concatenated with the
    // encoder features at the stage it currently sits on
    std::size_t dec_in = stage_width.back();
    for (std::size_t j = 0; j < cfg_.decoder.size(); ++j) {
        const auto& dspec = cfg_.decoder[j];
        LayerSpec spec{dspec.channels, 0, cfg_.kernel_size, dspec.neighbors, false};
        decoder.emplace_back(spec, cfg_.dim, dec_in, rng);
        dec_in = dspec.channels + stage_width[dspec.target_stage];
    }
    lin_w = glorot(cfg_.decoder.back().channels, cfg_.num_classes, rng);
    lin_b = Parameter(Tensor::zeros({cfg_.num_classes}));
}

Tensor SegmentationNet::forward(const Points& input, Rng& rng, bool training,
                                Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.enc_stages.clear();
    c.enc_preact.clear();
    c.enc_convs.assign(encoder.size(), {});
    c.dec_inputs.clear();
    c.dec_preact.clear();
    c.dec_convs.assign(decoder.size(), {});

    std::size_t deepest_q = 1;
    for (const auto& e : cfg_.encoder)
        if (!e.q_same) deepest_q = e.q_size;
    if (input.size() < deepest_q)
        throw DimensionError("segmentation forward: fewer input points than the deepest stage");

    c.enc_stages.push_back(input);
    Points cur = input;
    for (std::size_t i = 0; i < encoder.size(); ++i) {
        Points out = encoder[i].apply(cur, nullptr, rng, &c.enc_convs[i]);
        Tensor pre = std::move(out.features);
        out.features = relu_forward(pre);
        c.enc_preact.push_back(std::move(pre));
        c.enc_stages.push_back(out);
        cur = std::move(out);
    }

    for (std::size_t j = 0; j < decoder.size(); ++j) {
        const std::size_t target = cfg_.decoder[j].target_stage;
        c.dec_inputs.push_back(cur);
        Points out = decoder[j].apply(cur, &c.enc_stages[target].positions, rng, &c.dec_convs[j]);
        Tensor pre = std::move(out.features);
        Tensor post = relu_forward(pre);
        c.dec_preact.push_back(std::move(pre));
        if (j + 1 < decoder.size()) {
            cur.positions = c.enc_stages[target].positions;
            cur.features = concat_features(post, c.enc_stages[target].features);
        } else {
            cur.positions = std::move(out.positions);
            cur.features = std::move(post);
        }
    }

    c.tap = cur.features;
    auto drop = dropout_forward(cur.features, cfg_.dropout_p, training, rng);
    c.dropout_mask = std::move(drop.mask);
    c.lin_in = std::move(drop.y);
    return affine_forward(c.lin_in, lin_w, lin_b);
}

void SegmentationNet::backward(Cache& cache, const Tensor& dlogits) {
    Tensor d = affine_backward(cache.lin_in, lin_w, lin_b, dlogits);
    d = dropout_backward(cache.dropout_mask, d);

    std::vector<Tensor> denc(cache.enc_stages.size());
    auto add_into = [](Tensor& acc, const Tensor& t, const Tensor& shape_like) {
        if (acc.size() == 0) acc = Tensor(shape_like.shape);
        kern::axpy(1.0, t.data(), acc.data(), t.size());
    };

    for (std::size_t j = decoder.size(); j-- > 0;) {
        Tensor dpre = relu_backward(cache.dec_preact[j], d);
        Tensor dinp = decoder[j].backward(cache.dec_inputs[j], cache.dec_convs[j], dpre);
        if (j > 0) {
            // split the concatenated input gradient
            const std::size_t prev_target = cfg_.decoder[j - 1].target_stage;
            const std::size_t cdec = cfg_.decoder[j - 1].channels;
            const std::size_t cenc = cache.enc_stages[prev_target].features.shape[1];
            const std::size_t rows = dinp.shape[0];
            Tensor ddec({rows, cdec});
            Tensor dskip({rows, cenc});
            for (std::size_t r = 0; r < rows; ++r) {
                std::copy(dinp.data() + r * (cdec + cenc), dinp.data() + r * (cdec + cenc) + cdec,
                          ddec.data() + r * cdec);
                std::copy(dinp.data() + r * (cdec + cenc) + cdec,
                          dinp.data() + (r + 1) * (cdec + cenc), dskip.data() + r * cenc);
            }
            add_into(denc[prev_target], dskip, cache.enc_stages[prev_target].features);
            d = std::move(ddec);
        } else {
            add_into(denc.back(), dinp, cache.enc_stages.back().features);
        }
    }

    for (std::size_t i = encoder.size(); i-- > 0;) {
        if (denc[i + 1].size() == 0) continue;
        Tensor dpre = relu_backward(cache.enc_preact[i], denc[i + 1]);
        Tensor dinp = encoder[i].backward(cache.enc_stages[i], cache.enc_convs[i], dpre);
        if (i > 0) add_into(denc[i], dinp, cache.enc_stages[i].features);
    }
}

std::vector<Parameter*> SegmentationNet::params() {
    std::vector<Parameter*> out;
    for (auto& l : encoder)
        for (Parameter* p : l.params()) out.push_back(p);
    for (auto& l : decoder)
        for (Parameter* p : l.params()) out.push_back(p);
    out.push_back(&lin_w);
    out.push_back(&lin_b);
    return out;
}

SegmentationNet build_segmentation_net(std::size_t num_classes,
                                       std::size_t input_feature_dim, bool large,
                                       Rng& rng, std::size_t dim) {
    return SegmentationNet(
        make_segmentation_config(num_classes, input_feature_dim, large, dim), rng);
}

// ---------------------------------------------------------------------------
// Fusion
// ---------------------------------------------------------------------------

FusionNet::FusionNet(SegmentationNet a, SegmentationNet b, std::size_t classes, Rng& rng)
    : net_a(std::move(a)), net_b(std::move(b)), num_classes(classes) {
    if (net_a.config().num_classes != net_b.config().num_classes ||
        net_a.config().dim != net_b.config().dim)
        throw ConfigError("fusion: base networks disagree on classes or dimension");
    const std::size_t dim = net_a.config().dim;
    const std::size_t in = net_a.tap_width() + net_b.tap_width();
    const LayerSpec s1{96, 0, 16, 8, true};
    const LayerSpec s2{96, 0, 16, 8, true};
    conv1 = ConvPointLayer(s1, dim, in, rng);
    conv2 = ConvPointLayer(s2, dim, 96, rng);
    lin_w = glorot(96, classes, rng);
    lin_b = Parameter(Tensor::zeros({classes}));
    for (Parameter* p : frozen_base_params()) p->trainable = false;
}

Tensor FusionNet::forward(const Points& input, Rng& rng, bool training, Cache* cache) const {
    // base networks run frozen, in eval mode
    SegmentationNet::Cache ca, cb;
    const Tensor out_a = net_a.forward(input, rng, false, &ca);
    const Tensor out_b = net_b.forward(input, rng, false, &cb);

    Cache local;
    Cache& c = cache ? *cache : local;
    c.conv1_in.positions = input.positions;
    c.conv1_in.features = concat_features(ca.tap, cb.tap);
    Points o1 = conv1.apply(c.conv1_in, nullptr, rng, &c.conv1_cache);
    c.pre1 = std::move(o1.features);
    c.post1 = relu_forward(c.pre1);
    c.conv2_in.positions = input.positions;
    c.conv2_in.features = c.post1;
    Points o2 = conv2.apply(c.conv2_in, nullptr, rng, &c.conv2_cache);
    c.pre2 = std::move(o2.features);
    c.post2 = relu_forward(c.pre2);
    auto drop = dropout_forward(c.post2, dropout_p, training, rng);
    c.dropout_mask = std::move(drop.mask);
    c.lin_in = std::move(drop.y);
    Tensor residual = affine_forward(c.lin_in, lin_w, lin_b);

    Tensor out = out_a;
    kern::axpy(1.0, out_b.data(), out.data(), out.size());
    kern::axpy(1.0, residual.data(), out.data(), out.size());
    return out;
}

void FusionNet::backward(Cache& cache, const Tensor& dlogits) {
    Tensor d = affine_backward(cache.lin_in, lin_w, lin_b, dlogits);
    d = dropout_backward(cache.dropout_mask, d);
    Tensor dpre2 = relu_backward(cache.pre2, d);
    Tensor d1 = conv2.backward(cache.conv2_in, cache.conv2_cache, dpre2);
    Tensor dpre1 = relu_backward(cache.pre1, d1);
    conv1.backward(cache.conv1_in, cache.conv1_cache, dpre1);
    // base networks are frozen; their gradient paths end here
}

std::vector<Parameter*> FusionNet::params() {
    std::vector<Parameter*> out;
    for (Parameter* p : conv1.params()) out.push_back(p);
    for (Parameter* p : conv2.params()) out.push_back(p);
    out.push_back(&lin_w);
    out.push_back(&lin_b);
    return out;
}

std::vector<Parameter*> FusionNet::frozen_base_params() {
    std::vector<Parameter*> out;
    for (Parameter* p : net_a.params()) out.push_back(p);
    for (Parameter* p : net_b.params()) out.push_back(p);
    return out;
}

FusionNet build_fusion(SegmentationNet a, SegmentationNet b,
                       std::size_t num_classes, Rng& rng) {
    return FusionNet(std::move(a), std::move(b), num_classes, rng);
}

} // namespace convpoint
