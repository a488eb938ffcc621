#include "convpoint/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "convpoint/errors.hpp"
#include "convpoint/kernels.hpp"
#include "convpoint/scene.hpp"

namespace convpoint {

namespace {

std::uint32_t argmax_row(const double* row, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (row[i] > row[best]) best = i;
    return static_cast<std::uint32_t>(best);
}

void shuffle_order(std::vector<std::size_t>& order, Rng& rng) {
    for (std::size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[rng.below(i + 1)]);
}

void zero_grads(const std::vector<Parameter*>& params) {
    for (Parameter* p : params) p->zero_grad();
}

void log_epoch(const TrainConfig& cfg, const EpochStats& st) {
    if (cfg.log)
        *cfg.log << st.epoch << "," << st.mean_loss << "," << st.train_oa << "\n";
}

// Shared minibatch loop; `step` runs forward+backward for one sample with the
// given loss scale and reports (loss, correct, total) contributions.
struct SampleResult {
    double loss;
    std::size_t correct;
    std::size_t total;
};

template <typename StepFn>
std::vector<EpochStats> run_epochs(const std::vector<Parameter*>& params,
                                   std::size_t sample_count, const TrainConfig& cfg,
                                   Rng& rng, StepFn&& step) {
    if (sample_count == 0) throw DimensionError("train: empty dataset");
    if (cfg.batch_size == 0) throw ConfigError("train: batch size must be >= 1");
    AdamState adam(cfg.adam);
    std::vector<std::size_t> order(sample_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<EpochStats> stats;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_order(order, rng);
        double loss_sum = 0.0;
        std::size_t correct = 0, total = 0;
        for (std::size_t start = 0; start < sample_count; start += cfg.batch_size) {
            const std::size_t b = std::min(cfg.batch_size, sample_count - start);
            zero_grads(params);
            for (std::size_t j = 0; j < b; ++j) {
                const SampleResult r = step(order[start + j], 1.0 / static_cast<double>(b));
                if (!std::isfinite(r.loss))
                    throw NumericError("train: loss diverged");
                loss_sum += r.loss;
                correct += r.correct;
                total += r.total;
            }
            adam.step(params);
        }
        EpochStats st{epoch + 1, loss_sum / static_cast<double>(sample_count),
                      static_cast<double>(correct) / static_cast<double>(total)};
        log_epoch(cfg, st);
        stats.push_back(st);
    }
    return stats;
}

} // namespace

Points cloud_to_points(const PointCloud& cloud) {
    Points p;
    p.positions = Tensor({cloud.size(), cloud.dim});
    std::copy(cloud.positions.begin(), cloud.positions.end(), p.positions.v.begin());
    p.features = Tensor({cloud.size(), cloud.fdim});
    std::copy(cloud.features.begin(), cloud.features.end(), p.features.v.begin());
    return p;
}

Metrics metrics_from_confusion(const std::vector<std::uint64_t>& confusion,
                               std::size_t num_classes) {
    const std::size_t C = num_classes;
    if (confusion.size() != C * C)
        throw DimensionError("metrics_from_confusion: confusion matrix size mismatch");
    Metrics m;
    m.confusion = confusion;
    m.per_class_iou.assign(C, std::numeric_limits<double>::quiet_NaN());
    std::uint64_t trace = 0, total = 0;
    double recall_sum = 0.0, iou_sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < C; ++c) {
        const std::uint64_t tp = confusion[c * C + c];
        std::uint64_t row = 0, col = 0;
        for (std::size_t j = 0; j < C; ++j) {
            row += confusion[c * C + j];
            col += confusion[j * C + c];
        }
        trace += tp;
        total += row;
        if (row == 0) continue;  // class absent from the ground truth
        ++present;
        recall_sum += static_cast<double>(tp) / static_cast<double>(row);
        const std::uint64_t denom = row + col - tp;
        const double iou = denom ? static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
        m.per_class_iou[c] = iou;
        iou_sum += iou;
    }
    if (total == 0) throw DimensionError("metrics_from_confusion: empty confusion matrix");
    m.oa = static_cast<double>(trace) / static_cast<double>(total);
    m.aa = recall_sum / static_cast<double>(present);
    m.miou = iou_sum / static_cast<double>(present);
    return m;
}

std::vector<EpochStats> train_classification(ClassificationNet& net, const Dataset& data,
                                             const TrainConfig& cfg) {
    Rng rng(cfg.seed);
    const auto params = net.params();
    return run_epochs(params, data.samples.size(), cfg, rng,
                      [&](std::size_t idx, double scale) {
        const Sample& sample = data.samples[idx];
        const auto sel = fixed_size_select(sample.cloud, cfg.input_points, rng);
        const Points p = cloud_to_points(sel.cloud);
        ClassificationNet::Cache cache;
        const Tensor logits = net.forward(p, rng, &cache);
        auto ce = softmax_cross_entropy(logits, {sample.label});
        kern::scale(scale, ce.grad.data(), ce.grad.size());
        net.backward(cache, ce.grad);
        const bool hit = argmax_row(logits.data(), logits.shape[1]) == sample.label;
        return SampleResult{ce.loss, hit ? std::size_t{1} : std::size_t{0}, 1};
    });
}

namespace {

template <typename Net, typename Cache>
SampleResult segmentation_step(Net& net, const Sample& sample, const TrainConfig& cfg,
                               Rng& rng, double scale) {
    const auto sel = fixed_size_select(sample.cloud, cfg.input_points, rng);
    const Points p = cloud_to_points(sel.cloud);
    std::vector<std::uint32_t> targets(sel.index_map.size());
    for (std::size_t i = 0; i < targets.size(); ++i)
        targets[i] = sample.point_labels[sel.index_map[i]];
    Cache cache;
    const Tensor logits = net.forward(p, rng, true, &cache);
    auto ce = softmax_cross_entropy(logits, targets);
    kern::scale(scale, ce.grad.data(), ce.grad.size());
    net.backward(cache, ce.grad);
    std::size_t correct = 0;
    const std::size_t C = logits.shape[1];
    for (std::size_t i = 0; i < targets.size(); ++i)
        if (argmax_row(logits.data() + i * C, C) == targets[i]) ++correct;
    return SampleResult{ce.loss, correct, targets.size()};
}

} // namespace

std::vector<EpochStats> train_segmentation(SegmentationNet& net, const Dataset& data,
                                           const TrainConfig& cfg) {
    Rng rng(cfg.seed);
    const auto params = net.params();
    return run_epochs(params, data.samples.size(), cfg, rng,
                      [&](std::size_t idx, double scale) {
        return segmentation_step<SegmentationNet, SegmentationNet::Cache>(
            net, data.samples[idx], cfg, rng, scale);
    });
}

std::vector<EpochStats> train_fusion(FusionNet& net, const Dataset& data,
                                     const TrainConfig& cfg) {
    Rng rng(cfg.seed);
    const auto params = net.params();  // residual branch only
    return run_epochs(params, data.samples.size(), cfg, rng,
                      [&](std::size_t idx, double scale) {
        return segmentation_step<FusionNet, FusionNet::Cache>(
            net, data.samples[idx], cfg, rng, scale);
    });
}

Tensor aggregate_spatial_samplings(const std::function<Tensor()>& run, std::size_t runs) {
    if (runs == 0) throw ConfigError("aggregate_spatial_samplings: runs must be >= 1");
    Tensor acc = run();
    for (std::size_t r = 1; r < runs; ++r) {
        const Tensor t = run();
        if (!t.same_shape(acc))
            throw DimensionError("aggregate_spatial_samplings: shape mismatch across runs");
        kern::axpy(1.0, t.data(), acc.data(), acc.size());
    }
    kern::scale(1.0 / static_cast<double>(runs), acc.data(), acc.size());
    return acc;
}

Metrics evaluate_classification(const ClassificationNet& net, const Dataset& data,
                                std::size_t input_points, std::size_t samplings, Rng& rng) {
    const std::size_t C = net.config().num_classes;
    std::vector<std::uint64_t> confusion(C * C, 0);
    for (const Sample& sample : data.samples) {
        const Tensor mean = aggregate_spatial_samplings([&] {
            const auto sel = fixed_size_select(sample.cloud, input_points, rng);
            return net.forward(cloud_to_points(sel.cloud), rng);
        }, samplings);
        const std::uint32_t pred = argmax_row(mean.data(), C);
        ++confusion[sample.label * C + pred];
    }
    return metrics_from_confusion(confusion, C);
}

namespace {

// Mean accumulated logits -> labels; uncovered points take the label of the
// nearest covered point.
std::vector<std::uint32_t> labels_from_accumulator(const Tensor& acc,
                                                   const std::vector<std::uint32_t>& counts,
                                                   const PointCloud& cloud) {
    const std::size_t n = counts.size(), C = acc.shape[1];
    std::vector<std::uint32_t> labels(n, 0);
    std::vector<double> covered_pos;
    std::vector<std::uint32_t> covered_labels;
    std::vector<std::size_t> uncovered;
    for (std::size_t i = 0; i < n; ++i) {
        if (counts[i] == 0) {
            uncovered.push_back(i);
            continue;
        }
        labels[i] = argmax_row(acc.data() + i * C, C);
        covered_pos.insert(covered_pos.end(),
                           cloud.positions.begin() + i * cloud.dim,
                           cloud.positions.begin() + (i + 1) * cloud.dim);
        covered_labels.push_back(labels[i]);
    }
    if (covered_labels.empty())
        throw DimensionError("prediction covered no points");
    if (!uncovered.empty()) {
        PointCloud rest;
        rest.dim = cloud.dim;
        rest.fdim = 0;
        for (std::size_t i : uncovered)
            rest.positions.insert(rest.positions.end(),
                                  cloud.positions.begin() + i * cloud.dim,
                                  cloud.positions.begin() + (i + 1) * cloud.dim);
        const auto filled = propagate_labels_nn(covered_pos.data(), covered_labels.data(),
                                                covered_labels.size(), rest);
        for (std::size_t j = 0; j < uncovered.size(); ++j)
            labels[uncovered[j]] = filled[j];
    }
    return labels;
}

} // namespace

Metrics evaluate_segmentation(const std::function<Tensor(const Points&)>& forward,
                              const Dataset& data, std::size_t num_classes,
                              std::size_t input_points, std::size_t samplings, Rng& rng) {
    const std::size_t C = num_classes;
    std::vector<std::uint64_t> confusion(C * C, 0);
    for (const Sample& sample : data.samples) {
        const std::size_t n = sample.cloud.size();
        Tensor acc({n, C});
        std::vector<std::uint32_t> counts(n, 0);
        for (std::size_t s = 0; s < samplings; ++s) {
            const auto sel = fixed_size_select(sample.cloud, input_points, rng);
            const Tensor logits = forward(cloud_to_points(sel.cloud));
            for (std::size_t i = 0; i < sel.index_map.size(); ++i) {
                const std::uint32_t src = sel.index_map[i];
                kern::axpy(1.0, logits.data() + i * C, acc.data() + src * C, C);
                ++counts[src];
            }
        }
        const auto labels = labels_from_accumulator(acc, counts, sample.cloud);
        for (std::size_t i = 0; i < n; ++i)
            ++confusion[sample.point_labels[i] * C + labels[i]];
    }
    return metrics_from_confusion(confusion, C);
}

std::vector<std::uint32_t> predict_scene(const std::function<Tensor(const Points&)>& forward,
                                         const PointCloud& scene, std::size_t num_classes,
                                         const ScenePredictOptions& opts, Rng& rng) {
    if (scene.size() == 0) throw DimensionError("predict_scene: empty scene");
    const std::size_t C = num_classes;
    Tensor acc({scene.size(), C});
    std::vector<std::uint32_t> counts(scene.size(), 0);
    for (const auto& center : occupancy_grid_centers(scene, opts.pixel_size)) {
        const SceneColumn col = extract_column(scene, center[0], center[1], opts.column_width);
        if (col.cloud.size() < opts.min_column_points) continue;
        const auto sel = fixed_size_select(col.cloud, opts.points_per_column, rng);
        const Tensor logits = forward(cloud_to_points(sel.cloud));
        for (std::size_t i = 0; i < sel.index_map.size(); ++i) {
            const std::uint32_t src = col.indices[sel.index_map[i]];
            kern::axpy(1.0, logits.data() + i * C, acc.data() + src * C, C);
            ++counts[src];
        }
    }
    return labels_from_accumulator(acc, counts, scene);
}

} // namespace convpoint
