#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <vector>

#include "convpoint/dataset.hpp"
#include "convpoint/networks.hpp"
#include "convpoint/ops.hpp"

namespace convpoint {

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    std::size_t input_points = 256;  // cloud size fed to the network
    AdamConfig adam;
    std::uint64_t seed = 1;
    std::ostream* log = nullptr;  // optional per-epoch diagnostics
};

struct EpochStats {
    std::size_t epoch;
    double mean_loss;
    double train_oa;
};

struct Metrics {
    double oa = 0.0;
    double aa = 0.0;
    double miou = 0.0;
    std::vector<double> per_class_iou;       // NaN when the class is absent
    std::vector<std::uint64_t> confusion;    // C x C, row = truth, col = prediction
};

// Derive OA / AA / IoU from a confusion matrix. Classes absent from the
// ground truth are excluded from the AA and mIoU averages.
Metrics metrics_from_confusion(const std::vector<std::uint64_t>& confusion, std::size_t num_classes);

// Both trainers shuffle samples each epoch, accumulate gradients over a
// minibatch, and apply one Adam step per batch. A non-finite loss aborts
// with a numeric error.
std::vector<EpochStats> train_classification(ClassificationNet& net, const Dataset& data,
                                             const TrainConfig& cfg);
std::vector<EpochStats> train_segmentation(SegmentationNet& net, const Dataset& data,
                                           const TrainConfig& cfg);
std::vector<EpochStats> train_fusion(FusionNet& net, const Dataset& data,
                                     const TrainConfig& cfg);

// Mean of the tensors produced by `run` over `runs` invocations.
Tensor aggregate_spatial_samplings(const std::function<Tensor()>& run, std::size_t runs);

// Each sample is evaluated on `samplings` independent fixed-size draws and
// the raw logits are averaged before the argmax.
Metrics evaluate_classification(const ClassificationNet& net, const Dataset& data,
                                std::size_t input_points, std::size_t samplings, Rng& rng);

// Per-point evaluation: logits from each draw are scattered back to the
// original points and averaged; points never drawn inherit the label of the
// nearest covered point.
Metrics evaluate_segmentation(const std::function<Tensor(const Points&)>& forward,
                              const Dataset& data, std::size_t num_classes,
                              std::size_t input_points, std::size_t samplings, Rng& rng);

// Sliding-window scene labelling: one column per occupied cell of a
// horizontal grid, a fixed-size draw per column, logit accumulation per
// scene point, then nearest-neighbor fill for points never covered.
struct ScenePredictOptions {
    double column_width = 2.0;
    double pixel_size = 0.5;
    std::size_t points_per_column = 8192;
    std::size_t min_column_points = 8;
};
std::vector<std::uint32_t> predict_scene(const std::function<Tensor(const Points&)>& forward,
                                         const PointCloud& scene, std::size_t num_classes,
                                         const ScenePredictOptions& opts, Rng& rng);

// Points-struct view of a cloud (positions + features as tensors).
Points cloud_to_points(const PointCloud& cloud);

} // namespace convpoint
