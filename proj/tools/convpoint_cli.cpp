#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "convpoint/checkpoint.hpp"
#include "convpoint/config.hpp"
#include "convpoint/dataset.hpp"
#include "convpoint/digits.hpp"
#include "convpoint/errors.hpp"
#include "convpoint/filters.hpp"
#include "convpoint/kdtree.hpp"
#include "convpoint/kernels.hpp"
#include "convpoint/train.hpp"

namespace {

using namespace convpoint;

// A config naming a nonexistent dataset is a configuration mistake (exit 2),
// unlike a file that exists but cannot be read (exit 3).
void require_exists(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw ConfigError("dataset path does not exist: " + path);
}

Dataset load_idx_dataset(const RunConfig& cfg, bool train) {
    const std::string imgs_path = resolve_data_path(train ? cfg.train_images : cfg.test_images);
    const std::string labels_path = resolve_data_path(train ? cfg.train_labels : cfg.test_labels);
    if (imgs_path.empty() || labels_path.empty())
        throw ConfigError("config must name the idx image and label files");
    require_exists(imgs_path);
    require_exists(labels_path);
    const IdxImages imgs = load_idx_images(imgs_path);
    const auto labels = load_idx_labels(labels_path);
    const MnistMode mode = cfg.mode == "black_points" ? MnistMode::BlackPoints
                                                      : MnistMode::GrayLevels;
    return make_mnist_dataset(imgs, labels, mode, train ? cfg.max_train : cfg.max_test);
}

Dataset load_cloud_dataset(const RunConfig& cfg, bool train) {
    const auto& paths = train ? cfg.train_clouds : cfg.test_clouds;
    if (paths.empty()) throw ConfigError("config must list labeled cloud files");
    Dataset ds;
    ds.num_classes = cfg.num_classes;
    for (const auto& p : paths) {
        Sample s;
        require_exists(resolve_data_path(p));
        s.cloud = load_cloud_csv(resolve_data_path(p), &s.point_labels);
        if (s.point_labels.size() != s.cloud.size())
            throw ConfigError("cloud file lacks a label column: " + p);
        for (const auto l : s.point_labels)
            if (l >= cfg.num_classes)
                throw ConfigError("label out of range in " + p);
        ds.samples.push_back(std::move(s));
    }
    ds.dim = ds.samples.front().cloud.dim;
    ds.feature_dim = ds.samples.front().cloud.fdim;
    return ds;
}

Model build_model(const RunConfig& cfg, std::size_t feature_dim, Rng& rng) {
    Model m;
    if (cfg.task == "classification") {
        m.kind = Model::Kind::Classification;
        ClassificationConfig c;
        c.dim = cfg.dim;
        c.input_features = feature_dim;
        c.num_classes = cfg.num_classes;
        c.kernel_size = cfg.kernel_size;
        for (const auto& s : cfg.ladder) c.ladder.push_back({s[0], s[1], s[2]});
        if (c.ladder.empty()) c.ladder = default_classification_ladder();
        m.classif = ClassificationNet(c, rng);
    } else if (cfg.task == "segmentation") {
        m.kind = Model::Kind::Segmentation;
        auto c = make_segmentation_config(cfg.num_classes, feature_dim, cfg.large, cfg.dim);
        c.kernel_size = cfg.kernel_size;
        m.seg = SegmentationNet(c, rng);
    } else {  // fusion
        if (cfg.base_a.empty() || cfg.base_b.empty())
            throw ConfigError("fusion needs base_a and base_b checkpoints");
        Model a = load_model(resolve_data_path(cfg.base_a));
        Model b = load_model(resolve_data_path(cfg.base_b));
        if (a.kind != Model::Kind::Segmentation || b.kind != Model::Kind::Segmentation)
            throw ConfigError("fusion bases must be segmentation checkpoints");
        m.kind = Model::Kind::Fusion;
        m.fusion = build_fusion(std::move(a.seg), std::move(b.seg), cfg.num_classes, rng);
    }
    return m;
}

struct CommonFlags {
    std::string config_path, checkpoint_path, out_path;
    std::uint64_t seed = UINT64_MAX;      // UINT64_MAX = take the config value
    std::size_t samplings = 0;            // 0 = take the config value
};

RunConfig effective_config(const CommonFlags& fl, bool required) {
    RunConfig cfg;
    if (!fl.config_path.empty())
        cfg = load_run_config(fl.config_path);
    else if (required)
        throw ConfigError("--config is required");
    if (fl.seed != UINT64_MAX) cfg.seed = fl.seed;
    if (fl.samplings) cfg.samplings = fl.samplings;
    return cfg;
}

int cmd_train(const CommonFlags& fl) {
    const RunConfig cfg = effective_config(fl, true);
    Rng build_rng(cfg.seed);

    Dataset data;
    if (cfg.task == "classification")
        data = load_idx_dataset(cfg, true);
    else
        data = load_cloud_dataset(cfg, true);

    Model model = build_model(cfg, data.feature_dim, build_rng);

    TrainConfig tcfg;
    tcfg.epochs = cfg.epochs;
    tcfg.batch_size = cfg.batch_size;
    tcfg.input_points = cfg.input_points;
    tcfg.adam.lr = cfg.lr;
    tcfg.seed = cfg.seed;
    tcfg.log = &std::cerr;

    std::vector<EpochStats> stats;
    switch (model.kind) {
        case Model::Kind::Classification:
            stats = train_classification(model.classif, data, tcfg);
            break;
        case Model::Kind::Segmentation:
            stats = train_segmentation(model.seg, data, tcfg);
            break;
        case Model::Kind::Fusion:
            stats = train_fusion(model.fusion, data, tcfg);
            break;
    }

    std::cout << "epoch,loss,train_oa\n";
    for (const auto& st : stats)
        std::cout << st.epoch << "," << st.mean_loss << "," << st.train_oa << "\n";

    if (!fl.out_path.empty()) {
        nlohmann::json metrics = {{"train_oa", stats.back().train_oa},
                                  {"train_loss", stats.back().mean_loss}};
        save_model(fl.out_path, model, cfg.seed,
                   static_cast<std::uint32_t>(cfg.epochs), metrics);
        std::cerr << "checkpoint written: " << fl.out_path << "\n";
    }
    return 0;
}

void print_metrics(const Metrics& m, bool per_point) {
    std::cout << "metric,value\n";
    std::cout << "oa," << m.oa << "\n";
    std::cout << "aa," << m.aa << "\n";
    if (per_point) {
        std::cout << "miou," << m.miou << "\n";
        for (std::size_t c = 0; c < m.per_class_iou.size(); ++c)
            if (m.per_class_iou[c] == m.per_class_iou[c])  // skip absent classes
                std::cout << "iou_" << c << "," << m.per_class_iou[c] << "\n";
    }
}

int cmd_eval(const CommonFlags& fl) {
    const RunConfig cfg = effective_config(fl, true);
    if (fl.checkpoint_path.empty()) throw ConfigError("--checkpoint is required");
    Model model = load_model(fl.checkpoint_path);
    Rng rng(cfg.seed);

    if (model.kind == Model::Kind::Classification) {
        const Dataset data = load_idx_dataset(cfg, false);
        const Metrics m = evaluate_classification(model.classif, data, cfg.input_points,
                                                  cfg.samplings, rng);
        print_metrics(m, false);
    } else {
        const Dataset data = load_cloud_dataset(cfg, false);
        const auto fwd = [&](const Points& p) { return model.eval_forward(p, rng); };
        const Metrics m = evaluate_segmentation(fwd, data, model.num_classes(),
                                                cfg.input_points, cfg.samplings, rng);
        print_metrics(m, true);
    }
    return 0;
}

int cmd_predict_scene(const CommonFlags& fl, const std::string& scene_path) {
    const RunConfig cfg = effective_config(fl, true);
    if (fl.checkpoint_path.empty()) throw ConfigError("--checkpoint is required");
    if (fl.out_path.empty()) throw ConfigError("--out is required");
    Model model = load_model(fl.checkpoint_path);
    if (model.kind == Model::Kind::Classification)
        throw ConfigError("predict-scene needs a per-point model checkpoint");

    const PointCloud scene = load_cloud(resolve_data_path(scene_path));
    Rng rng(cfg.seed);
    ScenePredictOptions opts;
    opts.column_width = cfg.column_width;
    opts.pixel_size = cfg.pixel_size;
    opts.points_per_column = cfg.points_per_column;
    opts.min_column_points = cfg.min_column_points;

    const auto fwd = [&](const Points& p) { return model.eval_forward(p, rng); };
    const auto labels = predict_scene(fwd, scene, model.num_classes(), opts, rng);
    save_cloud_csv(fl.out_path, scene, &labels);

    std::vector<std::size_t> hist(model.num_classes(), 0);
    for (const auto l : labels) ++hist[l];
    std::cout << "label,count\n";
    for (std::size_t c = 0; c < hist.size(); ++c)
        std::cout << c << "," << hist[c] << "\n";
    return 0;
}

int cmd_dump_filters(const CommonFlags& fl, std::size_t layer_idx, std::size_t resolution) {
    if (fl.checkpoint_path.empty()) throw ConfigError("--checkpoint is required");
    if (fl.out_path.empty()) throw ConfigError("--out is required");
    Model model = load_model(fl.checkpoint_path);

    std::vector<ConvPointLayer*> layers;
    if (model.kind == Model::Kind::Classification) {
        for (auto& l : model.classif.layers) layers.push_back(&l);
    } else if (model.kind == Model::Kind::Segmentation) {
        for (auto& l : model.seg.encoder) layers.push_back(&l);
        for (auto& l : model.seg.decoder) layers.push_back(&l);
    } else {
        throw ConfigError("dump-filters needs a classification or segmentation checkpoint");
    }
    if (layer_idx >= layers.size())
        throw ConfigError("layer index out of range (model has " +
                          std::to_string(layers.size()) + " layers)");
    const ConvPointLayer& layer = *layers[layer_idx];
    if (layer.kernel.dim != 2)
        throw ConfigError("dump-filters renders 2-D kernels only");

    const std::string phi_path = fl.out_path + "_phi.csv";
    const std::string composed_path = fl.out_path + "_composed.csv";
    dump_filters_csv(phi_path, composed_path, layer.kernel, layer.mlp, resolution);
    std::cout << phi_path << "\n" << composed_path << "\n";
    return 0;
}

int cmd_make_digits(const CommonFlags& fl, std::size_t train_count, std::size_t test_count) {
    if (fl.out_path.empty()) throw ConfigError("--out is required");
    const std::uint64_t seed = fl.seed == UINT64_MAX ? 1 : fl.seed;
    const DigitSet train = generate_digits(train_count, seed);
    const DigitSet test = generate_digits(test_count, seed + 0x9e3779b9u);
    save_idx_images(fl.out_path + "/train-images.idx", train.images);
    save_idx_labels(fl.out_path + "/train-labels.idx", train.labels);
    save_idx_images(fl.out_path + "/test-images.idx", test.images);
    save_idx_labels(fl.out_path + "/test-labels.idx", test.labels);
    std::cout << "wrote " << train_count << " train and " << test_count
              << " test digits under " << fl.out_path << "\n";
    return 0;
}

int cmd_bench(const CommonFlags& fl) {
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!fl.out_path.empty()) {
        file.open(fl.out_path);
        if (!file) throw IoError("cannot open " + fl.out_path + " for writing");
        out = &file;
    }
    std::cerr << "kernel backend: " << kern::active().name << "\n";
    Rng rng(fl.seed == UINT64_MAX ? 7 : fl.seed);

    *out << "op,points,k,reps,points_per_sec\n";
    const auto time_run = [](auto&& body) {
        const auto t0 = std::chrono::steady_clock::now();
        body();
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    for (const std::size_t n : {1024u, 4096u, 16384u})
        for (const std::size_t k : {16u, 32u}) {
            const Tensor pos = Tensor::uniform({n, 3}, 0.0, 1.0, rng);
            const KdTree tree(pos.data(), n, 3);
            const std::size_t reps = n >= 16384 ? 1 : 4;
            const double secs = time_run([&] {
                for (std::size_t r = 0; r < reps; ++r)
                    for (std::size_t i = 0; i < n; ++i)
                        tree.knn(pos.data() + i * 3, k);
            });
            *out << "knn," << n << "," << k << "," << reps << ","
                 << static_cast<double>(n * reps) / secs << "\n";
        }

    for (const std::size_t n : {512u, 2048u}) {
        const std::size_t k = 32;
        ConvPointLayer layer(LayerSpec{64, 0, 16, k, true}, 3, 1, rng);
        Points p;
        p.positions = Tensor::uniform({n, 3}, 0.0, 1.0, rng);
        p.features = Tensor::filled({n, 1}, 1.0);
        const std::size_t reps = 2;
        const double secs = time_run([&] {
            for (std::size_t r = 0; r < reps; ++r)
                layer.apply(p, nullptr, rng, nullptr);
        });
        *out << "conv_layer_apply," << n << "," << k << "," << reps << ","
             << static_cast<double>(n * reps) / secs << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous convolutions for point cloud learning"};
    app.require_subcommand(1);

    CommonFlags fl;
    std::string scene_path;
    std::size_t layer_idx = 0, resolution = 32;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", fl.config_path, "JSON run configuration");
        sub->add_option("--seed", fl.seed, "random seed override");
        sub->add_option("--samplings", fl.samplings, "spatial sampling count override");
        sub->add_option("--checkpoint", fl.checkpoint_path, "model checkpoint path");
        sub->add_option("--out", fl.out_path, "output path");
    };

    CLI::App* train = app.add_subcommand("train", "train a model");
    add_common(train);
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval);
    CLI::App* predict = app.add_subcommand("predict-scene", "label a full scene");
    add_common(predict);
    predict->add_option("scene", scene_path, "scene cloud file")->required();
    CLI::App* dump = app.add_subcommand("dump-filters", "render learned spatial filters");
    add_common(dump);
    dump->add_option("--layer", layer_idx, "layer index");
    dump->add_option("--resolution", resolution, "grid resolution");
    CLI::App* bench = app.add_subcommand("bench", "micro-benchmarks");
    add_common(bench);
    std::size_t train_count = 2000, test_count = 500;
    CLI::App* digits = app.add_subcommand("make-digits", "generate the synthetic digit dataset");
    add_common(digits);
    digits->add_option("--train-count", train_count, "training images");
    digits->add_option("--test-count", test_count, "test images");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train->parsed()) return cmd_train(fl);
        if (eval->parsed()) return cmd_eval(fl);
        if (predict->parsed()) return cmd_predict_scene(fl, scene_path);
        if (dump->parsed()) return cmd_dump_filters(fl, layer_idx, resolution);
        if (bench->parsed()) return cmd_bench(fl);
        if (digits->parsed()) return cmd_make_digits(fl, train_count, test_count);
    } catch (const convpoint::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const convpoint::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const convpoint::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const convpoint::DimensionError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const convpoint::IndexError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
