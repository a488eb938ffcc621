#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "convpoint/checkpoint.hpp"
#include "convpoint/config.hpp"
#include "convpoint/dataset.hpp"
#include "convpoint/digits.hpp"
#include "convpoint/scene.hpp"
#include "convpoint/train.hpp"

using namespace convpoint;

namespace {

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>(std::istreambuf_iterator<char>(in),
                             std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size()));
}

// two linearly separable feature clusters on random positions
Dataset toy_classification_dataset(std::size_t count, Rng& rng) {
    Dataset data;
    data.num_classes = 2;
    data.dim = 2;
    data.feature_dim = 1;
    for (std::size_t s = 0; s < count; ++s) {
        Sample sample;
        sample.label = static_cast<std::uint32_t>(s % 2);
        sample.cloud = PointCloud(2, 1);
        for (int i = 0; i < 32; ++i) {
            double p[2] = {rng.uniform(0, 1), rng.uniform(0, 1)};
            double f[1] = {(sample.label ? 0.9 : 0.1) + rng.uniform(-0.05, 0.05)};
            sample.cloud.push_back(p, f);
        }
        data.samples.push_back(std::move(sample));
    }
    return data;
}

ClassificationNet toy_net(Rng& rng) {
    return build_classification_net(2, 1, rng, 2, {{8, 16, 4}, {16, 1, 4}}, 4);
}

} // namespace

TEST_CASE("gray-level images become one point per pixel") {
    Rng rng(1);
    std::vector<std::uint8_t> img(28 * 28);
    for (auto& p : img) p = static_cast<std::uint8_t>(rng.below(256));
    const PointCloud cloud = mnist_to_pointcloud(img.data(), 28, 28, MnistMode::GrayLevels);
    REQUIRE(cloud.size() == 784);
    CHECK(cloud.dim == 2);
    CHECK(cloud.fdim == 1);
    // row-major pixel order: point r*28+c sits at (c, r) / 27
    const std::size_t r = 5, c = 17;
    CHECK(cloud.pos(r * 28 + c)[0] == doctest::Approx(double(c) / 27.0).epsilon(1e-15));
    CHECK(cloud.pos(r * 28 + c)[1] == doctest::Approx(double(r) / 27.0).epsilon(1e-15));
    CHECK(cloud.feat(r * 28 + c)[0] == doctest::Approx(img[r * 28 + c] / 255.0).epsilon(1e-15));
}

TEST_CASE("black-point images keep only inked pixels with unit features") {
    std::vector<std::uint8_t> img(28 * 28, 0);
    img[3] = 200;
    img[100] = 1;
    img[783] = 255;
    const PointCloud cloud = mnist_to_pointcloud(img.data(), 28, 28, MnistMode::BlackPoints);
    REQUIRE(cloud.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(cloud.feat(i)[0] == 1.0);
    CHECK(cloud.pos(2)[0] == 1.0);
    CHECK(cloud.pos(2)[1] == 1.0);
}

TEST_CASE("checkerboard keeps half the pixels in black-point mode") {
    std::vector<std::uint8_t> img(28 * 28, 0);
    for (std::size_t i = 0; i < img.size(); i += 2) img[i] = 128;
    const PointCloud cloud = mnist_to_pointcloud(img.data(), 28, 28, MnistMode::BlackPoints);
    CHECK(cloud.size() == 392);
}

TEST_CASE("blank image in black-point mode is an error") {
    std::vector<std::uint8_t> img(28 * 28, 0);
    CHECK_THROWS_AS(mnist_to_pointcloud(img.data(), 28, 28, MnistMode::BlackPoints),
                    DimensionError);
}

TEST_CASE("blank images are skipped when building a dataset") {
    IdxImages imgs;
    imgs.rows = imgs.cols = 4;
    imgs.pixels.assign(3 * 16, 0);
    imgs.pixels[0] = 255;            // image 0 has one inked pixel
    imgs.pixels[2 * 16 + 5] = 128;   // image 2 too; image 1 is blank
    const std::vector<std::uint8_t> labels = {7, 3, 1};
    const Dataset data = make_mnist_dataset(imgs, labels, MnistMode::BlackPoints);
    REQUIRE(data.samples.size() == 2);
    CHECK(data.samples[0].label == 7);
    CHECK(data.samples[1].label == 1);
    const Dataset gray = make_mnist_dataset(imgs, labels, MnistMode::GrayLevels);
    CHECK(gray.samples.size() == 3);
}

TEST_CASE("idx image and label files roundtrip") {
    Rng rng(2);
    IdxImages imgs;
    imgs.rows = 5;
    imgs.cols = 7;
    imgs.pixels.resize(4 * 35);
    for (auto& p : imgs.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    std::vector<std::uint8_t> labels = {9, 0, 4, 2};
    save_idx_images("/tmp/convpoint_t_imgs.idx", imgs);
    save_idx_labels("/tmp/convpoint_t_labels.idx", labels);
    const IdxImages back = load_idx_images("/tmp/convpoint_t_imgs.idx");
    CHECK(back.rows == 5);
    CHECK(back.cols == 7);
    CHECK(back.pixels == imgs.pixels);
    CHECK(load_idx_labels("/tmp/convpoint_t_labels.idx") == labels);
}

TEST_CASE("idx loader rejects wrong magic and truncation") {
    // labels file offered as an image file: wrong magic
    save_idx_labels("/tmp/convpoint_t_mismatch.idx", {1, 2, 3});
    CHECK_THROWS_AS(load_idx_images("/tmp/convpoint_t_mismatch.idx"), IoError);
    IdxImages imgs;
    imgs.rows = imgs.cols = 4;
    imgs.pixels.assign(2 * 16, 9);
    save_idx_images("/tmp/convpoint_t_trunc.idx", imgs);
    auto bytes = slurp("/tmp/convpoint_t_trunc.idx");
    bytes.resize(bytes.size() - 5);
    spit("/tmp/convpoint_t_trunc.idx", bytes);
    CHECK_THROWS_AS(load_idx_images("/tmp/convpoint_t_trunc.idx"), IoError);
}

TEST_CASE("fixed-size selection draws without replacement when possible") {
    Rng rng(3);
    PointCloud cloud(2, 1);
    for (int i = 0; i < 10; ++i) {
        double p[2] = {double(i), 0.0}, f[1] = {double(i)};
        cloud.push_back(p, f);
    }
    const SelectedCloud sel = fixed_size_select(cloud, 6, rng);
    REQUIRE(sel.cloud.size() == 6);
    REQUIRE(sel.index_map.size() == 6);
    std::set<std::uint32_t> uniq(sel.index_map.begin(), sel.index_map.end());
    CHECK(uniq.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(sel.cloud.pos(i)[0] == cloud.pos(sel.index_map[i])[0]);
        CHECK(sel.cloud.feat(i)[0] == cloud.feat(sel.index_map[i])[0]);
    }
}

TEST_CASE("fixed-size selection duplicates evenly when the cloud is small") {
    Rng rng(4);
    PointCloud cloud(2, 1);
    for (int i = 0; i < 4; ++i) {
        double p[2] = {double(i), 1.0}, f[1] = {0.5};
        cloud.push_back(p, f);
    }
    const SelectedCloud sel = fixed_size_select(cloud, 10, rng);
    REQUIRE(sel.index_map.size() == 10);
    std::vector<int> cnt(4, 0);
    for (auto i : sel.index_map) ++cnt[i];
    for (int c : cnt) CHECK(c >= 2);  // floor(10/4)
}

TEST_CASE("fixed-size selection is seed deterministic") {
    PointCloud cloud(2, 1);
    Rng fill(5);
    for (int i = 0; i < 20; ++i) {
        double p[2] = {fill.uniform(0, 1), fill.uniform(0, 1)}, f[1] = {0.0};
        cloud.push_back(p, f);
    }
    Rng a(42), b(42), c(43);
    CHECK(fixed_size_select(cloud, 8, a).index_map == fixed_size_select(cloud, 8, b).index_map);
    CHECK(fixed_size_select(cloud, 8, a).index_map != fixed_size_select(cloud, 8, c).index_map);
}

TEST_CASE("column extraction is a closed square in the horizontal plane") {
    PointCloud scene(3, 1);
    const double pts[5][3] = {
        {0.0, 0.0, -5.0},  // center, extreme height still included
        {1.0, 1.0, 0.0},   // exactly on the corner
        {1.01, 0.0, 0.0},  // just outside in x
        {0.0, -1.01, 0.0}, // just outside in y
        {-0.5, 0.25, 99.0},
    };
    for (const auto& p : pts) {
        double f[1] = {1.0};
        scene.push_back(p, f);
    }
    const SceneColumn col = extract_column(scene, 0.0, 0.0, 2.0);
    CHECK(col.indices == std::vector<std::uint32_t>{0, 1, 4});
    CHECK(col.cloud.pos(2)[2] == 99.0);
}

TEST_CASE("occupancy grid lists occupied cell centers in order") {
    PointCloud scene(2, 1);
    const double pts[4][2] = {{0.1, 0.1}, {0.9, 0.2}, {1.6, 0.4}, {1.7, 2.3}};
    for (const auto& p : pts) {
        double f[1] = {1.0};
        scene.push_back(p, f);
    }
    const auto centers = occupancy_grid_centers(scene, 1.0);
    REQUIRE(centers.size() == 3);
    CHECK(centers[0] == std::array<double, 2>{0.5, 0.5});
    CHECK(centers[1] == std::array<double, 2>{1.5, 0.5});
    CHECK(centers[2] == std::array<double, 2>{1.5, 2.5});
}

TEST_CASE("label propagation picks the nearest labeled point") {
    const double labeled[4] = {0.0, 0.0, 10.0, 0.0};
    const std::uint32_t labels[2] = {3, 8};
    PointCloud cloud(2, 1);
    const double pts[3][2] = {{1.0, 1.0}, {9.0, -1.0}, {4.0, 0.0}};
    for (const auto& p : pts) {
        double f[1] = {0.0};
        cloud.push_back(p, f);
    }
    CHECK(propagate_labels_nn(labeled, labels, 2, cloud) ==
          std::vector<std::uint32_t>{3, 8, 3});
}

TEST_CASE("occupancy columns cover every scene point") {
    Rng rng(6);
    PointCloud scene(3, 1);
    for (int i = 0; i < 500; ++i) {
        double p[3] = {rng.uniform(-7, 7), rng.uniform(-7, 7), rng.uniform(0, 2)};
        double f[1] = {1.0};
        scene.push_back(p, f);
    }
    const double ps = 0.5;
    std::vector<bool> covered(scene.size(), false);
    for (const auto& c : occupancy_grid_centers(scene, ps))
        for (std::uint32_t i : extract_column(scene, c[0], c[1], ps).indices)
            covered[i] = true;
    for (bool b : covered) REQUIRE(b);
}

TEST_CASE("spatial sampling aggregation is the running mean") {
    int calls = 0;
    auto run = [&]() {
        Tensor t({2});
        t.v[0] = double(calls);
        t.v[1] = 10.0 * double(calls);
        ++calls;
        return t;
    };
    const Tensor mean = aggregate_spatial_samplings(run, 4);
    CHECK(calls == 4);
    CHECK(mean.v[0] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(mean.v[1] == doctest::Approx(15.0).epsilon(1e-15));
}

TEST_CASE("metrics from a perfect confusion matrix are all one") {
    const std::vector<std::uint64_t> conf = {30, 0, 0, 0, 20, 0, 0, 0, 10};
    const Metrics m = metrics_from_confusion(conf, 3);
    CHECK(m.oa == 1.0);
    CHECK(m.aa == 1.0);
    CHECK(m.miou == 1.0);
}

TEST_CASE("metrics for a constant predictor on balanced two-class data") {
    const std::vector<std::uint64_t> conf = {50, 0, 50, 0};
    const Metrics m = metrics_from_confusion(conf, 2);
    CHECK(m.oa == 0.5);
    CHECK(m.aa == 0.5);
    CHECK(m.miou == 0.25);
}

TEST_CASE("classes absent from the ground truth do not dilute the averages") {
    // class 2 never occurs and is never predicted
    const std::vector<std::uint64_t> conf = {10, 0, 0, 0, 10, 0, 0, 0, 0};
    const Metrics m = metrics_from_confusion(conf, 3);
    CHECK(m.aa == 1.0);
    CHECK(m.miou == 1.0);
    CHECK(std::isnan(m.per_class_iou[2]));
    CHECK(m.per_class_iou[0] == 1.0);
}

TEST_CASE("constant logits score exactly chance on balanced data") {
    Rng rng(7);
    ClassificationNet net = build_classification_net(
        10, 1, rng, 2, {{8, 16, 4}, {16, 1, 4}}, 4);
    net.fc_w.value.fill(0.0);
    net.fc_b.value.fill(0.0);
    Dataset data;
    data.num_classes = 10;
    data.dim = 2;
    for (int s = 0; s < 20; ++s) {
        Sample sample;
        sample.label = static_cast<std::uint32_t>(s % 10);
        sample.cloud = PointCloud(2, 1);
        for (int i = 0; i < 24; ++i) {
            double p[2] = {rng.uniform(0, 1), rng.uniform(0, 1)}, f[1] = {1.0};
            sample.cloud.push_back(p, f);
        }
        data.samples.push_back(std::move(sample));
    }
    Rng eval_rng(1);
    const Metrics m = evaluate_classification(net, data, 24, 2, eval_rng);
    CHECK(m.oa == 2.0 / 20.0);
}

TEST_CASE("training overfits a small dataset") {
    Rng rng(8);
    const Dataset data = toy_classification_dataset(32, rng);
    ClassificationNet net = toy_net(rng);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 8;
    cfg.input_points = 32;
    cfg.seed = 1;
    cfg.adam.lr = 5e-3;
    const auto stats = train_classification(net, data, cfg);
    REQUIRE(stats.size() == 20);
    CHECK(stats.back().mean_loss <= 0.5 * stats.front().mean_loss);
    CHECK(stats.back().train_oa >= 0.9);
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
    auto run = [](const std::string& path, std::string* log_out) {
        Rng rng(9);
        const Dataset data = toy_classification_dataset(16, rng);
        ClassificationNet net = toy_net(rng);
        std::ostringstream log;
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.batch_size = 4;
        cfg.input_points = 32;
        cfg.seed = 5;
        cfg.log = &log;
        train_classification(net, data, cfg);
        Model model;
        model.kind = Model::Kind::Classification;
        model.classif = std::move(net);
        save_model(path, model, 5, 3, {{"oa", 1.0}});
        *log_out = log.str();
    };
    std::string log1, log2;
    run("/tmp/convpoint_t_det1.ckpt", &log1);
    run("/tmp/convpoint_t_det2.ckpt", &log2);
    CHECK(log1 == log2);
    CHECK(!log1.empty());
    CHECK(slurp("/tmp/convpoint_t_det1.ckpt") == slurp("/tmp/convpoint_t_det2.ckpt"));
}

TEST_CASE("a non-finite loss aborts training") {
    Rng rng(10);
    const Dataset data = toy_classification_dataset(8, rng);
    ClassificationNet net = toy_net(rng);
    net.fc_w.value.v[0] = std::numeric_limits<double>::infinity();
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    cfg.input_points = 32;
    CHECK_THROWS_AS(train_classification(net, data, cfg), NumericError);
}

TEST_CASE("checkpoints roundtrip bit-exactly") {
    Rng rng(11);
    Model model;
    model.kind = Model::Kind::Classification;
    model.classif = toy_net(rng);
    const std::string path = "/tmp/convpoint_t_round.ckpt";
    save_model(path, model, 77, 4, {{"oa", 0.25}});
    Checkpoint meta;
    Model back = load_model(path, &meta);
    CHECK(meta.seed == 77);
    CHECK(meta.epoch == 4);
    CHECK(meta.metrics.at("oa") == 0.25);
    CHECK(back.describe() == model.describe());
    auto pa = model.all_params();
    auto pb = back.all_params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) REQUIRE(pa[i]->value.v == pb[i]->value.v);
}

TEST_CASE("corrupted checkpoints fail the checksum") {
    Rng rng(12);
    Model model;
    model.kind = Model::Kind::Classification;
    model.classif = toy_net(rng);
    const std::string path = "/tmp/convpoint_t_corrupt.ckpt";
    save_model(path, model, 1, 1, {});
    auto bytes = slurp(path);
    bytes[bytes.size() / 2] ^= 0x40;
    spit(path, bytes);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
}

TEST_CASE("future format versions are rejected") {
    Rng rng(13);
    Model model;
    model.kind = Model::Kind::Classification;
    model.classif = toy_net(rng);
    const std::string path = "/tmp/convpoint_t_version.ckpt";
    save_model(path, model, 1, 1, {});
    auto bytes = slurp(path);
    bytes[4] = 2;  // u16 version field follows the magic
    const std::uint32_t crc = crc32(bytes.data(), bytes.size() - 4);
    for (int i = 0; i < 4; ++i)
        bytes[bytes.size() - 4 + i] = char((crc >> (8 * i)) & 0xff);
    spit(path, bytes);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
}

TEST_CASE("run configs reject unknown keys and bad values") {
    CHECK_THROWS_AS(parse_run_config({{"epcohs", 3}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config({{"task", "regression"}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config({{"mode", "sepia"}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config({{"lr", -1.0}}), ConfigError);
    const RunConfig cfg = parse_run_config({{"epochs", 3}, {"task", "segmentation"}});
    CHECK(cfg.epochs == 3);
    CHECK(cfg.task == "segmentation");
    CHECK(cfg.samplings == 16);
    CHECK_THROWS_AS(load_run_config("/tmp/definitely_missing_cfg.json"), IoError);
}

TEST_CASE("data paths resolve against the environment root") {
    setenv("CONVPOINT_DATA_ROOT", "/tmp/convpoint_data", 1);
    CHECK(data_root() == "/tmp/convpoint_data");
    CHECK(resolve_data_path("clouds/a.csv") == "/tmp/convpoint_data/clouds/a.csv");
    CHECK(resolve_data_path("/abs/b.csv") == "/abs/b.csv");
    unsetenv("CONVPOINT_DATA_ROOT");
    CHECK(data_root() == ".");
}

TEST_CASE("synthetic digits are deterministic, balanced and nonblank") {
    const DigitSet a = generate_digits(40, 123);
    const DigitSet b = generate_digits(40, 123);
    const DigitSet c = generate_digits(40, 124);
    CHECK(a.images.pixels == b.images.pixels);
    CHECK(a.labels == b.labels);
    CHECK(a.images.pixels != c.images.pixels);
    REQUIRE(a.labels.size() == 40);
    std::vector<int> per_class(10, 0);
    for (auto l : a.labels) ++per_class[l];
    for (int n : per_class) CHECK(n == 4);
    for (std::size_t i = 0; i < 40; ++i) {
        int inked = 0;
        for (std::size_t p = 0; p < 784; ++p) inked += a.images.pixels[i * 784 + p] > 0;
        CHECK(inked > 20);
    }
}
