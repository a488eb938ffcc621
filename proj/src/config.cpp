#include "convpoint/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "convpoint/errors.hpp"

namespace convpoint {

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

} // namespace

RunConfig parse_run_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> known = {
        "task", "train_images", "train_labels", "test_images", "test_labels",
        "train_clouds", "test_clouds", "mode", "max_train", "max_test",
        "num_classes", "dim", "kernel_size", "large", "ladder", "base_a",
        "base_b", "epochs", "batch_size", "input_points", "lr", "seed",
        "samplings", "column_width", "pixel_size", "points_per_column",
        "min_column_points"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ConfigError("unknown config key: " + key);

    RunConfig cfg;
    take(j, "task", cfg.task);
    take(j, "train_images", cfg.train_images);
    take(j, "train_labels", cfg.train_labels);
    take(j, "test_images", cfg.test_images);
    take(j, "test_labels", cfg.test_labels);
    take(j, "train_clouds", cfg.train_clouds);
    take(j, "test_clouds", cfg.test_clouds);
    take(j, "mode", cfg.mode);
    take(j, "max_train", cfg.max_train);
    take(j, "max_test", cfg.max_test);
    take(j, "num_classes", cfg.num_classes);
    take(j, "dim", cfg.dim);
    take(j, "kernel_size", cfg.kernel_size);
    take(j, "large", cfg.large);
    take(j, "base_a", cfg.base_a);
    take(j, "base_b", cfg.base_b);
    take(j, "epochs", cfg.epochs);
    take(j, "batch_size", cfg.batch_size);
    take(j, "input_points", cfg.input_points);
    take(j, "lr", cfg.lr);
    take(j, "seed", cfg.seed);
    take(j, "samplings", cfg.samplings);
    take(j, "column_width", cfg.column_width);
    take(j, "pixel_size", cfg.pixel_size);
    take(j, "points_per_column", cfg.points_per_column);
    take(j, "min_column_points", cfg.min_column_points);
    if (j.contains("ladder")) {
        cfg.ladder.clear();
        for (const auto& row : j.at("ladder")) {
            if (!row.is_array() || row.size() != 3)
                throw ConfigError("config key 'ladder': each stage needs [channels, points, neighbors]");
            cfg.ladder.push_back({row.at(0).get<std::size_t>(), row.at(1).get<std::size_t>(),
                                  row.at(2).get<std::size_t>()});
        }
    }

    if (cfg.task != "classification" && cfg.task != "segmentation" && cfg.task != "fusion")
        throw ConfigError("unknown task: " + cfg.task);
    if (cfg.mode != "gray_levels" && cfg.mode != "black_points")
        throw ConfigError("unknown mode: " + cfg.mode);
    if (cfg.num_classes == 0) throw ConfigError("num_classes must be >= 1");
    if (cfg.dim != 2 && cfg.dim != 3) throw ConfigError("dim must be 2 or 3");
    if (cfg.lr <= 0.0) throw ConfigError("lr must be positive");
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return parse_run_config(j);
}

std::string data_root() {
    const char* env = std::getenv("CONVPOINT_DATA_ROOT");
    return env && *env ? env : ".";
}

std::string resolve_data_path(const std::string& path) {
    if (path.empty() || path.front() == '/') return path;
    return data_root() + "/" + path;
}

} // namespace convpoint
