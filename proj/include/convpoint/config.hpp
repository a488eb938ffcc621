#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace convpoint {

// Run configuration loaded from JSON. Unknown keys are rejected so typos
// fail loudly instead of silently using defaults.
struct RunConfig {
    std::string task = "classification";  // classification | segmentation | fusion

    // data (paths resolve against the data root unless absolute)
    std::string train_images, train_labels, test_images, test_labels;  // idx files
    std::vector<std::string> train_clouds, test_clouds;  // labeled cloud csv files
    std::string mode = "gray_levels";  // gray_levels | black_points
    std::size_t max_train = 0, max_test = 0;  // 0 = no cap
    std::size_t num_classes = 10;

    // model
    std::size_t dim = 2;
    std::size_t kernel_size = 16;
    bool large = false;
    std::vector<std::array<std::size_t, 3>> ladder;  // classification override
    std::string base_a, base_b;  // fusion base checkpoints

    // training
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    std::size_t input_points = 256;
    double lr = 1e-3;
    std::uint64_t seed = 1;
    std::size_t samplings = 16;

    // scene prediction
    double column_width = 2.0;
    double pixel_size = 0.5;
    std::size_t points_per_column = 8192;
    std::size_t min_column_points = 8;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// CONVPOINT_DATA_ROOT, or "." when unset.
std::string data_root();
std::string resolve_data_path(const std::string& path);

} // namespace convpoint
