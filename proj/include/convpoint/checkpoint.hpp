#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "convpoint/networks.hpp"

namespace convpoint {

// Binary container: "CVPT" magic, u16 format version, a JSON header
// (architecture, precision, seed, epoch, metrics), a flat f64 parameter
// blob and a trailing CRC32 over everything before it.
struct Checkpoint {
    nlohmann::json arch;
    std::string precision = "f64";
    std::uint64_t seed = 0;
    std::uint32_t epoch = 0;
    nlohmann::json metrics;
    std::vector<double> blob;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

// A trained network of any supported type plus enough metadata to rebuild it.
struct Model {
    enum class Kind { Classification, Segmentation, Fusion };
    Kind kind = Kind::Classification;
    ClassificationNet classif;
    SegmentationNet seg;
    FusionNet fusion;

    std::vector<Parameter*> all_params();  // fixed serialization order
    nlohmann::json describe() const;
    std::size_t num_classes() const;
    // Inference pass (dropout off); per-point or per-cloud logits.
    Tensor eval_forward(const Points& input, Rng& rng) const;
};

Model model_from_arch(const nlohmann::json& arch, Rng& rng);

void save_model(const std::string& path, Model& model, std::uint64_t seed,
                std::uint32_t epoch, const nlohmann::json& metrics);
Model load_model(const std::string& path, Checkpoint* meta = nullptr);

} // namespace convpoint
