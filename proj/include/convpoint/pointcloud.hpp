#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "convpoint/errors.hpp"

namespace convpoint {

// Positions (|P| x d) with per-point features (|P| x n), both row-major.
struct PointCloud {
    std::size_t dim = 3;   // spatial dimension d (2 or 3)
    std::size_t fdim = 1;  // feature dimension n
    std::vector<double> positions;
    std::vector<double> features;

    PointCloud() = default;
    PointCloud(std::size_t d, std::size_t n) : dim(d), fdim(n) {}

    std::size_t size() const { return dim == 0 ? 0 : positions.size() / dim; }

    const double* pos(std::size_t i) const { return positions.data() + i * dim; }
    double* pos(std::size_t i) { return positions.data() + i * dim; }
    const double* feat(std::size_t i) const { return features.data() + i * fdim; }
    double* feat(std::size_t i) { return features.data() + i * fdim; }

    void push_back(const double* p, const double* f) {
        positions.insert(positions.end(), p, p + dim);
        features.insert(features.end(), f, f + fdim);
    }

    void validate() const {
        if (size() == 0) throw DimensionError("point cloud is empty");
        if (features.size() != size() * fdim)
            throw DimensionError("positions/features row counts disagree");
    }
};

// Headered CSV: x,y[,z],f1..fn[,label]. Labels are optional on load and save.
PointCloud load_cloud_csv(const std::string& path,
                          std::vector<std::uint32_t>* labels = nullptr);
void save_cloud_csv(const std::string& path, const PointCloud& cloud,
                    const std::vector<std::uint32_t>* labels = nullptr);

// Little-endian binary: magic "PCLD", u32 version, u32 |P|, u32 d, u32 n,
// then positions and features as 32-bit floats.
PointCloud load_cloud_pcld(const std::string& path);
void save_cloud_pcld(const std::string& path, const PointCloud& cloud);

// Dispatch on extension (.csv / anything else is PCLD binary).
PointCloud load_cloud(const std::string& path,
                      std::vector<std::uint32_t>* labels = nullptr);

} // namespace convpoint
