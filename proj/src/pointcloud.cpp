#include "convpoint/pointcloud.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace convpoint {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

} // namespace

PointCloud load_cloud_csv(const std::string& path, std::vector<std::uint32_t>* labels) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw IoError("empty CSV file: " + path);
    const auto cols = split_csv_line(header);
    std::size_t d = 0, n = 0;
    bool has_label = false;
    for (const auto& c : cols) {
        if (c == "x" || c == "y" || c == "z") ++d;
        else if (c == "label") has_label = true;
        else if (!c.empty() && c[0] == 'f') ++n;
        else throw IoError("unrecognized CSV column '" + c + "' in " + path);
    }
    if (d < 2 || d > 3) throw IoError("CSV must have 2 or 3 coordinate columns: " + path);
    if (n == 0) throw IoError("CSV must have at least one feature column: " + path);

    PointCloud cloud(d, n);
    if (labels) labels->clear();
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != cols.size())
            throw IoError("CSV row " + std::to_string(lineno) + " has wrong arity: " + path);
        std::size_t c = 0;
        for (std::size_t i = 0; i < d; ++i) cloud.positions.push_back(std::stod(cells[c++]));
        for (std::size_t i = 0; i < n; ++i) cloud.features.push_back(std::stod(cells[c++]));
        if (has_label) {
            const long v = std::stol(cells[c++]);
            if (v < 0) throw IoError("negative label in " + path);
            if (labels) labels->push_back(static_cast<std::uint32_t>(v));
        }
    }
    cloud.validate();
    return cloud;
}

void save_cloud_csv(const std::string& path, const PointCloud& cloud,
                    const std::vector<std::uint32_t>* labels) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "x,y";
    if (cloud.dim == 3) out << ",z";
    for (std::size_t i = 1; i <= cloud.fdim; ++i) out << ",f" << i;
    if (labels) out << ",label";
    out << "\n";
    char buf[64];
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (std::size_t j = 0; j < cloud.dim; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", cloud.pos(i)[j]);
            out << (j ? "," : "") << buf;
        }
        for (std::size_t j = 0; j < cloud.fdim; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", cloud.feat(i)[j]);
            out << "," << buf;
        }
        if (labels) out << "," << (*labels)[i];
        out << "\n";
    }
    if (!out) throw IoError("write failure: " + path);
}

namespace {

constexpr char kPcldMagic[4] = {'P', 'C', 'L', 'D'};
constexpr std::uint32_t kPcldVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_raw(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw IoError("truncated PCLD file: " + path);
    return v;
}

} // namespace

void save_cloud_pcld(const std::string& path, const PointCloud& cloud) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kPcldMagic, 4);
    write_raw(out, kPcldVersion);
    write_raw(out, static_cast<std::uint32_t>(cloud.size()));
    write_raw(out, static_cast<std::uint32_t>(cloud.dim));
    write_raw(out, static_cast<std::uint32_t>(cloud.fdim));
    for (double x : cloud.positions) write_raw(out, static_cast<float>(x));
    for (double x : cloud.features) write_raw(out, static_cast<float>(x));
    if (!out) throw IoError("write failure: " + path);
}

PointCloud load_cloud_pcld(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kPcldMagic, 4) != 0)
        throw IoError("not a PCLD file: " + path);
    const auto version = read_raw<std::uint32_t>(in, path);
    if (version != kPcldVersion)
        throw IoError("unsupported PCLD version in " + path);
    const auto count = read_raw<std::uint32_t>(in, path);
    const auto d = read_raw<std::uint32_t>(in, path);
    const auto n = read_raw<std::uint32_t>(in, path);
    if (d < 2 || d > 3 || n == 0 || count == 0)
        throw IoError("invalid PCLD header in " + path);
    PointCloud cloud(d, n);
    cloud.positions.reserve(std::size_t(count) * d);
    cloud.features.reserve(std::size_t(count) * n);
    for (std::size_t i = 0; i < std::size_t(count) * d; ++i)
        cloud.positions.push_back(read_raw<float>(in, path));
    for (std::size_t i = 0; i < std::size_t(count) * n; ++i)
        cloud.features.push_back(read_raw<float>(in, path));
    return cloud;
}

PointCloud load_cloud(const std::string& path, std::vector<std::uint32_t>* labels) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0)
        return load_cloud_csv(path, labels);
    if (labels) labels->clear();
    return load_cloud_pcld(path);
}

} // namespace convpoint
