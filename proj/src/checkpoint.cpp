#include "convpoint/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "convpoint/errors.hpp"

namespace convpoint {

namespace {

constexpr char kMagic[4] = {'C', 'V', 'P', 'T'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const unsigned char* p;
    std::size_t len, pos = 0;

    void need(std::size_t n) const {
        if (pos + n > len) throw IoError("truncated checkpoint");
    }
    std::uint16_t u16() {
        need(2);
        const std::uint16_t v = std::uint16_t(p[pos]) | (std::uint16_t(p[pos + 1]) << 8);
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
};

} // namespace

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i)
        c = table[(c ^ b[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    nlohmann::json header = {{"arch", ck.arch},
                             {"precision", ck.precision},
                             {"seed", ck.seed},
                             {"epoch", ck.epoch},
                             {"metrics", ck.metrics}};
    const std::string hs = header.dump();

    std::string buf;
    buf.append(kMagic, 4);
    put_u16(buf, kVersion);
    put_u32(buf, static_cast<std::uint32_t>(hs.size()));
    buf.append(hs);
    put_u64(buf, ck.blob.size());
    for (const double d : ck.blob) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        put_u64(buf, bits);
    }
    put_u32(buf, crc32(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 14) throw IoError("truncated checkpoint: " + path);

    Reader body{reinterpret_cast<const unsigned char*>(buf.data()), buf.size() - 4};
    Reader tail{reinterpret_cast<const unsigned char*>(buf.data()) + buf.size() - 4, 4};
    if (tail.u32() != crc32(buf.data(), buf.size() - 4))
        throw IoError("checkpoint checksum mismatch: " + path);

    body.need(4);
    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw IoError("bad checkpoint magic: " + path);
    body.pos = 4;
    const std::uint16_t version = body.u16();
    if (version != kVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));

    const std::uint32_t hlen = body.u32();
    body.need(hlen);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(buf.substr(body.pos, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("corrupt checkpoint header: ") + e.what());
    }
    body.pos += hlen;

    Checkpoint ck;
    ck.arch = header.at("arch");
    ck.precision = header.at("precision").get<std::string>();
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.epoch = header.at("epoch").get<std::uint32_t>();
    ck.metrics = header.value("metrics", nlohmann::json());
    if (ck.precision != "f64")
        throw IoError("unsupported checkpoint precision: " + ck.precision);

    const std::uint64_t n = body.u64();
    ck.blob.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t bits = body.u64();
        std::memcpy(&ck.blob[i], &bits, 8);
    }
    if (body.pos != body.len) throw IoError("trailing bytes in checkpoint: " + path);
    return ck;
}

namespace {

nlohmann::json describe_classification(const ClassificationConfig& cfg) {
    nlohmann::json ladder = nlohmann::json::array();
    for (const auto& s : cfg.ladder)
        ladder.push_back({s.channels, s.q_size, s.neighbors});
    return {{"type", "classification"},
            {"dim", cfg.dim},
            {"input_features", cfg.input_features},
            {"num_classes", cfg.num_classes},
            {"kernel_size", cfg.kernel_size},
            {"ladder", ladder}};
}

nlohmann::json describe_segmentation(const SegmentationConfig& cfg) {
    nlohmann::json enc = nlohmann::json::array();
    for (const auto& e : cfg.encoder)
        enc.push_back({e.channels, e.q_size, e.neighbors, e.q_same});
    nlohmann::json dec = nlohmann::json::array();
    for (const auto& d : cfg.decoder)
        dec.push_back({d.channels, d.neighbors, d.target_stage});
    return {{"type", "segmentation"},
            {"dim", cfg.dim},
            {"input_features", cfg.input_features},
            {"num_classes", cfg.num_classes},
            {"kernel_size", cfg.kernel_size},
            {"dropout", cfg.dropout_p},
            {"encoder", enc},
            {"decoder", dec}};
}

ClassificationNet classification_from_arch(const nlohmann::json& arch, Rng& rng) {
    ClassificationConfig cfg;
    cfg.dim = arch.at("dim").get<std::size_t>();
    cfg.input_features = arch.at("input_features").get<std::size_t>();
    cfg.num_classes = arch.at("num_classes").get<std::size_t>();
    cfg.kernel_size = arch.at("kernel_size").get<std::size_t>();
    for (const auto& s : arch.at("ladder"))
        cfg.ladder.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>(),
                              s.at(2).get<std::size_t>()});
    return ClassificationNet(cfg, rng);
}

SegmentationNet segmentation_from_arch(const nlohmann::json& arch, Rng& rng) {
    SegmentationConfig cfg;
    cfg.dim = arch.at("dim").get<std::size_t>();
    cfg.input_features = arch.at("input_features").get<std::size_t>();
    cfg.num_classes = arch.at("num_classes").get<std::size_t>();
    cfg.kernel_size = arch.at("kernel_size").get<std::size_t>();
    cfg.dropout_p = arch.at("dropout").get<double>();
    for (const auto& e : arch.at("encoder"))
        cfg.encoder.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(),
                               e.at(2).get<std::size_t>(), e.at(3).get<bool>()});
    for (const auto& d : arch.at("decoder"))
        cfg.decoder.push_back({d.at(0).get<std::size_t>(), d.at(1).get<std::size_t>(),
                               d.at(2).get<std::size_t>()});
    return SegmentationNet(cfg, rng);
}

} // namespace

std::vector<Parameter*> Model::all_params() {
    switch (kind) {
        case Kind::Classification: return classif.params();
        case Kind::Segmentation: return seg.params();
        case Kind::Fusion: {
            auto out = fusion.frozen_base_params();
            for (Parameter* p : fusion.params()) out.push_back(p);
            return out;
        }
    }
    throw ConfigError("Model: unknown kind");
}

nlohmann::json Model::describe() const {
    switch (kind) {
        case Kind::Classification: return describe_classification(classif.config());
        case Kind::Segmentation: return describe_segmentation(seg.config());
        case Kind::Fusion:
            return {{"type", "fusion"},
                    {"a", describe_segmentation(fusion.net_a.config())},
                    {"b", describe_segmentation(fusion.net_b.config())},
                    {"num_classes", fusion.num_classes}};
    }
    throw ConfigError("Model: unknown kind");
}

std::size_t Model::num_classes() const {
    switch (kind) {
        case Kind::Classification: return classif.config().num_classes;
        case Kind::Segmentation: return seg.config().num_classes;
        case Kind::Fusion: return fusion.num_classes;
    }
    throw ConfigError("Model: unknown kind");
}

Tensor Model::eval_forward(const Points& input, Rng& rng) const {
    switch (kind) {
        case Kind::Classification: return classif.forward(input, rng);
        case Kind::Segmentation: return seg.forward(input, rng, false);
        case Kind::Fusion: return fusion.forward(input, rng, false);
    }
    throw ConfigError("Model: unknown kind");
}

Model model_from_arch(const nlohmann::json& arch, Rng& rng) {
    Model m;
    const std::string type = arch.at("type").get<std::string>();
    if (type == "classification") {
        m.kind = Model::Kind::Classification;
        m.classif = classification_from_arch(arch, rng);
    } else if (type == "segmentation") {
        m.kind = Model::Kind::Segmentation;
        m.seg = segmentation_from_arch(arch, rng);
    } else if (type == "fusion") {
        m.kind = Model::Kind::Fusion;
        SegmentationNet a = segmentation_from_arch(arch.at("a"), rng);
        SegmentationNet b = segmentation_from_arch(arch.at("b"), rng);
        m.fusion = build_fusion(std::move(a), std::move(b),
                                arch.at("num_classes").get<std::size_t>(), rng);
    } else {
        throw IoError("unknown model type in checkpoint: " + type);
    }
    return m;
}

void save_model(const std::string& path, Model& model, std::uint64_t seed,
                std::uint32_t epoch, const nlohmann::json& metrics) {
    Checkpoint ck;
    ck.arch = model.describe();
    ck.seed = seed;
    ck.epoch = epoch;
    ck.metrics = metrics;
    for (Parameter* p : model.all_params())
        ck.blob.insert(ck.blob.end(), p->value.v.begin(), p->value.v.end());
    save_checkpoint(path, ck);
}

Model load_model(const std::string& path, Checkpoint* meta) {
    Checkpoint ck = load_checkpoint(path);
    Rng rng(ck.seed);
    Model m = model_from_arch(ck.arch, rng);
    std::size_t pos = 0;
    for (Parameter* p : m.all_params()) {
        if (pos + p->size() > ck.blob.size())
            throw IoError("checkpoint parameter blob too small: " + path);
        std::copy(ck.blob.begin() + pos, ck.blob.begin() + pos + p->size(),
                  p->value.v.begin());
        pos += p->size();
    }
    if (pos != ck.blob.size())
        throw IoError("checkpoint parameter blob size mismatch: " + path);
    if (meta) *meta = std::move(ck);
    return m;
}

} // namespace convpoint
