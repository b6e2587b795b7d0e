#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexcrf/model.hpp"
#include "lexcrf/train.hpp"

namespace lexcrf {

inline constexpr char kModelMagic[9] = "LEXCRF01";

namespace io_detail {

inline void write_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw IoError("model file truncated");
    uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<uint64_t>(b[k]) << (8 * k);
    return v;
}

inline uint64_t double_bits(double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    return v;
}

inline double bits_double(uint64_t v) {
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

inline void write_doubles(std::ostream& out, const std::vector<double>& v) {
    for (double d : v) write_u64(out, double_bits(d));
}

inline void read_doubles(std::istream& in, std::vector<double>& v, size_t count) {
    v.resize(count);
    for (size_t k = 0; k < count; ++k) v[k] = bits_double(read_u64(in));
}

inline std::string scheme_name(LabelScheme s) {
    switch (s) {
        case LabelScheme::ZeroOne: return "zero_one";
        case LabelScheme::Single: return "single";
        case LabelScheme::Multi: return "multi";
    }
    return "zero_one";
}

inline LabelScheme scheme_from(const std::string& s) {
    if (s == "zero_one") return LabelScheme::ZeroOne;
    if (s == "single") return LabelScheme::Single;
    if (s == "multi") return LabelScheme::Multi;
    throw IoError("unknown label scheme in model file: " + s);
}

inline std::string hex_bits(double d) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(double_bits(d)));
    return buf;
}

inline double from_hex_bits(const std::string& s) {
    return bits_double(std::strtoull(s.c_str(), nullptr, 16));
}

}  // namespace io_detail

inline void save_model(const std::string& path, const Checkpoint& ckpt,
                       bool with_optimizer = true) {
    const TrainedModel& m = ckpt.model;
    nlohmann::json manifest;
    manifest["format"] = 1;
    manifest["scheme"] = io_detail::scheme_name(m.cfg.scheme);
    manifest["lexicalized"] = m.cfg.lexicalized;
    manifest["dims"] = {{"d_emb", m.cfg.d_emb},   {"d_hidden", m.cfg.d_hidden},
                        {"window", m.cfg.window}, {"k_span", m.cfg.k_span},
                        {"k_arc", m.cfg.k_arc},   {"k_label", m.cfg.k_label}};
    manifest["loss"] = {{"use_reg", m.loss_cfg.use_reg},
                        {"penalty_c", m.loss_cfg.penalty_c},
                        {"use_head_aware", m.loss_cfg.use_head_aware},
                        {"w_tree", m.loss_cfg.w_tree},
                        {"w_label", m.loss_cfg.w_label},
                        {"w_reg", m.loss_cfg.w_reg},
                        {"negative_floor", m.loss_cfg.negative_floor}};
    manifest["labels"] = m.labels;
    manifest["vocab"] = m.vocab.words;
    manifest["tensors"] = nlohmann::json::array();
    for (const auto& e : m.params.entries)
        manifest["tensors"].push_back({{"name", e.name}, {"size", e.size}});
    manifest["optimizer"] = with_optimizer;
    manifest["epoch"] = ckpt.epoch;
    manifest["dev_f1_bits"] = io_detail::hex_bits(ckpt.dev_f1);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kModelMagic, 8);
    const std::string mjson = manifest.dump();
    io_detail::write_u64(out, mjson.size());
    out.write(mjson.data(), static_cast<std::streamsize>(mjson.size()));
    io_detail::write_doubles(out, m.params.flat);
    if (with_optimizer) {
        io_detail::write_doubles(out, ckpt.optimizer.m);
        io_detail::write_doubles(out, ckpt.optimizer.v);
        io_detail::write_u64(out, static_cast<uint64_t>(ckpt.optimizer.t));
    }
    if (!out) throw IoError("short write to " + path);
}

inline Checkpoint load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kModelMagic, 8) != 0)
        throw IoError(path + ": not a LEXCRF01 model file (magic/version mismatch)");
    uint64_t mlen = io_detail::read_u64(in);
    std::string mjson(mlen, '\0');
    in.read(mjson.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw IoError("model file truncated in manifest");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(mjson);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad model manifest: ") + e.what());
    }
    if (manifest.value("format", 0) != 1) throw IoError("unsupported model format version");

    Checkpoint ckpt;
    TrainedModel& m = ckpt.model;
    m.cfg.scheme = io_detail::scheme_from(manifest.at("scheme").get<std::string>());
    m.cfg.lexicalized = manifest.at("lexicalized").get<bool>();
    const auto& dims = manifest.at("dims");
    m.cfg.d_emb = dims.at("d_emb").get<int>();
    m.cfg.d_hidden = dims.at("d_hidden").get<int>();
    m.cfg.window = dims.at("window").get<int>();
    m.cfg.k_span = dims.at("k_span").get<int>();
    m.cfg.k_arc = dims.at("k_arc").get<int>();
    m.cfg.k_label = dims.at("k_label").get<int>();
    const auto& loss = manifest.at("loss");
    m.loss_cfg.scheme = m.cfg.scheme;
    m.loss_cfg.lexicalized = m.cfg.lexicalized;
    m.loss_cfg.use_reg = loss.at("use_reg").get<bool>();
    m.loss_cfg.penalty_c = loss.at("penalty_c").get<double>();
    m.loss_cfg.use_head_aware = loss.at("use_head_aware").get<bool>();
    m.loss_cfg.w_tree = loss.at("w_tree").get<double>();
    m.loss_cfg.w_label = loss.at("w_label").get<double>();
    m.loss_cfg.w_reg = loss.at("w_reg").get<double>();
    m.loss_cfg.negative_floor = loss.at("negative_floor").get<double>();
    m.labels = manifest.at("labels").get<std::vector<std::string>>();
    m.vocab = Vocab::from_words(manifest.at("vocab").get<std::vector<std::string>>());
    m.cfg.vocab_size = m.vocab.size();
    m.cfg.label_count = static_cast<int>(m.labels.size());

    m.params = build_params(m.cfg);
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != m.params.entries.size())
        throw IoError("model manifest does not match this build's parameter layout");
    for (size_t k = 0; k < m.params.entries.size(); ++k) {
        if (tensors[k].at("name").get<std::string>() != m.params.entries[k].name ||
            tensors[k].at("size").get<size_t>() != m.params.entries[k].size)
            throw IoError("model manifest tensor mismatch: " + m.params.entries[k].name);
    }
    io_detail::read_doubles(in, m.params.flat, m.params.size());
    if (manifest.at("optimizer").get<bool>()) {
        io_detail::read_doubles(in, ckpt.optimizer.m, m.params.size());
        io_detail::read_doubles(in, ckpt.optimizer.v, m.params.size());
        ckpt.optimizer.t = static_cast<long>(io_detail::read_u64(in));
    } else {
        ckpt.optimizer = AdamState::like(m.params);
    }
    ckpt.epoch = manifest.at("epoch").get<int>();
    ckpt.dev_f1 = io_detail::from_hex_bits(manifest.at("dev_f1_bits").get<std::string>());
    char extra;
    if (in.read(&extra, 1)) throw IoError("trailing bytes after model payload");
    return ckpt;
}

}  // namespace lexcrf
