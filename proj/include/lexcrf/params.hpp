#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "lexcrf/numeric.hpp"
#include "lexcrf/span_weights.hpp"
#include "lexcrf/types.hpp"

namespace lexcrf {

// Dimensions and switches of the trainable scorer.
struct ModelConfig {
    int vocab_size = 0;
    int label_count = 0;  // real entity labels
    LabelScheme scheme = LabelScheme::ZeroOne;
    bool lexicalized = true;
    int d_emb = 64;
    int d_hidden = 64;
    int window = 2;
    int k_span = 100;
    int k_arc = 100;
    int k_label = 100;

    int span_channels() const {
        return scheme == LabelScheme::Multi ? label_count + 1 : 2;
    }
    // Stage-II classes: real labels, plus a leading no-entity class for Single.
    int label_classes() const {
        if (scheme == LabelScheme::Multi) return 0;
        return scheme == LabelScheme::Single ? label_count + 1 : label_count;
    }

    void validate() const {
        if (vocab_size < 1 || label_count < 1) throw InvalidInput("empty vocab or label set");
        if (d_emb < 1 || d_hidden < 1 || window < 0 || k_span < 1 || k_arc < 1 ||
            k_label < 1)
            throw InvalidInput("model dimensions must be positive");
    }
};

// All parameters in one flat vector with a named-shape registry; keeps the
// optimizer, clipping, serialization and finite-difference probes trivial.
struct ParamStore {
    struct Entry {
        std::string name;
        size_t offset = 0;
        size_t size = 0;
        std::vector<int> dims;
    };

    std::vector<double> flat;
    std::vector<Entry> entries;
    std::unordered_map<std::string, size_t> index;

    void add(const std::string& name, std::vector<int> dims) {
        size_t sz = 1;
        for (int d : dims) sz *= static_cast<size_t>(d);
        index[name] = entries.size();
        entries.push_back({name, flat.size(), sz, std::move(dims)});
        flat.resize(flat.size() + sz, 0.0);
    }

    double* data(const std::string& name) { return flat.data() + at(name).offset; }
    const double* data(const std::string& name) const {
        return flat.data() + at(name).offset;
    }
    const Entry& at(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) throw UsageError("unknown parameter tensor: " + name);
        return entries[it->second];
    }
    size_t size() const { return flat.size(); }

    ParamStore zeros_like() const {
        ParamStore g = *this;
        std::fill(g.flat.begin(), g.flat.end(), 0.0);
        return g;
    }
};

inline ParamStore build_params(const ModelConfig& cfg) {
    cfg.validate();
    ParamStore p;
    const int win = 2 * cfg.window + 1;
    p.add("emb", {cfg.vocab_size, cfg.d_emb});
    p.add("mix_w", {cfg.d_hidden, win * cfg.d_emb});
    p.add("mix_b", {cfg.d_hidden});
    p.add("fwd_w", {cfg.d_hidden, cfg.d_hidden});
    p.add("fwd_b", {cfg.d_hidden});
    p.add("bwd_w", {cfg.d_hidden, cfg.d_hidden});
    p.add("bwd_b", {cfg.d_hidden});
    auto add_mlp = [&](const std::string& name, int k) {
        p.add(name + "_w", {k, 2 * cfg.d_hidden});
        p.add(name + "_b", {k});
    };
    add_mlp("span_in", cfg.k_span);
    add_mlp("span_out", cfg.k_span);
    add_mlp("arc_in", cfg.k_arc);
    add_mlp("arc_out", cfg.k_arc);
    p.add("w_span", {cfg.span_channels(), cfg.k_span + 1, cfg.k_span + 1});
    p.add("w_arc", {cfg.k_arc + 1, cfg.k_arc + 1});
    p.add("root", {cfg.k_arc + 1});
    if (cfg.label_classes() > 0) {
        add_mlp("label_in", cfg.k_label);
        add_mlp("label_out", cfg.k_label);
        add_mlp("label_head", cfg.k_label);
        p.add("w_label", {cfg.label_classes(), cfg.k_label + 1, cfg.k_label + 1,
                          cfg.k_label + 1});
    }
    return p;
}

// Deterministic fan-in scaled uniform init; raw mt19937_64 draws mapped by
// hand so the stream is identical across standard libraries.
inline void init_params(ParamStore& p, uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (const auto& e : p.entries) {
        double fan_in = e.dims.size() >= 2 ? static_cast<double>(e.dims.back()) : 1.0;
        if (e.dims.size() >= 3)
            fan_in = static_cast<double>(e.dims[1]) * static_cast<double>(e.dims[2]);
        double r = 1.0 / std::sqrt(fan_in);
        bool bias = e.dims.size() == 1 && e.name != "root";
        for (size_t k = 0; k < e.size; ++k)
            p.flat[e.offset + k] = bias ? 0.0 : uniform(rng, -r, r);
    }
}

}  // namespace lexcrf
