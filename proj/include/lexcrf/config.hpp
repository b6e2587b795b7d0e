#pragma once

#include <fstream>
#include <map>
#include <string>

#include "lexcrf/train.hpp"

namespace lexcrf {

namespace config_detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InvalidInput("config: bad boolean for " + key + ": " + v);
}

inline LabelScheme parse_scheme(const std::string& v) {
    if (v == "zero_one") return LabelScheme::ZeroOne;
    if (v == "single") return LabelScheme::Single;
    if (v == "multi") return LabelScheme::Multi;
    throw InvalidInput("config: unknown scheme " + v +
                       " (expected zero_one, single or multi)");
}

}  // namespace config_detail

// key=value lines; '#' starts a comment; unknown keys are rejected.
inline TrainConfig parse_train_config(std::istream& in) {
    using namespace config_detail;
    TrainConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidInput("config line " + std::to_string(line_no) +
                               ": expected key=value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "epochs") cfg.epochs = std::stoi(value);
            else if (key == "batch_size") cfg.batch_size = std::stoi(value);
            else if (key == "lr") cfg.lr = std::stod(value);
            else if (key == "warmup_epochs") cfg.warmup_epochs = std::stoi(value);
            else if (key == "penalty_c") cfg.penalty_c = std::stod(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "clip_norm") cfg.clip_norm = std::stod(value);
            else if (key == "threads") cfg.threads = std::stoi(value);
            else if (key == "scheme") cfg.scheme = parse_scheme(value);
            else if (key == "lexicalized") cfg.lexicalized = parse_bool(value, key);
            else if (key == "use_reg") cfg.use_reg = parse_bool(value, key);
            else if (key == "use_head_aware") cfg.use_head_aware = parse_bool(value, key);
            else if (key == "joint_head_grads") cfg.joint_head_grads = parse_bool(value, key);
            else if (key == "w_tree") cfg.w_tree = std::stod(value);
            else if (key == "w_label") cfg.w_label = std::stod(value);
            else if (key == "w_reg") cfg.w_reg = std::stod(value);
            else if (key == "d_emb") cfg.d_emb = std::stoi(value);
            else if (key == "d_hidden") cfg.d_hidden = std::stoi(value);
            else if (key == "window") cfg.window = std::stoi(value);
            else if (key == "k_span") cfg.k_span = std::stoi(value);
            else if (key == "k_arc") cfg.k_arc = std::stoi(value);
            else if (key == "k_label") cfg.k_label = std::stoi(value);
            else
                throw InvalidInput("config line " + std::to_string(line_no) +
                                   ": unknown key " + key);
        } catch (const std::invalid_argument&) {
            throw InvalidInput("config line " + std::to_string(line_no) + ": bad value for " +
                               key);
        }
    }
    cfg.validate();
    return cfg;
}

inline TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    return parse_train_config(in);
}

}  // namespace lexcrf
