#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lexcrf/types.hpp"

namespace lexcrf {

struct RecordEntity {
    int start = 0;
    int end = 0;  // inclusive
    std::vector<std::string> labels;
    std::optional<int> head;

    bool operator==(const RecordEntity& o) const {
        return start == o.start && end == o.end && labels == o.labels && head == o.head;
    }
};

struct Record {
    std::vector<std::string> tokens;
    std::vector<RecordEntity> entities;

    bool operator==(const Record& o) const {
        return tokens == o.tokens && entities == o.entities;
    }
};

using Dataset = std::vector<Record>;

// Prediction files may carry crossing spans (span-local decoding emits them);
// gold and training data must not.
inline void validate_record(const Record& r, const std::string& where,
                            bool allow_crossing = false) {
    if (r.tokens.empty()) throw InvalidInput(where + ": empty token list");
    const int n = static_cast<int>(r.tokens.size());
    for (const auto& t : r.tokens)
        if (t.empty()) throw InvalidInput(where + ": empty token");
    for (size_t a = 0; a < r.entities.size(); ++a) {
        const auto& e = r.entities[a];
        if (e.start < 0 || e.end < e.start || e.end >= n)
            throw InvalidInput(where + ": entity span out of range or end < start");
        if (e.labels.empty()) throw InvalidInput(where + ": entity with no labels");
        if (e.head && (*e.head < e.start || *e.head > e.end))
            throw InvalidInput(where + ": entity head outside its span");
        for (size_t b = a + 1; b < r.entities.size(); ++b) {
            const auto& f = r.entities[b];
            if (e.start == f.start && e.end == f.end)
                throw InvalidInput(where + ": duplicate entity span");
            if (!allow_crossing && spans_cross(e.start, e.end, f.start, f.end))
                throw InvalidInput(where + ": crossing entity spans");
        }
    }
}

inline Record record_from_json(const nlohmann::json& j, const std::string& where,
                               bool allow_crossing = false) {
    if (!j.is_object() || !j.contains("tokens") || !j.contains("entities"))
        throw InvalidInput(where + ": record needs 'tokens' and 'entities'");
    Record r;
    for (const auto& t : j.at("tokens")) r.tokens.push_back(t.get<std::string>());
    for (const auto& je : j.at("entities")) {
        RecordEntity e;
        e.start = je.at("start").get<int>();
        e.end = je.at("end").get<int>();
        for (const auto& l : je.at("labels")) e.labels.push_back(l.get<std::string>());
        std::sort(e.labels.begin(), e.labels.end());
        if (je.contains("head") && !je.at("head").is_null()) e.head = je.at("head").get<int>();
        r.entities.push_back(std::move(e));
    }
    std::sort(r.entities.begin(), r.entities.end(),
              [](const RecordEntity& a, const RecordEntity& b) {
                  if (a.start != b.start) return a.start < b.start;
                  return a.end < b.end;
              });
    validate_record(r, where, allow_crossing);
    return r;
}

inline nlohmann::json record_to_json(const Record& r) {
    nlohmann::json j;
    j["tokens"] = r.tokens;
    j["entities"] = nlohmann::json::array();
    for (const auto& e : r.entities) {
        nlohmann::json je;
        je["start"] = e.start;
        je["end"] = e.end;
        je["labels"] = e.labels;
        if (e.head) je["head"] = *e.head;
        j["entities"].push_back(std::move(je));
    }
    return j;
}

inline Dataset load_jsonl(const std::string& path, bool allow_crossing = false) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    Dataset out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw InvalidInput(where + ": " + e.what());
        }
        out.push_back(record_from_json(j, where, allow_crossing));
    }
    return out;
}

inline void save_jsonl(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& r : data) out << record_to_json(r).dump() << "\n";
}

// Label inventory: sorted distinct label strings of a dataset.
inline std::vector<std::string> collect_labels(const Dataset& data) {
    std::set<std::string> set;
    for (const auto& r : data)
        for (const auto& e : r.entities)
            for (const auto& l : e.labels) set.insert(l);
    return {set.begin(), set.end()};
}

// Token vocabulary; id 0 is reserved for unknown tokens.
struct Vocab {
    std::vector<std::string> words{"<unk>"};
    std::unordered_map<std::string, int> index;

    static Vocab build(const Dataset& data) {
        Vocab v;
        for (const auto& r : data)
            for (const auto& t : r.tokens)
                if (!v.index.count(t)) {
                    v.index[t] = static_cast<int>(v.words.size());
                    v.words.push_back(t);
                }
        return v;
    }

    static Vocab from_words(std::vector<std::string> words) {
        Vocab v;
        v.words = std::move(words);
        v.index.clear();
        for (size_t k = 1; k < v.words.size(); ++k)
            v.index[v.words[k]] = static_cast<int>(k);
        return v;
    }

    int id(const std::string& w) const {
        auto it = index.find(w);
        return it == index.end() ? 0 : it->second;
    }
    std::vector<int> ids(const std::vector<std::string>& tokens) const {
        std::vector<int> out;
        out.reserve(tokens.size());
        for (const auto& t : tokens) out.push_back(id(t));
        return out;
    }
    int size() const { return static_cast<int>(words.size()); }
};

// Gold entities with label ids; unknown label strings are rejected.
inline EntitySet to_entity_set(const Record& r,
                               const std::unordered_map<std::string, int>& label_index) {
    std::vector<GoldSpan> spans;
    for (const auto& e : r.entities) {
        GoldSpan s;
        s.start = e.start;
        s.end = e.end;
        s.head = e.head;
        for (const auto& l : e.labels) {
            auto it = label_index.find(l);
            if (it == label_index.end()) throw InvalidInput("label not in inventory: " + l);
            s.labels.push_back(it->second);
        }
        spans.push_back(std::move(s));
    }
    return EntitySet(std::move(spans));
}

}  // namespace lexcrf
