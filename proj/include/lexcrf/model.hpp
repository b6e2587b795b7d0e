#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "lexcrf/data.hpp"
#include "lexcrf/decode.hpp"
#include "lexcrf/losses.hpp"
#include "lexcrf/params.hpp"
#include "lexcrf/scorer.hpp"

namespace lexcrf {

// A trained model: dimensions, loss switches, inventories and parameters.
struct TrainedModel {
    ModelConfig cfg;
    LossConfig loss_cfg;
    std::vector<std::string> labels;  // real entity labels, sorted
    Vocab vocab;
    ParamStore params;

    std::unordered_map<std::string, int> label_index() const {
        std::unordered_map<std::string, int> idx;
        for (size_t k = 0; k < labels.size(); ++k) idx[labels[k]] = static_cast<int>(k);
        return idx;
    }
};

struct DecodeOptions {
    double penalty_c = 0.0;  // 0 disables the decode-time constraint
    bool local = false;      // "-parsing": span-local decisions, no tree
};

inline Prediction decode_scores(const ScoreSet& scores, Scorer& scorer,
                                const LossConfig& cfg, const DecodeOptions& opts) {
    LabelScorer label_fn = [&](int i, int j, int h) {
        return cfg.lexicalized ? scorer.label_scores(i, j, h)
                               : scorer.label_scores_headless(i, j);
    };
    if (opts.local) return decode_local(scores, label_fn);
    if (cfg.lexicalized) {
        Penalty pen;
        const Penalty* pen_ptr = nullptr;
        if (opts.penalty_c > 0 && cfg.scheme == LabelScheme::ZeroOne) {
            pen = entity_candidate_penalty(scores, opts.penalty_c);
            pen_ptr = &pen;
        }
        LexTree tree = viterbi_lexicalized(scores, cfg.scheme, pen_ptr);
        return label_entities(tree, label_fn, cfg.scheme);
    }
    LexTree tree = viterbi_cyk(scores, cfg.scheme);
    if (cfg.scheme == LabelScheme::Multi) {
        Prediction pred = label_entities(tree, label_fn, cfg.scheme);
        for (auto& e : pred.entities) e.head = -1;  // no heads without the lexicalized chart
        return pred;
    }
    Prediction pred;
    for (const auto& c : tree.constituents) {
        if (cfg.scheme == LabelScheme::ZeroOne && c.label != 1) continue;
        std::vector<double> s = scorer.label_scores_headless(c.start, c.end);
        PredictedEntity e{c.start, c.end, {}, -1};
        const int offset = cfg.scheme == LabelScheme::Single ? 1 : 0;
        for (size_t l = offset; l < s.size(); ++l)
            if (s[l] > 0.0) e.labels.push_back(static_cast<int>(l) - offset);
        if (e.labels.empty()) {
            int best = 0;
            for (size_t l = 1; l < s.size(); ++l)
                if (s[l] > s[best]) best = static_cast<int>(l);
            if (cfg.scheme == LabelScheme::Single && best == 0) continue;
            e.labels.push_back(best - offset);
        }
        pred.entities.push_back(std::move(e));
    }
    return pred;
}

inline Prediction decode_sentence(const TrainedModel& model,
                                  const std::vector<std::string>& tokens,
                                  const DecodeOptions& opts = {}) {
    Sentence s{tokens};
    s.validate();
    Scorer scorer(model.cfg, model.params);
    ScoreSet scores = scorer.score(model.vocab.ids(tokens));
    return decode_scores(scores, scorer, model.loss_cfg, opts);
}

inline Record predict_record(const TrainedModel& model, const Record& input,
                             const DecodeOptions& opts = {}) {
    Prediction pred = decode_sentence(model, input.tokens, opts);
    Record out;
    out.tokens = input.tokens;
    for (const auto& e : pred.entities) {
        RecordEntity re;
        re.start = e.start;
        re.end = e.end;
        for (int l : e.labels) re.labels.push_back(model.labels.at(static_cast<size_t>(l)));
        std::sort(re.labels.begin(), re.labels.end());
        if (e.head >= 0) re.head = e.head;
        out.entities.push_back(std::move(re));
    }
    std::sort(out.entities.begin(), out.entities.end(),
              [](const RecordEntity& a, const RecordEntity& b) {
                  if (a.start != b.start) return a.start < b.start;
                  return a.end < b.end;
              });
    return out;
}

}  // namespace lexcrf
