#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "lexcrf/data.hpp"
#include "lexcrf/types.hpp"

namespace lexcrf {

// Span-level labeled scores. The unit of credit is a (span, label) pair, so a
// multilabel entity contributes one unit per label. Zero predictions give
// precision 0 by convention; 0/0 collapses to 0 throughout.
struct EvalReport {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::optional<double> head_accuracy;  // multi-word spans only; empty if none apply
    int shared_head_count = 0;
    long tp = 0, pred_units = 0, gold_units = 0;
    // rows: gold labels; columns: predicted labels plus the miss column.
    std::map<std::string, std::map<std::string, long>> confusion;
    static constexpr const char* kMiss = "(miss)";
};

inline EvalReport metrics_f1(const Dataset& pred, const Dataset& gold) {
    if (pred.size() != gold.size())
        throw InvalidInput("prediction/gold sentence counts differ");
    EvalReport rep;
    long head_total = 0, head_correct = 0;
    for (size_t s = 0; s < gold.size(); ++s) {
        if (pred[s].tokens != gold[s].tokens)
            throw InvalidInput("prediction/gold tokens differ at sentence " +
                               std::to_string(s));
        std::set<std::tuple<int, int, std::string>> gold_set, pred_set;
        std::map<std::pair<int, int>, const RecordEntity*> pred_at;
        for (const auto& e : gold[s].entities)
            for (const auto& l : e.labels) gold_set.insert({e.start, e.end, l});
        for (const auto& e : pred[s].entities) {
            pred_at[{e.start, e.end}] = &e;
            for (const auto& l : e.labels) pred_set.insert({e.start, e.end, l});
        }
        rep.gold_units += static_cast<long>(gold_set.size());
        rep.pred_units += static_cast<long>(pred_set.size());
        for (const auto& u : gold_set)
            if (pred_set.count(u)) ++rep.tp;

        for (const auto& e : gold[s].entities) {
            auto it = pred_at.find({e.start, e.end});
            for (const auto& l : e.labels) {
                std::string col = EvalReport::kMiss;
                if (it != pred_at.end()) {
                    const auto& plabels = it->second->labels;
                    if (std::find(plabels.begin(), plabels.end(), l) != plabels.end())
                        col = l;
                    else if (!plabels.empty())
                        col = plabels.front();  // labels are kept sorted
                }
                ++rep.confusion[l][col];
            }
        }

        // head accuracy over correctly-bracketed multi-word spans with gold heads
        for (const auto& e : gold[s].entities) {
            if (!e.head || e.start == e.end) continue;
            auto it = pred_at.find({e.start, e.end});
            if (it == pred_at.end() || !it->second->head) continue;
            ++head_total;
            if (*it->second->head == *e.head) ++head_correct;
        }

        // shared heads among predicted entities of this sentence
        std::map<int, int> by_head;
        for (const auto& e : pred[s].entities)
            if (e.head) ++by_head[*e.head];
        for (const auto& e : pred[s].entities)
            if (e.head && by_head[*e.head] > 1) ++rep.shared_head_count;
    }
    rep.precision = rep.pred_units > 0 ? static_cast<double>(rep.tp) / rep.pred_units : 0.0;
    rep.recall = rep.gold_units > 0 ? static_cast<double>(rep.tp) / rep.gold_units : 0.0;
    rep.f1 = (rep.precision + rep.recall) > 0
                 ? 2 * rep.precision * rep.recall / (rep.precision + rep.recall)
                 : 0.0;
    if (head_total > 0)
        rep.head_accuracy = static_cast<double>(head_correct) / head_total;
    return rep;
}

struct HeadMetrics {
    std::optional<double> accuracy;
    int shared_count = 0;
};

inline HeadMetrics head_metrics(const Dataset& pred, const Dataset& gold) {
    EvalReport rep = metrics_f1(pred, gold);
    return {rep.head_accuracy, rep.shared_head_count};
}

}  // namespace lexcrf
