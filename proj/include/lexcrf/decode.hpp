#pragma once

#include <functional>
#include <vector>

#include "lexcrf/chart.hpp"
#include "lexcrf/marginals.hpp"
#include "lexcrf/numeric.hpp"
#include "lexcrf/span_weights.hpp"
#include "lexcrf/types.hpp"

namespace lexcrf {

struct Constituent {
    int start = 0;
    int end = 0;
    int label = 0;  // channel index; 0 = latent
    int head = 0;
};

struct DepArc {
    int parent = 0;  // == n means virtual root
    int child = 0;
};

// A 0-1 labeled lexicalized binary tree: bracketing with heads plus the
// embedded dependency arcs. Always exactly 2n-1 constituents.
struct LexTree {
    int n = 0;
    std::vector<Constituent> constituents;
    std::vector<DepArc> arcs;
    double score = kNegInf;  // chart root value (includes any decode penalty)
};

struct PredictedEntity {
    int start = 0;
    int end = 0;
    std::vector<int> labels;
    int head = -1;  // -1 when the decoding path carries no heads
};

struct Prediction {
    std::vector<PredictedEntity> entities;
};

namespace detail {

inline int argmax_open_channel(const SpanWeights& weights, const ScoreSet& scores, int i,
                               int j) {
    uint32_t open = weights.open_at(i, j);
    int best = -1;
    double best_v = kNegInf;
    for (int c = 0; c < scores.channels; ++c)
        if (open & (1u << c))
            if (best < 0 || scores.span_at(i, j, c) > best_v) {
                best = c;
                best_v = scores.span_at(i, j, c);
            }
    return best < 0 ? 0 : best;
}

inline void extract_headed(const Chart& chart, const ScoreSet& scores, int i, int j, int h,
                           LexTree& tree) {
    tree.constituents.push_back(
        {i, j, argmax_open_channel(chart.weights, scores, i, j), h});
    if (i == j) return;
    int r = chart.bp_split[chart.hp_index(i, j, h)];
    if (r < 0) throw InvalidInput("viterbi chart has no derivation for a required cell");
    if (r < h) {
        int child = chart.bp_head[chart.hp_index(i, r, h)];
        tree.arcs.push_back({h, child});
        extract_headed(chart, scores, i, r, child, tree);
        extract_headed(chart, scores, r + 1, j, h, tree);
    } else {
        int child = chart.bp_head[chart.hp_index(r + 1, j, h)];
        tree.arcs.push_back({h, child});
        extract_headed(chart, scores, i, r, h, tree);
        extract_headed(chart, scores, r + 1, j, child, tree);
    }
}

}  // namespace detail

// Stage I: best 0-1 labeled lexicalized tree under the max semiring. Ties
// break toward the lower split point, then the lower head index.
inline LexTree viterbi_lexicalized(const ScoreSet& scores, LabelScheme scheme,
                                   const Penalty* decode_penalty = nullptr) {
    Chart chart = inside_eisner_satta(scores, scheme, nullptr, Semiring::Max, decode_penalty);
    LexTree tree;
    tree.n = chart.n;
    tree.score = chart.root;
    tree.arcs.push_back({chart.n, chart.root_head});
    detail::extract_headed(chart, scores, 0, chart.n - 1, chart.root_head, tree);
    return tree;
}

// Recomputes the tree's chart value following the derivation's own operation
// order, so the result matches the chart root bit for bit.
inline double rescore_like_chart(const LexTree& tree, const ScoreSet& scores,
                                 LabelScheme scheme, const Penalty* penalty = nullptr) {
    const int n = tree.n;
    SpanWeights weights = build_span_weights(scores, scheme, nullptr, Fold::Max);
    std::vector<int> head_of(static_cast<size_t>(n) * n, -1);
    for (const auto& c : tree.constituents)
        head_of[static_cast<size_t>(c.start) * n + c.end] = c.head;
    const double c = penalty ? penalty->constant : 0.0;

    std::function<double(int, int, int)> value = [&](int i, int j, int h) -> double {
        if (i == j) return weights.at(i, i);
        // find the split: the unique r with both (i,r) and (r+1,j) present
        int split = -1;
        for (int r = i; r < j; ++r)
            if (head_of[static_cast<size_t>(i) * n + r] >= 0 &&
                head_of[static_cast<size_t>(r + 1) * n + j] >= 0) {
                split = r;
                break;
            }
        if (split < 0) throw InvalidInput("tree is not a binary bracketing");
        int lh = head_of[static_cast<size_t>(i) * n + split];
        int rh = head_of[static_cast<size_t>(split + 1) * n + j];
        double term;
        if (lh == h && split >= h) {
            double hv = value(i, split, h);
            if (penalty && penalty->targeted(i, split, n)) hv = hv + -c;
            term = hv + (value(split + 1, j, rh) + scores.arc_at(h, rh));
        } else if (rh == h && split < h) {
            double hv = value(split + 1, j, h);
            if (penalty && penalty->targeted(split + 1, j, n)) hv = hv + -c;
            term = (value(i, split, lh) + scores.arc_at(h, lh)) + hv;
        } else {
            throw InvalidInput("inconsistent head inheritance in tree");
        }
        return weights.at(i, j) + term;
    };
    int root_head = head_of[static_cast<size_t>(0) * n + (n - 1)];
    return value(0, n - 1, root_head) + scores.arc_at(n, root_head);
}

// Plain additive tree score: chosen-channel span scores plus arc scores.
inline double tree_score(const LexTree& tree, const ScoreSet& scores) {
    double s = 0.0;
    for (const auto& c : tree.constituents) s += scores.span_at(c.start, c.end, c.label);
    for (const auto& a : tree.arcs) s += scores.arc_at(a.parent, a.child);
    return s;
}

inline void check_tree_invariants(const LexTree& tree) {
    const int n = tree.n;
    if (static_cast<int>(tree.constituents.size()) != 2 * n - 1)
        throw InvalidInput("tree must have exactly 2n-1 constituents");
    if (static_cast<int>(tree.arcs.size()) != n) throw InvalidInput("tree must have n arcs");
    std::vector<int> head_of(static_cast<size_t>(n) * n, -1);
    for (const auto& c : tree.constituents) {
        if (c.start < 0 || c.end >= n || c.start > c.end || c.head < c.start ||
            c.head > c.end)
            throw InvalidInput("constituent out of range");
        head_of[static_cast<size_t>(c.start) * n + c.end] = c.head;
    }
    for (const auto& c : tree.constituents) {
        if (c.start == c.end) {
            if (c.head != c.start) throw InvalidInput("leaf must head itself");
            continue;
        }
        bool ok = false;
        for (int r = c.start; r < c.end && !ok; ++r) {
            int lh = head_of[static_cast<size_t>(c.start) * n + r];
            int rh = head_of[static_cast<size_t>(r + 1) * n + c.end];
            if (lh >= 0 && rh >= 0 && (lh == c.head || rh == c.head)) ok = true;
        }
        if (!ok) throw InvalidInput("constituent head not inherited from a child");
    }
}

// Decode-time penalty targets: spans whose entity channel beats the latent
// one, the candidates the exclusive-head constraint should discourage from
// being governed past.
inline Penalty entity_candidate_penalty(const ScoreSet& scores, double constant) {
    if (scores.channels != 2)
        throw InvalidInput("decode penalty targets require the 0-1 label scheme");
    Penalty pen;
    pen.constant = constant;
    pen.targets.assign(static_cast<size_t>(scores.n) * scores.n, 0);
    for (int i = 0; i < scores.n; ++i)
        for (int j = i; j < scores.n; ++j)
            if (scores.span_at(i, j, 1) > scores.span_at(i, j, 0))
                pen.targets[static_cast<size_t>(i) * scores.n + j] = 1;
    return pen;
}

// Stage II: assign entity labels to the tree's entity constituents.
// label_scorer(i, j, h) returns one real score per label; with ZeroOne the
// vector covers the real labels, with Single index 0 is the no-entity class.
using LabelScorer = std::function<std::vector<double>(int, int, int)>;

inline Prediction label_entities(const LexTree& tree, const LabelScorer& scorer,
                                 LabelScheme scheme) {
    Prediction pred;
    for (const auto& c : tree.constituents) {
        if (scheme == LabelScheme::ZeroOne) {
            if (c.label != 1) continue;
            std::vector<double> s = scorer(c.start, c.end, c.head);
            PredictedEntity e{c.start, c.end, {}, c.head};
            for (size_t l = 0; l < s.size(); ++l)
                if (s[l] > 0.0) e.labels.push_back(static_cast<int>(l));
            if (e.labels.empty()) {
                // stage I already committed to entity-hood; fall back to argmax
                int best = 0;
                for (size_t l = 1; l < s.size(); ++l)
                    if (s[l] > s[best]) best = static_cast<int>(l);
                e.labels.push_back(best);
            }
            pred.entities.push_back(std::move(e));
        } else if (scheme == LabelScheme::Single) {
            std::vector<double> s = scorer(c.start, c.end, c.head);
            PredictedEntity e{c.start, c.end, {}, c.head};
            for (size_t l = 1; l < s.size(); ++l)
                if (s[l] > 0.0) e.labels.push_back(static_cast<int>(l) - 1);
            if (e.labels.empty()) {
                int best = 0;
                for (size_t l = 1; l < s.size(); ++l)
                    if (s[l] > s[best]) best = static_cast<int>(l);
                if (best == 0) continue;  // no-entity class wins
                e.labels.push_back(best - 1);
            }
            pred.entities.push_back(std::move(e));
        } else {  // Multi: labels were decided inside the tree
            if (c.label == 0) continue;
            pred.entities.push_back({c.start, c.end, {c.label - 1}, c.head});
        }
    }
    return pred;
}

// CYK Viterbi for the non-lexicalized ablations; heads do not exist here.
inline LexTree viterbi_cyk(const ScoreSet& scores, LabelScheme scheme) {
    CykChart chart = inside_cyk(scores, scheme, nullptr, Semiring::Max);
    LexTree tree;
    tree.n = chart.n;
    tree.score = chart.root;
    std::function<void(int, int)> rec = [&](int i, int j) {
        tree.constituents.push_back(
            {i, j, detail::argmax_open_channel(chart.weights, scores, i, j), i});
        if (i == j) return;
        int r = chart.bp_split[chart.index(i, j)];
        rec(i, r);
        rec(r + 1, j);
    };
    rec(0, chart.n - 1);
    return tree;
}

// "-parsing" ablation: drop the tree constraint and emit every span whose
// entity channel beats the latent one; heads come from the free chart's
// head posteriors.
inline Prediction decode_local(const ScoreSet& scores, const LabelScorer& scorer) {
    if (scores.channels != 2)
        throw InvalidInput("local decoding is defined for the 0-1 label scheme");
    const int n = scores.n;
    Chart chart = inside_eisner_satta(scores, LabelScheme::ZeroOne);
    Marginals marg = backward_marginals(chart, scores);
    Prediction pred;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            if (!(scores.span_at(i, j, 1) > scores.span_at(i, j, 0))) continue;
            auto alpha = marg.head_alpha(i, j);
            int head = i;
            for (int h = i; h <= j; ++h)
                if (alpha[h - i] > alpha[head - i]) head = h;
            std::vector<double> s = scorer(i, j, head);
            PredictedEntity e{i, j, {}, head};
            for (size_t l = 0; l < s.size(); ++l)
                if (s[l] > 0.0) e.labels.push_back(static_cast<int>(l));
            if (e.labels.empty()) {
                int best = 0;
                for (size_t l = 1; l < s.size(); ++l)
                    if (s[l] > s[best]) best = static_cast<int>(l);
                e.labels.push_back(best);
            }
            pred.entities.push_back(std::move(e));
        }
    return pred;
}

}  // namespace lexcrf
