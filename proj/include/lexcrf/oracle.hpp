#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lexcrf/numeric.hpp"
#include "lexcrf/span_weights.hpp"
#include "lexcrf/types.hpp"

namespace lexcrf::oracle {

// Brute-force ground truth for small sentences: enumerate every lexicalized
// binary tree skeleton (bracketing plus head inheritance) and compute sums,
// maxima, marginals and KL by explicit summation. Label assignments are folded
// analytically per constituent, so the cost is polynomial in the channel count.

inline constexpr int kMaxTokens = 7;

struct Node {
    int i, j, h;
    int parent_head;  // -2 unset, -1 virtual root, otherwise a token index
};

struct Tree {
    std::vector<Node> nodes;  // own root constituent is nodes.back()
    int head() const { return nodes.back().h; }
};

namespace detail {

inline std::vector<Tree> enumerate_range(int i, int j) {
    if (i == j) {
        Tree leaf;
        leaf.nodes.push_back({i, i, i, -2});
        return {leaf};
    }
    std::vector<Tree> out;
    for (int r = i; r < j; ++r) {
        auto lefts = enumerate_range(i, r);
        auto rights = enumerate_range(r + 1, j);
        for (const auto& lt : lefts)
            for (const auto& rt : rights)
                for (int inherit_left = 1; inherit_left >= 0; --inherit_left) {
                    Tree t;
                    t.nodes = lt.nodes;
                    t.nodes.insert(t.nodes.end(), rt.nodes.begin(), rt.nodes.end());
                    int h = inherit_left ? lt.head() : rt.head();
                    // sub-roots sit at fixed offsets: end of each copied block
                    t.nodes[lt.nodes.size() - 1].parent_head = h;
                    t.nodes.back().parent_head = h;
                    t.nodes.push_back({i, j, h, -2});
                    out.push_back(std::move(t));
                }
    }
    return out;
}

}  // namespace detail

inline std::vector<Tree> enumerate_lex_trees(int n) {
    if (n < 1) throw InvalidInput("enumeration requires n >= 1");
    if (n > kMaxTokens) throw InvalidInput("enumeration bound exceeded (n <= 7)");
    auto trees = detail::enumerate_range(0, n - 1);
    for (auto& t : trees) t.nodes.back().parent_head = -1;
    return trees;
}

struct Penalty {
    double constant = 0.0;
    std::vector<uint8_t> targets;  // n*n, true iff the span is penalized
    bool targeted(int i, int j, int n) const {
        return !targets.empty() && targets[static_cast<size_t>(i) * n + j] != 0;
    }
};

struct Quantities {
    double log_z = kNegInf;
    double max_score = kNegInf;
    std::vector<double> span_mu;      // n*n*channels, under the unpenalized chart
    std::vector<double> arc_mu;       // (n+1)*n
    std::vector<double> cell_mu;      // n*n*n   P(span (i,j) headed by h)
    std::vector<double> complete_mu;  // n*n*n   P(that item consumed by a complete rule)
    double log_z_penalized = kNegInf;
    double expected_penalty_count = 0.0;  // under the penalized distribution
    double kl = 0.0;                      // KL(penalized || unpenalized)
    int surviving_trees = 0;

    double alpha(int i, int j, int h, int n) const {
        double tot = 0.0;
        for (int k = i; k <= j; ++k) tot += cell_mu[(static_cast<size_t>(i) * n + j) * n + k];
        double v = cell_mu[(static_cast<size_t>(i) * n + j) * n + h];
        return tot > 0 ? v / tot : 0.0;
    }
};

inline Quantities oracle_quantities(const ScoreSet& scores, LabelScheme scheme,
                                    const MaskPlan* mask = nullptr,
                                    const Penalty* penalty = nullptr) {
    const int n = scores.n;
    const int C = scores.channels;
    auto weights = build_span_weights(scores, scheme, mask);
    auto trees = enumerate_lex_trees(n);

    struct TreeEval {
        const Tree* tree;
        double log_w;      // folded log weight (labels summed)
        double log_w_max;  // per-span max over open channels
        int penalty_count;
    };
    std::vector<TreeEval> evals;
    evals.reserve(trees.size());
    for (const auto& t : trees) {
        double lw = 0.0, lmax = 0.0;
        int count = 0;
        bool dead = false;
        for (const auto& nd : t.nodes) {
            double w = weights.at(nd.i, nd.j);
            if (is_neg_inf(w)) {
                dead = true;
                break;
            }
            lw += w;
            double best = kNegInf;
            uint32_t open = weights.open_at(nd.i, nd.j);
            for (int c = 0; c < C; ++c)
                if (open & (1u << c)) best = std::max(best, scores.span_at(nd.i, nd.j, c));
            lmax += best;
            if (nd.parent_head == -1) {
                lw += scores.arc_at(n, nd.h);
                lmax += scores.arc_at(n, nd.h);
            } else if (nd.parent_head != nd.h) {
                lw += scores.arc_at(nd.parent_head, nd.h);
                lmax += scores.arc_at(nd.parent_head, nd.h);
            } else {
                if (penalty && penalty->targeted(nd.i, nd.j, n)) ++count;
            }
        }
        if (!dead) evals.push_back({&t, lw, lmax, count});
    }

    Quantities q;
    q.span_mu.assign(static_cast<size_t>(n) * n * C, 0.0);
    q.arc_mu.assign(static_cast<size_t>(n + 1) * n, 0.0);
    q.cell_mu.assign(static_cast<size_t>(n) * n * n, 0.0);
    q.complete_mu.assign(static_cast<size_t>(n) * n * n, 0.0);
    q.surviving_trees = static_cast<int>(evals.size());
    if (evals.empty()) return q;

    std::vector<double> lw(evals.size()), lq(evals.size());
    const double c = penalty ? penalty->constant : 0.0;
    for (size_t t = 0; t < evals.size(); ++t) {
        lw[t] = evals[t].log_w;
        lq[t] = evals[t].log_w - c * evals[t].penalty_count;
        q.max_score = std::max(q.max_score, evals[t].log_w_max);
    }
    q.log_z = log_sum_exp(lw);
    q.log_z_penalized = log_sum_exp(lq);

    for (size_t t = 0; t < evals.size(); ++t) {
        double p_t = std::exp(lw[t] - q.log_z);
        double q_t = std::exp(lq[t] - q.log_z_penalized);
        q.expected_penalty_count += q_t * evals[t].penalty_count;
        q.kl += q_t * ((lq[t] - q.log_z_penalized) - (lw[t] - q.log_z));
        for (const auto& nd : evals[t].tree->nodes) {
            size_t cell = (static_cast<size_t>(nd.i) * n + nd.j) * n + nd.h;
            q.cell_mu[cell] += p_t;
            if (nd.parent_head == nd.h) q.complete_mu[cell] += p_t;
            double total = weights.at(nd.i, nd.j);
            uint32_t open = weights.open_at(nd.i, nd.j);
            for (int ch = 0; ch < C; ++ch)
                if (open & (1u << ch))
                    q.span_mu[(static_cast<size_t>(nd.i) * n + nd.j) * C + ch] +=
                        p_t * std::exp(scores.span_at(nd.i, nd.j, ch) - total);
            if (nd.parent_head == -1)
                q.arc_mu[static_cast<size_t>(n) * n + nd.h] += p_t;
            else if (nd.parent_head != nd.h)
                q.arc_mu[static_cast<size_t>(nd.parent_head) * n + nd.h] += p_t;
        }
    }
    if (q.kl < 0 && q.kl > -1e-12) q.kl = 0.0;
    return q;
}

// CYK counterpart: unlexicalized bracketings, span weights only.
inline double oracle_cyk_log_z(const ScoreSet& scores, LabelScheme scheme,
                               const MaskPlan* mask = nullptr) {
    const int n = scores.n;
    auto weights = build_span_weights(scores, scheme, mask);
    auto trees = enumerate_lex_trees(n);  // heads ignored; dedupe bracketings
    std::vector<double> vals;
    for (const auto& t : trees) {
        // keep only trees whose every head is the leftmost token of its span:
        // exactly one such head assignment exists per bracketing.
        bool canonical = true;
        for (const auto& nd : t.nodes)
            if (nd.h != nd.i) {
                canonical = false;
                break;
            }
        if (!canonical) continue;
        double lw = 0.0;
        bool dead = false;
        for (const auto& nd : t.nodes) {
            double w = weights.at(nd.i, nd.j);
            if (is_neg_inf(w)) {
                dead = true;
                break;
            }
            lw += w;
        }
        if (!dead) vals.push_back(lw);
    }
    return log_sum_exp(vals);
}

}  // namespace lexcrf::oracle
