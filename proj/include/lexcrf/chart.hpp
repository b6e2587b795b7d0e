#pragma once

#include <cstdint>
#include <vector>

#include "lexcrf/numeric.hpp"
#include "lexcrf/span_weights.hpp"
#include "lexcrf/types.hpp"

namespace lexcrf {

enum class Semiring { LogSum, Max };

// Soft exclusive-head constraint: subtract `constant` from a targeted headed
// span whenever it is consumed by a complete rule, i.e. whenever its head goes
// on to govern more material. The attach rule of the cell itself always sees
// the unpenalized value, so a head's first use of a targeted span is free.
struct Penalty {
    double constant = 0.0;
    std::vector<uint8_t> targets;  // n*n

    bool targeted(int i, int j, int n) const {
        return !targets.empty() && targets[static_cast<size_t>(i) * n + j] != 0;
    }
};

// Training-time targets: the gold entity spans.
inline Penalty gold_span_targets(const EntitySet& gold, int n, double c) {
    Penalty pen;
    pen.constant = c;
    pen.targets.assign(static_cast<size_t>(n) * n, 0);
    for (const auto& e : gold.spans)
        pen.targets[static_cast<size_t>(e.start) * n + e.end] = 1;
    return pen;
}

// Headed-span table H[i,j,h] (i <= h <= j) and pending-attachment table
// P[i,j,p] (p outside [i,j]); the virtual-root attachment is folded into the
// root value rather than stored as an extra parent column.
struct Chart {
    int n = 0;
    Semiring semiring = Semiring::LogSum;
    SpanWeights weights;
    Penalty penalty;
    bool has_penalty = false;
    std::vector<double> H;  // n*n*n
    std::vector<double> P;  // n*n*n
    double root = kNegInf;
    // Max-semiring backpointers.
    std::vector<int32_t> bp_split;  // per H cell
    std::vector<int32_t> bp_head;   // per P cell
    int32_t root_head = -1;

    size_t hp_index(int i, int j, int k) const {
        return (static_cast<size_t>(i) * n + j) * n + k;
    }
    double h_at(int i, int j, int h) const { return H[hp_index(i, j, h)]; }
    double p_at(int i, int j, int p) const { return P[hp_index(i, j, p)]; }
};

// Inside pass of the lexicalized parser. Width bands are computed in order;
// every (i, h) cell within a band depends only on earlier bands, so bands
// could be filled concurrently.
inline Chart inside_eisner_satta(const ScoreSet& scores, const SpanWeights& weights,
                                 Semiring semiring = Semiring::LogSum,
                                 const Penalty* penalty = nullptr) {
    const int n = scores.n;
    if (n < 1) throw InvalidInput("inside pass on an empty sentence");
    scores.check_finite();
    if (penalty && penalty->constant < 0) throw InvalidInput("penalty constant must be >= 0");

    Chart chart;
    chart.n = n;
    chart.semiring = semiring;
    chart.weights = weights;
    if (penalty) {
        chart.penalty = *penalty;
        chart.has_penalty = true;
    }
    const size_t cells = static_cast<size_t>(n) * n * n;
    chart.H.assign(cells, kNegInf);
    chart.P.assign(cells, kNegInf);
    const bool viterbi = semiring == Semiring::Max;
    if (viterbi) {
        chart.bp_split.assign(cells, -1);
        chart.bp_head.assign(cells, -1);
    }
    const double c = penalty ? penalty->constant : 0.0;

    auto h_penalized = [&](int i, int j, int h) {
        double v = chart.H[chart.hp_index(i, j, h)];
        if (penalty && penalty->targeted(i, j, n)) return log_mul(v, -c);
        return v;
    };

    std::vector<double> buf;
    for (int w = 0; w < n; ++w) {
        for (int i = 0; i + w < n; ++i) {
            const int j = i + w;
            if (w == 0) {
                chart.H[chart.hp_index(i, i, i)] = weights.at(i, i);
            } else {
                for (int h = i; h <= j; ++h) {
                    const size_t cell = chart.hp_index(i, j, h);
                    if (viterbi) {
                        double best = kNegInf;
                        int best_r = -1;
                        for (int r = i; r < h; ++r) {
                            double t = log_mul(chart.p_at(i, r, h), h_penalized(r + 1, j, h));
                            if (t > best) {
                                best = t;
                                best_r = r;
                            }
                        }
                        for (int r = h; r < j; ++r) {
                            double t = log_mul(h_penalized(i, r, h), chart.p_at(r + 1, j, h));
                            if (t > best) {
                                best = t;
                                best_r = r;
                            }
                        }
                        chart.H[cell] = log_mul(weights.at(i, j), best);
                        chart.bp_split[cell] = best_r;
                    } else {
                        buf.clear();
                        for (int r = i; r < h; ++r)
                            buf.push_back(log_mul(chart.p_at(i, r, h), h_penalized(r + 1, j, h)));
                        for (int r = h; r < j; ++r)
                            buf.push_back(log_mul(h_penalized(i, r, h), chart.p_at(r + 1, j, h)));
                        chart.H[cell] = log_mul(weights.at(i, j), log_sum_exp(buf));
                    }
                }
            }
            for (int p = 0; p < n; ++p) {
                if (p >= i && p <= j) continue;
                const size_t cell = chart.hp_index(i, j, p);
                if (viterbi) {
                    double best = kNegInf;
                    int best_h = -1;
                    for (int h = i; h <= j; ++h) {
                        double t = log_mul(chart.h_at(i, j, h), scores.arc_at(p, h));
                        if (t > best) {
                            best = t;
                            best_h = h;
                        }
                    }
                    chart.P[cell] = best;
                    chart.bp_head[cell] = best_h;
                } else {
                    buf.clear();
                    for (int h = i; h <= j; ++h)
                        buf.push_back(log_mul(chart.h_at(i, j, h), scores.arc_at(p, h)));
                    chart.P[cell] = log_sum_exp(buf);
                }
            }
        }
    }

    if (viterbi) {
        double best = kNegInf;
        for (int h = 0; h < n; ++h) {
            double t = log_mul(chart.h_at(0, n - 1, h), scores.arc_at(n, h));
            if (t > best) {
                best = t;
                chart.root_head = h;
            }
        }
        chart.root = best;
    } else {
        buf.clear();
        for (int h = 0; h < n; ++h)
            buf.push_back(log_mul(chart.h_at(0, n - 1, h), scores.arc_at(n, h)));
        chart.root = log_sum_exp(buf);
    }
    return chart;
}

inline Chart inside_eisner_satta(const ScoreSet& scores, LabelScheme scheme,
                                 const MaskPlan* mask = nullptr,
                                 Semiring semiring = Semiring::LogSum,
                                 const Penalty* penalty = nullptr) {
    Fold fold = semiring == Semiring::Max ? Fold::Max : Fold::LogSum;
    return inside_eisner_satta(scores, build_span_weights(scores, scheme, mask, fold),
                               semiring, penalty);
}

// log of the total weight of trees compatible with the observed entities.
inline double masked_log_numerator(const ScoreSet& scores, const MaskPlan& mask,
                                   LabelScheme scheme = LabelScheme::ZeroOne) {
    return inside_eisner_satta(scores, scheme, &mask).root;
}

// Unlexicalized CYK inside over folded span weights; the ablation baseline.
struct CykChart {
    int n = 0;
    Semiring semiring = Semiring::LogSum;
    SpanWeights weights;
    std::vector<double> B;  // n*n
    std::vector<int32_t> bp_split;
    double root = kNegInf;

    size_t index(int i, int j) const { return static_cast<size_t>(i) * n + j; }
    double at(int i, int j) const { return B[index(i, j)]; }
};

inline CykChart inside_cyk(const ScoreSet& scores, const SpanWeights& weights,
                           Semiring semiring = Semiring::LogSum) {
    const int n = scores.n;
    if (n < 1) throw InvalidInput("inside pass on an empty sentence");
    scores.check_finite();
    CykChart chart;
    chart.n = n;
    chart.semiring = semiring;
    chart.weights = weights;
    chart.B.assign(static_cast<size_t>(n) * n, kNegInf);
    const bool viterbi = semiring == Semiring::Max;
    if (viterbi) chart.bp_split.assign(static_cast<size_t>(n) * n, -1);
    std::vector<double> buf;
    for (int w = 0; w < n; ++w)
        for (int i = 0; i + w < n; ++i) {
            const int j = i + w;
            if (w == 0) {
                chart.B[chart.index(i, i)] = weights.at(i, i);
                continue;
            }
            if (viterbi) {
                double best = kNegInf;
                int best_r = -1;
                for (int r = i; r < j; ++r) {
                    double t = log_mul(chart.at(i, r), chart.at(r + 1, j));
                    if (t > best) {
                        best = t;
                        best_r = r;
                    }
                }
                chart.B[chart.index(i, j)] = log_mul(weights.at(i, j), best);
                chart.bp_split[chart.index(i, j)] = best_r;
            } else {
                buf.clear();
                for (int r = i; r < j; ++r)
                    buf.push_back(log_mul(chart.at(i, r), chart.at(r + 1, j)));
                chart.B[chart.index(i, j)] = log_mul(weights.at(i, j), log_sum_exp(buf));
            }
        }
    chart.root = chart.at(0, n - 1);
    return chart;
}

inline CykChart inside_cyk(const ScoreSet& scores, LabelScheme scheme,
                           const MaskPlan* mask = nullptr,
                           Semiring semiring = Semiring::LogSum) {
    Fold fold = semiring == Semiring::Max ? Fold::Max : Fold::LogSum;
    return inside_cyk(scores, build_span_weights(scores, scheme, mask, fold), semiring);
}

}  // namespace lexcrf
