#pragma once

#include <vector>

#include "lexcrf/chart.hpp"
#include "lexcrf/numeric.hpp"
#include "lexcrf/span_weights.hpp"
#include "lexcrf/types.hpp"

namespace lexcrf {

// Posterior quantities from reverse accumulation through the inside pass.
// Every entry equals d(root value)/d(corresponding log score).
struct Marginals {
    int n = 0;
    int channels = 2;
    std::vector<double> span_mu;      // n*n*channels
    std::vector<double> arc_mu;       // (n+1)*n, row n = virtual root
    std::vector<double> cell_mu;      // n*n*n  P(span (i,j) headed by h)
    std::vector<double> complete_mu;  // n*n*n  P(item consumed by a complete rule)
    std::vector<double> span_total;   // n*n    unlabeled span marginal

    double span_at(int i, int j, int c) const {
        return span_mu[(static_cast<size_t>(i) * n + j) * channels + c];
    }
    double arc_at(int p, int h) const { return arc_mu[static_cast<size_t>(p) * n + h]; }
    double cell_at(int i, int j, int h) const {
        return cell_mu[(static_cast<size_t>(i) * n + j) * n + h];
    }
    double span_total_at(int i, int j) const {
        return span_total[static_cast<size_t>(i) * n + j];
    }

    // Head distribution of span (i,j), conditioned on the span occurring.
    std::vector<double> head_alpha(int i, int j) const {
        std::vector<double> a(static_cast<size_t>(j - i + 1), 0.0);
        double total = 0.0;
        for (int h = i; h <= j; ++h) total += cell_at(i, j, h);
        if (total <= 0.0) return a;
        for (int h = i; h <= j; ++h) a[h - i] = cell_at(i, j, h) / total;
        return a;
    }
};

inline Marginals backward_marginals(const Chart& chart, const ScoreSet& scores) {
    if (chart.semiring != Semiring::LogSum)
        throw WrongSemiring("marginals require a log-sum chart");
    const int n = chart.n;
    Marginals m;
    m.n = n;
    m.channels = scores.channels;
    m.span_mu.assign(static_cast<size_t>(n) * n * scores.channels, 0.0);
    m.arc_mu.assign(static_cast<size_t>(n + 1) * n, 0.0);
    m.cell_mu.assign(static_cast<size_t>(n) * n * n, 0.0);
    m.complete_mu.assign(static_cast<size_t>(n) * n * n, 0.0);
    m.span_total.assign(static_cast<size_t>(n) * n, 0.0);
    if (is_neg_inf(chart.root)) return m;

    std::vector<double>& bar_h = m.cell_mu;  // total adjoint of H cells
    std::vector<double> bar_p(static_cast<size_t>(n) * n * n, 0.0);
    const double c = chart.has_penalty ? chart.penalty.constant : 0.0;

    auto h_penalized = [&](int i, int j, int h) {
        double v = chart.h_at(i, j, h);
        if (chart.has_penalty && chart.penalty.targeted(i, j, n)) return log_mul(v, -c);
        return v;
    };

    for (int h = 0; h < n; ++h) {
        double w = safe_exp_diff(log_mul(chart.h_at(0, n - 1, h), scores.arc_at(n, h)),
                                 chart.root);
        bar_h[chart.hp_index(0, n - 1, h)] += w;
        m.arc_mu[static_cast<size_t>(n) * n + h] += w;
    }

    for (int w = n - 1; w >= 0; --w) {
        for (int i = 0; i + w < n; ++i) {
            const int j = i + w;
            for (int p = 0; p < n; ++p) {
                if (p >= i && p <= j) continue;
                double g = bar_p[chart.hp_index(i, j, p)];
                if (g == 0.0) continue;
                double cell = chart.p_at(i, j, p);
                for (int h = i; h <= j; ++h) {
                    double wt =
                        g * safe_exp_diff(log_mul(chart.h_at(i, j, h), scores.arc_at(p, h)),
                                          cell);
                    if (wt == 0.0) continue;
                    bar_h[chart.hp_index(i, j, h)] += wt;
                    m.arc_mu[static_cast<size_t>(p) * n + h] += wt;
                }
            }
            if (w == 0) {
                m.span_total[static_cast<size_t>(i) * n + i] += bar_h[chart.hp_index(i, i, i)];
                continue;
            }
            for (int h = i; h <= j; ++h) {
                double g = bar_h[chart.hp_index(i, j, h)];
                if (g == 0.0) continue;
                m.span_total[static_cast<size_t>(i) * n + j] += g;
                double inner = chart.h_at(i, j, h);
                if (is_neg_inf(inner)) continue;
                inner -= chart.weights.at(i, j);
                for (int r = i; r < h; ++r) {
                    double term = log_mul(chart.p_at(i, r, h), h_penalized(r + 1, j, h));
                    double wt = g * safe_exp_diff(term, inner);
                    if (wt == 0.0) continue;
                    bar_p[chart.hp_index(i, r, h)] += wt;
                    bar_h[chart.hp_index(r + 1, j, h)] += wt;
                    m.complete_mu[chart.hp_index(r + 1, j, h)] += wt;
                }
                for (int r = h; r < j; ++r) {
                    double term = log_mul(h_penalized(i, r, h), chart.p_at(r + 1, j, h));
                    double wt = g * safe_exp_diff(term, inner);
                    if (wt == 0.0) continue;
                    bar_h[chart.hp_index(i, r, h)] += wt;
                    m.complete_mu[chart.hp_index(i, r, h)] += wt;
                    bar_p[chart.hp_index(r + 1, j, h)] += wt;
                }
            }
        }
    }

    ScoreGradients span_grads(n, scores.channels);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double g = m.span_total[static_cast<size_t>(i) * n + j];
            if (g != 0.0) span_weight_backprop(chart.weights, scores, i, j, g, span_grads);
        }
    m.span_mu = std::move(span_grads.span);
    return m;
}

// Convenience wrapper: inside + backward, returning the log partition value
// and gradients of it with respect to every score entry.
struct LogZResult {
    double log_z = kNegInf;
    ScoreGradients grads;
    Marginals marginals;
};

inline LogZResult grad_log_z(const ScoreSet& scores, LabelScheme scheme,
                             const MaskPlan* mask = nullptr,
                             const Penalty* penalty = nullptr) {
    Chart chart = inside_eisner_satta(scores, scheme, mask, Semiring::LogSum, penalty);
    LogZResult out;
    out.log_z = chart.root;
    out.marginals = backward_marginals(chart, scores);
    out.grads = ScoreGradients(scores.n, scores.channels);
    out.grads.span = out.marginals.span_mu;
    out.grads.arc = out.marginals.arc_mu;
    return out;
}

// Expected number of penalized-item consumptions under the chart distribution.
inline double expected_penalty_count(const Chart& chart, const ScoreSet& scores) {
    if (!chart.has_penalty || chart.penalty.targets.empty()) return 0.0;
    Marginals m = backward_marginals(chart, scores);
    double total = 0.0;
    const int n = chart.n;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            if (!chart.penalty.targeted(i, j, n)) continue;
            for (int h = i; h <= j; ++h) total += m.complete_mu[chart.hp_index(i, j, h)];
        }
    return total;
}

inline double expected_penalty_count(const Marginals& m, const Penalty& penalty) {
    double total = 0.0;
    const int n = m.n;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            if (!penalty.targeted(i, j, n)) continue;
            for (int h = i; h <= j; ++h)
                total += m.complete_mu[(static_cast<size_t>(i) * n + j) * n + h];
        }
    return total;
}

// CYK marginals for the non-lexicalized path.
struct CykMarginals {
    int n = 0;
    int channels = 2;
    std::vector<double> span_mu;     // n*n*channels
    std::vector<double> span_total;  // n*n

    double span_total_at(int i, int j) const {
        return span_total[static_cast<size_t>(i) * n + j];
    }
};

inline CykMarginals backward_cyk(const CykChart& chart, const ScoreSet& scores) {
    if (chart.semiring != Semiring::LogSum)
        throw WrongSemiring("marginals require a log-sum chart");
    const int n = chart.n;
    CykMarginals m;
    m.n = n;
    m.channels = scores.channels;
    m.span_total.assign(static_cast<size_t>(n) * n, 0.0);
    std::vector<double> bar(static_cast<size_t>(n) * n, 0.0);
    if (is_neg_inf(chart.root)) {
        m.span_mu.assign(static_cast<size_t>(n) * n * scores.channels, 0.0);
        return m;
    }
    bar[chart.index(0, n - 1)] = 1.0;
    for (int w = n - 1; w >= 0; --w)
        for (int i = 0; i + w < n; ++i) {
            const int j = i + w;
            double g = bar[chart.index(i, j)];
            if (g == 0.0) continue;
            m.span_total[chart.index(i, j)] += g;
            if (w == 0) continue;
            double inner = chart.at(i, j);
            if (is_neg_inf(inner)) continue;
            inner -= chart.weights.at(i, j);
            for (int r = i; r < j; ++r) {
                double wt =
                    g * safe_exp_diff(log_mul(chart.at(i, r), chart.at(r + 1, j)), inner);
                if (wt == 0.0) continue;
                bar[chart.index(i, r)] += wt;
                bar[chart.index(r + 1, j)] += wt;
            }
        }
    ScoreGradients span_grads(n, scores.channels);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double g = m.span_total[chart.index(i, j)];
            if (g != 0.0) span_weight_backprop(chart.weights, scores, i, j, g, span_grads);
        }
    m.span_mu = std::move(span_grads.span);
    return m;
}

}  // namespace lexcrf
