#pragma once

#include <vector>

#include "lexcrf/chart.hpp"
#include "lexcrf/numeric.hpp"
#include "lexcrf/span_weights.hpp"
#include "lexcrf/types.hpp"

namespace lexcrf {

// Expectation of per-(span, head) penalties under the chart distribution:
//   E_T [ sum over listed spans present in T of value[head_T(span)] ]
// computed with a first-order expectation semiring, gradients with respect to
// the span/arc scores by reverse accumulation. For a gold span under the
// masked chart the expectation reduces to sum_h alpha_h * value[h], but unlike
// that weighted sum this pass also yields d/d(scores), which is what couples
// the labeling loss back into the structure when training jointly.
struct HeadTerm {
    int start = 0;
    int end = 0;
    double outer_weight = 1.0;
    std::vector<double> value_by_head;  // indexed h - start
};

struct HeadExpectationResult {
    double value = 0.0;
    ScoreGradients grads;
};

inline HeadExpectationResult head_expectation(const ScoreSet& scores, LabelScheme scheme,
                                              const MaskPlan* mask,
                                              const std::vector<HeadTerm>& terms) {
    const int n = scores.n;
    if (n < 1) throw InvalidInput("inside pass on an empty sentence");
    scores.check_finite();
    const auto weights = build_span_weights(scores, scheme, mask);

    // per-cell additive bonus: v[(i,j,h)] when the headed span is created
    std::vector<double> bonus(static_cast<size_t>(n) * n * n, 0.0);
    for (const auto& t : terms) {
        if (t.start < 0 || t.end < t.start || t.end >= n)
            throw InvalidInput("head term span out of range");
        if (static_cast<int>(t.value_by_head.size()) != t.end - t.start + 1)
            throw InvalidInput("head term values must cover the span");
        for (int h = t.start; h <= t.end; ++h)
            bonus[(static_cast<size_t>(t.start) * n + t.end) * n + h] +=
                t.outer_weight * t.value_by_head[h - t.start];
    }

    const size_t cells = static_cast<size_t>(n) * n * n;
    std::vector<double> h_a(cells, kNegInf), h_r(cells, 0.0);
    std::vector<double> p_a(cells, kNegInf), p_r(cells, 0.0);
    auto idx = [n](int i, int j, int k) { return (static_cast<size_t>(i) * n + j) * n + k; };

    struct Pair {
        double a, r;
    };
    std::vector<Pair> buf;
    auto combine = [&](double& out_a, double& out_r) {
        double m = kNegInf;
        for (const auto& t : buf)
            if (t.a > m) m = t.a;
        if (is_neg_inf(m)) {
            out_a = kNegInf;
            out_r = 0.0;
            return;
        }
        double s = 0.0, sr = 0.0;
        for (const auto& t : buf) {
            if (is_neg_inf(t.a)) continue;
            double w = std::exp(t.a - m);
            s += w;
            sr += w * t.r;
        }
        out_a = m + std::log(s);
        out_r = sr / s;
    };

    for (int w = 0; w < n; ++w)
        for (int i = 0; i + w < n; ++i) {
            const int j = i + w;
            if (w == 0) {
                h_a[idx(i, i, i)] = weights.at(i, i);
                h_r[idx(i, i, i)] = bonus[idx(i, i, i)];
            } else {
                for (int h = i; h <= j; ++h) {
                    buf.clear();
                    for (int r = i; r < h; ++r)
                        buf.push_back({log_mul(p_a[idx(i, r, h)], h_a[idx(r + 1, j, h)]),
                                       p_r[idx(i, r, h)] + h_r[idx(r + 1, j, h)]});
                    for (int r = h; r < j; ++r)
                        buf.push_back({log_mul(h_a[idx(i, r, h)], p_a[idx(r + 1, j, h)]),
                                       h_r[idx(i, r, h)] + p_r[idx(r + 1, j, h)]});
                    combine(h_a[idx(i, j, h)], h_r[idx(i, j, h)]);
                    h_a[idx(i, j, h)] = log_mul(h_a[idx(i, j, h)], weights.at(i, j));
                    h_r[idx(i, j, h)] += bonus[idx(i, j, h)];
                }
            }
            for (int p = 0; p < n; ++p) {
                if (p >= i && p <= j) continue;
                buf.clear();
                for (int h = i; h <= j; ++h)
                    buf.push_back({log_mul(h_a[idx(i, j, h)], scores.arc_at(p, h)),
                                   h_r[idx(i, j, h)]});
                combine(p_a[idx(i, j, p)], p_r[idx(i, j, p)]);
            }
        }

    buf.clear();
    for (int h = 0; h < n; ++h)
        buf.push_back(
            {log_mul(h_a[idx(0, n - 1, h)], scores.arc_at(n, h)), h_r[idx(0, n - 1, h)]});
    double root_a, root_r;
    combine(root_a, root_r);
    if (is_neg_inf(root_a)) throw InvalidInput("all trees masked out; annotation error");

    HeadExpectationResult out;
    out.value = root_r;
    out.grads = ScoreGradients(n, scores.channels);

    // reverse pass, seeded with d value / d r(root) = 1
    std::vector<double> dh_a(cells, 0.0), dh_r(cells, 0.0);
    std::vector<double> dp_a(cells, 0.0), dp_r(cells, 0.0);
    std::vector<double> d_weight(static_cast<size_t>(n) * n, 0.0);

    for (int h = 0; h < n; ++h) {
        double t_a = log_mul(h_a[idx(0, n - 1, h)], scores.arc_at(n, h));
        double w = safe_exp_diff(t_a, root_a);
        double d_t_a = w * (h_r[idx(0, n - 1, h)] - root_r);
        double d_t_r = w;
        dh_a[idx(0, n - 1, h)] += d_t_a;
        dh_r[idx(0, n - 1, h)] += d_t_r;
        out.grads.arc_at(n, h) += d_t_a;
    }

    for (int w = n - 1; w >= 0; --w)
        for (int i = 0; i + w < n; ++i) {
            const int j = i + w;
            for (int p = 0; p < n; ++p) {
                if (p >= i && p <= j) continue;
                double g_a = dp_a[idx(i, j, p)], g_r = dp_r[idx(i, j, p)];
                if (g_a == 0.0 && g_r == 0.0) continue;
                double out_a = p_a[idx(i, j, p)], out_r = p_r[idx(i, j, p)];
                for (int h = i; h <= j; ++h) {
                    double t_a = log_mul(h_a[idx(i, j, h)], scores.arc_at(p, h));
                    double wgt = safe_exp_diff(t_a, out_a);
                    if (wgt == 0.0) continue;
                    double d_t_a = g_a * wgt + g_r * wgt * (h_r[idx(i, j, h)] - out_r);
                    double d_t_r = g_r * wgt;
                    dh_a[idx(i, j, h)] += d_t_a;
                    dh_r[idx(i, j, h)] += d_t_r;
                    out.grads.arc_at(p, h) += d_t_a;
                }
            }
            for (int h = i; h <= j; ++h) {
                double g_a = dh_a[idx(i, j, h)], g_r = dh_r[idx(i, j, h)];
                if (g_a == 0.0 && g_r == 0.0) continue;
                d_weight[static_cast<size_t>(i) * n + j] += g_a;
                if (w == 0) continue;
                double out_a = h_a[idx(i, j, h)];
                if (is_neg_inf(out_a)) continue;
                out_a -= weights.at(i, j);
                double out_r = h_r[idx(i, j, h)] - bonus[idx(i, j, h)];
                auto push = [&](double t_a, double t_r, size_t h_cell, size_t p_cell) {
                    double wgt = safe_exp_diff(t_a, out_a);
                    if (wgt == 0.0) return;
                    double d_t_a = g_a * wgt + g_r * wgt * (t_r - out_r);
                    double d_t_r = g_r * wgt;
                    dh_a[h_cell] += d_t_a;
                    dh_r[h_cell] += d_t_r;
                    dp_a[p_cell] += d_t_a;
                    dp_r[p_cell] += d_t_r;
                };
                for (int r = i; r < h; ++r)
                    push(log_mul(p_a[idx(i, r, h)], h_a[idx(r + 1, j, h)]),
                         p_r[idx(i, r, h)] + h_r[idx(r + 1, j, h)], idx(r + 1, j, h),
                         idx(i, r, h));
                for (int r = h; r < j; ++r)
                    push(log_mul(h_a[idx(i, r, h)], p_a[idx(r + 1, j, h)]),
                         h_r[idx(i, r, h)] + p_r[idx(r + 1, j, h)], idx(i, r, h),
                         idx(r + 1, j, h));
            }
        }

    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double g = d_weight[static_cast<size_t>(i) * n + j];
            if (g != 0.0) span_weight_backprop(weights, scores, i, j, g, out.grads);
        }
    return out;
}

}  // namespace lexcrf
