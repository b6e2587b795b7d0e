#pragma once

#include <vector>

#include "lexcrf/chart.hpp"
#include "lexcrf/marginals.hpp"
#include "lexcrf/numeric.hpp"
#include "lexcrf/span_weights.hpp"
#include "lexcrf/types.hpp"

namespace lexcrf {

// KL divergence between the penalized chart distribution q and the unpenalized
// one p (same masking mode for both), via a first-order expectation semiring.
//
// Each chart item carries a triple (lq, lp, r): log q-weight, log p-weight and
// the q-normalized expectation of the accumulated local log-ratios. The only
// local ratio is the -c a targeted headed span picks up when a complete rule
// consumes it, so r never depends on the scores except through the q-softmax
// weights of the combination steps. At the root,
//   KL(q || p) = lp - lq + r.
// Gradients come from reverse accumulation through this forward pass, which
// sidesteps the covariance terms an explicit derivative of E_q[...] would need.
struct KlResult {
    double kl = 0.0;
    double log_z_p = kNegInf;         // unpenalized root value
    double log_z_q = kNegInf;         // penalized root value
    double expected_log_ratio = 0.0;  // E_q[sum of local log ratios] = -c * E_q[count]
    ScoreGradients grads;             // d KL / d scores
};

inline KlResult kl_constrained(const ScoreSet& scores, LabelScheme scheme,
                               const MaskPlan* mask, const Penalty& penalty) {
    if (penalty.constant < 0) throw InvalidInput("penalty constant must be >= 0");
    const int n = scores.n;
    if (n < 1) throw InvalidInput("inside pass on an empty sentence");
    scores.check_finite();
    const double c = penalty.constant;
    const auto weights = build_span_weights(scores, scheme, mask);

    const size_t cells = static_cast<size_t>(n) * n * n;
    std::vector<double> h_lq(cells, kNegInf), h_lp(cells, kNegInf), h_r(cells, 0.0);
    std::vector<double> p_lq(cells, kNegInf), p_lp(cells, kNegInf), p_r(cells, 0.0);
    auto idx = [n](int i, int j, int k) { return (static_cast<size_t>(i) * n + j) * n + k; };
    auto pen = [&](int i, int j) { return penalty.targeted(i, j, n) ? -c : 0.0; };

    struct Triple {
        double lq, lp, r;
    };
    std::vector<Triple> terms;
    auto combine = [&](double& out_lq, double& out_lp, double& out_r) {
        double mq = kNegInf, mp = kNegInf;
        for (const auto& t : terms) {
            if (t.lq > mq) mq = t.lq;
            if (t.lp > mp) mp = t.lp;
        }
        if (is_neg_inf(mq)) {
            out_lq = out_lp = kNegInf;
            out_r = 0.0;
            return;
        }
        double sq = 0.0, sp = 0.0, sr = 0.0;
        for (const auto& t : terms) {
            if (!is_neg_inf(t.lq)) {
                double wq = std::exp(t.lq - mq);
                sq += wq;
                sr += wq * t.r;
            }
            if (!is_neg_inf(t.lp)) sp += std::exp(t.lp - mp);
        }
        out_lq = mq + std::log(sq);
        out_lp = is_neg_inf(mp) ? kNegInf : mp + std::log(sp);
        out_r = sr / sq;
    };

    for (int w = 0; w < n; ++w)
        for (int i = 0; i + w < n; ++i) {
            const int j = i + w;
            if (w == 0) {
                h_lq[idx(i, i, i)] = h_lp[idx(i, i, i)] = weights.at(i, i);
            } else {
                for (int h = i; h <= j; ++h) {
                    terms.clear();
                    for (int r = i; r < h; ++r) {
                        double x = pen(r + 1, j);
                        terms.push_back({log_mul(p_lq[idx(i, r, h)],
                                                 log_mul(h_lq[idx(r + 1, j, h)], x)),
                                         log_mul(p_lp[idx(i, r, h)], h_lp[idx(r + 1, j, h)]),
                                         p_r[idx(i, r, h)] + h_r[idx(r + 1, j, h)] + x});
                    }
                    for (int r = h; r < j; ++r) {
                        double x = pen(i, r);
                        terms.push_back({log_mul(log_mul(h_lq[idx(i, r, h)], x),
                                                 p_lq[idx(r + 1, j, h)]),
                                         log_mul(h_lp[idx(i, r, h)], p_lp[idx(r + 1, j, h)]),
                                         h_r[idx(i, r, h)] + x + p_r[idx(r + 1, j, h)]});
                    }
                    combine(h_lq[idx(i, j, h)], h_lp[idx(i, j, h)], h_r[idx(i, j, h)]);
                    h_lq[idx(i, j, h)] = log_mul(h_lq[idx(i, j, h)], weights.at(i, j));
                    h_lp[idx(i, j, h)] = log_mul(h_lp[idx(i, j, h)], weights.at(i, j));
                }
            }
            for (int p = 0; p < n; ++p) {
                if (p >= i && p <= j) continue;
                terms.clear();
                for (int h = i; h <= j; ++h)
                    terms.push_back({log_mul(h_lq[idx(i, j, h)], scores.arc_at(p, h)),
                                     log_mul(h_lp[idx(i, j, h)], scores.arc_at(p, h)),
                                     h_r[idx(i, j, h)]});
                combine(p_lq[idx(i, j, p)], p_lp[idx(i, j, p)], p_r[idx(i, j, p)]);
            }
        }

    terms.clear();
    for (int h = 0; h < n; ++h)
        terms.push_back({log_mul(h_lq[idx(0, n - 1, h)], scores.arc_at(n, h)),
                         log_mul(h_lp[idx(0, n - 1, h)], scores.arc_at(n, h)),
                         h_r[idx(0, n - 1, h)]});
    double root_lq, root_lp, root_r;
    combine(root_lq, root_lp, root_r);

    KlResult out;
    out.log_z_q = root_lq;
    out.log_z_p = root_lp;
    out.expected_log_ratio = root_r;
    out.kl = root_lp - root_lq + root_r;
    if (out.kl < 0 && out.kl > -1e-12) out.kl = 0.0;
    out.grads = ScoreGradients(n, scores.channels);
    if (is_neg_inf(root_lq)) throw InvalidInput("all trees masked out; annotation error");

    // Reverse pass. Adjoints of (lq, lp, r) per cell.
    std::vector<double> dh_lq(cells, 0.0), dh_lp(cells, 0.0), dh_r(cells, 0.0);
    std::vector<double> dp_lq(cells, 0.0), dp_lp(cells, 0.0), dp_r(cells, 0.0);
    std::vector<double> d_weight(static_cast<size_t>(n) * n, 0.0);

    // KL = lp - lq + r at the root.
    const double d_root_lq = -1.0, d_root_lp = 1.0, d_root_r = 1.0;
    for (int h = 0; h < n; ++h) {
        double t_lq = log_mul(h_lq[idx(0, n - 1, h)], scores.arc_at(n, h));
        double t_lp = log_mul(h_lp[idx(0, n - 1, h)], scores.arc_at(n, h));
        double wq = safe_exp_diff(t_lq, root_lq);
        double wp = safe_exp_diff(t_lp, root_lp);
        double d_t_lq = d_root_lq * wq + d_root_r * wq * (h_r[idx(0, n - 1, h)] - root_r);
        double d_t_lp = d_root_lp * wp;
        double d_t_r = d_root_r * wq;
        dh_lq[idx(0, n - 1, h)] += d_t_lq;
        dh_lp[idx(0, n - 1, h)] += d_t_lp;
        dh_r[idx(0, n - 1, h)] += d_t_r;
        out.grads.arc_at(n, h) += d_t_lq + d_t_lp;
    }

    for (int w = n - 1; w >= 0; --w)
        for (int i = 0; i + w < n; ++i) {
            const int j = i + w;
            for (int p = 0; p < n; ++p) {
                if (p >= i && p <= j) continue;
                double g_lq = dp_lq[idx(i, j, p)], g_lp = dp_lp[idx(i, j, p)],
                       g_r = dp_r[idx(i, j, p)];
                if (g_lq == 0.0 && g_lp == 0.0 && g_r == 0.0) continue;
                double out_lq = p_lq[idx(i, j, p)], out_lp = p_lp[idx(i, j, p)],
                       out_r = p_r[idx(i, j, p)];
                for (int h = i; h <= j; ++h) {
                    double t_lq = log_mul(h_lq[idx(i, j, h)], scores.arc_at(p, h));
                    double t_lp = log_mul(h_lp[idx(i, j, h)], scores.arc_at(p, h));
                    double wq = safe_exp_diff(t_lq, out_lq);
                    double wp = safe_exp_diff(t_lp, out_lp);
                    double d_t_lq = g_lq * wq + g_r * wq * (h_r[idx(i, j, h)] - out_r);
                    double d_t_lp = g_lp * wp;
                    double d_t_r = g_r * wq;
                    if (d_t_lq == 0.0 && d_t_lp == 0.0 && d_t_r == 0.0) continue;
                    dh_lq[idx(i, j, h)] += d_t_lq;
                    dh_lp[idx(i, j, h)] += d_t_lp;
                    dh_r[idx(i, j, h)] += d_t_r;
                    out.grads.arc_at(p, h) += d_t_lq + d_t_lp;
                }
            }
            for (int h = i; h <= j; ++h) {
                double g_lq = dh_lq[idx(i, j, h)], g_lp = dh_lp[idx(i, j, h)],
                       g_r = dh_r[idx(i, j, h)];
                if (g_lq == 0.0 && g_lp == 0.0 && g_r == 0.0) continue;
                d_weight[static_cast<size_t>(i) * n + j] += g_lq + g_lp;
                if (w == 0) continue;
                double sw = weights.at(i, j);
                double out_lq = h_lq[idx(i, j, h)], out_lp = h_lp[idx(i, j, h)],
                       out_r = h_r[idx(i, j, h)];
                if (is_neg_inf(out_lq)) continue;
                out_lq -= sw;
                out_lp -= sw;
                auto push = [&](double t_lq, double t_lp, double t_r, size_t h_cell,
                                size_t p_cell) {
                    double wq = safe_exp_diff(t_lq, out_lq);
                    double wp = safe_exp_diff(t_lp, out_lp);
                    double d_t_lq = g_lq * wq + g_r * wq * (t_r - out_r);
                    double d_t_lp = g_lp * wp;
                    double d_t_r = g_r * wq;
                    if (d_t_lq == 0.0 && d_t_lp == 0.0 && d_t_r == 0.0) return;
                    dh_lq[h_cell] += d_t_lq;
                    dh_lp[h_cell] += d_t_lp;
                    dh_r[h_cell] += d_t_r;
                    dp_lq[p_cell] += d_t_lq;
                    dp_lp[p_cell] += d_t_lp;
                    dp_r[p_cell] += d_t_r;
                };
                for (int r = i; r < h; ++r) {
                    double x = pen(r + 1, j);
                    push(log_mul(p_lq[idx(i, r, h)], log_mul(h_lq[idx(r + 1, j, h)], x)),
                         log_mul(p_lp[idx(i, r, h)], h_lp[idx(r + 1, j, h)]),
                         p_r[idx(i, r, h)] + h_r[idx(r + 1, j, h)] + x, idx(r + 1, j, h),
                         idx(i, r, h));
                }
                for (int r = h; r < j; ++r) {
                    double x = pen(i, r);
                    push(log_mul(log_mul(h_lq[idx(i, r, h)], x), p_lq[idx(r + 1, j, h)]),
                         log_mul(h_lp[idx(i, r, h)], p_lp[idx(r + 1, j, h)]),
                         h_r[idx(i, r, h)] + x + p_r[idx(r + 1, j, h)], idx(i, r, h),
                         idx(r + 1, j, h));
                }
            }
        }

    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double g = d_weight[static_cast<size_t>(i) * n + j];
            if (g != 0.0) span_weight_backprop(weights, scores, i, j, g, out.grads);
        }
    return out;
}

// Independent route for the same value: two plain inside passes plus the
// expected consumption count from the backward pass of the penalized chart.
inline double kl_closed_form(const ScoreSet& scores, LabelScheme scheme, const MaskPlan* mask,
                             const Penalty& penalty) {
    if (penalty.constant < 0) throw InvalidInput("penalty constant must be >= 0");
    double log_z_p = inside_eisner_satta(scores, scheme, mask, Semiring::LogSum).root;
    Chart chart_q = inside_eisner_satta(scores, scheme, mask, Semiring::LogSum, &penalty);
    double count = expected_penalty_count(chart_q, scores);
    double kl = log_z_p - chart_q.root - penalty.constant * count;
    if (kl < 0 && kl > -1e-12) kl = 0.0;
    return kl;
}

}  // namespace lexcrf
