#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "lexcrf/params.hpp"
#include "lexcrf/types.hpp"

namespace lexcrf {

// Standardize the valid entries of a score tensor to zero mean and unit
// (population) variance; a degenerate tensor collapses to zeros.
struct PnStats {
    double mean = 0.0;
    double std = 0.0;
    bool degenerate = true;
};

inline PnStats potential_normalize(std::vector<double>& values,
                                   const std::vector<uint8_t>& valid) {
    size_t count = 0;
    double mean = 0.0;
    for (size_t k = 0; k < values.size(); ++k)
        if (valid[k]) {
            mean += values[k];
            ++count;
        }
    if (count == 0) throw InvalidInput("potential normalization over an empty valid set");
    mean /= static_cast<double>(count);
    double var = 0.0;
    for (size_t k = 0; k < values.size(); ++k)
        if (valid[k]) var += (values[k] - mean) * (values[k] - mean);
    var /= static_cast<double>(count);
    PnStats stats{mean, std::sqrt(var), false};
    if (stats.std < 1e-6) {
        stats.degenerate = true;
        for (size_t k = 0; k < values.size(); ++k) values[k] = 0.0;
        return stats;
    }
    for (size_t k = 0; k < values.size(); ++k)
        values[k] = valid[k] ? (values[k] - mean) / stats.std : 0.0;
    return stats;
}

inline void potential_normalize_backward(const std::vector<double>& normalized,
                                         const std::vector<uint8_t>& valid,
                                         const PnStats& stats,
                                         const std::vector<double>& grad_out,
                                         std::vector<double>& grad_in) {
    grad_in.assign(grad_out.size(), 0.0);
    if (stats.degenerate) return;  // flat region: nothing flows
    size_t count = 0;
    double g_mean = 0.0, gy_mean = 0.0;
    for (size_t k = 0; k < grad_out.size(); ++k)
        if (valid[k]) {
            g_mean += grad_out[k];
            gy_mean += grad_out[k] * normalized[k];
            ++count;
        }
    g_mean /= static_cast<double>(count);
    gy_mean /= static_cast<double>(count);
    for (size_t k = 0; k < grad_out.size(); ++k)
        if (valid[k])
            grad_in[k] = (grad_out[k] - g_mean - normalized[k] * gy_mean) / stats.std;
}

// One triaffine label-score gradient, reported at its query coordinates.
struct LabelGrad {
    int i, j, h, label;
    double grad;
};

// Window-mixer encoder plus biaffine/triaffine heads. A forward pass caches
// everything the hand-derived reverse pass needs; scoring is read-only with
// respect to the parameters.
class Scorer {
public:
    Scorer(const ModelConfig& cfg, const ParamStore& params) : cfg_(cfg), params_(params) {}

    ScoreSet score(const std::vector<int>& token_ids) {
        forward_encoder(token_ids);
        const int n = n_;
        const int C = cfg_.span_channels();
        ScoreSet scores(n, C);

        // biaffine spans: left factor a[i][c] = W_span[c]^T u_in_i
        const double* w_span = params_.data("w_span");
        const int ks = cfg_.k_span + 1;
        span_left_.assign(static_cast<size_t>(n) * C * ks, 0.0);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < C; ++c) {
                const double* w = w_span + static_cast<size_t>(c) * ks * ks;
                double* out = span_left_.data() + (static_cast<size_t>(i) * C + c) * ks;
                const double* u = u_span_in(i);
                for (int a = 0; a < ks; ++a) {
                    double ua = u[a];
                    if (ua == 0.0) continue;
                    const double* row = w + static_cast<size_t>(a) * ks;
                    for (int b = 0; b < ks; ++b) out[b] += ua * row[b];
                }
            }
        span_pre_.assign(static_cast<size_t>(n) * n * C, 0.0);
        span_valid_.assign(static_cast<size_t>(n) * n * C, 0);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j)
                for (int c = 0; c < C; ++c) {
                    const double* a = span_left_.data() + (static_cast<size_t>(i) * C + c) * ks;
                    const double* u = u_span_out(j);
                    double s = 0.0;
                    for (int b = 0; b < ks; ++b) s += a[b] * u[b];
                    span_pre_[(static_cast<size_t>(i) * n + j) * C + c] = s;
                    span_valid_[(static_cast<size_t>(i) * n + j) * C + c] = 1;
                }
        span_norm_ = span_pre_;
        span_stats_ = potential_normalize(span_norm_, span_valid_);
        scores.span = span_norm_;

        // biaffine arcs plus the virtual-root attachment row
        const double* w_arc = params_.data("w_arc");
        const double* root = params_.data("root");
        const int ka = cfg_.k_arc + 1;
        arc_left_.assign(static_cast<size_t>(n) * ka, 0.0);
        for (int p = 0; p < n; ++p) {
            double* out = arc_left_.data() + static_cast<size_t>(p) * ka;
            const double* u = u_arc_in(p);
            for (int a = 0; a < ka; ++a) {
                double ua = u[a];
                if (ua == 0.0) continue;
                const double* row = w_arc + static_cast<size_t>(a) * ka;
                for (int b = 0; b < ka; ++b) out[b] += ua * row[b];
            }
        }
        arc_pre_.assign(static_cast<size_t>(n + 1) * n, 0.0);
        arc_valid_.assign(static_cast<size_t>(n + 1) * n, 0);
        for (int p = 0; p < n; ++p)
            for (int h = 0; h < n; ++h) {
                if (p == h) continue;
                const double* a = arc_left_.data() + static_cast<size_t>(p) * ka;
                const double* u = u_arc_out(h);
                double s = 0.0;
                for (int b = 0; b < ka; ++b) s += a[b] * u[b];
                arc_pre_[static_cast<size_t>(p) * n + h] = s;
                arc_valid_[static_cast<size_t>(p) * n + h] = 1;
            }
        for (int h = 0; h < n; ++h) {
            const double* u = u_arc_out(h);
            double s = 0.0;
            for (int b = 0; b < ka; ++b) s += root[b] * u[b];
            arc_pre_[static_cast<size_t>(n) * n + h] = s;
            arc_valid_[static_cast<size_t>(n) * n + h] = 1;
        }
        arc_norm_ = arc_pre_;
        arc_stats_ = potential_normalize(arc_norm_, arc_valid_);
        scores.arc = arc_norm_;

        label_left_.clear();
        has_forward_ = true;
        return scores;
    }

    // Lazy triaffine label scores for one (span, head) query.
    std::vector<double> label_scores(int i, int j, int h) {
        require_forward();
        if (cfg_.label_classes() == 0)
            throw UsageError("one-stage configuration has no separate labeler");
        if (h < i || h > j) throw InvalidInput("label query head outside the span");
        const int L = cfg_.label_classes();
        const int kl = cfg_.k_label + 1;
        std::vector<double> out(L, 0.0);
        const double* uout = u_label_out(j);
        const double* uhead = u_label_head(h);
        for (int l = 0; l < L; ++l) {
            const double* A = label_left(i, l);
            double s = 0.0;
            for (int b = 0; b < kl; ++b) {
                const double* row = A + static_cast<size_t>(b) * kl;
                double ub = uout[b];
                if (ub == 0.0) continue;
                double t = 0.0;
                for (int c = 0; c < kl; ++c) t += row[c] * uhead[c];
                s += ub * t;
            }
            out[l] = s;
        }
        return out;
    }

    // Headless variant for non-lexicalized configurations: the head argument
    // of the trilinear form is replaced by a constant bias-only vector.
    std::vector<double> label_scores_headless(int i, int j) {
        require_forward();
        if (cfg_.label_classes() == 0)
            throw UsageError("one-stage configuration has no separate labeler");
        const int L = cfg_.label_classes();
        const int kl = cfg_.k_label + 1;
        std::vector<double> out(L, 0.0);
        const double* uout = u_label_out(j);
        for (int l = 0; l < L; ++l) {
            const double* A = label_left(i, l);
            double s = 0.0;
            for (int b = 0; b < kl; ++b) s += uout[b] * A[static_cast<size_t>(b) * kl + (kl - 1)];
            out[l] = s;
        }
        return out;
    }

    // Reverse pass: score-space gradients in, parameter gradients out
    // (accumulated into grad_store, which must share the params' layout).
    void backward(const ScoreGradients& d_scores, const std::vector<LabelGrad>& d_labels,
                  ParamStore& grad_store) {
        require_forward();
        const int n = n_;
        const int C = cfg_.span_channels();

        std::vector<double> d_span_pre, d_arc_pre;
        potential_normalize_backward(span_norm_, span_valid_, span_stats_, d_scores.span,
                                     d_span_pre);
        potential_normalize_backward(arc_norm_, arc_valid_, arc_stats_, d_scores.arc,
                                     d_arc_pre);

        const int ks = cfg_.k_span + 1;
        const int ka = cfg_.k_arc + 1;
        std::vector<double> d_e(static_cast<size_t>(n) * kBoundaryKinds *
                                    std::max({cfg_.k_span, cfg_.k_arc, cfg_.k_label}),
                                0.0);
        auto d_bound = [&](Boundary kind, int i) {
            return d_e.data() +
                   (static_cast<size_t>(i) * kBoundaryKinds + static_cast<size_t>(kind)) *
                       std::max({cfg_.k_span, cfg_.k_arc, cfg_.k_label});
        };

        // spans
        {
            double* d_w = grad_store.data("w_span");
            const double* w = params_.data("w_span");
            std::vector<double> right_acc(static_cast<size_t>(C) * ks);
            for (int i = 0; i < n; ++i) {
                std::fill(right_acc.begin(), right_acc.end(), 0.0);
                for (int j = i; j < n; ++j) {
                    const double* uo = u_span_out(j);
                    for (int c = 0; c < C; ++c) {
                        double g = d_span_pre[(static_cast<size_t>(i) * n + j) * C + c];
                        if (g == 0.0) continue;
                        double* acc = right_acc.data() + static_cast<size_t>(c) * ks;
                        for (int b = 0; b < ks; ++b) acc[b] += g * uo[b];
                        // d u_out_j += g * (u_in_i^T W[c])  == g * span_left_[i][c]
                        const double* a =
                            span_left_.data() + (static_cast<size_t>(i) * C + c) * ks;
                        double* dj = d_bound(Boundary::SpanOut, j);
                        for (int b = 0; b < ks - 1; ++b) dj[b] += g * a[b];
                    }
                }
                const double* ui = u_span_in(i);
                double* di = d_bound(Boundary::SpanIn, i);
                for (int c = 0; c < C; ++c) {
                    const double* acc = right_acc.data() + static_cast<size_t>(c) * ks;
                    const double* wc = w + static_cast<size_t>(c) * ks * ks;
                    double* dwc = d_w + static_cast<size_t>(c) * ks * ks;
                    for (int a = 0; a < ks; ++a) {
                        const double* row = wc + static_cast<size_t>(a) * ks;
                        double ua = ui[a];
                        double s = 0.0;
                        for (int b = 0; b < ks; ++b) {
                            s += row[b] * acc[b];
                            dwc[static_cast<size_t>(a) * ks + b] += ua * acc[b];
                        }
                        if (a < ks - 1) di[a] += s;
                    }
                }
            }
        }

        // arcs and root row
        {
            double* d_w = grad_store.data("w_arc");
            double* d_root = grad_store.data("root");
            const double* w = params_.data("w_arc");
            const double* root = params_.data("root");
            std::vector<double> acc(ka);
            for (int p = 0; p < n; ++p) {
                std::fill(acc.begin(), acc.end(), 0.0);
                bool any = false;
                for (int h = 0; h < n; ++h) {
                    if (p == h) continue;
                    double g = d_arc_pre[static_cast<size_t>(p) * n + h];
                    if (g == 0.0) continue;
                    any = true;
                    const double* uo = u_arc_out(h);
                    for (int b = 0; b < ka; ++b) acc[b] += g * uo[b];
                    const double* a = arc_left_.data() + static_cast<size_t>(p) * ka;
                    double* dh = d_bound(Boundary::ArcOut, h);
                    for (int b = 0; b < ka - 1; ++b) dh[b] += g * a[b];
                }
                if (!any) continue;
                const double* ui = u_arc_in(p);
                double* di = d_bound(Boundary::ArcIn, p);
                for (int a = 0; a < ka; ++a) {
                    const double* row = w + static_cast<size_t>(a) * ka;
                    double ua = ui[a];
                    double s = 0.0;
                    for (int b = 0; b < ka; ++b) {
                        s += row[b] * acc[b];
                        d_w[static_cast<size_t>(a) * ka + b] += ua * acc[b];
                    }
                    if (a < ka - 1) di[a] += s;
                }
            }
            for (int h = 0; h < n; ++h) {
                double g = d_arc_pre[static_cast<size_t>(n) * n + h];
                if (g == 0.0) continue;
                const double* uo = u_arc_out(h);
                double* dh = d_bound(Boundary::ArcOut, h);
                for (int b = 0; b < ka; ++b) {
                    d_root[b] += g * uo[b];
                    if (b < ka - 1) dh[b] += g * root[b];
                }
            }
        }

        // triaffine label queries
        if (!d_labels.empty()) {
            const int L = cfg_.label_classes();
            const int kl = cfg_.k_label + 1;
            const double* w = params_.data("w_label");
            double* d_w = grad_store.data("w_label");
            std::vector<double> const_head(static_cast<size_t>(kl), 0.0);
            const_head[kl - 1] = 1.0;
            std::map<std::pair<int, int>, std::vector<double>> t_il;
            for (const auto& q : d_labels) {
                if (q.label < 0 || q.label >= L) throw UsageError("label grad out of range");
                const bool headless = q.h < 0;
                const double* uout = u_label_out(q.j);
                const double* uhead = headless ? const_head.data() : u_label_head(q.h);
                const double* A = label_left(q.i, q.label);
                double* dj = d_bound(Boundary::LabelOut, q.j);
                for (int b = 0; b < kl; ++b) {
                    const double* row = A + static_cast<size_t>(b) * kl;
                    double t = 0.0;
                    for (int c = 0; c < kl; ++c) t += row[c] * uhead[c];
                    if (b < kl - 1) dj[b] += q.grad * t;
                }
                if (!headless) {
                    double* dh = d_bound(Boundary::LabelHead, q.h);
                    for (int c = 0; c < kl - 1; ++c) {
                        double t = 0.0;
                        for (int b = 0; b < kl; ++b)
                            t += A[static_cast<size_t>(b) * kl + c] * uout[b];
                        dh[c] += q.grad * t;
                    }
                }
                auto& acc = t_il[{q.i, q.label}];
                if (acc.empty()) acc.assign(static_cast<size_t>(kl) * kl, 0.0);
                for (int b = 0; b < kl; ++b) {
                    double ub = q.grad * uout[b];
                    if (ub == 0.0) continue;
                    double* row = acc.data() + static_cast<size_t>(b) * kl;
                    for (int c = 0; c < kl; ++c) row[c] += ub * uhead[c];
                }
            }
            for (const auto& [key, acc] : t_il) {
                const auto [i, l] = key;
                const double* ui = u_label_in(i);
                double* di = d_bound(Boundary::LabelIn, i);
                const double* wl = w + static_cast<size_t>(l) * kl * kl * kl;
                double* dwl = d_w + static_cast<size_t>(l) * kl * kl * kl;
                for (int a = 0; a < kl; ++a) {
                    const double* wa = wl + static_cast<size_t>(a) * kl * kl;
                    double* dwa = dwl + static_cast<size_t>(a) * kl * kl;
                    double ua = ui[a];
                    double s = 0.0;
                    for (size_t bc = 0; bc < static_cast<size_t>(kl) * kl; ++bc) {
                        s += wa[bc] * acc[bc];
                        dwa[bc] += ua * acc[bc];
                    }
                    if (a < kl - 1) di[a] += s;
                }
            }
        }

        backward_encoder(d_e, grad_store);
    }

    int length() const { return n_; }

    // Boundary vectors are deterministic functions of tokens and parameters;
    // exposed for tests probing locality and determinism.
    const std::vector<double>& forward_states() const { return f_; }
    const std::vector<double>& backward_states() const { return g_; }

private:
    enum Boundary { SpanIn = 0, SpanOut, ArcIn, ArcOut, LabelIn, LabelOut, LabelHead };
    static constexpr int kBoundaryKinds = 7;

    void require_forward() const {
        if (!has_forward_) throw UsageError("backward/label query without a forward pass");
    }

    static double act(double x) { return std::tanh(x); }
    static double act_grad(double y) { return 1.0 - y * y; }

    void forward_encoder(const std::vector<int>& token_ids) {
        n_ = static_cast<int>(token_ids.size());
        if (n_ < 1) throw InvalidInput("scoring an empty sentence");
        for (int id : token_ids)
            if (id < 0 || id >= cfg_.vocab_size) throw InvalidInput("token id out of vocab");
        ids_ = token_ids;
        const int n = n_;
        const int d = cfg_.d_emb;
        const int hd = cfg_.d_hidden;
        const int win = 2 * cfg_.window + 1;
        const double* emb = params_.data("emb");
        const double* mix_w = params_.data("mix_w");
        const double* mix_b = params_.data("mix_b");
        const double* fwd_w = params_.data("fwd_w");
        const double* fwd_b = params_.data("fwd_b");
        const double* bwd_w = params_.data("bwd_w");
        const double* bwd_b = params_.data("bwd_b");

        hid_.assign(static_cast<size_t>(n) * hd, 0.0);
        f_.assign(static_cast<size_t>(n) * hd, 0.0);
        g_.assign(static_cast<size_t>(n) * hd, 0.0);
        for (int i = 0; i < n; ++i) {
            double* hid = hid_.data() + static_cast<size_t>(i) * hd;
            for (int o = 0; o < hd; ++o) hid[o] = mix_b[o];
            for (int wpos = 0; wpos < win; ++wpos) {
                int t = i + wpos - cfg_.window;
                if (t < 0 || t >= n) continue;  // zero padding
                const double* e = emb + static_cast<size_t>(ids_[t]) * d;
                for (int o = 0; o < hd; ++o) {
                    const double* row = mix_w + static_cast<size_t>(o) * win * d +
                                        static_cast<size_t>(wpos) * d;
                    double s = 0.0;
                    for (int k = 0; k < d; ++k) s += row[k] * e[k];
                    hid[o] += s;
                }
            }
            for (int o = 0; o < hd; ++o) hid[o] = act(hid[o]);
            double* f = f_.data() + static_cast<size_t>(i) * hd;
            double* g = g_.data() + static_cast<size_t>(i) * hd;
            for (int o = 0; o < hd; ++o) {
                const double* frow = fwd_w + static_cast<size_t>(o) * hd;
                const double* brow = bwd_w + static_cast<size_t>(o) * hd;
                double fs = fwd_b[o], bs = bwd_b[o];
                for (int k = 0; k < hd; ++k) {
                    fs += frow[k] * hid[k];
                    bs += brow[k] * hid[k];
                }
                f[o] = act(fs);
                g[o] = act(bs);
            }
        }

        auto run_mlp = [&](const char* name, int k, bool fencepost,
                           std::vector<double>& out) {
            const double* w = params_.data(std::string(name) + "_w");
            const double* b = params_.data(std::string(name) + "_b");
            out.assign(static_cast<size_t>(n) * (k + 1), 0.0);
            for (int i = 0; i < n; ++i) {
                const double* zf = f_.data() + static_cast<size_t>(i) * hd;
                const double* zg = (fencepost ? (i + 1 < n ? g_.data() + static_cast<size_t>(i + 1) * hd
                                                           : nullptr)
                                              : g_.data() + static_cast<size_t>(i) * hd);
                double* e = out.data() + static_cast<size_t>(i) * (k + 1);
                for (int o = 0; o < k; ++o) {
                    const double* row = w + static_cast<size_t>(o) * 2 * hd;
                    double s = b[o];
                    for (int t = 0; t < hd; ++t) s += row[t] * zf[t];
                    if (zg)
                        for (int t = 0; t < hd; ++t) s += row[hd + t] * zg[t];
                    e[o] = act(s);
                }
                e[k] = 1.0;  // bias augmentation
            }
        };
        run_mlp("span_in", cfg_.k_span, true, e_span_in_);
        run_mlp("span_out", cfg_.k_span, true, e_span_out_);
        run_mlp("arc_in", cfg_.k_arc, false, e_arc_in_);
        run_mlp("arc_out", cfg_.k_arc, false, e_arc_out_);
        if (cfg_.label_classes() > 0) {
            run_mlp("label_in", cfg_.k_label, true, e_label_in_);
            run_mlp("label_out", cfg_.k_label, true, e_label_out_);
            run_mlp("label_head", cfg_.k_label, false, e_label_head_);
        }
    }

    void backward_encoder(std::vector<double>& d_e, ParamStore& grad_store) {
        const int n = n_;
        const int hd = cfg_.d_hidden;
        const int d = cfg_.d_emb;
        const int win = 2 * cfg_.window + 1;
        std::vector<double> d_f(static_cast<size_t>(n) * hd, 0.0);
        std::vector<double> d_g(static_cast<size_t>(n) * hd, 0.0);
        const size_t kstride = static_cast<size_t>(
            std::max({cfg_.k_span, cfg_.k_arc, cfg_.k_label}));

        auto mlp_backward = [&](const char* name, int k, bool fencepost,
                                const std::vector<double>& e, Boundary kind) {
            const double* w = params_.data(std::string(name) + "_w");
            double* d_w = grad_store.data(std::string(name) + "_w");
            double* d_b = grad_store.data(std::string(name) + "_b");
            for (int i = 0; i < n; ++i) {
                const double* de =
                    d_e.data() +
                    (static_cast<size_t>(i) * kBoundaryKinds + static_cast<size_t>(kind)) *
                        kstride;
                const double* ei = e.data() + static_cast<size_t>(i) * (k + 1);
                const double* zf = f_.data() + static_cast<size_t>(i) * hd;
                const double* zg = (fencepost ? (i + 1 < n ? g_.data() + static_cast<size_t>(i + 1) * hd
                                                           : nullptr)
                                              : g_.data() + static_cast<size_t>(i) * hd);
                double* dzf = d_f.data() + static_cast<size_t>(i) * hd;
                double* dzg = (fencepost ? (i + 1 < n ? d_g.data() + static_cast<size_t>(i + 1) * hd
                                                      : nullptr)
                                         : d_g.data() + static_cast<size_t>(i) * hd);
                for (int o = 0; o < k; ++o) {
                    double g = de[o];
                    if (g == 0.0) continue;
                    g *= act_grad(ei[o]);
                    d_b[o] += g;
                    const double* row = w + static_cast<size_t>(o) * 2 * hd;
                    double* d_row = d_w + static_cast<size_t>(o) * 2 * hd;
                    for (int t = 0; t < hd; ++t) {
                        d_row[t] += g * zf[t];
                        dzf[t] += g * row[t];
                    }
                    if (zg)
                        for (int t = 0; t < hd; ++t) {
                            d_row[hd + t] += g * zg[t];
                            dzg[t] += g * row[hd + t];
                        }
                }
            }
        };
        mlp_backward("span_in", cfg_.k_span, true, e_span_in_, Boundary::SpanIn);
        mlp_backward("span_out", cfg_.k_span, true, e_span_out_, Boundary::SpanOut);
        mlp_backward("arc_in", cfg_.k_arc, false, e_arc_in_, Boundary::ArcIn);
        mlp_backward("arc_out", cfg_.k_arc, false, e_arc_out_, Boundary::ArcOut);
        if (cfg_.label_classes() > 0) {
            mlp_backward("label_in", cfg_.k_label, true, e_label_in_, Boundary::LabelIn);
            mlp_backward("label_out", cfg_.k_label, true, e_label_out_, Boundary::LabelOut);
            mlp_backward("label_head", cfg_.k_label, false, e_label_head_,
                         Boundary::LabelHead);
        }

        const double* fwd_w = params_.data("fwd_w");
        const double* bwd_w = params_.data("bwd_w");
        double* d_fwd_w = grad_store.data("fwd_w");
        double* d_fwd_b = grad_store.data("fwd_b");
        double* d_bwd_w = grad_store.data("bwd_w");
        double* d_bwd_b = grad_store.data("bwd_b");
        const double* mix_w = params_.data("mix_w");
        double* d_mix_w = grad_store.data("mix_w");
        double* d_mix_b = grad_store.data("mix_b");
        const double* emb = params_.data("emb");
        double* d_emb = grad_store.data("emb");

        std::vector<double> d_hid(hd);
        for (int i = 0; i < n; ++i) {
            const double* hid = hid_.data() + static_cast<size_t>(i) * hd;
            const double* f = f_.data() + static_cast<size_t>(i) * hd;
            const double* g = g_.data() + static_cast<size_t>(i) * hd;
            std::fill(d_hid.begin(), d_hid.end(), 0.0);
            for (int o = 0; o < hd; ++o) {
                double gf = d_f[static_cast<size_t>(i) * hd + o];
                if (gf != 0.0) {
                    gf *= act_grad(f[o]);
                    d_fwd_b[o] += gf;
                    const double* row = fwd_w + static_cast<size_t>(o) * hd;
                    double* d_row = d_fwd_w + static_cast<size_t>(o) * hd;
                    for (int t = 0; t < hd; ++t) {
                        d_row[t] += gf * hid[t];
                        d_hid[t] += gf * row[t];
                    }
                }
                double gb = d_g[static_cast<size_t>(i) * hd + o];
                if (gb != 0.0) {
                    gb *= act_grad(g[o]);
                    d_bwd_b[o] += gb;
                    const double* row = bwd_w + static_cast<size_t>(o) * hd;
                    double* d_row = d_bwd_w + static_cast<size_t>(o) * hd;
                    for (int t = 0; t < hd; ++t) {
                        d_row[t] += gb * hid[t];
                        d_hid[t] += gb * row[t];
                    }
                }
            }
            for (int o = 0; o < hd; ++o) {
                double gh = d_hid[o] * act_grad(hid[o]);
                if (gh == 0.0) continue;
                d_mix_b[o] += gh;
                for (int wpos = 0; wpos < win; ++wpos) {
                    int t = i + wpos - cfg_.window;
                    if (t < 0 || t >= n) continue;
                    const double* e = emb + static_cast<size_t>(ids_[t]) * d;
                    const double* row = mix_w + static_cast<size_t>(o) * win * d +
                                        static_cast<size_t>(wpos) * d;
                    double* d_row = d_mix_w + static_cast<size_t>(o) * win * d +
                                    static_cast<size_t>(wpos) * d;
                    double* de = d_emb + static_cast<size_t>(ids_[t]) * d;
                    for (int k = 0; k < d; ++k) {
                        d_row[k] += gh * e[k];
                        de[k] += gh * row[k];
                    }
                }
            }
        }
    }

    const double* u_span_in(int i) const {
        return e_span_in_.data() + static_cast<size_t>(i) * (cfg_.k_span + 1);
    }
    const double* u_span_out(int i) const {
        return e_span_out_.data() + static_cast<size_t>(i) * (cfg_.k_span + 1);
    }
    const double* u_arc_in(int i) const {
        return e_arc_in_.data() + static_cast<size_t>(i) * (cfg_.k_arc + 1);
    }
    const double* u_arc_out(int i) const {
        return e_arc_out_.data() + static_cast<size_t>(i) * (cfg_.k_arc + 1);
    }
    const double* u_label_in(int i) const {
        return e_label_in_.data() + static_cast<size_t>(i) * (cfg_.k_label + 1);
    }
    const double* u_label_out(int i) const {
        return e_label_out_.data() + static_cast<size_t>(i) * (cfg_.k_label + 1);
    }
    const double* u_label_head(int i) const {
        return e_label_head_.data() + static_cast<size_t>(i) * (cfg_.k_label + 1);
    }

    // A[b,c] = sum_a W_label[l][a,b,c] * u_in_i[a], cached per (i, l).
    const double* label_left(int i, int l) {
        const int kl = cfg_.k_label + 1;
        auto key = std::make_pair(i, l);
        auto it = label_left_.find(key);
        if (it != label_left_.end()) return it->second.data();
        const double* w = params_.data("w_label") + static_cast<size_t>(l) * kl * kl * kl;
        const double* u = u_label_in(i);
        std::vector<double> A(static_cast<size_t>(kl) * kl, 0.0);
        for (int a = 0; a < kl; ++a) {
            double ua = u[a];
            if (ua == 0.0) continue;
            const double* wa = w + static_cast<size_t>(a) * kl * kl;
            for (size_t bc = 0; bc < static_cast<size_t>(kl) * kl; ++bc) A[bc] += ua * wa[bc];
        }
        auto [pos, inserted] = label_left_.emplace(key, std::move(A));
        return pos->second.data();
    }

    const ModelConfig& cfg_;
    const ParamStore& params_;
    bool has_forward_ = false;
    int n_ = 0;
    std::vector<int> ids_;
    std::vector<double> hid_, f_, g_;
    std::vector<double> e_span_in_, e_span_out_, e_arc_in_, e_arc_out_;
    std::vector<double> e_label_in_, e_label_out_, e_label_head_;
    std::vector<double> span_left_, arc_left_;
    std::vector<double> span_pre_, span_norm_, arc_pre_, arc_norm_;
    std::vector<uint8_t> span_valid_, arc_valid_;
    PnStats span_stats_, arc_stats_;
    std::map<std::pair<int, int>, std::vector<double>> label_left_;
};

}  // namespace lexcrf
