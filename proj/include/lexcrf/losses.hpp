#pragma once

#include <functional>
#include <vector>

#include "lexcrf/chart.hpp"
#include "lexcrf/head_expectation.hpp"
#include "lexcrf/kl.hpp"
#include "lexcrf/marginals.hpp"
#include "lexcrf/scorer.hpp"
#include "lexcrf/span_weights.hpp"
#include "lexcrf/types.hpp"

namespace lexcrf {

// Loss switches; unit weights reproduce the plain three-term sum, the
// coefficients exist for ablations only.
struct LossConfig {
    LabelScheme scheme = LabelScheme::ZeroOne;
    bool lexicalized = true;
    bool use_reg = true;
    double penalty_c = 0.4;
    bool use_head_aware = true;  // off: uniform weights over in-span heads
    // With joint gradients the labeling loss also pushes the structure scores
    // toward heads whose label scores explain the gold types; off reduces to
    // the pipeline variant where the head weights are constants.
    bool joint_head_grads = true;
    double w_tree = 1.0;
    double w_label = 1.0;
    double w_reg = 1.0;
    // Single-scheme stage II: skip no-entity spans rarer than this under the
    // compatible-tree distribution.
    double negative_floor = 1e-3;
};

struct LossReport {
    double l_tree = 0.0;
    double l_label = 0.0;
    double l_reg = 0.0;
    double total = 0.0;
    ScoreGradients grads;               // d total / d span+arc scores
    std::vector<LabelGrad> label_grads;  // d total / d label scores at queried triples
};

// Multilabel loss of one label-score vector against the gold label set:
//   log(1 + sum_{l not in gold} e^{s_l}) + log(1 + sum_{l in gold} e^{-s_l}).
inline double multilabel_term(std::span<const double> scores, const std::vector<int>& gold,
                              std::vector<double>* grads = nullptr) {
    if (gold.empty()) throw InvalidInput("multilabel term needs a non-empty gold set");
    std::vector<uint8_t> in_gold(scores.size(), 0);
    for (int l : gold) {
        if (l < 0 || l >= static_cast<int>(scores.size()))
            throw InvalidInput("gold label out of range");
        in_gold[l] = 1;
    }
    std::vector<double> neg{0.0}, pos{0.0};
    for (size_t l = 0; l < scores.size(); ++l)
        (in_gold[l] ? pos : neg).push_back(in_gold[l] ? -scores[l] : scores[l]);
    double lse_neg = log_sum_exp(neg);
    double lse_pos = log_sum_exp(pos);
    if (grads) {
        grads->assign(scores.size(), 0.0);
        for (size_t l = 0; l < scores.size(); ++l)
            (*grads)[l] = in_gold[l] ? -std::exp(-scores[l] - lse_pos)
                                     : std::exp(scores[l] - lse_neg);
    }
    return lse_neg + lse_pos;
}

// Structural tree loss: free log-partition minus the compatible-tree mass.
inline double loss_tree(const ScoreSet& scores, const MaskPlan& mask, LabelScheme scheme,
                        ScoreGradients& grads_out, Marginals* masked_marginals = nullptr) {
    LogZResult free_pass = grad_log_z(scores, scheme, nullptr);
    Chart masked_chart = inside_eisner_satta(scores, scheme, &mask);
    if (is_neg_inf(masked_chart.root))
        throw InvalidInput("all compatible trees masked out; annotation error");
    Marginals masked = backward_marginals(masked_chart, scores);
    grads_out = free_pass.grads;
    for (size_t k = 0; k < grads_out.span.size(); ++k) grads_out.span[k] -= masked.span_mu[k];
    for (size_t k = 0; k < grads_out.arc.size(); ++k) grads_out.arc[k] -= masked.arc_mu[k];
    if (masked_marginals) *masked_marginals = std::move(masked);
    return free_pass.log_z - masked_chart.root;
}

inline double loss_tree_cyk(const ScoreSet& scores, const MaskPlan& mask, LabelScheme scheme,
                            ScoreGradients& grads_out,
                            CykMarginals* masked_marginals = nullptr) {
    CykChart free_chart = inside_cyk(scores, scheme);
    CykMarginals free_m = backward_cyk(free_chart, scores);
    CykChart masked_chart = inside_cyk(scores, scheme, &mask);
    if (is_neg_inf(masked_chart.root))
        throw InvalidInput("all compatible trees masked out; annotation error");
    CykMarginals masked = backward_cyk(masked_chart, scores);
    grads_out = ScoreGradients(scores.n, scores.channels);
    for (size_t k = 0; k < grads_out.span.size(); ++k)
        grads_out.span[k] = free_m.span_mu[k] - masked.span_mu[k];
    if (masked_marginals) *masked_marginals = std::move(masked);
    return free_chart.root - masked_chart.root;
}

// Head regularization: KL between the penalized and unpenalized compatible-tree
// distributions, penalty targeting the gold entity spans.
inline double loss_reg(const ScoreSet& scores, const MaskPlan& mask, LabelScheme scheme,
                       const EntitySet& gold, double c, ScoreGradients& grads_out) {
    Penalty pen = gold_span_targets(gold, scores.n, c);
    KlResult kl = kl_constrained(scores, scheme, &mask, pen);
    grads_out = std::move(kl.grads);
    return kl.kl;
}

// Head-aware labeling loss for one entity: expectation over in-span heads of
// the multilabel term, weights held constant with respect to the scores.
struct LabelLossAccumulator {
    double value = 0.0;
    std::vector<LabelGrad> grads;

    void add(int i, int j, const std::vector<double>& head_weights,
             const std::vector<int>& gold_labels, const std::function<std::vector<double>(int)>& score_at_head,
             double outer_weight, bool headless) {
        std::vector<double> g;
        if (headless) {
            std::vector<double> s = score_at_head(-1);
            double v = multilabel_term(s, gold_labels, &g);
            value += outer_weight * v;
            for (size_t l = 0; l < g.size(); ++l)
                if (g[l] != 0.0)
                    grads.push_back({i, j, -1, static_cast<int>(l), outer_weight * g[l]});
            return;
        }
        for (int h = i; h <= j; ++h) {
            double w = head_weights[h - i] * outer_weight;
            if (w <= 0.0) continue;
            std::vector<double> s = score_at_head(h);
            double v = multilabel_term(s, gold_labels, &g);
            value += w * v;
            for (size_t l = 0; l < g.size(); ++l)
                if (g[l] != 0.0) grads.push_back({i, j, h, static_cast<int>(l), w * g[l]});
        }
    }
};

// Full per-sentence loss. The label scorer is queried lazily; for the Single
// scheme the class at index 0 is the no-entity class and latent spans enter as
// negatives weighted by their compatible-tree marginals.
inline LossReport sentence_loss(const ScoreSet& scores, const EntitySet& gold,
                                const LossConfig& cfg, Scorer* label_scorer) {
    const int n = scores.n;
    gold.validate(n);
    LossReport report;
    report.grads = ScoreGradients(n, scores.channels);
    MaskPlan mask = build_mask(gold, n, true, cfg.scheme, scores.channels);

    Marginals masked_lex;
    CykMarginals masked_cyk;
    ScoreGradients tree_grads;
    if (cfg.lexicalized) {
        report.l_tree = loss_tree(scores, mask, cfg.scheme, tree_grads, &masked_lex);
    } else {
        report.l_tree = loss_tree_cyk(scores, mask, cfg.scheme, tree_grads, &masked_cyk);
    }
    report.grads.add_scaled(tree_grads, cfg.w_tree);

    if (cfg.use_reg && cfg.penalty_c > 0 && cfg.lexicalized && !gold.empty()) {
        ScoreGradients reg_grads;
        report.l_reg = loss_reg(scores, mask, cfg.scheme, gold, cfg.penalty_c, reg_grads);
        report.grads.add_scaled(reg_grads, cfg.w_reg);
    }

    if (label_scorer && cfg.scheme != LabelScheme::Multi) {
        const bool headless = !cfg.lexicalized;
        const bool joint = cfg.lexicalized && cfg.use_head_aware && cfg.joint_head_grads;
        double value = 0.0;
        std::vector<HeadTerm> head_terms;
        std::vector<double> term_grads;

        auto add_span = [&](int i, int j, const std::vector<int>& labels,
                            double outer_weight) {
            if (headless) {
                double v = multilabel_term(label_scorer->label_scores_headless(i, j),
                                           labels, &term_grads);
                value += outer_weight * v;
                for (size_t l = 0; l < term_grads.size(); ++l)
                    if (term_grads[l] != 0.0)
                        report.label_grads.push_back({i, j, -1, static_cast<int>(l),
                                                      outer_weight * term_grads[l]});
                return;
            }
            std::vector<double> alpha(static_cast<size_t>(j - i + 1),
                                      1.0 / static_cast<double>(j - i + 1));
            if (cfg.use_head_aware) alpha = masked_lex.head_alpha(i, j);
            HeadTerm term;
            term.start = i;
            term.end = j;
            term.value_by_head.assign(static_cast<size_t>(j - i + 1), 0.0);
            for (int h = i; h <= j; ++h) {
                double w = alpha[h - i] * outer_weight;
                if (w <= 0.0 && !joint) continue;
                double v = multilabel_term(label_scorer->label_scores(i, j, h), labels,
                                           &term_grads);
                term.value_by_head[h - i] = v;
                value += w * v;
                for (size_t l = 0; l < term_grads.size(); ++l)
                    if (term_grads[l] != 0.0 && w > 0.0)
                        report.label_grads.push_back(
                            {i, j, h, static_cast<int>(l), w * term_grads[l]});
            }
            if (joint) head_terms.push_back(std::move(term));
        };

        const int offset = cfg.scheme == LabelScheme::Single ? 1 : 0;
        for (const auto& e : gold.spans) {
            std::vector<int> labels;
            for (int l : e.labels) labels.push_back(l + offset);
            add_span(e.start, e.end, labels, 1.0);
        }
        if (cfg.scheme == LabelScheme::Single) {
            std::vector<uint8_t> is_gold(static_cast<size_t>(n) * n, 0);
            for (const auto& e : gold.spans)
                is_gold[static_cast<size_t>(e.start) * n + e.end] = 1;
            const std::vector<int> empty_class{0};
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) {
                    if (is_gold[static_cast<size_t>(i) * n + j]) continue;
                    double mu = cfg.lexicalized ? masked_lex.span_total_at(i, j)
                                                : masked_cyk.span_total_at(i, j);
                    if (mu < cfg.negative_floor) continue;
                    add_span(i, j, empty_class, mu);
                }
        }
        report.l_label = value;
        if (joint && !head_terms.empty()) {
            HeadExpectationResult he =
                head_expectation(scores, cfg.scheme, &mask, head_terms);
            report.l_label = he.value;
            report.grads.add_scaled(he.grads, cfg.w_label);
        }
        if (cfg.w_label != 1.0)
            for (auto& g : report.label_grads) g.grad *= cfg.w_label;
    }

    report.total = cfg.w_tree * report.l_tree + cfg.w_label * report.l_label +
                   cfg.w_reg * report.l_reg;
    return report;
}

}  // namespace lexcrf
