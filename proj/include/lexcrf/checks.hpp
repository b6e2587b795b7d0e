#pragma once

#include <cmath>
#include <ostream>
#include <random>
#include <string>

#include "lexcrf/decode.hpp"
#include "lexcrf/kl.hpp"
#include "lexcrf/marginals.hpp"
#include "lexcrf/oracle.hpp"

namespace lexcrf {

// Randomized property suite comparing the chart machinery against the
// enumeration oracle; backs the `oracle-check` command and the fixed-fixture
// part of the acceptance suite.
struct CheckOptions {
    int n_max = 5;
    int trials = 200;
    uint64_t seed = 1;
};

namespace check_detail {

inline ScoreSet random_scores(int n, std::mt19937_64& rng) {
    ScoreSet s(n, 2);
    for (auto& v : s.span) v = uniform(rng, -2.0, 2.0);
    for (auto& v : s.arc) v = uniform(rng, -2.0, 2.0);
    return s;
}

inline EntitySet random_entities(int n, std::mt19937_64& rng) {
    std::vector<std::pair<int, int>> all;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) all.push_back({i, j});
    deterministic_shuffle(all, rng);
    std::vector<GoldSpan> spans;
    for (auto [i, j] : all) {
        if (uniform01(rng) > 0.4) continue;
        bool ok = true;
        for (const auto& s : spans)
            if ((s.start == i && s.end == j) || spans_cross(i, j, s.start, s.end)) ok = false;
        if (!ok) continue;
        spans.push_back({i, j, {0}, std::nullopt});
        if (spans.size() >= 3) break;
    }
    return EntitySet(std::move(spans));
}

}  // namespace check_detail

inline bool run_oracle_checks(const CheckOptions& opt, std::ostream& out) {
    std::mt19937_64 rng(opt.seed);
    if (opt.n_max < 2 || opt.n_max > oracle::kMaxTokens)
        throw InvalidInput("n-max must lie in [2, 7]");
    if (opt.trials < 1) throw InvalidInput("need at least one trial");

    int fail_inside = 0, fail_viterbi = 0, fail_marginals = 0, fail_alpha = 0, fail_kl = 0,
        fail_count = 0, fail_grad = 0, fail_tree = 0, fail_mask = 0, fail_mono = 0;

    for (int trial = 0; trial < opt.trials; ++trial) {
        int n = 2 + static_cast<int>(uniform_index(
                        rng, static_cast<size_t>(opt.n_max - 1)));
        ScoreSet scores = check_detail::random_scores(n, rng);
        EntitySet gold = check_detail::random_entities(n, rng);
        MaskPlan mask = build_mask(gold, n, true);
        Penalty pen = gold_span_targets(gold, n, 0.4);
        oracle::Penalty open;
        open.constant = pen.constant;
        open.targets = pen.targets;

        auto q_free = oracle::oracle_quantities(scores, LabelScheme::ZeroOne);
        auto q_masked = oracle::oracle_quantities(scores, LabelScheme::ZeroOne, &mask);
        auto q_pen = oracle::oracle_quantities(scores, LabelScheme::ZeroOne, &mask, &open);

        double free_root = inside_eisner_satta(scores, LabelScheme::ZeroOne).root;
        double masked_root = masked_log_numerator(scores, mask);
        if (std::abs(free_root - q_free.log_z) > 1e-6) ++fail_inside;
        if (std::abs(masked_root - q_masked.log_z) > 1e-6) ++fail_inside;
        if (masked_root > free_root + 1e-9) ++fail_inside;

        LexTree tree = viterbi_lexicalized(scores, LabelScheme::ZeroOne);
        if (std::abs(tree.score - q_free.max_score) > 1e-9) ++fail_viterbi;
        if (rescore_like_chart(tree, scores, LabelScheme::ZeroOne) != tree.score)
            ++fail_viterbi;
        try {
            check_tree_invariants(tree);
        } catch (const std::exception&) {
            ++fail_tree;
        }
        for (size_t a = 0; a < tree.constituents.size(); ++a)
            for (size_t b = a + 1; b < tree.constituents.size(); ++b) {
                const auto& ca = tree.constituents[a];
                const auto& cb = tree.constituents[b];
                if (ca.label == 1 && cb.label == 1 &&
                    spans_cross(ca.start, ca.end, cb.start, cb.end))
                    ++fail_tree;
            }

        Chart chart = inside_eisner_satta(scores, LabelScheme::ZeroOne, &mask);
        Marginals marg = backward_marginals(chart, scores);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j)
                for (int c = 0; c < 2; ++c)
                    if (std::abs(marg.span_at(i, j, c) -
                                 q_masked.span_mu[(static_cast<size_t>(i) * n + j) * 2 + c]) >
                        1e-8)
                        ++fail_marginals;
        for (const auto& e : gold.spans) {
            auto alpha = marg.head_alpha(e.start, e.end);
            double total = 0;
            for (double a : alpha) total += a;
            if (std::abs(total - 1.0) > 1e-9) ++fail_alpha;
            for (int h = e.start; h <= e.end; ++h)
                if (std::abs(alpha[h - e.start] - q_masked.alpha(e.start, e.end, h, n)) >
                    1e-8)
                    ++fail_alpha;
        }

        KlResult kl = kl_constrained(scores, LabelScheme::ZeroOne, &mask, pen);
        double closed = kl_closed_form(scores, LabelScheme::ZeroOne, &mask, pen);
        if (std::abs(kl.kl - closed) > 1e-8 || std::abs(kl.kl - q_pen.kl) > 1e-8 ||
            kl.kl < 0)
            ++fail_kl;
        Penalty zero = pen;
        zero.constant = 0.0;
        if (kl_constrained(scores, LabelScheme::ZeroOne, &mask, zero).kl != 0.0) ++fail_kl;

        Chart chart_q =
            inside_eisner_satta(scores, LabelScheme::ZeroOne, &mask, Semiring::LogSum, &pen);
        if (std::abs(expected_penalty_count(chart_q, scores) - q_pen.expected_penalty_count) >
            1e-8)
            ++fail_count;

        // compatible trees are exactly the crossing-free ones
        int contains_all = 0;
        for (const auto& t : oracle::enumerate_lex_trees(n)) {
            int found = 0;
            for (const auto& e : gold.spans)
                for (const auto& nd : t.nodes)
                    if (nd.i == e.start && nd.j == e.end) {
                        ++found;
                        break;
                    }
            if (found == static_cast<int>(gold.spans.size())) ++contains_all;
        }
        if (q_masked.surviving_trees != contains_all) ++fail_mask;

        if (trial % 2 == 0) {
            // spot gradient probe against central finite differences
            LogZResult res = grad_log_z(scores, LabelScheme::ZeroOne, &mask);
            int i = static_cast<int>(uniform_index(rng, static_cast<size_t>(n)));
            int j = i + static_cast<int>(uniform_index(rng, static_cast<size_t>(n - i)));
            int c = static_cast<int>(uniform_index(rng, 2));
            const double step = 1e-4;
            ScoreSet s2 = scores;
            s2.span_at(i, j, c) += step;
            double up = inside_eisner_satta(s2, LabelScheme::ZeroOne, &mask).root;
            s2.span_at(i, j, c) -= 2 * step;
            double dn = inside_eisner_satta(s2, LabelScheme::ZeroOne, &mask).root;
            if (std::abs(res.grads.span_at(i, j, c) - (up - dn) / (2 * step)) > 1e-5)
                ++fail_grad;

            // monotonicity in an unmasked score
            if (!mask.is_banned(i, j)) {
                ScoreSet s3 = scores;
                s3.span_at(i, j, c) += 0.1;
                if (inside_eisner_satta(s3, LabelScheme::ZeroOne).root <= free_root)
                    ++fail_mono;
            }
        }
    }

    auto report = [&](const char* name, int fails) {
        out << (fails == 0 ? "PASS" : "FAIL") << "  " << name;
        if (fails > 0) out << "  (" << fails << " failures)";
        out << "\n";
        return fails == 0;
    };
    bool ok = true;
    ok &= report("inside log-partition vs oracle (free and masked, 1e-6)", fail_inside);
    ok &= report("viterbi max and exact derivation rescoring (1e-9)", fail_viterbi);
    ok &= report("span/arc marginals vs oracle (1e-8)", fail_marginals);
    ok &= report("head distributions normalized and vs oracle (1e-9 / 1e-8)", fail_alpha);
    ok &= report("kl: semiring = closed form = oracle, non-negative (1e-8)", fail_kl);
    ok &= report("expected penalty count vs oracle (1e-8)", fail_count);
    ok &= report("gradient spot checks vs finite differences (1e-5)", fail_grad);
    ok &= report("decoded trees: 2n-1 constituents, consistent heads, no crossing",
                 fail_tree);
    ok &= report("masked tree set equals the contains-all-gold set", fail_mask);
    ok &= report("log Z strictly increases in unmasked scores", fail_mono);
    return ok;
}

}  // namespace lexcrf
