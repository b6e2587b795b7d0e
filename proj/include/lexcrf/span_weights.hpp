#pragma once

#include <cstdint>
#include <vector>

#include "lexcrf/numeric.hpp"
#include "lexcrf/types.hpp"

namespace lexcrf {

// How the per-span channels of a ScoreSet enter the chart.
//  ZeroOne: channel 0 = latent, channel 1 = entity; free weight sums both.
//  Single:  one potential per span (channel 1); labels play no role in stage I.
//  Multi:   channel 0 = no-label, channels 1..L = entity labels; one-stage.
enum class LabelScheme { ZeroOne, Single, Multi };

// Spans incompatible with the observed entities, plus (optionally) the channel
// set each surviving span is restricted to when computing the numerator.
struct MaskPlan {
    int n = 0;
    std::vector<uint8_t> banned;      // n*n, true iff the span crosses a gold entity
    bool force_labels = false;
    std::vector<uint32_t> allowed;    // n*n channel bitmask, valid iff force_labels

    bool is_banned(int i, int j) const { return banned[static_cast<size_t>(i) * n + j] != 0; }
    uint32_t allowed_at(int i, int j) const {
        return allowed[static_cast<size_t>(i) * n + j];
    }
};

// Marks exactly the spans that cross some gold entity. With force_labels the
// plan also pins gold spans to their entity channel(s) and everything else to
// the latent channel, which is what the numerator pass needs.
inline MaskPlan build_mask(const EntitySet& entities, int n, bool force_labels = true,
                           LabelScheme scheme = LabelScheme::ZeroOne, int channels = 2) {
    entities.validate(n);
    MaskPlan plan;
    plan.n = n;
    plan.banned.assign(static_cast<size_t>(n) * n, 0);
    plan.force_labels = force_labels;
    if (force_labels) {
        uint32_t latent = (scheme == LabelScheme::Single) ? 2u : 1u;
        plan.allowed.assign(static_cast<size_t>(n) * n, latent);
    }
    for (const auto& e : entities.spans) {
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j)
                if (spans_cross(i, j, e.start, e.end))
                    plan.banned[static_cast<size_t>(i) * n + j] = 1;
        if (force_labels) {
            uint32_t allowed = 0;
            switch (scheme) {
                case LabelScheme::ZeroOne:
                case LabelScheme::Single:
                    allowed = 2u;  // channel 1
                    break;
                case LabelScheme::Multi:
                    // channel 0 is the no-label class; label l sits at l + 1
                    for (int l : e.labels) allowed |= 1u << (l + 1);
                    break;
            }
            plan.allowed[static_cast<size_t>(e.start) * n + e.end] = allowed;
        }
    }
    for (const auto& e : entities.spans)
        if (plan.is_banned(e.start, e.end))
            throw InvalidInput("gold entity span ended up banned; crossing annotation");
    if ((scheme == LabelScheme::ZeroOne || scheme == LabelScheme::Single) && channels != 2)
        throw InvalidInput("ZeroOne/Single schemes expect 2 score channels");
    return plan;
}

// Per-span log-potentials fed to the chart: log-sum over the channels the mode
// leaves open, or the sentinel for banned spans.
struct SpanWeights {
    int n = 0;
    int channels = 2;
    LabelScheme scheme = LabelScheme::ZeroOne;
    std::vector<double> w;          // n*n
    std::vector<uint32_t> open;     // n*n channel bitmask actually summed (0 = banned)

    double at(int i, int j) const { return w[static_cast<size_t>(i) * n + j]; }
    uint32_t open_at(int i, int j) const { return open[static_cast<size_t>(i) * n + j]; }
};

inline uint32_t free_channel_mask(LabelScheme scheme, int channels) {
    if (scheme == LabelScheme::Single) return 2u;
    return (channels >= 32) ? ~0u : ((1u << channels) - 1u);
}

// Channel folding: log-sum for partition-style charts, max for Viterbi.
enum class Fold { LogSum, Max };

inline SpanWeights build_span_weights(const ScoreSet& scores, LabelScheme scheme,
                                      const MaskPlan* mask = nullptr,
                                      Fold fold = Fold::LogSum) {
    const int n = scores.n;
    SpanWeights sw;
    sw.n = n;
    sw.channels = scores.channels;
    sw.scheme = scheme;
    sw.w.assign(static_cast<size_t>(n) * n, kNegInf);
    sw.open.assign(static_cast<size_t>(n) * n, 0);
    const uint32_t free_mask = free_channel_mask(scheme, scores.channels);
    std::vector<double> buf;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            size_t idx = static_cast<size_t>(i) * n + j;
            if (mask && mask->is_banned(i, j)) continue;
            uint32_t open = free_mask;
            if (mask && mask->force_labels) open = mask->allowed_at(i, j);
            buf.clear();
            for (int c = 0; c < scores.channels; ++c)
                if (open & (1u << c)) buf.push_back(scores.span_at(i, j, c));
            sw.open[idx] = open;
            if (fold == Fold::LogSum) {
                sw.w[idx] = log_sum_exp(buf);
            } else {
                double best = kNegInf;
                for (double v : buf) best = std::max(best, v);
                sw.w[idx] = best;
            }
        }
    return sw;
}

// Spec-level helper: the weight of one span under free or forced labeling.
inline double span_weight(const ScoreSet& scores, int i, int j, LabelScheme scheme,
                          const MaskPlan* mask = nullptr) {
    if (i > j) throw InvalidInput("span_weight requires i <= j");
    if (mask && mask->is_banned(i, j)) return kNegInf;
    uint32_t open = free_channel_mask(scheme, scores.channels);
    if (mask && mask->force_labels) open = mask->allowed_at(i, j);
    std::vector<double> buf;
    for (int c = 0; c < scores.channels; ++c)
        if (open & (1u << c)) buf.push_back(scores.span_at(i, j, c));
    return log_sum_exp(buf);
}

// Distributes a gradient on the folded span weight back onto channels.
inline void span_weight_backprop(const SpanWeights& sw, const ScoreSet& scores, int i, int j,
                                 double grad, ScoreGradients& out) {
    uint32_t open = sw.open_at(i, j);
    if (open == 0 || grad == 0.0) return;
    double total = sw.at(i, j);
    if (is_neg_inf(total)) return;
    for (int c = 0; c < scores.channels; ++c)
        if (open & (1u << c))
            out.span_at(i, j, c) += grad * std::exp(scores.span_at(i, j, c) - total);
}

}  // namespace lexcrf
