#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lexcrf/numeric.hpp"

namespace lexcrf {

struct InvalidInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidScore : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct WrongSemiring : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Sentence {
    std::vector<std::string> tokens;

    int size() const { return static_cast<int>(tokens.size()); }

    void validate() const {
        if (tokens.empty()) throw InvalidInput("sentence must contain at least one token");
        for (const auto& t : tokens)
            if (t.empty()) throw InvalidInput("sentence contains an empty token");
    }
};

// One observed entity: inclusive token span, one or more label ids, and an
// optional gold head used only for evaluation.
struct GoldSpan {
    int start = 0;
    int end = 0;
    std::vector<int> labels;
    std::optional<int> head;
};

inline bool spans_cross(int i1, int j1, int i2, int j2) {
    bool disjoint = j1 < i2 || j2 < i1;
    bool nested = (i1 <= i2 && j2 <= j1) || (i2 <= i1 && j1 <= j2);
    return !disjoint && !nested;
}

struct EntitySet {
    std::vector<GoldSpan> spans;

    EntitySet() = default;
    explicit EntitySet(std::vector<GoldSpan> s) : spans(std::move(s)) { normalize(); }

    // Canonical order makes every downstream sum independent of input order.
    void normalize() {
        std::sort(spans.begin(), spans.end(), [](const GoldSpan& a, const GoldSpan& b) {
            if (a.start != b.start) return a.start < b.start;
            return a.end < b.end;
        });
        for (auto& s : spans) std::sort(s.labels.begin(), s.labels.end());
    }

    void validate(int n) const {
        for (const auto& s : spans) {
            if (s.start < 0 || s.end < s.start || s.end >= n)
                throw InvalidInput("entity span out of range or end < start");
            if (s.labels.empty()) throw InvalidInput("entity has an empty label set");
            if (s.head && (*s.head < s.start || *s.head > s.end))
                throw InvalidInput("entity head lies outside the span");
        }
        for (size_t a = 0; a < spans.size(); ++a)
            for (size_t b = a + 1; b < spans.size(); ++b) {
                if (spans[a].start == spans[b].start && spans[a].end == spans[b].end)
                    throw InvalidInput("duplicate entity span");
                if (spans_cross(spans[a].start, spans[a].end, spans[b].start, spans[b].end))
                    throw InvalidInput("crossing entity spans");
            }
    }

    bool empty() const { return spans.empty(); }
};

// Unnormalized log-potentials for one sentence. span is n x n x channels with
// channel 0 reserved for latent spans; arc is (n+1) x n with row n holding the
// virtual-root attachment scores, indexed [parent][child].
struct ScoreSet {
    int n = 0;
    int channels = 2;
    std::vector<double> span;
    std::vector<double> arc;

    ScoreSet() = default;
    ScoreSet(int n_, int channels_, double fill = 0.0)
        : n(n_),
          channels(channels_),
          span(static_cast<size_t>(n_) * n_ * channels_, fill),
          arc(static_cast<size_t>(n_ + 1) * n_, fill) {}

    double& span_at(int i, int j, int c) {
        return span[(static_cast<size_t>(i) * n + j) * channels + c];
    }
    double span_at(int i, int j, int c) const {
        return span[(static_cast<size_t>(i) * n + j) * channels + c];
    }
    double& arc_at(int parent, int child) {
        return arc[static_cast<size_t>(parent) * n + child];
    }
    double arc_at(int parent, int child) const {
        return arc[static_cast<size_t>(parent) * n + child];
    }
    int root_row() const { return n; }

    void check_finite() const {
        for (double v : span)
            if (std::isnan(v)) throw InvalidScore("NaN in span scores");
        for (double v : arc)
            if (std::isnan(v)) throw InvalidScore("NaN in arc scores");
    }
};

// Gradients with the same layout as the score tensors they differentiate.
struct ScoreGradients {
    int n = 0;
    int channels = 2;
    std::vector<double> span;
    std::vector<double> arc;

    ScoreGradients() = default;
    ScoreGradients(int n_, int channels_)
        : n(n_),
          channels(channels_),
          span(static_cast<size_t>(n_) * n_ * channels_, 0.0),
          arc(static_cast<size_t>(n_ + 1) * n_, 0.0) {}

    double& span_at(int i, int j, int c) {
        return span[(static_cast<size_t>(i) * n + j) * channels + c];
    }
    double span_at(int i, int j, int c) const {
        return span[(static_cast<size_t>(i) * n + j) * channels + c];
    }
    double& arc_at(int parent, int child) {
        return arc[static_cast<size_t>(parent) * n + child];
    }
    double arc_at(int parent, int child) const {
        return arc[static_cast<size_t>(parent) * n + child];
    }

    void add_scaled(const ScoreGradients& other, double scale) {
        for (size_t k = 0; k < span.size(); ++k) span[k] += scale * other.span[k];
        for (size_t k = 0; k < arc.size(); ++k) arc[k] += scale * other.arc[k];
    }
};

}  // namespace lexcrf
