#pragma once

#include <random>
#include <vector>

#include "lexcrf/numeric.hpp"
#include "lexcrf/span_weights.hpp"
#include "lexcrf/types.hpp"

namespace testing {

inline lexcrf::ScoreSet random_scores(int n, int channels, std::mt19937_64& rng,
                                      double lo = -2.0, double hi = 2.0) {
    lexcrf::ScoreSet s(n, channels);
    for (auto& v : s.span) v = lexcrf::uniform(rng, lo, hi);
    for (auto& v : s.arc) v = lexcrf::uniform(rng, lo, hi);
    return s;
}

// Random non-crossing entity set with 0-1 labels.
inline lexcrf::EntitySet random_entities(int n, std::mt19937_64& rng, int max_labels = 1,
                                         double keep_prob = 0.4) {
    std::vector<std::pair<int, int>> all;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) all.push_back({i, j});
    lexcrf::deterministic_shuffle(all, rng);
    std::vector<lexcrf::GoldSpan> spans;
    for (auto [i, j] : all) {
        if (lexcrf::uniform01(rng) > keep_prob) continue;
        bool ok = true;
        for (const auto& s : spans) {
            if (s.start == i && s.end == j) ok = false;
            if (lexcrf::spans_cross(i, j, s.start, s.end)) ok = false;
        }
        if (!ok) continue;
        lexcrf::GoldSpan s;
        s.start = i;
        s.end = j;
        int count = 1 + static_cast<int>(lexcrf::uniform_index(
                            rng, static_cast<size_t>(max_labels)));
        for (int l = 0; l < count; ++l) s.labels.push_back(l);
        spans.push_back(std::move(s));
        if (spans.size() >= 3) break;
    }
    return lexcrf::EntitySet(std::move(spans));
}

}  // namespace testing
