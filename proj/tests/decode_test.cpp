#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "helpers.hpp"
#include "lexcrf/decode.hpp"
#include "lexcrf/oracle.hpp"

using namespace lexcrf;

TEST_CASE("single token tree") {
    ScoreSet scores(1, 2, 0.0);
    scores.span_at(0, 0, 1) = 0.5;
    LexTree tree = viterbi_lexicalized(scores, LabelScheme::ZeroOne);
    REQUIRE(tree.constituents.size() == 1);
    CHECK(tree.constituents[0].label == 1);
    CHECK(tree.constituents[0].head == 0);
    CHECK(tree.arcs.size() == 1);
    CHECK(tree.arcs[0].parent == 1);
    check_tree_invariants(tree);
}

TEST_CASE("ties decode deterministically with score zero") {
    ScoreSet scores(3, 2, 0.0);
    LexTree tree = viterbi_lexicalized(scores, LabelScheme::ZeroOne);
    CHECK(tree.score == doctest::Approx(0.0));
    check_tree_invariants(tree);
    LexTree again = viterbi_lexicalized(scores, LabelScheme::ZeroOne);
    CHECK(tree.score == again.score);
    REQUIRE(tree.constituents.size() == again.constituents.size());
    for (size_t k = 0; k < tree.constituents.size(); ++k) {
        CHECK(tree.constituents[k].start == again.constituents[k].start);
        CHECK(tree.constituents[k].head == again.constituents[k].head);
    }
}

TEST_CASE("viterbi matches the oracle maximum and rescoring is exact") {
    std::mt19937_64 rng(401);
    for (int trial = 0; trial < 60; ++trial) {
        int n = 2 + static_cast<int>(uniform_index(rng, 4));
        ScoreSet scores = testing::random_scores(n, 2, rng);
        LexTree tree = viterbi_lexicalized(scores, LabelScheme::ZeroOne);
        check_tree_invariants(tree);
        auto q = oracle::oracle_quantities(scores, LabelScheme::ZeroOne);
        CHECK(std::abs(tree.score - q.max_score) < 1e-9);
        CHECK(rescore_like_chart(tree, scores, LabelScheme::ZeroOne) == tree.score);
        CHECK(std::abs(tree_score(tree, scores) - tree.score) < 1e-9);
    }
}

TEST_CASE("decoded entity spans never cross") {
    std::mt19937_64 rng(402);
    for (int trial = 0; trial < 30; ++trial) {
        int n = 3 + static_cast<int>(uniform_index(rng, 3));
        ScoreSet scores = testing::random_scores(n, 2, rng);
        LexTree tree = viterbi_lexicalized(scores, LabelScheme::ZeroOne);
        std::vector<std::pair<int, int>> entities;
        for (const auto& c : tree.constituents)
            if (c.label == 1) entities.push_back({c.start, c.end});
        for (size_t a = 0; a < entities.size(); ++a)
            for (size_t b = a + 1; b < entities.size(); ++b)
                CHECK_FALSE(spans_cross(entities[a].first, entities[a].second,
                                        entities[b].first, entities[b].second));
    }
}

TEST_CASE("stage two labeling") {
    LexTree tree;
    tree.n = 2;
    tree.constituents = {{0, 0, 1, 0}, {1, 1, 0, 1}, {0, 1, 1, 0}};
    tree.arcs = {{2, 0}, {0, 1}};

    SUBCASE("threshold at zero picks positive labels") {
        auto scorer = [](int, int, int) { return std::vector<double>{1.0, -1.0, -1.0}; };
        Prediction p = label_entities(tree, scorer, LabelScheme::ZeroOne);
        REQUIRE(p.entities.size() == 2);
        CHECK(p.entities[0].labels == std::vector<int>{0});
    }
    SUBCASE("fallback to the argmax when nothing clears zero") {
        auto scorer = [](int, int, int) { return std::vector<double>{-2.0, -1.0}; };
        Prediction p = label_entities(tree, scorer, LabelScheme::ZeroOne);
        REQUIRE(p.entities.size() == 2);
        CHECK(p.entities[0].labels == std::vector<int>{1});
    }
    SUBCASE("multiple labels above threshold are all kept") {
        auto scorer = [](int, int, int) { return std::vector<double>{2.0, 1.0, -3.0}; };
        Prediction p = label_entities(tree, scorer, LabelScheme::ZeroOne);
        REQUIRE(p.entities.size() == 2);
        CHECK(p.entities[0].labels == std::vector<int>{0, 1});
    }
}

TEST_CASE("decode-time penalty separates shared heads in the hard limit") {
    // nested candidates (1,2) inside (0,3); arcs strongly prefer token 1 as governor
    const int n = 4;
    ScoreSet scores(n, 2, 0.0);
    scores.span_at(1, 2, 1) = 1.0;
    scores.span_at(0, 3, 1) = 1.0;
    for (int h = 0; h < n; ++h)
        if (h != 1) scores.arc_at(1, h) = 3.0;
    scores.arc_at(n, 1) = 3.0;

    auto shared_heads = [](const LexTree& tree) {
        std::map<int, int> heads;
        for (const auto& c : tree.constituents)
            if (c.label == 1) ++heads[c.head];
        int shared = 0;
        for (const auto& c : tree.constituents)
            if (c.label == 1 && heads[c.head] > 1) ++shared;
        return shared;
    };

    LexTree plain = viterbi_lexicalized(scores, LabelScheme::ZeroOne);
    CHECK(shared_heads(plain) == 2);

    Penalty pen = entity_candidate_penalty(scores, 50.0);
    LexTree constrained = viterbi_lexicalized(scores, LabelScheme::ZeroOne, &pen);
    check_tree_invariants(constrained);
    CHECK(shared_heads(constrained) == 0);
    CHECK(rescore_like_chart(constrained, scores, LabelScheme::ZeroOne, &pen) ==
          constrained.score);
}

TEST_CASE("local decoding emits exactly the spans whose entity channel wins") {
    std::mt19937_64 rng(403);
    ScoreSet scores = testing::random_scores(4, 2, rng);
    auto scorer = [](int, int, int) { return std::vector<double>{0.5}; };
    Prediction p = decode_local(scores, scorer);
    int expected = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = i; j < 4; ++j)
            if (scores.span_at(i, j, 1) > scores.span_at(i, j, 0)) ++expected;
    CHECK(static_cast<int>(p.entities.size()) == expected);
    for (const auto& e : p.entities) {
        CHECK(e.head >= e.start);
        CHECK(e.head <= e.end);
        CHECK(e.labels == std::vector<int>{0});
    }
}

TEST_CASE("cyk viterbi builds a full bracketing") {
    std::mt19937_64 rng(404);
    for (int trial = 0; trial < 10; ++trial) {
        int n = 2 + static_cast<int>(uniform_index(rng, 4));
        ScoreSet scores = testing::random_scores(n, 2, rng);
        LexTree tree = viterbi_cyk(scores, LabelScheme::ZeroOne);
        CHECK(static_cast<int>(tree.constituents.size()) == 2 * n - 1);
    }
}
