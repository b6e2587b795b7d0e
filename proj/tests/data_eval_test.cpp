#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "lexcrf/data.hpp"
#include "lexcrf/eval.hpp"
#include "lexcrf/synth.hpp"

using namespace lexcrf;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/lexcrf_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

Record mk(const std::vector<std::string>& tokens,
          const std::vector<RecordEntity>& entities) {
    Record r;
    r.tokens = tokens;
    r.entities = entities;
    return r;
}

}  // namespace

TEST_CASE("jsonl round trip is the identity") {
    TempFile tmp("roundtrip.jsonl");
    SynthOptions opt;
    opt.train = 40;
    opt.dev = 0;
    opt.test = 0;
    Dataset data = generate_synthetic_corpus(opt).train;
    save_jsonl(tmp.path, data);
    Dataset loaded = load_jsonl(tmp.path);
    CHECK(loaded == data);
}

TEST_CASE("empty file loads as an empty dataset") {
    TempFile tmp("empty.jsonl");
    std::ofstream(tmp.path).close();
    CHECK(load_jsonl(tmp.path).empty());
}

TEST_CASE("malformed and invalid records are rejected with positions") {
    TempFile tmp("bad.jsonl");
    {
        std::ofstream out(tmp.path);
        out << R"({"tokens":["a"],"entities":[]})" << "\n";
        out << "not json\n";
    }
    try {
        load_jsonl(tmp.path);
        FAIL("expected a parse error");
    } catch (const InvalidInput& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }

    {
        std::ofstream out(tmp.path);
        out << R"({"tokens":["a","b"],"entities":[{"start":1,"end":0,"labels":["X"]}]})"
            << "\n";
    }
    CHECK_THROWS_AS(load_jsonl(tmp.path), InvalidInput);

    {
        std::ofstream out(tmp.path);
        out << R"({"tokens":["a","b","c","d"],"entities":[)"
            << R"({"start":0,"end":2,"labels":["X"]},{"start":1,"end":3,"labels":["X"]}]})"
            << "\n";
    }
    CHECK_THROWS_AS(load_jsonl(tmp.path), InvalidInput);
}

TEST_CASE("perfect predictions score one") {
    Dataset gold{mk({"a", "b", "c"}, {{0, 1, {"X"}, 1}, {2, 2, {"Y"}, 2}})};
    EvalReport rep = metrics_f1(gold, gold);
    CHECK(rep.precision == doctest::Approx(1.0));
    CHECK(rep.recall == doctest::Approx(1.0));
    CHECK(rep.f1 == doctest::Approx(1.0));
}

TEST_CASE("empty predictions score zero by convention") {
    Dataset gold{mk({"a", "b"}, {{0, 1, {"X"}, std::nullopt}})};
    Dataset pred{mk({"a", "b"}, {})};
    EvalReport rep = metrics_f1(pred, gold);
    CHECK(rep.precision == 0.0);
    CHECK(rep.recall == 0.0);
    CHECK(rep.f1 == 0.0);
}

TEST_CASE("multilabel credit counts one unit per label") {
    Dataset gold{mk({"a", "b"}, {{0, 1, {"A", "B"}, std::nullopt}})};
    Dataset pred{mk({"a", "b"}, {{0, 1, {"A"}, std::nullopt}})};
    EvalReport rep = metrics_f1(pred, gold);
    CHECK(rep.precision == doctest::Approx(1.0));
    CHECK(rep.recall == doctest::Approx(0.5));
    CHECK(rep.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("evaluation is invariant to sentence and entity order") {
    Dataset gold{mk({"a", "b", "c"}, {{0, 1, {"X"}, std::nullopt}, {2, 2, {"Y"}, std::nullopt}}),
                 mk({"d", "e"}, {{0, 0, {"X"}, std::nullopt}})};
    Dataset pred{mk({"a", "b", "c"}, {{2, 2, {"Y"}, std::nullopt}, {0, 1, {"X"}, std::nullopt}}),
                 mk({"d", "e"}, {{1, 1, {"X"}, std::nullopt}})};
    // reordering entities inside a record must not matter; records themselves
    // are aligned by index, so swap both sides together
    EvalReport a = metrics_f1(pred, gold);
    std::swap(gold[0], gold[1]);
    std::swap(pred[0], pred[1]);
    EvalReport b = metrics_f1(pred, gold);
    CHECK(a.f1 == b.f1);
    CHECK(a.tp == b.tp);
}

TEST_CASE("length mismatch is an error") {
    Dataset gold{mk({"a"}, {})};
    Dataset pred;
    CHECK_THROWS_AS(metrics_f1(pred, gold), InvalidInput);
}

TEST_CASE("confusion rows sum to gold unit counts") {
    Dataset gold{mk({"a", "b", "c"},
                    {{0, 0, {"X"}, std::nullopt}, {1, 2, {"Y", "Z"}, std::nullopt}})};
    Dataset pred{mk({"a", "b", "c"}, {{0, 0, {"Y"}, std::nullopt}, {1, 2, {"Y"}, std::nullopt}})};
    EvalReport rep = metrics_f1(pred, gold);
    std::map<std::string, long> gold_counts;
    for (const auto& e : gold[0].entities)
        for (const auto& l : e.labels) ++gold_counts[l];
    for (const auto& [row, cols] : rep.confusion) {
        long total = 0;
        for (const auto& [col, count] : cols) total += count;
        CHECK(total == gold_counts[row]);
    }
    CHECK(rep.confusion["X"]["Y"] == 1);
    CHECK(rep.confusion["Y"]["Y"] == 1);
    CHECK(rep.confusion["Z"]["Y"] == 1);
}

TEST_CASE("head metrics") {
    SUBCASE("single-word entities leave accuracy undefined") {
        Dataset gold{mk({"a", "b"}, {{0, 0, {"X"}, 0}})};
        Dataset pred{mk({"a", "b"}, {{0, 0, {"X"}, 0}})};
        HeadMetrics hm = head_metrics(pred, gold);
        CHECK_FALSE(hm.accuracy.has_value());
    }
    SUBCASE("two entities sharing a head both count as shared") {
        Dataset gold{mk({"a", "b", "c"}, {{0, 2, {"X"}, 1}, {1, 2, {"Y"}, 1}})};
        Dataset pred{mk({"a", "b", "c"}, {{0, 2, {"X"}, 1}, {1, 2, {"Y"}, 1}})};
        HeadMetrics hm = head_metrics(pred, gold);
        CHECK(hm.shared_count == 2);
        REQUIRE(hm.accuracy.has_value());
        CHECK(*hm.accuracy == doctest::Approx(1.0));
    }
    SUBCASE("one right and one wrong head give one half") {
        Dataset gold{mk({"a", "b", "c", "d"}, {{0, 1, {"X"}, 0}, {2, 3, {"Y"}, 3}})};
        Dataset pred{mk({"a", "b", "c", "d"}, {{0, 1, {"X"}, 0}, {2, 3, {"Y"}, 2}})};
        HeadMetrics hm = head_metrics(pred, gold);
        REQUIRE(hm.accuracy.has_value());
        CHECK(*hm.accuracy == doctest::Approx(0.5));
    }
}
