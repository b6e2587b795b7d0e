#pragma once

#include <random>
#include <string>
#include <vector>

#include "lexcrf/data.hpp"
#include "lexcrf/numeric.hpp"

namespace lexcrf {

// Desk-scale stand-in for licensed corpora: sentences from a fixed head-driven
// template grammar. The entity type is a deterministic function of the head
// token, nesting follows the grammar (so it can never cross), and every entity
// carries its gold head for evaluation.
struct SynthOptions {
    uint64_t seed = 42;
    int train = 2000;
    int dev = 200;
    int test = 200;
    int max_len = 12;
    double nested_prob = 0.40;  // chance an entity-bearing NP embeds another NP
    double multilabel_prob = 0.06;
    double no_entity_prob = 0.12;
};

struct SynthCorpus {
    Dataset train, dev, test;
};

namespace synth_detail {

struct Fragment {
    std::vector<std::string> tokens;
    std::vector<RecordEntity> entities;  // offsets relative to the fragment
};

inline void append(Fragment& dst, const Fragment& src) {
    int base = static_cast<int>(dst.tokens.size());
    for (const auto& t : src.tokens) dst.tokens.push_back(t);
    for (auto e : src.entities) {
        e.start += base;
        e.end += base;
        if (e.head) e.head = *e.head + base;
        dst.entities.push_back(std::move(e));
    }
}

struct Lexicon {
    std::vector<std::string> per_names{"alice", "bob", "carol", "dave", "erin", "frank"};
    std::vector<std::string> surnames{"ashford", "baxter", "cole", "dunn", "ellis", "frost"};
    std::vector<std::string> per_heads{"engineer", "doctor", "mayor",
                                       "pilot",    "judge",  "farmer"};
    std::vector<std::string> org_heads{"committee", "institute", "bureau",
                                       "guild",     "union",     "ministry"};
    std::vector<std::string> gpe_heads{"village", "harbor",   "province",
                                       "island",  "district", "city"};
    std::vector<std::string> fac_heads{"bridge", "tower", "depot", "plaza", "mill", "arena"};
    std::vector<std::string> veh_heads{"ferry", "barge", "tram", "truck", "wagon", "glider"};
    std::vector<std::string> adjs{"old", "new", "northern", "quiet", "busy", "small"};
    std::vector<std::string> verbs{"visited", "praised", "toured",
                                   "funded",  "passed",  "reached"};
    std::vector<std::string> advs{"yesterday", "today", "quietly", "twice"};
    std::vector<std::string> plain_nps{"everyone", "somebody", "nobody", "they", "we"};
};

template <typename Rng>
const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
    return v[uniform_index(rng, v.size())];
}

template <typename Rng>
Fragment make_np(const Lexicon& lex, const SynthOptions& opt, Rng& rng, int depth);

// "the (adj)? HEAD" with the whole span as one entity headed by HEAD
template <typename Rng>
Fragment simple_np(const Lexicon& lex, const std::vector<std::string>& heads,
                   const std::vector<std::string>& labels, Rng& rng) {
    Fragment f;
    f.tokens.push_back("the");
    if (uniform01(rng) < 0.35) f.tokens.push_back(pick(lex.adjs, rng));
    f.tokens.push_back(pick(heads, rng));
    int head = static_cast<int>(f.tokens.size()) - 1;
    RecordEntity e{0, head, labels, head};
    f.entities.push_back(std::move(e));
    return f;
}

// "the HEAD prep <inner NP>": the outer span is an entity headed by HEAD and
// the inner NP's entities are properly nested inside it.
template <typename Rng>
Fragment nested_np(const Lexicon& lex, const SynthOptions& opt,
                   const std::vector<std::string>& heads, const std::string& prep,
                   const std::vector<std::string>& labels, Rng& rng, int depth) {
    Fragment f;
    f.tokens.push_back("the");
    f.tokens.push_back(pick(heads, rng));
    int head = 1;
    f.tokens.push_back(prep);
    Fragment inner = make_np(lex, opt, rng, depth + 1);
    append(f, inner);
    RecordEntity e{0, static_cast<int>(f.tokens.size()) - 1, labels, head};
    f.entities.insert(f.entities.begin(), std::move(e));
    return f;
}

template <typename Rng>
Fragment make_np(const Lexicon& lex, const SynthOptions& opt, Rng& rng, int depth) {
    double roll = uniform01(rng);
    if (roll < opt.no_entity_prob && depth == 0) {
        Fragment f;
        f.tokens.push_back(pick(lex.plain_nps, rng));
        return f;
    }
    if (roll < opt.no_entity_prob + opt.multilabel_prob) {
        // deterministic double-label heads
        Fragment f;
        f.tokens.push_back("the");
        bool council = uniform01(rng) < 0.5;
        f.tokens.push_back(council ? "council" : "convoy");
        std::vector<std::string> labels =
            council ? std::vector<std::string>{"GPE", "ORG"}
                    : std::vector<std::string>{"ORG", "VEH"};
        RecordEntity e{0, 1, labels, 1};
        f.entities.push_back(std::move(e));
        return f;
    }
    const bool recurse = depth == 0 && uniform01(rng) < opt.nested_prob;
    switch (uniform_index(rng, 6)) {
        case 0: {  // person: bare first name, or first + surname with a
                   // nested NAME span whose gold head differs from the outer's
            Fragment f;
            f.tokens.push_back(pick(lex.per_names, rng));
            if (recurse) {
                f.tokens.push_back(pick(lex.surnames, rng));
                f.entities.push_back({1, 1, {"NAME"}, 1});
                f.entities.push_back({0, 1, {"PER"}, 0});
            } else {
                f.entities.push_back({0, 0, {"PER"}, 0});
            }
            return f;
        }
        case 1:
            return recurse ? nested_np(lex, opt, lex.per_heads, "of", {"PER"}, rng, depth)
                           : simple_np(lex, lex.per_heads, {"PER"}, rng);
        case 2:
            return recurse ? nested_np(lex, opt, lex.org_heads, "of", {"ORG"}, rng, depth)
                           : simple_np(lex, lex.org_heads, {"ORG"}, rng);
        case 3: {
            if (!recurse) return simple_np(lex, lex.gpe_heads, {"GPE"}, rng);
            // compound place: "the <gpe> <gpe>" with the bare inner word as a
            // nested entity and the outer headed by the second word
            Fragment f;
            f.tokens.push_back("the");
            size_t a = uniform_index(rng, lex.gpe_heads.size());
            size_t b = uniform_index(rng, lex.gpe_heads.size() - 1);
            if (b >= a) ++b;
            f.tokens.push_back(lex.gpe_heads[a]);
            f.tokens.push_back(lex.gpe_heads[b]);
            f.entities.push_back({1, 1, {"GPE"}, 1});
            f.entities.push_back({0, 2, {"GPE"}, 2});
            return f;
        }
        case 4:
            return recurse ? nested_np(lex, opt, lex.fac_heads, "near", {"FAC"}, rng, depth)
                           : simple_np(lex, lex.fac_heads, {"FAC"}, rng);
        default:
            return recurse ? nested_np(lex, opt, lex.veh_heads, "from", {"VEH"}, rng, depth)
                           : simple_np(lex, lex.veh_heads, {"VEH"}, rng);
    }
}

template <typename Rng>
Record make_sentence(const Lexicon& lex, const SynthOptions& opt, Rng& rng) {
    for (;;) {
        Fragment f = make_np(lex, opt, rng, 0);
        f.tokens.push_back(pick(lex.verbs, rng));
        append(f, make_np(lex, opt, rng, 0));
        if (uniform01(rng) < 0.3) f.tokens.push_back(pick(lex.advs, rng));
        if (static_cast<int>(f.tokens.size()) > opt.max_len) continue;
        Record r;
        r.tokens = std::move(f.tokens);
        r.entities = std::move(f.entities);
        std::sort(r.entities.begin(), r.entities.end(),
                  [](const RecordEntity& a, const RecordEntity& b) {
                      if (a.start != b.start) return a.start < b.start;
                      return a.end < b.end;
                  });
        validate_record(r, "synthetic");
        return r;
    }
}

}  // namespace synth_detail

inline SynthCorpus generate_synthetic_corpus(const SynthOptions& opt = {}) {
    if (opt.train < 1 || opt.dev < 0 || opt.test < 0)
        throw InvalidInput("corpus sizes must be positive");
    synth_detail::Lexicon lex;
    std::mt19937_64 rng(opt.seed);
    SynthCorpus corpus;
    for (int k = 0; k < opt.train; ++k)
        corpus.train.push_back(synth_detail::make_sentence(lex, opt, rng));
    for (int k = 0; k < opt.dev; ++k)
        corpus.dev.push_back(synth_detail::make_sentence(lex, opt, rng));
    for (int k = 0; k < opt.test; ++k)
        corpus.test.push_back(synth_detail::make_sentence(lex, opt, rng));
    return corpus;
}

// Fraction of sentences containing at least one nested entity.
inline double nested_fraction(const Dataset& data) {
    if (data.empty()) return 0.0;
    int nested = 0;
    for (const auto& r : data) {
        bool has = false;
        for (size_t a = 0; a < r.entities.size() && !has; ++a)
            for (size_t b = 0; b < r.entities.size() && !has; ++b) {
                if (a == b) continue;
                if (r.entities[a].start <= r.entities[b].start &&
                    r.entities[b].end <= r.entities[a].end)
                    has = true;
            }
        if (has) ++nested;
    }
    return static_cast<double>(nested) / static_cast<double>(data.size());
}

}  // namespace lexcrf
