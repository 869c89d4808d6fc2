#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cfnt/decoder.hpp"
#include "cfnt/lattice.hpp"
#include "cfnt/logmath.hpp"
#include "cfnt/toygen.hpp"
#include "support/enum_oracle.hpp"
#include "support/toy.hpp"

using namespace cfnt;
using cfnt::test::ConstBlank;
using cfnt::test::cfnt_labeling_logprob;
using cfnt::test::enumerate_cfnt;
using cfnt::test::make_ngram;
using cfnt::test::make_scores;
using cfnt::test::uniform_class_lm;
using cfnt::test::uniform_lm;

using cfnt::test::CfntInstance;
using cfnt::test::random_cfnt_instance;

namespace {

bool statuses_equal(const std::vector<Status>& a, const std::vector<Status>& b) {
    return a == b;
}

}  // namespace

TEST_CASE("status transition table") {
    using S = Status;
    CHECK(legal_transition(std::nullopt, S::S0));
    CHECK(legal_transition(std::nullopt, S::S1));
    CHECK(!legal_transition(std::nullopt, S::S2));
    CHECK(!legal_transition(std::nullopt, S::S3));
    CHECK(legal_transition(S::S0, S::S0));
    CHECK(legal_transition(S::S0, S::S1));
    CHECK(!legal_transition(S::S0, S::S2));
    CHECK(!legal_transition(S::S0, S::S3));
    CHECK(legal_transition(S::S1, S::S2));
    CHECK(legal_transition(S::S1, S::S3));
    CHECK(!legal_transition(S::S1, S::S0));
    CHECK(legal_transition(S::S2, S::S2));
    CHECK(legal_transition(S::S2, S::S3));
    CHECK(legal_transition(S::S3, S::S0));
    CHECK(legal_transition(S::S3, S::S1));
    CHECK(!legal_transition(S::S3, S::S2));
}

TEST_CASE("fnt greedy on constructed tables") {
    const NgramLm lm = uniform_lm(2);

    SUBCASE("blank dominates every frame: empty output") {
        const EncoderScores enc = make_scores({{0.0, 0.0}, {0.0, 0.0}});
        const ConstBlank blank(6.0);
        const Hypothesis h = fnt_greedy(enc, blank, lm);
        CHECK(h.tokens.empty());
        CHECK(h.frame == 2);
        CHECK(h.score < 0.0);
    }
    SUBCASE("token a dominates at the first frame only") {
        // the blank table rises once a has been emitted, so the frame's
        // acoustic boost cannot fire twice
        const EncoderScores enc = make_scores({{8.0, 0.0}, {0.0, 0.0}},
                                              {{1.0, 9.0, 9.0}, {9.0, 9.0, 9.0}});
        const BucketBlankScorer blank(&enc);
        const Hypothesis h = fnt_greedy(enc, blank, lm);
        CHECK(h.tokens == TokenSeq{0});
        CHECK(h.statuses.size() == 1);
        CHECK(h.statuses[0] == Status::S0);
    }
    SUBCASE("per-frame emission cap forces a blank") {
        const EncoderScores enc = make_scores({{9.0, 0.0}});
        const ConstBlank blank(-5.0);
        const Hypothesis h = fnt_greedy(enc, blank, lm, 3);
        CHECK(h.tokens == TokenSeq(3, 0));
    }
}

TEST_CASE("fnt greedy equals beam size one") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const RandomInstance inst =
                gen_random_instance(7000 + seed, {.T = 4, .U = 0, .V = 3, .blank_boost = 1.0});
        const BucketBlankScorer blank(&inst.scores);
        const Hypothesis greedy = fnt_greedy(inst.scores, blank, inst.lm);
        const auto beam = fnt_beam_search(inst.scores, blank, inst.lm, {.beam_size = 1});
        REQUIRE(!beam.empty());
        CHECK(beam[0].tokens == greedy.tokens);
    }
}

TEST_CASE("beam search merges alignments of the same label sequence") {
    // V=1: both alignments of [a] must collapse into one entry whose score is
    // their independently computed log-sum
    const EncoderScores enc = make_scores({{0.6}, {-0.4}});
    const NgramLm lm = uniform_lm(1);
    const ConstBlank blank(0.2);
    const auto beam = fnt_beam_search(enc, blank, lm, {.beam_size = 8});

    auto prob_at = [&](int32_t t) {
        const double zb = 0.2, ze = std::log(1.0) + enc.logit(t, 0);
        const double denom = std::exp(zb) + std::exp(ze);
        return std::pair{zb - std::log(denom), ze - std::log(denom)};
    };
    const auto [b0, e0] = prob_at(0);
    const auto [b1, e1] = prob_at(1);
    const double expect = log_add(e0 + b0 + b1, b0 + e1 + b1);

    int found = 0;
    for (const Hypothesis& h : beam) {
        if (h.tokens == TokenSeq{0}) {
            ++found;
            CHECK(h.score == doctest::Approx(expect).epsilon(1e-12));
            CHECK(h.score ==
                  doctest::Approx(forward_logprob(enc, blank, lm, {0})).epsilon(1e-12));
        }
    }
    CHECK(found == 1);
}

TEST_CASE("saturating beam returns the forward-probability argmax") {
    int checked = 0;
    for (uint64_t seed = 0; seed < 30; ++seed) {
        const RandomInstance inst =
                gen_random_instance(808 + seed, {.T = 3, .U = 0, .V = 2, .blank_boost = 2.5});
        const BucketBlankScorer blank(&inst.scores);

        // enumerate every label sequence with up to 4 labels
        TokenSeq y, best_y;
        double best = kNegInf, mass = 0.0;
        auto rec = [&](auto&& self) -> void {
            const double lp = forward_logprob(inst.scores, blank, inst.lm, y);
            mass += std::exp(lp);
            if (lp > best) {
                best = lp;
                best_y = y;
            }
            if (y.size() == 4) return;
            for (int32_t w = 0; w < 2; ++w) {
                y.push_back(w);
                self(self);
                y.pop_back();
            }
        };
        rec(rec);
        // no unenumerated sequence can beat the winner
        REQUIRE(best > std::log(std::max(1.0 - mass, 1e-300)));

        const auto beam =
                fnt_beam_search(inst.scores, blank, inst.lm, {.beam_size = 64});
        REQUIRE(!beam.empty());
        CHECK(beam[0].tokens == best_y);
        CHECK(beam[0].score == doctest::Approx(best).epsilon(1e-9));
        ++checked;
    }
    CHECK(checked == 30);
}

TEST_CASE("cfnt with an empty name list matches fnt bit for bit") {
    const NameTrie empty;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        RandomInstanceSpec spec;
        spec.T = 4;
        spec.V = 3;
        spec.class_based = true;
        spec.blank_boost = 1.0;
        const RandomInstance inst = gen_random_instance(4242 + seed, spec);
        const BucketBlankScorer blank(&inst.scores);
        const DecodeConfig cfg{.beam_size = 4};
        const auto fnt = fnt_beam_search(inst.scores, blank, inst.lm, cfg);
        const auto cfnt = cfnt_beam_search(inst.scores, blank, inst.lm, empty, cfg);
        REQUIRE(fnt.size() == cfnt.size());
        for (size_t i = 0; i < fnt.size(); ++i) {
            CHECK(fnt[i].tokens == cfnt[i].tokens);
            CHECK(fnt[i].score == cfnt[i].score);  // identical arithmetic path
            CHECK(cfnt[i].name_spans.empty());
        }
    }
}

TEST_CASE("single-name entry beats the word route when the class LM favors it") {
    // one name [0]; class LM much prefers @name over surface token 0
    const std::map<TokenSeq, std::vector<double>> rows{{{}, {0.05, 0.35, 0.6}}};
    const NgramLm lm = make_ngram(2, true, 1, rows);
    const NameTrie trie = NameTrie::build(NameList{{{0}}});
    const EncoderScores enc = make_scores({{6.0, 0.0}}, {{1.0, 8.0, 8.0}});
    const BucketBlankScorer blank(&enc);

    const auto beam = cfnt_beam_search(enc, blank, lm, trie, {.beam_size = 8});
    REQUIRE(!beam.empty());
    CHECK(beam[0].tokens == TokenSeq{0});
    REQUIRE(beam[0].statuses.size() == 1);
    CHECK(beam[0].statuses[0] == Status::S1);
    REQUIRE(beam[0].name_spans.size() == 1);
    CHECK(beam[0].name_spans[0] == NameSpan{0, 1, 0});

    // the word-route reading of the same surface must also be present, ranked
    // below (Fig. 2-style duplication kept apart by status)
    bool found_word_route = false;
    for (const Hypothesis& h : beam) {
        if (h.tokens == TokenSeq{0} && h.statuses[0] == Status::S0) {
            found_word_route = true;
            CHECK(h.score < beam[0].score);
            CHECK(h.name_spans.empty());
        }
    }
    CHECK(found_word_route);

    for (const Hypothesis& h : beam) verify_hypothesis(h, &trie);
}

TEST_CASE("prefix-nested names fork into exit and continue") {
    // names {[0], [0,1]}; frame 0 supports token 0, frame 1 supports both the
    // continuation 1 and the outside word 2, frame 2 supports the word 2
    const std::map<TokenSeq, std::vector<double>> rows{
            {{}, {0.1, 0.1, 0.3, 0.5}}};
    const NgramLm lm = make_ngram(3, true, 1, rows);
    const NameTrie trie = NameTrie::build(NameList{{{0}, {0, 1}}});
    const EncoderScores enc =
            make_scores({{6.0, -9.0, -9.0}, {-9.0, 5.0, 4.5}, {-9.0, -9.0, 6.0}},
                        {{1.5, 8.0, 8.0, 8.0},
                         {8.0, 1.5, 8.0, 8.0},
                         {8.0, 8.0, 1.5, 8.0}});
    const BucketBlankScorer blank(&enc);

    DecodeTrace trace;
    const auto beam =
            cfnt_beam_search(enc, blank, lm, trie, {.beam_size = 6}, nullptr, &trace);
    REQUIRE(beam.size() >= 2);

    bool exited_short = false, continued_long = false;
    for (const Hypothesis& h : beam) {
        verify_hypothesis(h, &trie);
        for (const NameSpan& s : h.name_spans) {
            if (s.name_index == 0) exited_short = true;
            if (s.name_index == 1) continued_long = true;
        }
    }
    CHECK(exited_short);
    CHECK(continued_long);

    // both in-class and outside hypotheses were alive in some beam
    bool saw_mixed = false;
    for (const BeamSnapshot& s : trace.snapshots) {
        CHECK(s.outside >= 1);  // retention
        if (s.outside >= 1 && s.in_class >= 1) saw_mixed = true;
    }
    CHECK(saw_mixed);
}

TEST_CASE("class LM state freezes inside the name and consumes @name on exit") {
    // order-2 class LM: after @name the outside word 1 is very likely, after
    // the name's last surface token it is very unlikely. Only the @name
    // advance explains the exit word being decoded.
    const int32_t V = 2;
    std::map<TokenSeq, std::vector<double>> rows;
    rows[{}] = {0.05, 0.05, 0.9};        // strongly enter the class
    rows[{0}] = {0.45, 0.1, 0.45};       // after surface 0: word 1 unlikely
    rows[{1}] = {0.3, 0.3, 0.4};
    rows[{2}] = {0.04, 0.95, 0.01};      // after @name: word 1 very likely
    const NgramLm lm = make_ngram(V, true, 2, rows);
    const NameTrie trie = NameTrie::build(NameList{{{0}}});
    const EncoderScores enc = make_scores({{7.0, -30.0}, {-30.0, 7.0}},
                                          {{1.0, 8.0, 8.0}, {8.0, 1.0, 8.0}});
    const BucketBlankScorer blank(&enc);

    const auto beam = cfnt_beam_search(enc, blank, lm, trie, {.beam_size = 16});
    REQUIRE(!beam.empty());
    CHECK(beam[0].tokens == TokenSeq{0, 1});
    CHECK(statuses_equal(beam[0].statuses, {Status::S1, Status::S3}));
    REQUIRE(beam[0].name_spans.size() == 1);
    CHECK(beam[0].name_spans[0] == NameSpan{0, 1, 0});

    // cross-check the winning score against the independent labeling oracle
    const auto entry = cfnt_labeling_logprob(enc, blank, lm, trie, {0, 1},
                                             {Status::S1, Status::S3});
    REQUIRE(entry.has_value());
    CHECK(beam[0].score == doctest::Approx(entry->logprob).epsilon(1e-9));
}

TEST_CASE("saturating cfnt beam equals the labeling-enumeration argmax") {
    for (uint64_t seed = 0; seed < 25; ++seed) {
        const CfntInstance ci = random_cfnt_instance(2600 + seed, 3, 2, 3.5);
        const BucketBlankScorer blank(&ci.inst.scores);

        const auto entries = enumerate_cfnt(ci.inst.scores, blank, ci.inst.lm, ci.trie, 4);
        double mass = 0.0, best = kNegInf;
        const cfnt::test::EnumEntry* winner = nullptr;
        for (const auto& e : entries) {
            mass += std::exp(e.logprob);
            const bool returnable = !e.in_class_end || e.flushable;
            if (returnable && e.logprob > best) {
                best = e.logprob;
                winner = &e;
            }
        }
        REQUIRE(winner != nullptr);
        REQUIRE(best > std::log(std::max(1.0 - mass, 1e-300)));

        const auto beam = cfnt_beam_search(ci.inst.scores, blank, ci.inst.lm, ci.trie,
                                           {.beam_size = 64});
        REQUIRE(!beam.empty());
        CHECK(beam[0].tokens == winner->tokens);
        CHECK(statuses_equal(beam[0].statuses, winner->statuses));
        CHECK(beam[0].score == doctest::Approx(winner->logprob).epsilon(1e-9));
        REQUIRE(beam[0].name_spans.size() == winner->spans.size());
        for (size_t i = 0; i < winner->spans.size(); ++i) {
            CHECK(beam[0].name_spans[i] == winner->spans[i]);
        }
    }
}

TEST_CASE("every decode keeps an outside hypothesis in every beam") {
    for (uint64_t seed = 0; seed < 40; ++seed) {
        const CfntInstance ci = random_cfnt_instance(911 + seed, 4, 3, 0.5);
        const BucketBlankScorer blank(&ci.inst.scores);
        DecodeTrace trace;
        const auto beam = cfnt_beam_search(ci.inst.scores, blank, ci.inst.lm, ci.trie,
                                           {.beam_size = 2}, nullptr, &trace);
        for (const BeamSnapshot& s : trace.snapshots) {
            CHECK(s.total >= 1);
            CHECK(s.outside >= 1);
        }
        for (const Hypothesis& h : beam) verify_hypothesis(h, &ci.trie);
    }
}

TEST_CASE("dynamic beam never scores worse and strictly helps a nested case") {
    SUBCASE("dominance over corpus decodes") {
        GenSpec spec;
        spec.utterances = 30;
        spec.n_names = 12;
        spec.class_bias = 4.0;
        const GenResult gen = gen_instance(404, spec);
        const NameTrie trie = NameTrie::build(gen.names);
        for (const EncoderScores& es : gen.scores) {
            const BucketBlankScorer blank(&es);
            const auto fixed = cfnt_beam_search(es, blank, gen.class_lm, trie,
                                                {.beam_size = 2, .dynamic_beam = false});
            const auto dynamic = cfnt_beam_search(es, blank, gen.class_lm, trie,
                                                  {.beam_size = 2, .dynamic_beam = true});
            REQUIRE(!fixed.empty());
            REQUIRE(!dynamic.empty());
            CHECK(dynamic[0].score >= fixed[0].score - 1e-12);
        }
    }
    SUBCASE("constructed two-name instance improves strictly") {
        // at the first prune the two name entries fill the fixed beam and the
        // retention slot goes to the wrong word, so the eventual winner
        // survives only in the reserved outside slots of the dynamic beam
        std::map<TokenSeq, std::vector<double>> rows;
        rows[{}] = {0.1, 0.1, 0.09, 0.01, 0.7};
        rows[{0}] = {0.05, 0.05, 0.8, 0.05, 0.05};
        rows[{1}] = {0.5, 0.3, 0.0001, 0.1499, 0.05};
        rows[{2}] = {0.2, 0.2, 0.2, 0.2, 0.2};
        rows[{3}] = {0.2, 0.2, 0.2, 0.2, 0.2};
        rows[{4}] = {0.2, 0.2, 0.2, 0.2, 0.2};
        const NgramLm lm = make_ngram(4, true, 2, rows);
        const NameTrie trie = NameTrie::build(NameList{{{0, 3}, {1, 3}}});
        const EncoderScores enc =
                make_scores({{4.9, 5.0, -9.0, -9.0}, {-9.0, -9.0, 6.0, -9.0}},
                            {{-2.0, 4.0, 4.0, 4.0, 4.0}, {4.0, -1.0, -3.0, 4.0, 4.0}});
        const BucketBlankScorer blank(&enc);
        const auto f = cfnt_beam_search(enc, blank, lm, trie, {.beam_size = 2});
        const auto d = cfnt_beam_search(enc, blank, lm, trie,
                                        {.beam_size = 2, .dynamic_beam = true});
        REQUIRE(!f.empty());
        REQUIRE(!d.empty());
        CHECK(d[0].tokens == TokenSeq{0, 2});
        CHECK(d[0].score > f[0].score + 1e-9);
    }
}

TEST_CASE("greedy cfnt strands inside the class where beam search recovers") {
    // entering is locally optimal at frame 0 but the name cannot be finished:
    // its continuation never gets acoustic support, so greedy blanks out
    // inside the class while beam search keeps the word-route reading alive
    const std::map<TokenSeq, std::vector<double>> rows{
            {{}, {0.04, 0.3, 0.06, 0.6}}};
    const NgramLm lm = make_ngram(3, true, 1, rows);
    const NameTrie trie = NameTrie::build(NameList{{{0, 2}}});
    const EncoderScores enc = make_scores({{6.0, -9.0, -9.0}, {-9.0, 6.0, -9.0}},
                                          {{1.0, 7.0, 7.0, 7.0}, {1.0, 1.0, 7.0, 1.0}});
    const BucketBlankScorer blank(&enc);

    const Hypothesis greedy = cfnt_greedy(enc, blank, lm, trie);
    CHECK(!greedy.is_outside());
    REQUIRE(greedy.cursor.has_value());
    CHECK(!trie.accepting_name(*greedy.cursor).has_value());  // stuck mid-name
    CHECK(greedy.name_spans.empty());

    const auto beam = cfnt_beam_search(enc, blank, lm, trie, {.beam_size = 5});
    REQUIRE(!beam.empty());
    CHECK(beam[0].tokens == TokenSeq{0, 1});
    CHECK(statuses_equal(beam[0].statuses, {Status::S0, Status::S0}));
}

TEST_CASE("greedy cfnt reductions") {
    SUBCASE("empty trie equals fnt greedy") {
        const NameTrie empty;
        for (uint64_t seed = 0; seed < 10; ++seed) {
            RandomInstanceSpec spec;
            spec.T = 3;
            spec.V = 2;
            spec.class_based = true;
            const RandomInstance inst = gen_random_instance(660 + seed, spec);
            const BucketBlankScorer blank(&inst.scores);
            const Hypothesis a = cfnt_greedy(inst.scores, blank, inst.lm, empty);
            const Hypothesis b = fnt_greedy(inst.scores, blank, inst.lm);
            CHECK(a.tokens == b.tokens);
            CHECK(a.score == b.score);
        }
    }
    SUBCASE("dominant one-token name matches beam top-1") {
        const std::map<TokenSeq, std::vector<double>> rows{{{}, {0.05, 0.15, 0.8}}};
        const NgramLm lm = make_ngram(2, true, 1, rows);
        const NameTrie trie = NameTrie::build(NameList{{{0}}});
        const EncoderScores enc = make_scores({{8.0, -9.0}, {-9.0, 7.0}},
                                              {{0.5, 9.0, 9.0}, {0.5, 0.5, 9.0}});
        const BucketBlankScorer blank(&enc);
        const Hypothesis greedy = cfnt_greedy(enc, blank, lm, trie);
        const auto beam = cfnt_beam_search(enc, blank, lm, trie, {.beam_size = 5});
        REQUIRE(!beam.empty());
        CHECK(greedy.tokens == beam[0].tokens);
        CHECK(statuses_equal(greedy.statuses, beam[0].statuses));
    }
}

TEST_CASE("uniform name prior shifts completed-name scores by log(1/n)") {
    const std::map<TokenSeq, std::vector<double>> rows{{{}, {0.05, 0.35, 0.6}}};
    const NgramLm lm = make_ngram(2, true, 1, rows);
    const NameList names{{{0}, {1}}};
    const NameTrie trie = NameTrie::build(names);
    const NamePrior prior = NamePrior::uniform(names);
    const EncoderScores enc = make_scores({{6.0, -3.0}, {-6.0, 5.5}},
                                          {{1.0, 8.0, 8.0}, {8.0, 1.0, 8.0}});
    const BucketBlankScorer blank(&enc);

    const auto plain = cfnt_beam_search(enc, blank, lm, trie, {.beam_size = 8});
    const auto with = cfnt_beam_search(enc, blank, lm, trie, {.beam_size = 8}, &prior);
    REQUIRE(!plain.empty());
    REQUIRE(!with.empty());

    auto find = [](const std::vector<Hypothesis>& hyps, const TokenSeq& tokens,
                   const std::vector<Status>& st) -> const Hypothesis* {
        for (const Hypothesis& h : hyps) {
            if (h.tokens == tokens && h.statuses == st) return &h;
        }
        return nullptr;
    };
    const auto* p = find(plain, {0, 1}, {Status::S1, Status::S3});
    const auto* q = find(with, {0, 1}, {Status::S1, Status::S3});
    REQUIRE(p);
    REQUIRE(q);
    CHECK(q->score - p->score == doctest::Approx(std::log(0.5)).epsilon(1e-9));
}

TEST_CASE("hypothesis verification catches malformed structures") {
    const NameTrie trie = NameTrie::build(NameList{{{0}}});
    Hypothesis h;
    h.tokens = {0};
    CHECK_THROWS_AS(verify_hypothesis(h, &trie), std::runtime_error);  // missing status
    h.statuses = {Status::S2};
    CHECK_THROWS_AS(verify_hypothesis(h, &trie), std::runtime_error);  // S2 at start
    h.statuses = {Status::S0};
    CHECK_NOTHROW(verify_hypothesis(h, &trie));
    h.name_spans.push_back(NameSpan{0, 1, 0});
    CHECK_NOTHROW(verify_hypothesis(h, &trie));
    h.name_spans[0].name_index = 3;
    CHECK_THROWS_AS(verify_hypothesis(h, &trie), std::runtime_error);  // wrong name
}

TEST_CASE("decode config validation") {
    CHECK_THROWS_AS(DecodeConfig{.beam_size = 0}.validate(), std::runtime_error);
    CHECK_THROWS_AS((DecodeConfig{.beam_size = 1, .max_symbols_per_frame = 0}.validate()),
                    std::runtime_error);
    DecodeConfig ok;
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.resolved_budget() == ok.beam_size);
    CHECK(ok.resolved_nbest() == ok.beam_size);
}
