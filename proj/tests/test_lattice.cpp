#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cfnt/lattice.hpp"
#include "cfnt/logmath.hpp"
#include "cfnt/toygen.hpp"
#include "support/toy.hpp"

using namespace cfnt;
using cfnt::test::ConstBlank;
using cfnt::test::make_ngram;
using cfnt::test::make_scores;
using cfnt::test::uniform_lm;

namespace {

// all V+1 outcomes equally likely at every node: blank logit log(1/V) against
// a uniform LM over zero encoder scores
struct UniformInstance {
    EncoderScores enc;
    NgramLm lm;
    ConstBlank blank;
    UniformInstance(int32_t frames, int32_t vocab)
            : enc(make_scores(std::vector<std::vector<double>>(
                      frames, std::vector<double>(vocab, 0.0)))),
              lm(uniform_lm(vocab)),
              blank(std::log(1.0 / vocab)) {}
};

int64_t binom(int64_t n, int64_t k) {
    if (k < 0 || k > n) return 0;
    int64_t r = 1;
    for (int64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

TEST_CASE("single-frame empty output is one blank step") {
    const EncoderScores enc = make_scores({{0.4, -0.3}});
    const NgramLm lm = uniform_lm(2);
    const ConstBlank blank(0.9);
    // P(blank) by direct softmax over [0.9, log(.5)+0.4, log(.5)-0.3]
    const double z0 = 0.9, z1 = std::log(0.5) + 0.4, z2 = std::log(0.5) - 0.3;
    const double expect =
            z0 - std::log(std::exp(z0) + std::exp(z1) + std::exp(z2));
    const double fwd = forward_logprob(enc, blank, lm, {});
    CHECK(fwd == doctest::Approx(expect).epsilon(1e-12));
    int64_t count = 0;
    CHECK(brute_force_logprob(enc, blank, lm, {}, &count) ==
          doctest::Approx(expect).epsilon(1e-14));
    CHECK(count == 1);
}

TEST_CASE("two frames one label: exactly the two hand-computed alignments") {
    const EncoderScores enc = make_scores({{0.8, -0.5}, {-0.2, 0.3}});
    const NgramLm lm = make_ngram(2, false, 1, {{{}, {0.7, 0.3}}});
    const ConstBlank blank(0.1);
    const TokenSeq y{0};

    // per-node probabilities straight from the definition
    auto node = [&](int32_t t, bool emitted) {
        const double z0 = 0.1;
        const double z1 = std::log(0.7) + enc.logit(t, 0);
        const double z2 = std::log(0.3) + enc.logit(t, 1);
        const double denom = std::exp(z0) + std::exp(z1) + std::exp(z2);
        (void)emitted;  // order-1 LM: the distribution does not depend on u
        return std::pair{z0 - std::log(denom), z1 - std::log(denom)};
    };
    const auto [b0, e0] = node(0, false);
    const auto [b1, e1] = node(1, false);
    // emit at t0 then two blanks vs blank, emit at t1, blank
    const double path_a = e0 + b0 + b1;
    const double path_b = b0 + e1 + b1;
    const double expect = log_add(path_a, path_b);

    int64_t count = 0;
    const double brute = brute_force_logprob(enc, blank, lm, y, &count);
    CHECK(count == 2);
    CHECK(brute == doctest::Approx(expect).epsilon(1e-12));
    CHECK(forward_logprob(enc, blank, lm, y) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("uniform two-frame instance gives log(2/27)") {
    UniformInstance inst(2, 2);
    CHECK(forward_logprob(inst.enc, inst.blank, inst.lm, {1}) ==
          doctest::Approx(std::log(2.0 / 27.0)).epsilon(1e-12));
}

TEST_CASE("alignment counts follow the terminal-blank lattice") {
    // T blanks and U emissions with the final symbol a blank
    for (int32_t T = 1; T <= 4; ++T) {
        for (int32_t U = 0; U <= 3; ++U) {
            UniformInstance inst(T, 2);
            TokenSeq y(U, 0);
            int64_t count = 0;
            (void)brute_force_logprob(inst.enc, inst.blank, inst.lm, y, &count);
            CHECK(count == binom(T + U - 1, U));
        }
    }
}

TEST_CASE("enumeration guard") {
    UniformInstance inst(14, 2);
    CHECK_THROWS_AS((void)brute_force_logprob(inst.enc, inst.blank, inst.lm, TokenSeq(3, 0)),
                    std::runtime_error);
}

TEST_CASE("labels must be surface tokens and frames must exist") {
    UniformInstance inst(2, 2);
    CHECK_THROWS_AS((void)forward_logprob(inst.enc, inst.blank, inst.lm, {2}),
                    std::runtime_error);
    EncoderScores empty;
    empty.vocab_size = 2;
    CHECK_THROWS_AS((void)forward_logprob(empty, inst.blank, inst.lm, {}),
                    std::runtime_error);
}

TEST_CASE("forward equals brute force on random instances") {
    Rng rng(99);
    for (int trial = 0; trial < 80; ++trial) {
        RandomInstanceSpec spec;
        spec.T = rng.uniform_int(1, 4);
        spec.U = rng.uniform_int(0, 3);
        spec.V = rng.uniform_int(1, 4);
        spec.ngram_order = rng.uniform_int(1, 2);
        const RandomInstance inst = gen_random_instance(31337 + trial, spec);
        const BucketBlankScorer blank(&inst.scores);
        const double fwd = forward_logprob(inst.scores, blank, inst.lm, inst.y);
        const double brute = brute_force_logprob(inst.scores, blank, inst.lm, inst.y);
        CHECK(std::abs(fwd - brute) <= 1e-10);
    }
}

TEST_CASE("forward equals brute force under a recurrent LM and blank net") {
    Rng rng(3);
    RnnLm::Weights w;
    w.dim = 4;
    auto mat = [&](int r, int c) {
        std::vector<std::vector<double>> m(r, std::vector<double>(c));
        for (auto& row : m)
            for (double& x : row) x = 0.4 * rng.gaussian();
        return m;
    };
    w.emb = mat(3, 4);
    w.rec = mat(4, 4);
    w.b_rec = {0.0, 0.1, -0.1, 0.2};
    w.out = mat(3, 4);
    w.b_out = {0.0, 0.0, 0.0};
    const RnnLm lm(3, false, false, w);

    RnnBlankWeights bw;
    bw.dim = 2;
    bw.emb = mat(3, 2);
    bw.rec = mat(2, 2);
    bw.b_rec = {0.0, 0.0};
    bw.w_out = {0.7, -0.4};
    bw.b_out = 0.2;

    const RandomInstance base = gen_random_instance(555, {.T = 3, .U = 2, .V = 3});
    const RnnBlankScorer blank(bw, &base.scores);
    const double fwd = forward_logprob(base.scores, blank, lm, base.y);
    const double brute = brute_force_logprob(base.scores, blank, lm, base.y);
    CHECK(std::abs(fwd - brute) <= 1e-10);
}

TEST_CASE("label-sequence probabilities sum to one") {
    // strong blank logits make the unenumerated tail negligible
    RandomInstanceSpec spec;
    spec.T = 2;
    spec.V = 2;
    spec.blank_boost = 9.0;
    const RandomInstance inst = gen_random_instance(77, spec);
    const BucketBlankScorer blank(&inst.scores);

    double total = 0.0;
    TokenSeq y;
    auto rec = [&](auto&& self) -> void {
        total += std::exp(forward_logprob(inst.scores, blank, inst.lm, y));
        if (y.size() == 4) return;
        for (int32_t w = 0; w < spec.V; ++w) {
            y.push_back(w);
            self(self);
            y.pop_back();
        }
    };
    rec(rec);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("fnt loss composition") {
    UniformInstance inst(2, 2);
    const TokenSeq y{1};

    SUBCASE("lambda zero reduces to the transducer loss exactly") {
        const double jf = fnt_loss(inst.enc, inst.blank, inst.lm, y, {.lambda_f = 0.0});
        CHECK(jf == -forward_logprob(inst.enc, inst.blank, inst.lm, y));
    }
    SUBCASE("paper default composes the two oracle terms") {
        const double jf = fnt_loss(inst.enc, inst.blank, inst.lm, y, {.lambda_f = 0.1});
        const double expect = -forward_logprob(inst.enc, inst.blank, inst.lm, y) -
                              0.1 * lm_sequence_logprob(inst.lm, y);
        CHECK(jf == doctest::Approx(expect).epsilon(1e-12));
        CHECK(jf == doctest::Approx(-std::log(2.0 / 27.0) - 0.1 * std::log(0.5))
                            .epsilon(1e-12));
    }
    SUBCASE("loss is affine in lambda with slope -lm_logprob") {
        const double j1 = fnt_loss(inst.enc, inst.blank, inst.lm, y, {.lambda_f = 0.25});
        const double j2 = fnt_loss(inst.enc, inst.blank, inst.lm, y, {.lambda_f = 0.75});
        const double slope = (j2 - j1) / 0.5;
        const double lm_lp = lm_sequence_logprob(inst.lm, y);
        CHECK(slope == doctest::Approx(-lm_lp).epsilon(1e-9));
        CHECK(slope >= 0.0);
    }
    SUBCASE("negative lambda rejected") {
        CHECK_THROWS_AS((void)fnt_loss(inst.enc, inst.blank, inst.lm, y, {.lambda_f = -1.0}),
                        std::runtime_error);
    }
}
