#include "cfnt/lattice.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cfnt/logmath.hpp"

namespace cfnt {

namespace {

// Per-node emission log-probabilities, shared by the DP and the enumerator.
// blank[t][u] scores taking the blank at node (t, u); tok[t][u] scores
// emitting y[u] there. Both index t in 0..T-1 and u in 0..U.
struct EmissionTable {
    int32_t T = 0;
    int32_t U = 0;
    std::vector<double> blank;  // T x (U+1)
    std::vector<double> tok;    // T x U (empty when U == 0)

    double blank_at(int32_t t, int32_t u) const { return blank[t * (U + 1) + u]; }
    double tok_at(int32_t t, int32_t u) const { return tok[t * U + u]; }
};

EmissionTable build_emissions(const EncoderScores& enc, const BlankScorer& blank,
                              const LanguageModel& lm, const TokenSeq& y) {
    if (enc.num_frames < 1) {
        throw std::runtime_error("lattice: empty input (T = 0)");
    }
    enc.validate();
    for (int32_t tok : y) {
        if (tok < 0 || tok >= enc.vocab_size) {
            throw std::runtime_error("lattice: label outside the surface vocabulary");
        }
    }

    const int32_t T = enc.num_frames;
    const int32_t U = static_cast<int32_t>(y.size());

    // label-side states depend only on the emitted prefix
    std::vector<ScorerState> lm_states(U + 1), blank_states(U + 1);
    lm_states[0] = lm.initial_state();
    blank_states[0] = blank.initial_state();
    for (int32_t u = 0; u < U; ++u) {
        lm_states[u + 1] = lm.advance(lm_states[u], y[u]);
        blank_states[u + 1] = blank.advance(blank_states[u], y[u]);
    }

    EmissionTable em;
    em.T = T;
    em.U = U;
    em.blank.resize(static_cast<size_t>(T) * (U + 1));
    em.tok.resize(static_cast<size_t>(T) * U);
    std::vector<double> masked(enc.vocab_size, kNegInf);
    for (int32_t t = 0; t < T; ++t) {
        for (int32_t u = 0; u <= U; ++u) {
            auto voc = fnt_vocab_logits(enc, t, lm, lm_states[u]);
            auto probs = emit_distribution(blank.logit(t, blank_states[u]), voc, masked);
            em.blank[t * (U + 1) + u] = std::log(probs[0]);
            if (u < U) em.tok[t * U + u] = std::log(probs[1 + y[u]]);
        }
    }
    return em;
}

void enumerate_paths(const EmissionTable& em, int32_t t, int32_t u, double acc, double& total,
                     int64_t& count) {
    if (t == em.T && u == em.U) {
        total = log_add(total, acc);
        ++count;
        return;
    }
    if (t < em.T) {
        // emitting requires an unconsumed frame; the final symbol is always a blank
        if (u < em.U) {
            enumerate_paths(em, t, u + 1, acc + em.tok_at(t, u), total, count);
        }
        enumerate_paths(em, t + 1, u, acc + em.blank_at(t, u), total, count);
    }
}

}  // namespace

double forward_logprob(const EncoderScores& enc, const BlankScorer& blank,
                       const LanguageModel& lm, const TokenSeq& y) {
    const EmissionTable em = build_emissions(enc, blank, lm, y);
    const int32_t T = em.T, U = em.U;

    // alpha[t][u] = log P(consumed t frames, emitted y[0..u))
    std::vector<double> alpha(static_cast<size_t>(T + 1) * (U + 1), kNegInf);
    auto at = [&](int32_t t, int32_t u) -> double& { return alpha[t * (U + 1) + u]; };
    at(0, 0) = 0.0;
    for (int32_t t = 0; t <= T; ++t) {
        for (int32_t u = 0; u <= U; ++u) {
            if (t == 0 && u == 0) continue;
            double v = kNegInf;
            if (u > 0 && t < T) {
                // emission happens at frame t before it is consumed
                v = log_add(v, at(t, u - 1) + em.tok_at(t, u - 1));
            }
            if (t > 0) {
                v = log_add(v, at(t - 1, u) + em.blank_at(t - 1, u));
            }
            at(t, u) = v;
        }
    }
    return at(T, U);
}

double brute_force_logprob(const EncoderScores& enc, const BlankScorer& blank,
                           const LanguageModel& lm, const TokenSeq& y,
                           int64_t* alignment_count) {
    const int32_t T = enc.num_frames;
    const int32_t U = static_cast<int32_t>(y.size());
    if (T + U > 16) {
        throw std::runtime_error("brute_force_logprob: T+U = " + std::to_string(T + U) +
                                 " exceeds the enumeration guard of 16");
    }
    const EmissionTable em = build_emissions(enc, blank, lm, y);
    double total = kNegInf;
    int64_t count = 0;
    enumerate_paths(em, 0, 0, 0.0, total, count);
    if (alignment_count) *alignment_count = count;
    return total;
}

double fnt_loss(const EncoderScores& enc, const BlankScorer& blank, const LanguageModel& lm,
                const TokenSeq& y, const LossConfig& cfg) {
    if (cfg.lambda_f < 0.0) {
        throw std::runtime_error("fnt_loss: lambda_f must be >= 0");
    }
    const double transducer = -forward_logprob(enc, blank, lm, y);
    const double lm_term = lm_sequence_logprob(lm, y);
    return transducer - cfg.lambda_f * lm_term;
}

}  // namespace cfnt
