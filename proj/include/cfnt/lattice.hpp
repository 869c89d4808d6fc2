#pragma once

#include <cstdint>

#include "cfnt/core.hpp"
#include "cfnt/scoring.hpp"

namespace cfnt {

struct LossConfig {
    double lambda_f = 0.1;  // weight on the LM term, must be >= 0
};

// log P(Y | x): log-domain forward recursion over the (t, u) alignment
// lattice. An alignment interleaves U emissions with exactly T blanks, the
// last symbol always the blank that consumes the final frame; emissions at
// node (t, u) are scored by the V+1 softmax of the blank logit and the
// composed vocabulary logits.
double forward_logprob(const EncoderScores& enc, const BlankScorer& blank,
                       const LanguageModel& lm, const TokenSeq& y);

// Same quantity by explicit enumeration of every alignment. Guarded to
// T + U <= 16. alignment_count, when given, receives the number of
// enumerated alignments.
double brute_force_logprob(const EncoderScores& enc, const BlankScorer& blank,
                           const LanguageModel& lm, const TokenSeq& y,
                           int64_t* alignment_count = nullptr);

// J_f = -log P(Y|x) - lambda_f * log P_LM(Y).
double fnt_loss(const EncoderScores& enc, const BlankScorer& blank, const LanguageModel& lm,
                const TokenSeq& y, const LossConfig& cfg);

}  // namespace cfnt
