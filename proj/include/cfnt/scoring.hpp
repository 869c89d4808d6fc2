#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfnt/core.hpp"

namespace cfnt {

// Precomputed encoder logits for one utterance, frame-major T x V. The
// optional blank table (T x buckets) feeds the bucket blank scorer, or a
// per-frame bias (T x 1) for the recurrent one.
struct EncoderScores {
    int32_t num_frames = 0;  // T
    int32_t vocab_size = 0;  // V
    std::vector<double> logits;       // T*V, row-major
    int32_t blank_buckets = 0;        // 0 when no table
    std::vector<double> blank_table;  // T*blank_buckets, row-major

    double logit(int32_t t, int32_t w) const;
    double blank_entry(int32_t t, int32_t bucket) const;
    void validate() const;  // T >= 1, all entries finite, shapes consistent
};

// One small value per hypothesis. N-gram models keep the truncated context in
// ctx; recurrent models keep the hidden activation. The unused half stays
// empty so states copy cheaply.
struct ScorerState {
    std::vector<int32_t> ctx;
    std::vector<double> hidden;
};

// A language model over an inventory of token ids: surface ids 0..V-1, plus
// the @name class slot at id V when the model is class based. An optional
// end-of-sequence event is scored separately and only consulted by
// lm_sequence_logprob; decoding never proposes it.
class LanguageModel {
  public:
    virtual ~LanguageModel() = default;

    virtual int32_t vocab_size() const = 0;  // V, surface tokens only
    virtual bool class_based() const = 0;
    virtual bool has_eos() const = 0;

    int32_t inventory_size() const { return vocab_size() + (class_based() ? 1 : 0); }
    int32_t class_token() const { return vocab_size(); }  // valid iff class_based()

    virtual ScorerState initial_state() const = 0;
    // Log-probabilities over the inventory, length inventory_size(). Together
    // with the EOS mass (when modeled) each row sums to one.
    virtual std::vector<double> log_probs(const ScorerState& state) const = 0;
    virtual double eos_log_prob(const ScorerState& state) const = 0;
    virtual ScorerState advance(const ScorerState& state, int32_t token) const = 0;
};

// Dense n-gram table without backoff. Every reachable context of length
// order-1 (shorter near the sequence start) must have a row; a missing row is
// a model-coverage error, not a smoothing opportunity.
class NgramLm final : public LanguageModel {
  public:
    struct Row {
        std::vector<double> probs;  // linear domain, length inventory_size
        double eos_prob = 0.0;
    };

    NgramLm(int32_t vocab_size, bool class_based, bool has_eos, int32_t order,
            std::map<TokenSeq, Row> table);

    int32_t vocab_size() const override { return vocab_size_; }
    bool class_based() const override { return class_based_; }
    bool has_eos() const override { return has_eos_; }
    int32_t order() const { return order_; }

    ScorerState initial_state() const override { return ScorerState{}; }
    std::vector<double> log_probs(const ScorerState& state) const override;
    double eos_log_prob(const ScorerState& state) const override;
    ScorerState advance(const ScorerState& state, int32_t token) const override;

    struct LogRow {
        std::vector<double> log_probs;
        double eos_log_prob;
    };
    const std::map<TokenSeq, LogRow>& table() const { return table_; }

  private:
    const LogRow& row_for(const ScorerState& state) const;

    int32_t vocab_size_;
    bool class_based_;
    bool has_eos_;
    int32_t order_;
    std::map<TokenSeq, LogRow> table_;
};

// Single-layer tanh recurrence with a log-softmax output layer. The embedding
// matrix doubles as the one-hot input projection. When the model has an EOS
// event it occupies the last output row.
class RnnLm final : public LanguageModel {
  public:
    struct Weights {
        int32_t dim = 0;
        std::vector<std::vector<double>> emb;  // inventory_size x dim
        std::vector<std::vector<double>> rec;  // dim x dim
        std::vector<double> b_rec;             // dim
        std::vector<std::vector<double>> out;  // (inventory_size [+1 eos]) x dim
        std::vector<double> b_out;
    };

    RnnLm(int32_t vocab_size, bool class_based, bool has_eos, Weights weights);

    int32_t vocab_size() const override { return vocab_size_; }
    bool class_based() const override { return class_based_; }
    bool has_eos() const override { return has_eos_; }

    ScorerState initial_state() const override;
    std::vector<double> log_probs(const ScorerState& state) const override;
    double eos_log_prob(const ScorerState& state) const override;
    ScorerState advance(const ScorerState& state, int32_t token) const override;

    const Weights& weights() const { return w_; }

  private:
    std::vector<double> output_log_probs(const ScorerState& state) const;

    int32_t vocab_size_;
    bool class_based_;
    bool has_eos_;
    Weights w_;
};

// Blank predictor: (frame, word-level history state) -> blank logit. The
// state advances on every surface token, inside or outside the name class.
class BlankScorer {
  public:
    virtual ~BlankScorer() = default;
    virtual ScorerState initial_state() const = 0;
    virtual double logit(int32_t frame, const ScorerState& state) const = 0;
    virtual ScorerState advance(const ScorerState& state, int32_t token) const = 0;
};

// Table flavor: the state is a context bucket (the most recent surface token
// folded into the table width, 0 for the empty history) and the logit comes
// from the utterance's T x buckets table. With no table every logit is 0.
class BucketBlankScorer final : public BlankScorer {
  public:
    explicit BucketBlankScorer(const EncoderScores* scores, int32_t buckets = 0);

    ScorerState initial_state() const override;
    double logit(int32_t frame, const ScorerState& state) const override;
    ScorerState advance(const ScorerState& state, int32_t token) const override;

  private:
    const EncoderScores* scores_;  // not owned
    int32_t buckets_;
};

struct RnnBlankWeights {
    int32_t dim = 0;
    std::vector<std::vector<double>> emb;  // vocab_size x dim
    std::vector<std::vector<double>> rec;  // dim x dim
    std::vector<double> b_rec;             // dim
    std::vector<double> w_out;             // dim
    double b_out = 0.0;
};

// Recurrent flavor: a small token-level net joined with an optional per-frame
// bias taken from column 0 of the utterance's blank table.
class RnnBlankScorer final : public BlankScorer {
  public:
    RnnBlankScorer(RnnBlankWeights weights, const EncoderScores* scores);

    ScorerState initial_state() const override;
    double logit(int32_t frame, const ScorerState& state) const override;
    ScorerState advance(const ScorerState& state, int32_t token) const override;

  private:
    RnnBlankWeights w_;
    const EncoderScores* scores_;  // not owned, may be null
};

// Optional prior P(name tokens | @name), keyed by the tokenized name.
// Disabled by default, in which case it contributes exactly 0.
class NamePrior {
  public:
    NamePrior() = default;
    explicit NamePrior(std::map<TokenSeq, double> log_priors);
    static NamePrior uniform(const NameList& names);

    bool enabled() const { return enabled_; }
    // 0 when disabled; throws when enabled and the name is unknown.
    double log_prior(const TokenSeq& name) const;

  private:
    bool enabled_ = false;
    std::map<TokenSeq, double> log_priors_;
};

// z_voc(w) = log P_LM(w | state) + z_enc(w | t), for every surface w.
std::vector<double> fnt_vocab_logits(const EncoderScores& enc, int32_t t,
                                     const LanguageModel& lm, const ScorerState& state);

// In-class logits. On entry (first in-class token) every candidate carries
// log P_CLM(@name | state) + z_enc(w | t); continuations carry the encoder
// term alone, so the class probability is charged once per name occurrence.
std::vector<double> cfnt_name_logits(const EncoderScores& enc, int32_t t,
                                     const LanguageModel& class_lm, const ScorerState& state,
                                     bool entry);

// softmax over [z_blank, z_voc(0..V-1), z_name(0..V-1)], normalized over the
// 2V+1 live entries. Masked (-inf) entries come out exactly 0. Throws when
// every entry is masked.
std::vector<double> emit_distribution(double blank_logit, std::span<const double> voc_logits,
                                      std::span<const double> name_logits);

// log P_CLM(@name | context) plus the name's prior when one is enabled.
double class_factored_logprob(const TokenSeq& context, const TokenSeq& name,
                              const LanguageModel& class_lm, const NamePrior* prior);

// Sum of stepwise log-probabilities from the initial state, plus the EOS term
// when the model has one. Tokens use the model's inventory ids.
double lm_sequence_logprob(const LanguageModel& lm, const TokenSeq& seq);

}  // namespace cfnt
