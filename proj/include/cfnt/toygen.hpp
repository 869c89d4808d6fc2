#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cfnt/core.hpp"
#include "cfnt/scoring.hpp"

namespace cfnt {

// Small deterministic RNG front-end. All distributions are hand-rolled on top
// of mt19937_64 so generated artifacts do not depend on the standard
// library's distribution implementations.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed * 6364136223846793005ULL + 1442695040888963407ULL) {}

    uint64_t next();
    int32_t uniform_int(int32_t lo, int32_t hi);  // inclusive bounds
    double uniform();                             // [0, 1)
    double gaussian();                            // Box-Muller

  private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

struct IntRange {
    int32_t min = 0;
    int32_t max = 0;
};

struct GenSpec {
    int32_t vocab_size = 24;
    int32_t utterances = 40;
    int32_t n_names = 8;
    IntRange name_len{1, 3};  // tokens per name
    IntRange t_frames{10, 18};
    IntRange u_tokens{4, 9};
    // weight of the @name-tagged stream in the class-LM counts; 0 gives the
    // class tag no advantage, large values concentrate mass on it
    double class_bias = 1.0;
    double name_prob = 0.25;  // per word slot, chance of inserting a name
    double signal = 7.0;      // encoder logit boost at scheduled frames
    double noise = 0.4;       // logit noise sigma
    // at name-token frames a second in-class token gets signal minus this
    // margin, so acoustics alone cannot spell a name and the trie constraint
    // has to resolve the confusion
    double confuser_margin = 1.5;
    // blank logits: low at a scheduled (frame, history) node so the token can
    // win, high everywhere else, in particular right after the emission
    double blank_low = 1.0;
    double blank_high = 6.0;
    double smoothing = 0.1;  // add-delta inside each dense n-gram row
    double lm_interp = 0.3;  // unigram interpolation weight inside each row
    int32_t ngram_order = 2;
    // separate LM training corpus; only the first ceil(fraction * n_names)
    // names ever appear in it, so the rest of the list is long-tail for the
    // word LM while the class LM still learns @name contexts
    int32_t train_sentences = 150;
    double train_name_fraction = 0.25;

    void validate() const;
};

struct GenResult {
    std::vector<std::string> vocab_tokens;
    NameList names;
    std::vector<TaggedSentence> refs;
    std::vector<EncoderScores> scores;
    NgramLm word_lm;   // surface inventory only
    NgramLm class_lm;  // surface inventory plus @name

    Vocabulary vocabulary() const { return Vocabulary(vocab_tokens); }
};

// Deterministic: identical seed and spec give identical artifacts. References
// embed name-list occurrences at the recorded spans; encoder scores schedule
// each reference token on its own frame with signal on top of noise; both LMs
// are derived analytically from the generated corpus counts.
GenResult gen_instance(uint64_t seed, const GenSpec& spec);

// Exact-match tagging of name occurrences, longest match, left to right.
std::vector<TaggedSentence> tag_corpus(const std::vector<TokenSeq>& corpus,
                                       const NameList& names);

// Replace each tagged span with the class token (LM inventory id = V), giving
// the class-LM training stream.
TokenSeq apply_tags(const TaggedSentence& sentence, int32_t class_token);

// Tiny random instance for oracle trials: seeded dense n-gram model, random
// encoder logits and bucket blank table, and a random label sequence.
struct RandomInstanceSpec {
    int32_t T = 3;
    int32_t U = 2;
    int32_t V = 3;
    int32_t blank_buckets = 2;
    double blank_boost = 0.0;  // added to blank logits; large values favor short outputs
    int32_t ngram_order = 2;
    bool class_based = false;  // include an @name slot in the model inventory
};

struct RandomInstance {
    EncoderScores scores;
    NgramLm lm;
    TokenSeq y;
};

RandomInstance gen_random_instance(uint64_t seed, const RandomInstanceSpec& spec);

}  // namespace cfnt
