#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cfnt/core.hpp"
#include "cfnt/name_trie.hpp"
#include "cfnt/scoring.hpp"

namespace cfnt {

// Per-token decode status:
//   S0 outside the name class, previous token also outside
//   S1 entering, first token of a name
//   S2 staying, further tokens of the same name
//   S3 exiting, first outside token after a completed name
enum class Status : uint8_t { S0 = 0, S1 = 1, S2 = 2, S3 = 3 };

// Legal per-token transitions; nullopt stands for the sequence start, which
// behaves like outside-of-class.
bool legal_transition(std::optional<Status> prev, Status next);

const char* status_name(Status s);
Status status_from_name(const std::string& name);

struct NameSpan {
    int32_t start = 0;
    int32_t end = 0;  // half-open token range in the hypothesis
    int32_t name_index = 0;

    friend bool operator==(const NameSpan&, const NameSpan&) = default;
};

struct Hypothesis {
    TokenSeq tokens;
    std::vector<Status> statuses;  // one per token
    double score = 0.0;            // merged log-probability
    ScorerState lm_state;          // vocabulary-predictor state; frozen inside the class
    ScorerState blank_state;       // blank-predictor state; advances on every token
    std::optional<TrieCursor> cursor;  // set exactly while the last status is S1/S2
    int32_t frame = 0;             // frames consumed so far
    std::vector<NameSpan> name_spans;  // completed names, recorded at exit

    bool is_outside() const { return !cursor.has_value(); }
};

struct DecodeConfig {
    int32_t beam_size = 5;
    bool dynamic_beam = false;
    // extra slots reserved for in-class hypotheses under dynamic_beam;
    // -1 means beam_size
    int32_t in_class_budget = -1;
    int32_t max_symbols_per_frame = 8;
    int32_t nbest = -1;  // -1 means beam_size

    void validate() const;
    int32_t resolved_budget() const { return in_class_budget < 0 ? beam_size : in_class_budget; }
    int32_t resolved_nbest() const { return nbest < 0 ? beam_size : nbest; }
};

// One record per pruning step; step 0 is the frame-final prune of the
// blank-extended pool, step k >= 1 follows the k-th emission expansion.
struct BeamSnapshot {
    int32_t frame = 0;
    int32_t step = 0;
    int32_t total = 0;
    int32_t outside = 0;   // hypotheses with no live trie cursor (S0/S3/empty)
    int32_t in_class = 0;  // hypotheses currently inside the name class
};

struct DecodeTrace {
    std::vector<BeamSnapshot> snapshots;
};

// Frame-synchronous argmax over the V+1 distribution; emits until blank wins
// or the per-frame cap is reached.
Hypothesis fnt_greedy(const EncoderScores& enc, const BlankScorer& blank,
                      const LanguageModel& lm, int32_t max_symbols_per_frame = 8);

// Standard transducer beam search over the V+1 distribution. Hypotheses with
// identical token sequences merge by log-sum-exp. Returns up to nbest finals,
// best first.
std::vector<Hypothesis> fnt_beam_search(const EncoderScores& enc, const BlankScorer& blank,
                                        const LanguageModel& lm, const DecodeConfig& cfg,
                                        DecodeTrace* trace = nullptr);

// Class-constrained beam search over the 2V+1 distribution with the S0-S3
// status machine. The name block is masked to the trie's allowed tokens;
// entering charges the class LM once; the vocabulary-predictor state stays
// frozen inside the class and consumes a single @name on exit. Every pruning
// step retains at least one outside-class hypothesis, and with dynamic_beam
// in-class hypotheses occupy reserved extra slots instead of competing with
// outside ones. Hypotheses still inside the class at the last frame are
// dropped rather than force-completed.
std::vector<Hypothesis> cfnt_beam_search(const EncoderScores& enc, const BlankScorer& blank,
                                         const LanguageModel& class_lm, const NameTrie& trie,
                                         const DecodeConfig& cfg,
                                         const NamePrior* prior = nullptr,
                                         DecodeTrace* trace = nullptr);

// Single-path variant without the retention rule. Kept around to demonstrate
// how greedy search strands inside the name class; not for production use.
Hypothesis cfnt_greedy(const EncoderScores& enc, const BlankScorer& blank,
                       const LanguageModel& class_lm, const NameTrie& trie,
                       const NamePrior* prior = nullptr, int32_t max_symbols_per_frame = 8);

// Structural checks used by tests and the acceptance suite: status legality,
// cursor consistency, and that every recorded span spells a trie name.
void verify_hypothesis(const Hypothesis& h, const NameTrie* trie);

}  // namespace cfnt
