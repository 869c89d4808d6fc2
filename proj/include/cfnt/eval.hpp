#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfnt/core.hpp"
#include "cfnt/decoder.hpp"

namespace cfnt {

enum class EditOp : uint8_t { Match, Sub, Del, Ins };

struct AlignStep {
    EditOp op;
    int32_t ref_index;  // -1 for insertions
    int32_t hyp_index;  // -1 for deletions
};

// Minimal edit-distance alignment with unit costs. Ties prefer
// match > sub > del > ins, backtracing from the end.
std::vector<AlignStep> word_align(const std::vector<std::string>& ref,
                                  const std::vector<std::string>& hyp);

struct WerCounts {
    int64_t substitutions = 0;
    int64_t deletions = 0;
    int64_t insertions = 0;
    int64_t hits = 0;
    int64_t ref_words = 0;

    double wer() const {
        return static_cast<double>(substitutions + deletions + insertions) /
               static_cast<double>(std::max<int64_t>(1, ref_words));
    }
};

// Corpus-level pooling: edit operations and reference lengths are summed over
// utterances before dividing. Throws on mismatched utterance counts.
WerCounts wer(const std::vector<std::vector<std::string>>& refs,
              const std::vector<std::vector<std::string>>& hyps);

enum class EntityMode { Spans, Match };

struct EntityCounts {
    int64_t ref_entities = 0;
    int64_t hyp_entities = 0;
    int64_t correct = 0;   // hypothesized entities whose aligned slice is a reference entity
    int64_t recalled = 0;  // reference entities fully aligned as matches
    bool degenerate = false;  // a zero denominator forced a 0 metric

    double precision() const {
        return hyp_entities == 0 ? 0.0 : static_cast<double>(correct) / hyp_entities;
    }
    double recall() const {
        return ref_entities == 0 ? 0.0 : static_cast<double>(recalled) / ref_entities;
    }
    double f1() const {
        const double p = precision(), r = recall();
        return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    }
};

// A decoded utterance as the scorer sees it: the top hypothesis' tokens plus
// its completed name spans (empty for span-free decodes).
struct DecodedUtterance {
    TokenSeq tokens;
    std::vector<NameSpan> name_spans;
};

// Occurrence-level entity scoring anchored on the word alignment. Spans mode
// trusts the decoder's name spans; match mode detects entities by exact
// token-subsequence match against the name list (required in that mode).
EntityCounts entity_prf(const std::vector<TaggedSentence>& refs,
                        const std::vector<DecodedUtterance>& hyps, const Vocabulary& vocab,
                        EntityMode mode, const NameList* names);

struct UttBreakdown {
    WerCounts wer;
    EntityCounts entities;
};

struct EvalReport {
    WerCounts wer;
    EntityCounts entities;
    std::vector<UttBreakdown> per_utt;  // filled only on request
};

EvalReport evaluate_corpus(const std::vector<TaggedSentence>& refs,
                           const std::vector<DecodedUtterance>& hyps, const Vocabulary& vocab,
                           EntityMode mode, const NameList* names, bool per_utt = false);

}  // namespace cfnt
