#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cfnt/core.hpp"
#include "cfnt/decoder.hpp"
#include "cfnt/scoring.hpp"

namespace cfnt::io {

// File formats
//   vocab.txt     one token per line, line number = token index; the blank and
//                 @name meta symbols are implicit and never listed
//   names.txt     one entity per line, tokenized at load; generated files start
//                 with "#vocab_hash=<hex>"
//   refs.jsonl    header {"kind":"refs","vocab_hash":...}, then one
//                 {"tokens":[str...],"entity_spans":[[s,e]...]} per line
//   scores.jsonl  header {"kind":"scores","vocab_hash":...}, then one
//                 {"T":n,"logits":[[...]...],"blank_table":[[...]...]} per line
//   model.json    {"type":"ngram"|"rnn","vocab_size":V,"class_based":b,
//                  "has_eos":b,"vocab_hash":...,"ngram"|"rnn":{...},"blank":{...}}
//                 n-gram entries are [context..., token, prob] with linear
//                 probabilities; token -1 denotes end of sequence, token V the
//                 @name class
//   hyps.jsonl    header {"kind":"hyps","mode":...,"vocab_hash":...}, then one
//                 {"utt":i,"rank":r,"tokens":[...],"statuses":[...],
//                  "score":f,"name_spans":[[s,e,idx]...]} per hypothesis
//
// Loaders verify vocab_hash whenever the caller supplies the expected value;
// hand-written fixture files may omit the header.

struct BlankSpec {
    enum class Kind { Bucket, Rnn };
    Kind kind = Kind::Bucket;
    int32_t buckets = 1;       // Bucket flavor
    RnnBlankWeights rnn;       // Rnn flavor
};

std::unique_ptr<BlankScorer> make_blank_scorer(const BlankSpec& spec,
                                               const EncoderScores& scores);

struct LoadedModel {
    std::string type;  // "ngram" | "rnn"
    std::shared_ptr<LanguageModel> lm;
    BlankSpec blank;
    uint64_t vocab_hash = 0;
};

void save_vocab(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary load_vocab(const std::filesystem::path& path);

void save_names(const std::filesystem::path& path, const NameList& names,
                const Vocabulary& vocab);
NameList load_names(const std::filesystem::path& path, const Vocabulary& vocab);

void save_refs(const std::filesystem::path& path, const std::vector<TaggedSentence>& refs,
               const Vocabulary& vocab);
std::vector<TaggedSentence> load_refs(const std::filesystem::path& path,
                                      const Vocabulary& vocab);

void save_scores(const std::filesystem::path& path, const std::vector<EncoderScores>& scores,
                 uint64_t vocab_hash);
std::vector<EncoderScores> load_scores(const std::filesystem::path& path,
                                       std::optional<uint64_t> expect_hash);

void save_ngram_model(const std::filesystem::path& path, const NgramLm& lm,
                      const BlankSpec& blank, uint64_t vocab_hash);
void save_rnn_model(const std::filesystem::path& path, const RnnLm& lm, const BlankSpec& blank,
                    uint64_t vocab_hash);
LoadedModel load_model(const std::filesystem::path& path, std::optional<uint64_t> expect_hash);

struct HypFile {
    std::string mode;  // decode mode that produced the file
    std::vector<std::vector<Hypothesis>> by_utt;
};

void save_hyps(const std::filesystem::path& path,
               const std::vector<std::vector<Hypothesis>>& by_utt, const std::string& mode,
               uint64_t vocab_hash);
HypFile load_hyps(const std::filesystem::path& path, std::optional<uint64_t> expect_hash);

uint64_t file_hash(const std::filesystem::path& path);

}  // namespace cfnt::io
