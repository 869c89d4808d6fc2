#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cfnt {

// Sequence of surface token ids. Meta symbols (blank, @name) never appear in
// a TokenSeq; they live just past the surface range of the owning Vocabulary.
using TokenSeq = std::vector<int32_t>;

// Surface token inventory plus the two implicit meta symbols. Surface ids are
// 0..size()-1, blank sits at size(), the @name class tag at size()+1. The two
// meta ids are not backed by strings and are rejected by token().
class Vocabulary {
  public:
    explicit Vocabulary(std::vector<std::string> tokens);

    int32_t size() const { return static_cast<int32_t>(tokens_.size()); }
    int32_t blank_id() const { return size(); }
    int32_t class_id() const { return size() + 1; }
    bool is_surface(int32_t id) const { return id >= 0 && id < size(); }

    const std::string& token(int32_t id) const;
    std::optional<int32_t> id_of(std::string_view token) const;
    const std::vector<std::string>& tokens() const { return tokens_; }
    size_t max_token_length() const { return max_len_; }

    // FNV-1a over the newline-joined token list; equals the hash of the
    // vocab.txt file this vocabulary round-trips through.
    uint64_t content_hash() const { return hash_; }

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int32_t> ids_;
    size_t max_len_ = 0;
    uint64_t hash_ = 0;
};

// Tokens beginning with '_' glue onto the previous token with no space;
// any other token starts a new word.
inline bool is_continuation(std::string_view token) {
    return !token.empty() && token.front() == '_';
}

// Greedy longest-match segmentation. Words are separated by single spaces;
// stray or doubled spaces are rejected so that surface() is an exact inverse.
// Throws std::runtime_error naming the first character no token covers.
TokenSeq tokenize(std::string_view text, const Vocabulary& vocab);

// Inverse of tokenize for any sequence tokenize can produce.
std::string surface(const TokenSeq& seq, const Vocabulary& vocab);

// Word grouping under the continuation-marker convention. words() returns the
// detokenized word strings; word_index_of maps a token position to the index
// of the word containing it.
std::vector<std::string> words(const TokenSeq& seq, const Vocabulary& vocab);
std::vector<int32_t> word_index_of(const TokenSeq& seq, const Vocabulary& vocab);

struct Span {
    int32_t start = 0;
    int32_t end = 0;  // half-open

    friend bool operator==(const Span&, const Span&) = default;
};

struct TaggedSentence {
    TokenSeq tokens;
    std::vector<Span> entity_spans;

    // Spans must be non-empty, sorted, disjoint and inside the token range.
    void validate() const;
};

struct NameList {
    std::vector<TokenSeq> names;
};

void validate_token_seq(const TokenSeq& seq, const Vocabulary& vocab);

uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(uint64_t h);

}  // namespace cfnt
