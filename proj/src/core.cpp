#include "cfnt/core.hpp"

#include <algorithm>
#include <stdexcept>

namespace cfnt {

uint64_t fnv1a64(std::string_view bytes) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hash_hex(uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.empty()) {
        throw std::runtime_error("vocabulary: at least one surface token required");
    }
    std::string joined;
    for (int32_t i = 0; i < size(); ++i) {
        const std::string& tok = tokens_[i];
        if (tok.empty()) {
            throw std::runtime_error("vocabulary: empty token at index " + std::to_string(i));
        }
        if (tok.find_first_of(" \t\r\n") != std::string::npos) {
            throw std::runtime_error("vocabulary: token contains whitespace: '" + tok + "'");
        }
        if (!ids_.emplace(tok, i).second) {
            throw std::runtime_error("vocabulary: duplicate token '" + tok + "'");
        }
        max_len_ = std::max(max_len_, tok.size());
        joined += tok;
        joined += '\n';
    }
    hash_ = fnv1a64(joined);
}

const std::string& Vocabulary::token(int32_t id) const {
    if (!is_surface(id)) {
        throw std::out_of_range("vocabulary: id " + std::to_string(id) +
                                " is not a surface token (V=" + std::to_string(size()) + ")");
    }
    return tokens_[id];
}

std::optional<int32_t> Vocabulary::id_of(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

TokenSeq tokenize(std::string_view text, const Vocabulary& vocab) {
    TokenSeq out;
    const size_t n = text.size();
    size_t i = 0;
    while (i < n) {
        if (text[i] == ' ') {
            if (i == 0 || i + 1 >= n || text[i + 1] == ' ') {
                throw std::runtime_error("tokenize: stray space at byte " + std::to_string(i));
            }
            ++i;
            continue;
        }
        size_t matched = 0;
        int32_t id = -1;
        for (size_t len = std::min(vocab.max_token_length(), n - i); len >= 1; --len) {
            if (auto hit = vocab.id_of(text.substr(i, len))) {
                matched = len;
                id = *hit;
                break;
            }
        }
        if (matched == 0) {
            throw std::runtime_error(std::string("tokenize: no token covers character '") +
                                     std::string(1, text[i]) + "' at byte " + std::to_string(i));
        }
        out.push_back(id);
        i += matched;
    }
    return out;
}

std::string surface(const TokenSeq& seq, const Vocabulary& vocab) {
    std::string out;
    for (size_t k = 0; k < seq.size(); ++k) {
        const std::string& tok = vocab.token(seq[k]);
        if (k > 0 && !is_continuation(tok)) out += ' ';
        out += tok;
    }
    return out;
}

std::vector<std::string> words(const TokenSeq& seq, const Vocabulary& vocab) {
    std::vector<std::string> out;
    for (int32_t id : seq) {
        const std::string& tok = vocab.token(id);
        if (out.empty() || !is_continuation(tok)) {
            out.push_back(tok);
        } else {
            out.back() += tok;
        }
    }
    return out;
}

std::vector<int32_t> word_index_of(const TokenSeq& seq, const Vocabulary& vocab) {
    std::vector<int32_t> out;
    out.reserve(seq.size());
    int32_t w = -1;
    for (size_t k = 0; k < seq.size(); ++k) {
        const std::string& tok = vocab.token(seq[k]);
        if (k == 0 || !is_continuation(tok)) ++w;
        out.push_back(w);
    }
    return out;
}

void TaggedSentence::validate() const {
    const int32_t n = static_cast<int32_t>(tokens.size());
    int32_t prev_end = 0;
    for (const Span& s : entity_spans) {
        if (s.start >= s.end) {
            throw std::runtime_error("tagged sentence: empty or inverted entity span");
        }
        if (s.start < prev_end) {
            throw std::runtime_error("tagged sentence: overlapping or unsorted entity spans");
        }
        if (s.end > n) {
            throw std::runtime_error("tagged sentence: entity span out of bounds");
        }
        prev_end = s.end;
    }
}

void validate_token_seq(const TokenSeq& seq, const Vocabulary& vocab) {
    for (int32_t id : seq) {
        if (!vocab.is_surface(id)) {
            throw std::runtime_error("token sequence: id " + std::to_string(id) +
                                     " is not a surface token");
        }
    }
}

}  // namespace cfnt
