#pragma once

// Brute-force references for the decoders, kept independent of the beam
// search implementation: label-state chains are re-derived here from the
// (tokens, statuses) pair and the alignment mass comes from an explicit
// forward pass over the small (t, u) grid.

#include <optional>
#include <vector>

#include "cfnt/decoder.hpp"
#include "cfnt/logmath.hpp"
#include "cfnt/name_trie.hpp"
#include "cfnt/scoring.hpp"

namespace cfnt::test {

struct EnumEntry {
    TokenSeq tokens;
    std::vector<Status> statuses;
    double logprob = kNegInf;
    std::vector<NameSpan> spans;
    bool in_class_end = false;   // last status S1/S2
    bool flushable = false;      // in-class end sitting on an accepting node
};

namespace detail {

struct ChainState {
    ScorerState lm;
    ScorerState blank;
    std::optional<TrieCursor> cursor;
    std::vector<NameSpan> spans;
};

}  // namespace detail

// Exact alignment-summed log-probability of one (tokens, statuses) labeling
// under the class-constrained emission model. Returns nullopt when the
// labeling is illegal (bad transition, token outside the trie mask, exit
// without a completed name).
inline std::optional<EnumEntry> cfnt_labeling_logprob(const EncoderScores& enc,
                                                      const BlankScorer& blank,
                                                      const LanguageModel& lm,
                                                      const NameTrie& trie,
                                                      const TokenSeq& tokens,
                                                      const std::vector<Status>& statuses) {
    const int32_t v = enc.vocab_size;
    const int32_t total_u = static_cast<int32_t>(tokens.size());
    if (statuses.size() != tokens.size()) return std::nullopt;

    // walk the label chain, collecting the per-u state and the emission index
    // (voc block vs name block) of each label
    std::vector<detail::ChainState> chain(total_u + 1);
    chain[0] = {lm.initial_state(), blank.initial_state(), std::nullopt, {}};
    std::vector<int32_t> emit_index(total_u);
    std::optional<Status> prev;
    for (int32_t u = 0; u < total_u; ++u) {
        const Status st = statuses[u];
        const int32_t tok = tokens[u];
        if (!legal_transition(prev, st)) return std::nullopt;
        const detail::ChainState& cur = chain[u];
        detail::ChainState next = cur;
        if (st == Status::S0 || st == Status::S3) {
            ScorerState from = cur.lm;
            if (st == Status::S3) {
                if (!cur.cursor) return std::nullopt;
                auto acc = trie.accepting_name(*cur.cursor);
                if (!acc) return std::nullopt;
                const int32_t end = u;
                next.spans.push_back(NameSpan{end - cur.cursor->depth, end, *acc});
                from = lm.advance(cur.lm, lm.class_token());
                next.cursor.reset();
            }
            next.lm = lm.advance(from, tok);
            emit_index[u] = 1 + tok;
        } else {
            const TrieCursor at = cur.cursor ? *cur.cursor : trie.root();
            if ((st == Status::S1) == cur.cursor.has_value()) return std::nullopt;
            auto stepped = trie.step(at, tok);
            if (!stepped) return std::nullopt;
            next.cursor = stepped;
            emit_index[u] = 1 + v + tok;
        }
        next.blank = blank.advance(cur.blank, tok);
        chain[u + 1] = std::move(next);
        prev = st;
    }

    // per-(t, u) emission probabilities from the masked 2V+1 softmax
    const int32_t T = enc.num_frames;
    std::vector<double> log_blank(static_cast<size_t>(T) * (total_u + 1));
    std::vector<double> log_tok(static_cast<size_t>(T) * std::max(total_u, 1));
    for (int32_t t = 0; t < T; ++t) {
        for (int32_t u = 0; u <= total_u; ++u) {
            const detail::ChainState& cs = chain[u];
            std::vector<double> voc(v, kNegInf), name(v, kNegInf);
            if (!cs.cursor) {
                voc = fnt_vocab_logits(enc, t, lm, cs.lm);
                const auto allowed = trie.allowed_tokens(trie.root());
                if (!allowed.empty()) {
                    const auto entry = cfnt_name_logits(enc, t, lm, cs.lm, true);
                    for (int32_t w : allowed) name[w] = entry[w];
                }
            } else {
                const auto allowed = trie.allowed_tokens(*cs.cursor);
                if (!allowed.empty()) {
                    const auto cont = cfnt_name_logits(enc, t, lm, cs.lm, false);
                    for (int32_t w : allowed) name[w] = cont[w];
                }
                if (trie.accepting_name(*cs.cursor)) {
                    voc = fnt_vocab_logits(enc, t, lm, lm.advance(cs.lm, lm.class_token()));
                }
            }
            const auto probs = emit_distribution(blank.logit(t, cs.blank), voc, name);
            log_blank[t * (total_u + 1) + u] = std::log(probs[0]);
            if (u < total_u) {
                const double p = probs[emit_index[u]];
                log_tok[t * total_u + u] = p > 0.0 ? std::log(p) : kNegInf;
            }
        }
    }

    // forward over the (t, u) grid; emissions require an unconsumed frame
    std::vector<double> alpha(static_cast<size_t>(T + 1) * (total_u + 1), kNegInf);
    auto at = [&](int32_t t, int32_t u) -> double& { return alpha[t * (total_u + 1) + u]; };
    at(0, 0) = 0.0;
    for (int32_t t = 0; t <= T; ++t) {
        for (int32_t u = 0; u <= total_u; ++u) {
            if (t == 0 && u == 0) continue;
            double val = kNegInf;
            if (u > 0 && t < T) val = log_add(val, at(t, u - 1) + log_tok[t * total_u + u - 1]);
            if (t > 0) val = log_add(val, at(t - 1, u) + log_blank[(t - 1) * (total_u + 1) + u]);
            at(t, u) = val;
        }
    }

    EnumEntry entry;
    entry.tokens = tokens;
    entry.statuses = statuses;
    entry.logprob = at(T, total_u);
    entry.spans = chain[total_u].spans;
    entry.in_class_end = chain[total_u].cursor.has_value();
    if (entry.in_class_end) {
        if (auto acc = trie.accepting_name(*chain[total_u].cursor)) {
            entry.flushable = true;
            const int32_t end = total_u;
            entry.spans.push_back(NameSpan{end - chain[total_u].cursor->depth, end, *acc});
        }
    }
    return entry;
}

// Every legal (tokens, statuses) pair with at most max_u labels, scored
// exactly. Entries ending inside the class are included (marked) so callers
// can both bound the total mass and restrict the argmax to returnable ones.
inline std::vector<EnumEntry> enumerate_cfnt(const EncoderScores& enc, const BlankScorer& blank,
                                             const LanguageModel& lm, const NameTrie& trie,
                                             int32_t max_u) {
    std::vector<EnumEntry> out;
    TokenSeq tokens;
    std::vector<Status> statuses;
    const int32_t v = enc.vocab_size;

    auto rec = [&](auto&& self) -> void {
        if (auto entry = cfnt_labeling_logprob(enc, blank, lm, trie, tokens, statuses)) {
            out.push_back(std::move(*entry));
        } else if (!tokens.empty()) {
            return;  // illegal prefix, nothing below it is legal either
        }
        if (static_cast<int32_t>(tokens.size()) == max_u) return;
        for (Status st : {Status::S0, Status::S1, Status::S2, Status::S3}) {
            for (int32_t w = 0; w < v; ++w) {
                tokens.push_back(w);
                statuses.push_back(st);
                self(self);
                tokens.pop_back();
                statuses.pop_back();
            }
        }
    };
    rec(rec);
    return out;
}

}  // namespace cfnt::test
