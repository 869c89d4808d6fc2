#include "cfnt/decoder.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <stdexcept>

#include "cfnt/logmath.hpp"

namespace cfnt {

bool legal_transition(std::optional<Status> prev, Status next) {
    if (!prev) return next == Status::S0 || next == Status::S1;
    switch (*prev) {
        case Status::S0:
        case Status::S3:
            return next == Status::S0 || next == Status::S1;
        case Status::S1:
        case Status::S2:
            return next == Status::S2 || next == Status::S3;
    }
    return false;
}

const char* status_name(Status s) {
    switch (s) {
        case Status::S0: return "S0";
        case Status::S1: return "S1";
        case Status::S2: return "S2";
        case Status::S3: return "S3";
    }
    return "?";
}

Status status_from_name(const std::string& name) {
    if (name == "S0") return Status::S0;
    if (name == "S1") return Status::S1;
    if (name == "S2") return Status::S2;
    if (name == "S3") return Status::S3;
    throw std::runtime_error("unknown status '" + name + "'");
}

void DecodeConfig::validate() const {
    if (beam_size < 1) throw std::runtime_error("decode config: beam_size must be >= 1");
    if (max_symbols_per_frame < 1) {
        throw std::runtime_error("decode config: max_symbols_per_frame must be >= 1");
    }
    if (resolved_budget() < 0) throw std::runtime_error("decode config: negative in-class budget");
    if (resolved_nbest() < 1) throw std::runtime_error("decode config: nbest must be >= 1");
}

namespace {

struct MergeKey {
    TokenSeq tokens;
    std::vector<Status> statuses;

    bool operator<(const MergeKey& o) const {
        if (tokens != o.tokens) return tokens < o.tokens;
        return statuses < o.statuses;
    }
};

using Pool = std::map<MergeKey, Hypothesis>;

// Hypotheses sharing (tokens, statuses) describe the same lattice node with
// the same downstream behaviour, so the alignment mass is summed.
void merge_into(Pool& pool, Hypothesis&& hyp) {
    MergeKey key{hyp.tokens, hyp.statuses};
    auto it = pool.find(key);
    if (it == pool.end()) {
        pool.emplace(std::move(key), std::move(hyp));
    } else {
        assert(it->second.cursor == hyp.cursor);
        assert(it->second.name_spans.size() == hyp.name_spans.size());
        it->second.score = log_add(it->second.score, hyp.score);
    }
}

// score desc, then fewer tokens, then lexicographically smaller ids, then
// statuses: a deterministic total order over merged pools.
bool better(const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
    if (a.tokens != b.tokens) return a.tokens < b.tokens;
    return a.statuses < b.statuses;
}

// A within-frame search item: done hypotheses already consumed the current
// frame via blank and only compete for beam slots; active ones may still emit.
struct PoolItem {
    Hypothesis hyp;
    bool done;
};

void record_snapshot(DecodeTrace* trace, int32_t frame, int32_t step,
                     const std::vector<PoolItem>& beam) {
    if (!trace) return;
    BeamSnapshot snap;
    snap.frame = frame;
    snap.step = step;
    snap.total = static_cast<int32_t>(beam.size());
    for (const PoolItem& item : beam) {
        if (item.hyp.is_outside()) ++snap.outside;
        else ++snap.in_class;
    }
    trace->snapshots.push_back(snap);
}

// Joint pruning of done and active hypotheses with the S0-retention rule:
// when the kept set would contain no outside-class hypothesis, the worst kept
// beam is swapped for the best outside one. Under dynamic_beam, outside
// hypotheses own the beam_size base slots and in-class ones the reserved
// extra slots, so in-class duplication can never evict an outside beam.
std::vector<PoolItem> prune_pool(Pool&& done, Pool&& active, const DecodeConfig& cfg,
                                 DecodeTrace* trace, int32_t frame, int32_t step) {
    std::vector<PoolItem> all;
    all.reserve(done.size() + active.size());
    for (auto& [_, h] : done) all.push_back(PoolItem{std::move(h), true});
    for (auto& [_, h] : active) all.push_back(PoolItem{std::move(h), false});
    std::sort(all.begin(), all.end(),
              [](const PoolItem& a, const PoolItem& b) { return better(a.hyp, b.hyp); });

    std::vector<PoolItem> kept;
    if (cfg.dynamic_beam) {
        int32_t out_kept = 0, in_kept = 0;
        const int32_t budget = cfg.resolved_budget();
        for (PoolItem& item : all) {
            if (item.hyp.is_outside()) {
                if (out_kept < cfg.beam_size) {
                    kept.push_back(std::move(item));
                    ++out_kept;
                }
            } else if (in_kept < budget) {
                kept.push_back(std::move(item));
                ++in_kept;
            }
        }
    } else {
        const size_t limit = static_cast<size_t>(cfg.beam_size);
        if (all.size() <= limit) {
            kept = std::move(all);
        } else {
            bool kept_outside = false;
            for (size_t i = 0; i < limit; ++i) kept_outside |= all[i].hyp.is_outside();
            kept.assign(std::make_move_iterator(all.begin()),
                        std::make_move_iterator(all.begin() + limit));
            if (!kept_outside) {
                for (size_t i = limit; i < all.size(); ++i) {
                    if (all[i].hyp.is_outside()) {
                        kept.back() = std::move(all[i]);
                        break;
                    }
                }
            }
        }
    }
    record_snapshot(trace, frame, step, kept);
    return kept;
}

struct BlockScores {
    std::vector<double> voc;
    std::vector<double> name;
    std::optional<int32_t> exit_name;  // accepting name index, when exiting is legal
    ScorerState exit_lm;               // lm state after consuming @name
};

// Assemble the 2V+1 logit blocks for one hypothesis. Outside hypotheses see
// composed vocabulary logits plus entry logits masked to the trie root;
// in-class hypotheses see continuation logits masked to the cursor's children
// and, at an accepting node, exit logits scored with the post-@name LM state.
BlockScores assemble_blocks(const Hypothesis& h, const EncoderScores& enc, int32_t t,
                            const LanguageModel& lm, const NameTrie& trie,
                            const std::vector<int32_t>& root_allowed) {
    const int32_t V = enc.vocab_size;
    BlockScores blocks;
    blocks.voc.assign(V, kNegInf);
    blocks.name.assign(V, kNegInf);
    if (!h.cursor) {
        blocks.voc = fnt_vocab_logits(enc, t, lm, h.lm_state);
        if (!root_allowed.empty()) {
            const auto entry = cfnt_name_logits(enc, t, lm, h.lm_state, true);
            for (int32_t w : root_allowed) blocks.name[w] = entry[w];
        }
    } else {
        const auto allowed = trie.allowed_tokens(*h.cursor);
        if (!allowed.empty()) {
            const auto cont = cfnt_name_logits(enc, t, lm, h.lm_state, false);
            for (int32_t w : allowed) blocks.name[w] = cont[w];
        }
        if (auto acc = trie.accepting_name(*h.cursor)) {
            blocks.exit_name = acc;
            blocks.exit_lm = lm.advance(h.lm_state, lm.class_token());
            blocks.voc = fnt_vocab_logits(enc, t, lm, blocks.exit_lm);
        }
    }
    return blocks;
}

// Extend h with the outside token w (status S0, or S3 when leaving the class).
Hypothesis extend_outside(const Hypothesis& h, int32_t w, double log_p, const BlockScores& blocks,
                          const LanguageModel& lm, const BlankScorer& blank) {
    Hypothesis nh = h;
    nh.score += log_p;
    if (blocks.exit_name) {
        const int32_t end = static_cast<int32_t>(h.tokens.size());
        nh.name_spans.push_back(NameSpan{end - h.cursor->depth, end, *blocks.exit_name});
        nh.cursor.reset();
        nh.lm_state = lm.advance(blocks.exit_lm, w);
        nh.statuses.push_back(Status::S3);
    } else {
        nh.lm_state = lm.advance(h.lm_state, w);
        nh.statuses.push_back(Status::S0);
    }
    nh.tokens.push_back(w);
    nh.blank_state = blank.advance(h.blank_state, w);
    return nh;
}

// Extend h with the in-class token w (status S1 on entry, S2 afterwards).
// The vocabulary-predictor state is left untouched; an enabled prior is
// charged whenever the cursor lands on an accepting node.
Hypothesis extend_in_class(const Hypothesis& h, int32_t w, double log_p, const NameTrie& trie,
                           const BlankScorer& blank, const NamePrior* prior) {
    Hypothesis nh = h;
    nh.score += log_p;
    const TrieCursor from = h.cursor ? *h.cursor : trie.root();
    const auto next = trie.step(from, w);
    if (!next) throw std::logic_error("cfnt decoder: masked token escaped the trie");
    nh.cursor = *next;
    nh.statuses.push_back(h.cursor ? Status::S2 : Status::S1);
    nh.tokens.push_back(w);
    nh.blank_state = blank.advance(h.blank_state, w);
    if (prior && prior->enabled() && trie.accepting_name(*next)) {
        const TokenSeq name(nh.tokens.end() - next->depth, nh.tokens.end());
        nh.score += prior->log_prior(name);
    }
    return nh;
}

// At the last frame an in-class hypothesis either completed a name (cursor on
// an accepting node: flush the span and keep it) or did not (drop it, never
// force-complete).
std::vector<Hypothesis> finalize(std::vector<Hypothesis>&& beam, int32_t nbest,
                                 const NameTrie* trie) {
    std::vector<Hypothesis> out;
    out.reserve(beam.size());
    for (Hypothesis& h : beam) {
        if (!trie || h.is_outside()) {
            out.push_back(std::move(h));
        } else if (auto acc = trie->accepting_name(*h.cursor)) {
            const int32_t end = static_cast<int32_t>(h.tokens.size());
            h.name_spans.push_back(NameSpan{end - h.cursor->depth, end, *acc});
            out.push_back(std::move(h));
        }
    }
    std::sort(out.begin(), out.end(), better);
    if (static_cast<int32_t>(out.size()) > nbest) out.resize(nbest);
    return out;
}

Hypothesis initial_hypothesis(const LanguageModel& lm, const BlankScorer& blank) {
    Hypothesis h;
    h.lm_state = lm.initial_state();
    h.blank_state = blank.initial_state();
    return h;
}

}  // namespace

Hypothesis fnt_greedy(const EncoderScores& enc, const BlankScorer& blank,
                      const LanguageModel& lm, int32_t max_symbols_per_frame) {
    enc.validate();
    const int32_t V = enc.vocab_size;
    const std::vector<double> masked(V, kNegInf);
    Hypothesis h = initial_hypothesis(lm, blank);
    for (int32_t t = 0; t < enc.num_frames; ++t) {
        int32_t emitted = 0;
        while (true) {
            const auto voc = fnt_vocab_logits(enc, t, lm, h.lm_state);
            const auto probs = emit_distribution(blank.logit(t, h.blank_state), voc, masked);
            const size_t best =
                    std::max_element(probs.begin(), probs.end()) - probs.begin();
            if (best == 0 || emitted >= max_symbols_per_frame) {
                h.score += std::log(probs[0]);
                h.frame = t + 1;
                break;
            }
            const int32_t w = static_cast<int32_t>(best) - 1;
            h.score += std::log(probs[best]);
            h.tokens.push_back(w);
            h.statuses.push_back(Status::S0);
            h.lm_state = lm.advance(h.lm_state, w);
            h.blank_state = blank.advance(h.blank_state, w);
            ++emitted;
        }
    }
    return h;
}

std::vector<Hypothesis> fnt_beam_search(const EncoderScores& enc, const BlankScorer& blank,
                                        const LanguageModel& lm, const DecodeConfig& cfg,
                                        DecodeTrace* trace) {
    cfg.validate();
    enc.validate();
    if (lm.vocab_size() != enc.vocab_size) {
        throw std::runtime_error("fnt_beam_search: vocabulary size mismatch");
    }
    const int32_t V = enc.vocab_size;
    const std::vector<double> masked(V, kNegInf);

    std::vector<Hypothesis> beam{initial_hypothesis(lm, blank)};
    for (int32_t t = 0; t < enc.num_frames; ++t) {
        std::vector<Hypothesis> frontier = std::move(beam);
        Pool done;
        for (int32_t step = 0; step <= cfg.max_symbols_per_frame && !frontier.empty();
             ++step) {
            Pool active;
            for (const Hypothesis& h : frontier) {
                const auto voc = fnt_vocab_logits(enc, t, lm, h.lm_state);
                const auto probs = emit_distribution(blank.logit(t, h.blank_state), voc, masked);
                {
                    Hypothesis nh = h;
                    nh.score += std::log(probs[0]);
                    nh.frame = t + 1;
                    merge_into(done, std::move(nh));
                }
                if (step == cfg.max_symbols_per_frame) continue;
                for (int32_t w = 0; w < V; ++w) {
                    if (probs[1 + w] <= 0.0) continue;
                    Hypothesis nh = h;
                    nh.score += std::log(probs[1 + w]);
                    nh.tokens.push_back(w);
                    nh.statuses.push_back(Status::S0);
                    nh.lm_state = lm.advance(h.lm_state, w);
                    nh.blank_state = blank.advance(h.blank_state, w);
                    merge_into(active, std::move(nh));
                }
            }
            auto kept = prune_pool(std::move(done), std::move(active), cfg, trace, t, step);
            done.clear();
            frontier.clear();
            for (PoolItem& item : kept) {
                if (item.done) {
                    done.emplace(MergeKey{item.hyp.tokens, item.hyp.statuses},
                                 std::move(item.hyp));
                } else {
                    frontier.push_back(std::move(item.hyp));
                }
            }
        }
        beam.clear();
        beam.reserve(done.size());
        for (auto& [_, h] : done) beam.push_back(std::move(h));
    }
    return finalize(std::move(beam), cfg.resolved_nbest(), nullptr);
}

std::vector<Hypothesis> cfnt_beam_search(const EncoderScores& enc, const BlankScorer& blank,
                                         const LanguageModel& class_lm, const NameTrie& trie,
                                         const DecodeConfig& cfg, const NamePrior* prior,
                                         DecodeTrace* trace) {
    cfg.validate();
    enc.validate();
    if (!class_lm.class_based()) {
        throw std::runtime_error("cfnt_beam_search: class-based LM required");
    }
    if (class_lm.vocab_size() != enc.vocab_size) {
        throw std::runtime_error("cfnt_beam_search: vocabulary size mismatch");
    }
    const int32_t V = enc.vocab_size;
    const auto root_allowed = trie.allowed_tokens(trie.root());

    std::vector<Hypothesis> beam{initial_hypothesis(class_lm, blank)};
    for (int32_t t = 0; t < enc.num_frames; ++t) {
        std::vector<Hypothesis> frontier = std::move(beam);
        Pool done;
        for (int32_t step = 0; step <= cfg.max_symbols_per_frame && !frontier.empty();
             ++step) {
            Pool active;
            for (const Hypothesis& h : frontier) {
                const BlockScores blocks =
                        assemble_blocks(h, enc, t, class_lm, trie, root_allowed);
                const auto probs =
                        emit_distribution(blank.logit(t, h.blank_state), blocks.voc, blocks.name);
                {
                    Hypothesis nh = h;
                    nh.score += std::log(probs[0]);
                    nh.frame = t + 1;
                    merge_into(done, std::move(nh));
                }
                if (step == cfg.max_symbols_per_frame) continue;
                for (int32_t w = 0; w < V; ++w) {
                    if (probs[1 + w] <= 0.0) continue;
                    merge_into(active,
                               extend_outside(h, w, std::log(probs[1 + w]), blocks, class_lm,
                                              blank));
                }
                for (int32_t w = 0; w < V; ++w) {
                    if (probs[1 + V + w] <= 0.0) continue;
                    merge_into(active,
                               extend_in_class(h, w, std::log(probs[1 + V + w]), trie, blank,
                                               prior));
                }
            }
            auto kept = prune_pool(std::move(done), std::move(active), cfg, trace, t, step);
            done.clear();
            frontier.clear();
            for (PoolItem& item : kept) {
                if (item.done) {
                    done.emplace(MergeKey{item.hyp.tokens, item.hyp.statuses},
                                 std::move(item.hyp));
                } else {
                    frontier.push_back(std::move(item.hyp));
                }
            }
        }
        beam.clear();
        beam.reserve(done.size());
        for (auto& [_, h] : done) beam.push_back(std::move(h));
    }
    return finalize(std::move(beam), cfg.resolved_nbest(), &trie);
}

Hypothesis cfnt_greedy(const EncoderScores& enc, const BlankScorer& blank,
                       const LanguageModel& class_lm, const NameTrie& trie,
                       const NamePrior* prior, int32_t max_symbols_per_frame) {
    enc.validate();
    if (!class_lm.class_based()) {
        throw std::runtime_error("cfnt_greedy: class-based LM required");
    }
    const int32_t V = enc.vocab_size;
    const auto root_allowed = trie.allowed_tokens(trie.root());
    Hypothesis h = initial_hypothesis(class_lm, blank);
    for (int32_t t = 0; t < enc.num_frames; ++t) {
        int32_t emitted = 0;
        while (true) {
            const BlockScores blocks = assemble_blocks(h, enc, t, class_lm, trie, root_allowed);
            const auto probs =
                    emit_distribution(blank.logit(t, h.blank_state), blocks.voc, blocks.name);
            const size_t best =
                    std::max_element(probs.begin(), probs.end()) - probs.begin();
            if (best == 0 || emitted >= max_symbols_per_frame) {
                h.score += std::log(probs[0]);
                h.frame = t + 1;
                break;
            }
            const double log_p = std::log(probs[best]);
            if (best <= static_cast<size_t>(V)) {
                h = extend_outside(h, static_cast<int32_t>(best) - 1, log_p, blocks, class_lm,
                                   blank);
            } else {
                h = extend_in_class(h, static_cast<int32_t>(best) - 1 - V, log_p, trie, blank,
                                    prior);
            }
            ++emitted;
        }
    }
    // flush a completed name; a hypothesis stranded mid-name is returned
    // as-is so the failure mode is observable
    if (h.cursor) {
        if (auto acc = trie.accepting_name(*h.cursor)) {
            const int32_t end = static_cast<int32_t>(h.tokens.size());
            h.name_spans.push_back(NameSpan{end - h.cursor->depth, end, *acc});
        }
    }
    return h;
}

void verify_hypothesis(const Hypothesis& h, const NameTrie* trie) {
    if (h.tokens.size() != h.statuses.size()) {
        throw std::runtime_error("hypothesis: statuses length != tokens length");
    }
    std::optional<Status> prev;
    for (Status s : h.statuses) {
        if (!legal_transition(prev, s)) {
            throw std::runtime_error("hypothesis: illegal status transition");
        }
        prev = s;
    }
    const bool ends_in_class =
            !h.statuses.empty() &&
            (h.statuses.back() == Status::S1 || h.statuses.back() == Status::S2);
    if (ends_in_class != h.cursor.has_value()) {
        throw std::runtime_error("hypothesis: cursor inconsistent with final status");
    }
    if (!trie) return;
    for (const NameSpan& span : h.name_spans) {
        if (span.start < 0 || span.start >= span.end ||
            span.end > static_cast<int32_t>(h.tokens.size())) {
            throw std::runtime_error("hypothesis: name span out of bounds");
        }
        TrieCursor cur = trie->root();
        for (int32_t i = span.start; i < span.end; ++i) {
            auto next = trie->step(cur, h.tokens[i]);
            if (!next) throw std::runtime_error("hypothesis: name span not in the trie");
            cur = *next;
        }
        auto acc = trie->accepting_name(cur);
        if (!acc || *acc != span.name_index) {
            throw std::runtime_error("hypothesis: name span does not spell its recorded name");
        }
    }
}

}  // namespace cfnt
