#include "cfnt/toygen.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

#include "cfnt/name_trie.hpp"

namespace cfnt {

// ---- Rng ---------------------------------------------------------------------

uint64_t Rng::next() {
    // splitmix64
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

int32_t Rng::uniform_int(int32_t lo, int32_t hi) {
    if (lo > hi) throw std::runtime_error("rng: empty integer range");
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int32_t>(next() % span);
}

double Rng::uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
}

// ---- spec validation -----------------------------------------------------------

void GenSpec::validate() const {
    auto range_ok = [](const IntRange& r) { return r.min >= 1 && r.min <= r.max; };
    if (vocab_size < 6) throw std::runtime_error("gen spec: vocab_size must be >= 6");
    if (utterances < 1) throw std::runtime_error("gen spec: need at least one utterance");
    if (n_names < 1) throw std::runtime_error("gen spec: need at least one name");
    if (!range_ok(name_len) || !range_ok(t_frames) || !range_ok(u_tokens)) {
        throw std::runtime_error("gen spec: empty or non-positive range");
    }
    if (name_len.max > u_tokens.max) {
        throw std::runtime_error("gen spec: name length " + std::to_string(name_len.max) +
                                 " cannot fit in utterances of at most " +
                                 std::to_string(u_tokens.max) + " tokens");
    }
    if (t_frames.max < u_tokens.max + 1) {
        throw std::runtime_error("gen spec: t_frames.max must be at least u_tokens.max + 1");
    }
    if (class_bias < 0.0) throw std::runtime_error("gen spec: class_bias must be >= 0");
    if (smoothing <= 0.0) throw std::runtime_error("gen spec: smoothing must be > 0");
    if (lm_interp < 0.0 || lm_interp >= 1.0) {
        throw std::runtime_error("gen spec: lm_interp must be in [0,1)");
    }
    if (blank_low >= blank_high) {
        throw std::runtime_error("gen spec: blank_low must be below blank_high");
    }
    if (confuser_margin <= 0.0) {
        throw std::runtime_error("gen spec: confuser_margin must be > 0");
    }
    if (ngram_order < 1 || ngram_order > 3) {
        throw std::runtime_error("gen spec: ngram_order must be 1..3");
    }
    if (train_sentences < 1) throw std::runtime_error("gen spec: need a training corpus");
    if (train_name_fraction < 0.0 || train_name_fraction > 1.0) {
        throw std::runtime_error("gen spec: train_name_fraction must be in [0,1]");
    }
}

// ---- corpus tagging -------------------------------------------------------------

std::vector<TaggedSentence> tag_corpus(const std::vector<TokenSeq>& corpus,
                                       const NameList& names) {
    const NameTrie trie = NameTrie::build(names);
    std::vector<TaggedSentence> out;
    out.reserve(corpus.size());
    for (const TokenSeq& tokens : corpus) {
        TaggedSentence s;
        s.tokens = tokens;
        s.entity_spans = longest_name_matches(tokens, trie);
        s.validate();
        out.push_back(std::move(s));
    }
    return out;
}

TokenSeq apply_tags(const TaggedSentence& sentence, int32_t class_token) {
    TokenSeq out;
    size_t span_idx = 0;
    int32_t i = 0;
    const int32_t n = static_cast<int32_t>(sentence.tokens.size());
    while (i < n) {
        if (span_idx < sentence.entity_spans.size() &&
            sentence.entity_spans[span_idx].start == i) {
            out.push_back(class_token);
            i = sentence.entity_spans[span_idx].end;
            ++span_idx;
        } else {
            out.push_back(sentence.tokens[i]);
            ++i;
        }
    }
    return out;
}

// ---- n-gram estimation -----------------------------------------------------------

namespace {

// Dense rows over every context of length 0..order-1, counted from weighted
// token streams (sequences already in LM inventory ids). Each row is an
// add-delta estimate interpolated with the aggregate unigram distribution, so
// the table stays exhaustive while unseen-in-context continuations keep
// unigram-level mass and unseen tokens drop to the smoothing floor.
NgramLm ngram_from_streams(int32_t vocab_size, bool class_based, int32_t order, double delta,
                           double interp,
                           const std::vector<std::pair<const std::vector<TokenSeq>*, double>>&
                                   streams) {
    const int32_t K = vocab_size + (class_based ? 1 : 0);
    std::map<TokenSeq, std::vector<double>> counts;  // last column is EOS

    auto ensure_row = [&](const TokenSeq& ctx) -> std::vector<double>& {
        auto it = counts.find(ctx);
        if (it == counts.end()) {
            it = counts.emplace(ctx, std::vector<double>(K + 1, 0.0)).first;
        }
        return it->second;
    };

    // enumerate all contexts so unseen histories still have rows
    std::vector<TokenSeq> ctxs{{}};
    for (int32_t len = 1; len <= order - 1; ++len) {
        std::vector<TokenSeq> next;
        for (const TokenSeq& c : ctxs) {
            if (static_cast<int32_t>(c.size()) != len - 1) continue;
            for (int32_t w = 0; w < K; ++w) {
                TokenSeq e = c;
                e.push_back(w);
                next.push_back(std::move(e));
            }
        }
        for (TokenSeq& c : next) ctxs.push_back(std::move(c));
    }
    for (const TokenSeq& c : ctxs) ensure_row(c);

    std::vector<double> unigram(K + 1, 0.0);
    for (const auto& [stream, weight] : streams) {
        if (weight <= 0.0) continue;
        for (const TokenSeq& sent : *stream) {
            TokenSeq ctx;
            for (int32_t tok : sent) {
                ensure_row(ctx)[tok] += weight;
                unigram[tok] += weight;
                ctx.push_back(tok);
                while (static_cast<int32_t>(ctx.size()) > order - 1) ctx.erase(ctx.begin());
            }
            ensure_row(ctx)[K] += weight;  // EOS
            unigram[K] += weight;
        }
    }
    {
        double total = 0.0;
        for (double c : unigram) total += c + delta;
        for (double& c : unigram) c = (c + delta) / total;
    }

    std::map<TokenSeq, NgramLm::Row> table;
    for (const auto& [ctx, row] : counts) {
        double total = 0.0;
        for (double c : row) total += c + delta;
        NgramLm::Row r;
        r.probs.resize(K);
        for (int32_t i = 0; i < K; ++i) {
            r.probs[i] = (1.0 - interp) * (row[i] + delta) / total + interp * unigram[i];
        }
        r.eos_prob = (1.0 - interp) * (row[K] + delta) / total + interp * unigram[K];
        table.emplace(ctx, std::move(r));
    }
    return NgramLm(vocab_size, class_based, /*has_eos=*/true, order, std::move(table));
}

std::string letter_token(int32_t index) {
    std::string out;
    out.push_back(static_cast<char>('a' + index % 26));
    if (index >= 26) out.insert(out.begin(), static_cast<char>('a' + (index / 26 - 1) % 26));
    return out;
}

}  // namespace

// ---- instance generation -----------------------------------------------------------

GenResult gen_instance(uint64_t seed, const GenSpec& spec) {
    spec.validate();
    Rng rng(seed ^ 0xc0ffee);

    // token inventory: word-initial tokens first, then continuation tokens
    const int32_t n_init = std::max<int32_t>(4, (2 * spec.vocab_size) / 3);
    const int32_t n_cont = spec.vocab_size - n_init;
    if (n_cont < 1) throw std::runtime_error("gen spec: vocab too small for continuation tokens");
    std::vector<std::string> tokens;
    std::vector<int32_t> init_ids, cont_ids;
    for (int32_t i = 0; i < n_init; ++i) {
        tokens.push_back(letter_token(i));
        init_ids.push_back(i);
    }
    for (int32_t i = 0; i < n_cont; ++i) {
        tokens.push_back("_" + letter_token(i));
        cont_ids.push_back(n_init + i);
    }

    // word-initial tokens are split into a name pool and a common pool so
    // common text never collides with a name start
    const int32_t n_name_init = std::max<int32_t>(2, n_init / 3);
    std::vector<int32_t> name_inits(init_ids.begin(), init_ids.begin() + n_name_init);
    std::vector<int32_t> common_inits(init_ids.begin() + n_name_init, init_ids.end());

    // names; adjacent repeated tokens are avoided so the blank table's
    // just-emitted bucket never blocks a scheduled token
    NameList names;
    {
        std::set<TokenSeq> seen;
        int32_t attempts = 0;
        while (static_cast<int32_t>(names.names.size()) < spec.n_names) {
            if (++attempts > 10000) {
                throw std::runtime_error("gen spec: cannot draw enough distinct names");
            }
            const int32_t len = rng.uniform_int(spec.name_len.min, spec.name_len.max);
            TokenSeq name{name_inits[rng.uniform_int(0, n_name_init - 1)]};
            for (int32_t k = 1; k < len; ++k) {
                int32_t tok = cont_ids[rng.uniform_int(0, n_cont - 1)];
                while (tok == name.back() && n_cont > 1) {
                    tok = cont_ids[rng.uniform_int(0, n_cont - 1)];
                }
                name.push_back(tok);
            }
            if (seen.insert(name).second) names.names.push_back(std::move(name));
        }
    }

    // a fixed inventory of common words, sampled with a skew toward the front
    std::vector<TokenSeq> common_words;
    {
        std::set<TokenSeq> seen;
        const int32_t target = std::max<int32_t>(6, static_cast<int32_t>(common_inits.size()));
        int32_t attempts = 0;
        while (static_cast<int32_t>(common_words.size()) < target && attempts < 10000) {
            ++attempts;
            const int32_t len = 1 + (rng.uniform() < 0.55 ? 0 : rng.uniform_int(1, 2));
            TokenSeq word{common_inits[rng.uniform_int(
                    0, static_cast<int32_t>(common_inits.size()) - 1)]};
            for (int32_t k = 1; k < len; ++k) {
                int32_t tok = cont_ids[rng.uniform_int(0, n_cont - 1)];
                while (tok == word.back() && n_cont > 1) {
                    tok = cont_ids[rng.uniform_int(0, n_cont - 1)];
                }
                word.push_back(tok);
            }
            if (seen.insert(word).second) common_words.push_back(std::move(word));
        }
    }
    auto pick_common = [&](int32_t max_len) -> const TokenSeq* {
        for (int32_t tries = 0; tries < 64; ++tries) {
            const double z = rng.uniform() * rng.uniform();  // skewed toward 0
            const auto& w = common_words[static_cast<size_t>(z * common_words.size())];
            if (static_cast<int32_t>(w.size()) <= max_len) return &w;
        }
        for (const auto& w : common_words) {
            if (static_cast<int32_t>(w.size()) <= max_len) return &w;
        }
        return nullptr;
    };

    // sentence builder: draws names uniformly from the first name_pool
    // entries. Never places the same token twice in a row, and every name is
    // followed by a common word: the S0-S3 machine cannot represent adjacent
    // names, and a sentence-final name would be dropped at finalization.
    auto make_sentence = [&](int32_t name_pool) {
        const int32_t target = rng.uniform_int(spec.u_tokens.min, spec.u_tokens.max);
        TaggedSentence sent;
        bool force_common = false;
        int32_t guard = 0;
        while ((static_cast<int32_t>(sent.tokens.size()) < target || force_common) &&
               ++guard < 512) {
            const int32_t budget = spec.u_tokens.max - static_cast<int32_t>(sent.tokens.size());
            const int32_t last = sent.tokens.empty() ? -1 : sent.tokens.back();
            const bool try_name =
                    !force_common && name_pool > 0 && rng.uniform() < spec.name_prob;
            if (try_name) {
                const TokenSeq& name = names.names[rng.uniform_int(0, name_pool - 1)];
                // leave room for the mandatory common word after the name
                if (static_cast<int32_t>(name.size()) < budget && name.front() != last) {
                    const int32_t start = static_cast<int32_t>(sent.tokens.size());
                    sent.tokens.insert(sent.tokens.end(), name.begin(), name.end());
                    sent.entity_spans.push_back(
                            Span{start, start + static_cast<int32_t>(name.size())});
                    force_common = true;
                    continue;
                }
            }
            const TokenSeq* word = pick_common(budget);
            if (!word || word->front() == last) continue;
            sent.tokens.insert(sent.tokens.end(), word->begin(), word->end());
            force_common = false;
        }
        sent.validate();
        return sent;
    };

    // LM training corpus: covers only a prefix of the name list, leaving the
    // remaining names long-tail for the word LM
    const int32_t train_pool = std::min<int32_t>(
            spec.n_names,
            std::max<int32_t>(spec.train_name_fraction > 0.0 ? 1 : 0,
                              static_cast<int32_t>(spec.train_name_fraction * spec.n_names)));
    std::vector<TokenSeq> train_original;
    train_original.reserve(spec.train_sentences);
    for (int32_t i = 0; i < spec.train_sentences; ++i) {
        train_original.push_back(make_sentence(train_pool).tokens);
    }
    std::vector<TokenSeq> train_tagged;
    train_tagged.reserve(train_original.size());
    for (const TaggedSentence& s : tag_corpus(train_original, names)) {
        train_tagged.push_back(apply_tags(s, spec.vocab_size));
    }

    // test utterances draw from the whole list
    std::vector<TaggedSentence> refs;
    refs.reserve(spec.utterances);
    for (int32_t u = 0; u < spec.utterances; ++u) refs.push_back(make_sentence(spec.n_names));

    NgramLm word_lm =
            ngram_from_streams(spec.vocab_size, /*class_based=*/false, spec.ngram_order,
                               spec.smoothing, spec.lm_interp, {{&train_original, 1.0}});
    NgramLm class_lm = ngram_from_streams(
            spec.vocab_size, /*class_based=*/true, spec.ngram_order, spec.smoothing,
            spec.lm_interp, {{&train_original, 1.0}, {&train_tagged, spec.class_bias}});

    // encoder scores: each reference token gets one scheduled frame. The
    // blank table (buckets = V+1, keyed by the most recent token) is high
    // everywhere except at a scheduled frame for histories that have not yet
    // emitted that frame's token; the just-emitted bucket stays high so the
    // same frame cannot emit twice.
    std::vector<EncoderScores> scores;
    scores.reserve(refs.size());
    const int32_t buckets = spec.vocab_size + 1;
    for (const TaggedSentence& s : refs) {
        const int32_t U = static_cast<int32_t>(s.tokens.size());
        const int32_t T = rng.uniform_int(std::max(spec.t_frames.min, U + 1), spec.t_frames.max);
        EncoderScores es;
        es.num_frames = T;
        es.vocab_size = spec.vocab_size;
        es.logits.resize(static_cast<size_t>(T) * spec.vocab_size);
        for (double& x : es.logits) x = spec.noise * rng.gaussian();
        es.blank_buckets = buckets;
        es.blank_table.assign(static_cast<size_t>(T) * buckets, 0.0);
        for (int32_t t = 0; t < T; ++t) {
            for (int32_t b = 0; b < buckets; ++b) {
                es.blank_table[static_cast<size_t>(t) * buckets + b] =
                        spec.blank_high + 0.25 * spec.noise * rng.gaussian();
            }
        }
        std::vector<int8_t> in_name(U, 0);
        for (const Span& span : s.entity_spans) {
            for (int32_t i = span.start; i < span.end; ++i) in_name[i] = 1;
        }
        for (int32_t i = 0; i < U; ++i) {
            const int32_t frame = static_cast<int32_t>((i + 0.5) * T / U);
            es.logits[static_cast<size_t>(frame) * spec.vocab_size + s.tokens[i]] += spec.signal;
            if (in_name[i]) {
                // acoustically confusable in-class alternative
                int32_t confuser = s.tokens[i];
                while (confuser == s.tokens[i]) {
                    confuser = rng.uniform() < 0.5
                                       ? name_inits[rng.uniform_int(0, n_name_init - 1)]
                                       : cont_ids[rng.uniform_int(0, n_cont - 1)];
                }
                es.logits[static_cast<size_t>(frame) * spec.vocab_size + confuser] +=
                        spec.signal - spec.confuser_margin;
            }
            for (int32_t b = 0; b < buckets; ++b) {
                if (b == (s.tokens[i] + 1) % buckets) continue;
                es.blank_table[static_cast<size_t>(frame) * buckets + b] =
                        spec.blank_low + 0.25 * spec.noise * rng.gaussian();
            }
        }
        es.validate();
        scores.push_back(std::move(es));
    }

    return GenResult{std::move(tokens), std::move(names), std::move(refs), std::move(scores),
                     std::move(word_lm), std::move(class_lm)};
}

RandomInstance gen_random_instance(uint64_t seed, const RandomInstanceSpec& spec) {
    if (spec.T < 1 || spec.V < 1 || spec.U < 0) {
        throw std::runtime_error("random instance: bad dimensions");
    }
    Rng rng(seed ^ 0x5eed);

    const int32_t K = spec.V + (spec.class_based ? 1 : 0);
    std::map<TokenSeq, NgramLm::Row> table;
    std::vector<TokenSeq> ctxs{{}};
    for (int32_t len = 1; len <= spec.ngram_order - 1; ++len) {
        std::vector<TokenSeq> next;
        for (const TokenSeq& c : ctxs) {
            if (static_cast<int32_t>(c.size()) != len - 1) continue;
            for (int32_t w = 0; w < K; ++w) {
                TokenSeq e = c;
                e.push_back(w);
                next.push_back(std::move(e));
            }
        }
        for (TokenSeq& c : next) ctxs.push_back(std::move(c));
    }
    for (const TokenSeq& ctx : ctxs) {
        NgramLm::Row row;
        row.probs.resize(K);
        double total = 0.0;
        for (double& p : row.probs) {
            p = std::exp(1.2 * rng.gaussian());
            total += p;
        }
        for (double& p : row.probs) p /= total;
        table.emplace(ctx, std::move(row));
    }
    NgramLm lm(spec.V, spec.class_based, /*has_eos=*/false, spec.ngram_order,
               std::move(table));

    EncoderScores es;
    es.num_frames = spec.T;
    es.vocab_size = spec.V;
    es.logits.resize(static_cast<size_t>(spec.T) * spec.V);
    for (double& x : es.logits) x = 1.2 * rng.gaussian();
    es.blank_buckets = std::max<int32_t>(1, spec.blank_buckets);
    es.blank_table.resize(static_cast<size_t>(spec.T) * es.blank_buckets);
    for (double& x : es.blank_table) x = spec.blank_boost + 0.8 * rng.gaussian();
    es.validate();

    TokenSeq y(spec.U);
    for (int32_t& tok : y) tok = rng.uniform_int(0, spec.V - 1);

    return RandomInstance{std::move(es), std::move(lm), std::move(y)};
}

}  // namespace cfnt
