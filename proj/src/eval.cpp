#include "cfnt/eval.hpp"

#include <algorithm>
#include <stdexcept>

#include "cfnt/name_trie.hpp"

namespace cfnt {

std::vector<AlignStep> word_align(const std::vector<std::string>& ref,
                                  const std::vector<std::string>& hyp) {
    const int32_t n = static_cast<int32_t>(ref.size());
    const int32_t m = static_cast<int32_t>(hyp.size());
    std::vector<int32_t> d(static_cast<size_t>(n + 1) * (m + 1));
    auto at = [&](int32_t i, int32_t j) -> int32_t& { return d[i * (m + 1) + j]; };
    for (int32_t i = 0; i <= n; ++i) at(i, 0) = i;
    for (int32_t j = 0; j <= m; ++j) at(0, j) = j;
    for (int32_t i = 1; i <= n; ++i) {
        for (int32_t j = 1; j <= m; ++j) {
            const int32_t sub = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
            at(i, j) = std::min({sub, at(i - 1, j) + 1, at(i, j - 1) + 1});
        }
    }
    std::vector<AlignStep> steps;
    int32_t i = n, j = m;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && at(i, j) == at(i - 1, j - 1)) {
            steps.push_back({EditOp::Match, i - 1, j - 1});
            --i, --j;
        } else if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + 1) {
            steps.push_back({EditOp::Sub, i - 1, j - 1});
            --i, --j;
        } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
            steps.push_back({EditOp::Del, i - 1, -1});
            --i;
        } else {
            steps.push_back({EditOp::Ins, -1, j - 1});
            --j;
        }
    }
    std::reverse(steps.begin(), steps.end());
    return steps;
}

namespace {

WerCounts count_steps(const std::vector<AlignStep>& steps, size_t ref_len) {
    WerCounts c;
    c.ref_words = static_cast<int64_t>(ref_len);
    for (const AlignStep& s : steps) {
        switch (s.op) {
            case EditOp::Match: ++c.hits; break;
            case EditOp::Sub: ++c.substitutions; break;
            case EditOp::Del: ++c.deletions; break;
            case EditOp::Ins: ++c.insertions; break;
        }
    }
    return c;
}

// Map a token span onto the covering word span.
Span to_word_span(const Span& s, const std::vector<int32_t>& word_of) {
    return Span{word_of[s.start], word_of[s.end - 1] + 1};
}

struct UttEntityInput {
    std::vector<Span> ref_spans;  // word spans
    std::vector<Span> hyp_spans;  // word spans
    std::vector<AlignStep> steps;
    size_t ref_len = 0;
    size_t hyp_len = 0;
};

EntityCounts entity_counts_for(const UttEntityInput& in) {
    EntityCounts c;
    c.ref_entities = static_cast<int64_t>(in.ref_spans.size());
    c.hyp_entities = static_cast<int64_t>(in.hyp_spans.size());

    std::vector<int8_t> ref_matched(in.ref_len, 0);
    std::vector<int32_t> hyp_to_ref(in.hyp_len, -1);
    for (const AlignStep& s : in.steps) {
        if (s.op == EditOp::Match) {
            ref_matched[s.ref_index] = 1;
            hyp_to_ref[s.hyp_index] = s.ref_index;
        }
    }

    for (const Span& r : in.ref_spans) {
        bool all = true;
        for (int32_t i = r.start; i < r.end; ++i) all &= ref_matched[i] != 0;
        if (all) ++c.recalled;
    }
    for (const Span& h : in.hyp_spans) {
        bool ok = true;
        for (int32_t j = h.start; j < h.end; ++j) {
            if (hyp_to_ref[j] < 0) { ok = false; break; }
            // aligned reference words must be contiguous
            if (j > h.start && hyp_to_ref[j] != hyp_to_ref[j - 1] + 1) { ok = false; break; }
        }
        if (!ok) continue;
        const Span aligned{hyp_to_ref[h.start], hyp_to_ref[h.end - 1] + 1};
        for (const Span& r : in.ref_spans) {
            if (aligned == r) { ++c.correct; break; }
        }
    }
    c.degenerate = (c.ref_entities == 0 || c.hyp_entities == 0);
    return c;
}

std::vector<Span> hyp_entity_spans(const DecodedUtterance& hyp, EntityMode mode,
                                   const NameTrie* match_trie) {
    std::vector<Span> token_spans;
    if (mode == EntityMode::Spans) {
        for (const NameSpan& s : hyp.name_spans) token_spans.push_back(Span{s.start, s.end});
    } else {
        token_spans = longest_name_matches(hyp.tokens, *match_trie);
    }
    return token_spans;
}

}  // namespace

WerCounts wer(const std::vector<std::vector<std::string>>& refs,
              const std::vector<std::vector<std::string>>& hyps) {
    if (refs.size() != hyps.size()) {
        throw std::runtime_error("wer: " + std::to_string(refs.size()) + " references vs " +
                                 std::to_string(hyps.size()) + " hypotheses");
    }
    WerCounts total;
    for (size_t u = 0; u < refs.size(); ++u) {
        const WerCounts c = count_steps(word_align(refs[u], hyps[u]), refs[u].size());
        total.substitutions += c.substitutions;
        total.deletions += c.deletions;
        total.insertions += c.insertions;
        total.hits += c.hits;
        total.ref_words += c.ref_words;
    }
    return total;
}

EntityCounts entity_prf(const std::vector<TaggedSentence>& refs,
                        const std::vector<DecodedUtterance>& hyps, const Vocabulary& vocab,
                        EntityMode mode, const NameList* names) {
    EvalReport report = evaluate_corpus(refs, hyps, vocab, mode, names, false);
    return report.entities;
}

EvalReport evaluate_corpus(const std::vector<TaggedSentence>& refs,
                           const std::vector<DecodedUtterance>& hyps, const Vocabulary& vocab,
                           EntityMode mode, const NameList* names, bool per_utt) {
    if (refs.size() != hyps.size()) {
        throw std::runtime_error("evaluate: " + std::to_string(refs.size()) + " references vs " +
                                 std::to_string(hyps.size()) + " hypotheses");
    }
    NameTrie match_trie;
    if (mode == EntityMode::Match) {
        if (!names) throw std::runtime_error("evaluate: match mode needs a name list");
        match_trie = NameTrie::build(*names);
    }

    EvalReport report;
    for (size_t u = 0; u < refs.size(); ++u) {
        refs[u].validate();
        const auto ref_words = words(refs[u].tokens, vocab);
        const auto hyp_words = words(hyps[u].tokens, vocab);

        UttEntityInput in;
        in.ref_len = ref_words.size();
        in.hyp_len = hyp_words.size();
        in.steps = word_align(ref_words, hyp_words);

        const auto ref_word_of = word_index_of(refs[u].tokens, vocab);
        for (const Span& s : refs[u].entity_spans) {
            in.ref_spans.push_back(to_word_span(s, ref_word_of));
        }
        const auto hyp_word_of = word_index_of(hyps[u].tokens, vocab);
        for (const Span& s : hyp_entity_spans(hyps[u], mode, &match_trie)) {
            if (s.start >= s.end || s.end > static_cast<int32_t>(hyps[u].tokens.size())) {
                throw std::runtime_error("evaluate: hypothesis span out of bounds");
            }
            in.hyp_spans.push_back(to_word_span(s, hyp_word_of));
        }

        const WerCounts wc = count_steps(in.steps, ref_words.size());
        const EntityCounts ec = entity_counts_for(in);

        report.wer.substitutions += wc.substitutions;
        report.wer.deletions += wc.deletions;
        report.wer.insertions += wc.insertions;
        report.wer.hits += wc.hits;
        report.wer.ref_words += wc.ref_words;
        report.entities.ref_entities += ec.ref_entities;
        report.entities.hyp_entities += ec.hyp_entities;
        report.entities.correct += ec.correct;
        report.entities.recalled += ec.recalled;
        if (per_utt) report.per_utt.push_back(UttBreakdown{wc, ec});
    }
    report.entities.degenerate =
            (report.entities.ref_entities == 0 || report.entities.hyp_entities == 0);
    return report;
}

}  // namespace cfnt
