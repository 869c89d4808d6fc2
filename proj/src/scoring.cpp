#include "cfnt/scoring.hpp"

#include <cmath>
#include <stdexcept>

#include "cfnt/logmath.hpp"

namespace cfnt {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
    double z = log_sum(logits);
    std::vector<double> out(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - z;
    return out;
}

}  // namespace

// ---- EncoderScores ---------------------------------------------------------

double EncoderScores::logit(int32_t t, int32_t w) const {
    if (t < 0 || t >= num_frames) {
        throw std::out_of_range("encoder scores: frame " + std::to_string(t) + " out of range [0," +
                                std::to_string(num_frames) + ")");
    }
    if (w < 0 || w >= vocab_size) {
        throw std::out_of_range("encoder scores: token " + std::to_string(w) + " out of range");
    }
    return logits[static_cast<size_t>(t) * vocab_size + w];
}

double EncoderScores::blank_entry(int32_t t, int32_t bucket) const {
    if (t < 0 || t >= num_frames) {
        throw std::out_of_range("blank table: frame out of range");
    }
    if (bucket < 0 || bucket >= blank_buckets) {
        throw std::out_of_range("blank table: bucket out of range");
    }
    return blank_table[static_cast<size_t>(t) * blank_buckets + bucket];
}

void EncoderScores::validate() const {
    if (num_frames < 1) throw std::runtime_error("encoder scores: need at least one frame");
    if (vocab_size < 1) throw std::runtime_error("encoder scores: need at least one token");
    if (logits.size() != static_cast<size_t>(num_frames) * vocab_size) {
        throw std::runtime_error("encoder scores: logits shape mismatch");
    }
    for (double x : logits) {
        if (!std::isfinite(x)) throw std::runtime_error("encoder scores: non-finite logit");
    }
    if (blank_table.size() != static_cast<size_t>(num_frames) * blank_buckets) {
        throw std::runtime_error("encoder scores: blank table shape mismatch");
    }
    for (double x : blank_table) {
        if (!std::isfinite(x)) throw std::runtime_error("encoder scores: non-finite blank entry");
    }
}

// ---- NgramLm ----------------------------------------------------------------

NgramLm::NgramLm(int32_t vocab_size, bool class_based, bool has_eos, int32_t order,
                 std::map<TokenSeq, Row> table)
        : vocab_size_(vocab_size), class_based_(class_based), has_eos_(has_eos), order_(order) {
    if (vocab_size_ < 1) throw std::runtime_error("ngram lm: vocab_size must be positive");
    if (order_ < 1) throw std::runtime_error("ngram lm: order must be >= 1");
    const size_t k = static_cast<size_t>(inventory_size());
    for (auto& [ctx, row] : table) {
        if (static_cast<int32_t>(ctx.size()) > order_ - 1) {
            throw std::runtime_error("ngram lm: context longer than order-1");
        }
        if (row.probs.size() != k) {
            throw std::runtime_error("ngram lm: row width != inventory size");
        }
        double sum = row.eos_prob;
        LogRow lr;
        lr.log_probs.resize(k);
        for (size_t i = 0; i < k; ++i) {
            if (row.probs[i] < 0.0) throw std::runtime_error("ngram lm: negative probability");
            sum += row.probs[i];
            lr.log_probs[i] = row.probs[i] > 0.0 ? std::log(row.probs[i]) : kNegInf;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw std::runtime_error("ngram lm: row does not sum to 1 (got " + std::to_string(sum) +
                                     ")");
        }
        lr.eos_log_prob =
                (has_eos_ && row.eos_prob > 0.0) ? std::log(row.eos_prob) : kNegInf;
        table_.emplace(ctx, std::move(lr));
    }
    if (table_.empty()) throw std::runtime_error("ngram lm: empty table");
}

const NgramLm::LogRow& NgramLm::row_for(const ScorerState& state) const {
    auto it = table_.find(state.ctx);
    if (it == table_.end()) {
        std::string ctx = "[";
        for (size_t i = 0; i < state.ctx.size(); ++i) {
            if (i) ctx += ",";
            ctx += std::to_string(state.ctx[i]);
        }
        ctx += "]";
        throw std::runtime_error("ngram lm: no row for context " + ctx);
    }
    return it->second;
}

std::vector<double> NgramLm::log_probs(const ScorerState& state) const {
    return row_for(state).log_probs;
}

double NgramLm::eos_log_prob(const ScorerState& state) const {
    if (!has_eos_) return kNegInf;
    return row_for(state).eos_log_prob;
}

ScorerState NgramLm::advance(const ScorerState& state, int32_t token) const {
    if (token < 0 || token >= inventory_size()) {
        throw std::runtime_error("ngram lm: token " + std::to_string(token) +
                                 " outside inventory");
    }
    ScorerState next = state;
    next.ctx.push_back(token);
    while (static_cast<int32_t>(next.ctx.size()) > order_ - 1) {
        next.ctx.erase(next.ctx.begin());
    }
    return next;
}

// ---- RnnLm ------------------------------------------------------------------

RnnLm::RnnLm(int32_t vocab_size, bool class_based, bool has_eos, Weights weights)
        : vocab_size_(vocab_size), class_based_(class_based), has_eos_(has_eos),
          w_(std::move(weights)) {
    const size_t k = static_cast<size_t>(inventory_size());
    const size_t d = static_cast<size_t>(w_.dim);
    if (d == 0) throw std::runtime_error("rnn lm: zero hidden dim");
    auto check = [](bool ok, const char* what) {
        if (!ok) throw std::runtime_error(std::string("rnn lm: bad shape for ") + what);
    };
    check(w_.emb.size() == k, "emb");
    for (const auto& r : w_.emb) check(r.size() == d, "emb row");
    check(w_.rec.size() == d, "rec");
    for (const auto& r : w_.rec) check(r.size() == d, "rec row");
    check(w_.b_rec.size() == d, "b_rec");
    check(w_.out.size() == k + (has_eos_ ? 1 : 0), "out");
    for (const auto& r : w_.out) check(r.size() == d, "out row");
    check(w_.b_out.size() == w_.out.size(), "b_out");
}

ScorerState RnnLm::initial_state() const {
    ScorerState s;
    s.hidden.assign(w_.dim, 0.0);
    return s;
}

std::vector<double> RnnLm::output_log_probs(const ScorerState& state) const {
    if (state.hidden.size() != static_cast<size_t>(w_.dim)) {
        throw std::runtime_error("rnn lm: state dim mismatch");
    }
    std::vector<double> logits(w_.out.size());
    for (size_t i = 0; i < w_.out.size(); ++i) {
        logits[i] = dot(w_.out[i], state.hidden) + w_.b_out[i];
    }
    return log_softmax(logits);
}

std::vector<double> RnnLm::log_probs(const ScorerState& state) const {
    auto lp = output_log_probs(state);
    lp.resize(inventory_size());
    return lp;
}

double RnnLm::eos_log_prob(const ScorerState& state) const {
    if (!has_eos_) return kNegInf;
    return output_log_probs(state).back();
}

ScorerState RnnLm::advance(const ScorerState& state, int32_t token) const {
    if (token < 0 || token >= inventory_size()) {
        throw std::runtime_error("rnn lm: token " + std::to_string(token) + " outside inventory");
    }
    ScorerState next;
    next.hidden.resize(w_.dim);
    for (int32_t i = 0; i < w_.dim; ++i) {
        next.hidden[i] =
                std::tanh(dot(w_.rec[i], state.hidden) + w_.emb[token][i] + w_.b_rec[i]);
    }
    return next;
}

// ---- blank scorers ----------------------------------------------------------

BucketBlankScorer::BucketBlankScorer(const EncoderScores* scores, int32_t buckets)
        : scores_(scores), buckets_(buckets) {
    if (buckets_ <= 0) {
        buckets_ = (scores_ && scores_->blank_buckets > 0) ? scores_->blank_buckets : 1;
    }
    if (scores_ && scores_->blank_buckets > 0 && scores_->blank_buckets != buckets_) {
        throw std::runtime_error("bucket blank scorer: table width != bucket count");
    }
}

ScorerState BucketBlankScorer::initial_state() const {
    ScorerState s;
    s.ctx = {0};
    return s;
}

double BucketBlankScorer::logit(int32_t frame, const ScorerState& state) const {
    if (!scores_ || scores_->blank_buckets == 0) {
        if (frame < 0 || (scores_ && frame >= scores_->num_frames)) {
            throw std::out_of_range("blank scorer: frame out of range");
        }
        return 0.0;
    }
    return scores_->blank_entry(frame, state.ctx.at(0));
}

ScorerState BucketBlankScorer::advance(const ScorerState& state, int32_t token) const {
    // the bucket is the most recent surface token folded into the table
    // width; bucket 0 is the empty history
    (void)state;
    ScorerState next;
    next.ctx = {static_cast<int32_t>((token + 1) % buckets_)};
    return next;
}

RnnBlankScorer::RnnBlankScorer(RnnBlankWeights weights, const EncoderScores* scores)
        : w_(std::move(weights)), scores_(scores) {
    const size_t d = static_cast<size_t>(w_.dim);
    if (d == 0) throw std::runtime_error("rnn blank scorer: zero hidden dim");
    if (w_.rec.size() != d || w_.b_rec.size() != d || w_.w_out.size() != d) {
        throw std::runtime_error("rnn blank scorer: bad shape");
    }
    for (const auto& r : w_.rec) {
        if (r.size() != d) throw std::runtime_error("rnn blank scorer: bad rec row");
    }
    for (const auto& r : w_.emb) {
        if (r.size() != d) throw std::runtime_error("rnn blank scorer: bad emb row");
    }
}

ScorerState RnnBlankScorer::initial_state() const {
    ScorerState s;
    s.hidden.assign(w_.dim, 0.0);
    return s;
}

double RnnBlankScorer::logit(int32_t frame, const ScorerState& state) const {
    double bias = 0.0;
    if (scores_ && scores_->blank_buckets > 0) {
        bias = scores_->blank_entry(frame, 0);
    } else if (scores_ && (frame < 0 || frame >= scores_->num_frames)) {
        throw std::out_of_range("blank scorer: frame out of range");
    }
    return dot(w_.w_out, state.hidden) + w_.b_out + bias;
}

ScorerState RnnBlankScorer::advance(const ScorerState& state, int32_t token) const {
    if (token < 0 || token >= static_cast<int32_t>(w_.emb.size())) {
        throw std::runtime_error("rnn blank scorer: token outside vocabulary");
    }
    ScorerState next;
    next.hidden.resize(w_.dim);
    for (int32_t i = 0; i < w_.dim; ++i) {
        next.hidden[i] =
                std::tanh(dot(w_.rec[i], state.hidden) + w_.emb[token][i] + w_.b_rec[i]);
    }
    return next;
}

// ---- NamePrior ---------------------------------------------------------------

NamePrior::NamePrior(std::map<TokenSeq, double> log_priors)
        : enabled_(true), log_priors_(std::move(log_priors)) {
    double sum = 0.0;
    for (const auto& [_, lp] : log_priors_) sum += std::exp(lp);
    if (sum > 1.0 + 1e-9) {
        throw std::runtime_error("name prior: probabilities sum to " + std::to_string(sum) +
                                 " > 1");
    }
}

NamePrior NamePrior::uniform(const NameList& names) {
    std::map<TokenSeq, double> lp;
    for (const TokenSeq& name : names.names) lp.emplace(name, 0.0);
    if (lp.empty()) throw std::runtime_error("name prior: empty name list");
    const double val = -std::log(static_cast<double>(lp.size()));
    for (auto& [_, v] : lp) v = val;
    return NamePrior(std::move(lp));
}

double NamePrior::log_prior(const TokenSeq& name) const {
    if (!enabled_) return 0.0;
    auto it = log_priors_.find(name);
    if (it == log_priors_.end()) {
        throw std::runtime_error("name prior: name missing from enabled prior");
    }
    return it->second;
}

// ---- composition ops ----------------------------------------------------------

std::vector<double> fnt_vocab_logits(const EncoderScores& enc, int32_t t,
                                     const LanguageModel& lm, const ScorerState& state) {
    if (t < 0 || t >= enc.num_frames) {
        throw std::out_of_range("fnt_vocab_logits: frame " + std::to_string(t) + " out of range");
    }
    if (lm.vocab_size() != enc.vocab_size) {
        throw std::runtime_error("fnt_vocab_logits: vocabulary size mismatch");
    }
    const auto lp = lm.log_probs(state);
    std::vector<double> out(enc.vocab_size);
    for (int32_t w = 0; w < enc.vocab_size; ++w) {
        out[w] = lp[w] + enc.logit(t, w);
    }
    return out;
}

std::vector<double> cfnt_name_logits(const EncoderScores& enc, int32_t t,
                                     const LanguageModel& class_lm, const ScorerState& state,
                                     bool entry) {
    if (t < 0 || t >= enc.num_frames) {
        throw std::out_of_range("cfnt_name_logits: frame " + std::to_string(t) + " out of range");
    }
    if (!class_lm.class_based()) {
        throw std::runtime_error("cfnt_name_logits: language model has no @name class");
    }
    if (class_lm.vocab_size() != enc.vocab_size) {
        throw std::runtime_error("cfnt_name_logits: vocabulary size mismatch");
    }
    double class_term = 0.0;
    if (entry) {
        class_term = class_lm.log_probs(state)[class_lm.class_token()];
    }
    std::vector<double> out(enc.vocab_size);
    for (int32_t w = 0; w < enc.vocab_size; ++w) {
        out[w] = class_term + enc.logit(t, w);
    }
    return out;
}

std::vector<double> emit_distribution(double blank_logit, std::span<const double> voc_logits,
                                      std::span<const double> name_logits) {
    if (voc_logits.size() != name_logits.size()) {
        throw std::runtime_error("emit_distribution: block size mismatch");
    }
    const size_t v = voc_logits.size();
    std::vector<double> z(2 * v + 1);
    z[0] = blank_logit;
    for (size_t w = 0; w < v; ++w) z[1 + w] = voc_logits[w];
    for (size_t w = 0; w < v; ++w) z[1 + v + w] = name_logits[w];

    double hi = kNegInf;
    for (double x : z) {
        if (std::isnan(x)) throw std::runtime_error("emit_distribution: NaN logit");
        hi = std::max(hi, x);
    }
    if (hi == kNegInf) {
        throw std::runtime_error("emit_distribution: every entry is masked");
    }
    double sum = 0.0;
    std::vector<double> probs(z.size());
    for (size_t i = 0; i < z.size(); ++i) {
        probs[i] = (z[i] == kNegInf) ? 0.0 : std::exp(z[i] - hi);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

double class_factored_logprob(const TokenSeq& context, const TokenSeq& name,
                              const LanguageModel& class_lm, const NamePrior* prior) {
    if (!class_lm.class_based()) {
        throw std::runtime_error("class_factored_logprob: language model has no @name class");
    }
    ScorerState state = class_lm.initial_state();
    for (int32_t tok : context) state = class_lm.advance(state, tok);
    double lp = class_lm.log_probs(state)[class_lm.class_token()];
    if (prior && prior->enabled()) lp += prior->log_prior(name);
    return lp;
}

double lm_sequence_logprob(const LanguageModel& lm, const TokenSeq& seq) {
    ScorerState state = lm.initial_state();
    double acc = 0.0;
    for (int32_t tok : seq) {
        if (tok < 0 || tok >= lm.inventory_size()) {
            throw std::runtime_error("lm_sequence_logprob: token " + std::to_string(tok) +
                                     " outside the model inventory");
        }
        acc += lm.log_probs(state)[tok];
        state = lm.advance(state, tok);
    }
    if (lm.has_eos()) acc += lm.eos_log_prob(state);
    return acc;
}

}  // namespace cfnt
