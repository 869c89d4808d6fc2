#include "cfnt/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cfnt::io {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return in;
}

void check_hash(uint64_t got, std::optional<uint64_t> expect, const std::filesystem::path& path) {
    if (expect && got != *expect) {
        throw std::runtime_error("vocabulary hash mismatch in " + path.string() + ": file has " +
                                 hash_hex(got) + ", expected " + hash_hex(*expect));
    }
}

json header_line(const char* kind, uint64_t vocab_hash) {
    return json{{"kind", kind}, {"vocab_hash", hash_hex(vocab_hash)}};
}

// Reads the optional header object of a jsonl file. Returns the parsed header
// (or null) and leaves `first_data` holding the first data line, if any.
json read_jsonl_header(std::ifstream& in, const char* kind, std::string& first_data) {
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (j.is_object() && j.contains("kind")) {
            if (j["kind"] != kind) {
                throw std::runtime_error(std::string("unexpected file kind: wanted ") + kind +
                                         ", got " + j["kind"].dump());
            }
            first_data.clear();
            return j;
        }
        first_data = line;
        return json();
    }
    first_data.clear();
    return json();
}

uint64_t parse_hash(const json& header) {
    if (header.is_null() || !header.contains("vocab_hash")) return 0;
    return std::stoull(header["vocab_hash"].get<std::string>(), nullptr, 16);
}

json rnn_lm_to_json(const RnnLm& lm) {
    const auto& w = lm.weights();
    return json{{"dim", w.dim}, {"emb", w.emb},     {"rec", w.rec},
                {"b_rec", w.b_rec}, {"out", w.out}, {"b_out", w.b_out}};
}

json blank_to_json(const BlankSpec& blank) {
    if (blank.kind == BlankSpec::Kind::Bucket) {
        return json{{"type", "bucket"}, {"buckets", blank.buckets}};
    }
    return json{{"type", "rnn"},      {"dim", blank.rnn.dim},     {"emb", blank.rnn.emb},
                {"rec", blank.rnn.rec}, {"b_rec", blank.rnn.b_rec}, {"w_out", blank.rnn.w_out},
                {"b_out", blank.rnn.b_out}};
}

BlankSpec blank_from_json(const json& j) {
    BlankSpec spec;
    if (j.is_null()) return spec;
    const std::string type = j.at("type").get<std::string>();
    if (type == "bucket") {
        spec.kind = BlankSpec::Kind::Bucket;
        spec.buckets = j.value("buckets", 1);
    } else if (type == "rnn") {
        spec.kind = BlankSpec::Kind::Rnn;
        spec.rnn.dim = j.at("dim").get<int32_t>();
        spec.rnn.emb = j.at("emb").get<std::vector<std::vector<double>>>();
        spec.rnn.rec = j.at("rec").get<std::vector<std::vector<double>>>();
        spec.rnn.b_rec = j.at("b_rec").get<std::vector<double>>();
        spec.rnn.w_out = j.at("w_out").get<std::vector<double>>();
        spec.rnn.b_out = j.at("b_out").get<double>();
    } else {
        throw std::runtime_error("unknown blank scorer type '" + type + "'");
    }
    return spec;
}

void save_model_json(const std::filesystem::path& path, json model) {
    auto out = open_out(path);
    out << model.dump(1) << "\n";
}

}  // namespace

std::unique_ptr<BlankScorer> make_blank_scorer(const BlankSpec& spec,
                                               const EncoderScores& scores) {
    if (spec.kind == BlankSpec::Kind::Bucket) {
        return std::make_unique<BucketBlankScorer>(&scores, spec.buckets);
    }
    return std::make_unique<RnnBlankScorer>(spec.rnn, &scores);
}

// ---- vocab ---------------------------------------------------------------------

void save_vocab(const std::filesystem::path& path, const Vocabulary& vocab) {
    auto out = open_out(path);
    for (const std::string& tok : vocab.tokens()) out << tok << "\n";
}

Vocabulary load_vocab(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        tokens.push_back(line);
    }
    return Vocabulary(std::move(tokens));
}

// ---- names ---------------------------------------------------------------------

void save_names(const std::filesystem::path& path, const NameList& names,
                const Vocabulary& vocab) {
    auto out = open_out(path);
    out << "#vocab_hash=" << hash_hex(vocab.content_hash()) << "\n";
    for (const TokenSeq& name : names.names) out << surface(name, vocab) << "\n";
}

NameList load_names(const std::filesystem::path& path, const Vocabulary& vocab) {
    auto in = open_in(path);
    NameList names;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first && line.rfind("#vocab_hash=", 0) == 0) {
            first = false;
            check_hash(std::stoull(line.substr(12), nullptr, 16), vocab.content_hash(), path);
            continue;
        }
        first = false;
        if (line.empty()) continue;
        names.names.push_back(tokenize(line, vocab));
        if (names.names.back().empty()) {
            throw std::runtime_error("names file: empty entry in " + path.string());
        }
    }
    return names;
}

// ---- refs ----------------------------------------------------------------------

void save_refs(const std::filesystem::path& path, const std::vector<TaggedSentence>& refs,
               const Vocabulary& vocab) {
    auto out = open_out(path);
    out << header_line("refs", vocab.content_hash()).dump() << "\n";
    for (const TaggedSentence& s : refs) {
        json j;
        j["tokens"] = json::array();
        for (int32_t id : s.tokens) j["tokens"].push_back(vocab.token(id));
        j["entity_spans"] = json::array();
        for (const Span& span : s.entity_spans) {
            j["entity_spans"].push_back(json::array({span.start, span.end}));
        }
        out << j.dump() << "\n";
    }
}

std::vector<TaggedSentence> load_refs(const std::filesystem::path& path,
                                      const Vocabulary& vocab) {
    auto in = open_in(path);
    std::string line;
    const json header = read_jsonl_header(in, "refs", line);
    if (!header.is_null()) check_hash(parse_hash(header), vocab.content_hash(), path);

    std::vector<TaggedSentence> refs;
    auto consume = [&](const std::string& text) {
        if (text.empty()) return;
        const json j = json::parse(text);
        TaggedSentence s;
        for (const auto& tok : j.at("tokens")) {
            auto id = vocab.id_of(tok.get<std::string>());
            if (!id) {
                throw std::runtime_error("refs file: unknown token '" +
                                         tok.get<std::string>() + "'");
            }
            s.tokens.push_back(*id);
        }
        if (j.contains("entity_spans")) {
            for (const auto& span : j["entity_spans"]) {
                s.entity_spans.push_back(Span{span.at(0).get<int32_t>(),
                                              span.at(1).get<int32_t>()});
            }
        }
        s.validate();
        refs.push_back(std::move(s));
    };
    consume(line);
    while (std::getline(in, line)) consume(line);
    return refs;
}

// ---- scores --------------------------------------------------------------------

void save_scores(const std::filesystem::path& path, const std::vector<EncoderScores>& scores,
                 uint64_t vocab_hash) {
    auto out = open_out(path);
    out << header_line("scores", vocab_hash).dump() << "\n";
    for (const EncoderScores& es : scores) {
        json j;
        j["T"] = es.num_frames;
        json rows = json::array();
        for (int32_t t = 0; t < es.num_frames; ++t) {
            json row = json::array();
            for (int32_t w = 0; w < es.vocab_size; ++w) row.push_back(es.logit(t, w));
            rows.push_back(std::move(row));
        }
        j["logits"] = std::move(rows);
        if (es.blank_buckets > 0) {
            json table = json::array();
            for (int32_t t = 0; t < es.num_frames; ++t) {
                json row = json::array();
                for (int32_t b = 0; b < es.blank_buckets; ++b) row.push_back(es.blank_entry(t, b));
                table.push_back(std::move(row));
            }
            j["blank_table"] = std::move(table);
        }
        out << j.dump() << "\n";
    }
}

std::vector<EncoderScores> load_scores(const std::filesystem::path& path,
                                       std::optional<uint64_t> expect_hash) {
    auto in = open_in(path);
    std::string line;
    const json header = read_jsonl_header(in, "scores", line);
    if (!header.is_null()) check_hash(parse_hash(header), expect_hash, path);

    std::vector<EncoderScores> scores;
    auto consume = [&](const std::string& text) {
        if (text.empty()) return;
        const json j = json::parse(text);
        EncoderScores es;
        es.num_frames = j.at("T").get<int32_t>();
        const auto rows = j.at("logits").get<std::vector<std::vector<double>>>();
        if (static_cast<int32_t>(rows.size()) != es.num_frames) {
            throw std::runtime_error("scores file: T does not match logit rows");
        }
        es.vocab_size = rows.empty() ? 0 : static_cast<int32_t>(rows[0].size());
        for (const auto& row : rows) {
            if (static_cast<int32_t>(row.size()) != es.vocab_size) {
                throw std::runtime_error("scores file: ragged logit rows");
            }
            es.logits.insert(es.logits.end(), row.begin(), row.end());
        }
        if (j.contains("blank_table")) {
            const auto table = j["blank_table"].get<std::vector<std::vector<double>>>();
            if (static_cast<int32_t>(table.size()) != es.num_frames) {
                throw std::runtime_error("scores file: blank table rows != T");
            }
            es.blank_buckets = table.empty() ? 0 : static_cast<int32_t>(table[0].size());
            for (const auto& row : table) {
                if (static_cast<int32_t>(row.size()) != es.blank_buckets) {
                    throw std::runtime_error("scores file: ragged blank table");
                }
                es.blank_table.insert(es.blank_table.end(), row.begin(), row.end());
            }
        }
        es.validate();
        scores.push_back(std::move(es));
    };
    consume(line);
    while (std::getline(in, line)) consume(line);
    return scores;
}

// ---- models --------------------------------------------------------------------

void save_ngram_model(const std::filesystem::path& path, const NgramLm& lm,
                      const BlankSpec& blank, uint64_t vocab_hash) {
    json entries = json::array();
    for (const auto& [ctx, row] : lm.table()) {
        for (size_t i = 0; i < row.log_probs.size(); ++i) {
            if (row.log_probs[i] == -std::numeric_limits<double>::infinity()) continue;
            json e = json::array();
            for (int32_t c : ctx) e.push_back(c);
            e.push_back(static_cast<int32_t>(i));
            e.push_back(std::exp(row.log_probs[i]));
            entries.push_back(std::move(e));
        }
        if (lm.has_eos() && row.eos_log_prob != -std::numeric_limits<double>::infinity()) {
            json e = json::array();
            for (int32_t c : ctx) e.push_back(c);
            e.push_back(-1);
            e.push_back(std::exp(row.eos_log_prob));
            entries.push_back(std::move(e));
        }
    }
    json model{{"type", "ngram"},
               {"vocab_size", lm.vocab_size()},
               {"class_based", lm.class_based()},
               {"has_eos", lm.has_eos()},
               {"vocab_hash", hash_hex(vocab_hash)},
               {"ngram", json{{"order", lm.order()}, {"entries", std::move(entries)}}},
               {"blank", blank_to_json(blank)}};
    save_model_json(path, std::move(model));
}

void save_rnn_model(const std::filesystem::path& path, const RnnLm& lm, const BlankSpec& blank,
                    uint64_t vocab_hash) {
    json model{{"type", "rnn"},
               {"vocab_size", lm.vocab_size()},
               {"class_based", lm.class_based()},
               {"has_eos", lm.has_eos()},
               {"vocab_hash", hash_hex(vocab_hash)},
               {"rnn", rnn_lm_to_json(lm)},
               {"blank", blank_to_json(blank)}};
    save_model_json(path, std::move(model));
}

LoadedModel load_model(const std::filesystem::path& path, std::optional<uint64_t> expect_hash) {
    auto in = open_in(path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("model file " + path.string() + " is not valid JSON: " +
                                 e.what());
    }
    LoadedModel model;
    model.type = j.at("type").get<std::string>();
    const int32_t vocab_size = j.at("vocab_size").get<int32_t>();
    const bool class_based = j.value("class_based", false);
    const bool has_eos = j.value("has_eos", false);
    if (j.contains("vocab_hash")) {
        model.vocab_hash = std::stoull(j["vocab_hash"].get<std::string>(), nullptr, 16);
        check_hash(model.vocab_hash, expect_hash, path);
    }
    const int32_t inventory = vocab_size + (class_based ? 1 : 0);

    if (model.type == "ngram") {
        const json& ng = j.at("ngram");
        const int32_t order = ng.at("order").get<int32_t>();
        std::map<TokenSeq, NgramLm::Row> table;
        for (const auto& e : ng.at("entries")) {
            if (e.size() < 2) throw std::runtime_error("model file: malformed ngram entry");
            TokenSeq ctx;
            for (size_t i = 0; i + 2 < e.size(); ++i) ctx.push_back(e[i].get<int32_t>());
            const int32_t tok = e[e.size() - 2].get<int32_t>();
            const double prob = e.back().get<double>();
            auto it = table.find(ctx);
            if (it == table.end()) {
                NgramLm::Row row;
                row.probs.assign(inventory, 0.0);
                it = table.emplace(std::move(ctx), std::move(row)).first;
            }
            if (tok == -1) {
                it->second.eos_prob = prob;
            } else if (tok >= 0 && tok < inventory) {
                it->second.probs[tok] = prob;
            } else {
                throw std::runtime_error("model file: ngram token id out of range");
            }
        }
        model.lm = std::make_shared<NgramLm>(vocab_size, class_based, has_eos, order,
                                             std::move(table));
    } else if (model.type == "rnn") {
        const json& r = j.at("rnn");
        RnnLm::Weights w;
        w.dim = r.at("dim").get<int32_t>();
        w.emb = r.at("emb").get<std::vector<std::vector<double>>>();
        w.rec = r.at("rec").get<std::vector<std::vector<double>>>();
        w.b_rec = r.at("b_rec").get<std::vector<double>>();
        w.out = r.at("out").get<std::vector<std::vector<double>>>();
        w.b_out = r.at("b_out").get<std::vector<double>>();
        model.lm = std::make_shared<RnnLm>(vocab_size, class_based, has_eos, std::move(w));
    } else {
        throw std::runtime_error("model file: unknown type '" + model.type + "'");
    }
    model.blank = blank_from_json(j.value("blank", json()));
    return model;
}

// ---- hypotheses -----------------------------------------------------------------

void save_hyps(const std::filesystem::path& path,
               const std::vector<std::vector<Hypothesis>>& by_utt, const std::string& mode,
               uint64_t vocab_hash) {
    auto out = open_out(path);
    json header = header_line("hyps", vocab_hash);
    header["mode"] = mode;
    out << header.dump() << "\n";
    for (size_t u = 0; u < by_utt.size(); ++u) {
        for (size_t r = 0; r < by_utt[u].size(); ++r) {
            const Hypothesis& h = by_utt[u][r];
            json j;
            j["utt"] = u;
            j["rank"] = r;
            j["tokens"] = h.tokens;
            json st = json::array();
            for (Status s : h.statuses) st.push_back(status_name(s));
            j["statuses"] = std::move(st);
            j["score"] = h.score;
            json spans = json::array();
            for (const NameSpan& s : h.name_spans) {
                spans.push_back(json::array({s.start, s.end, s.name_index}));
            }
            j["name_spans"] = std::move(spans);
            out << j.dump() << "\n";
        }
    }
}

HypFile load_hyps(const std::filesystem::path& path, std::optional<uint64_t> expect_hash) {
    auto in = open_in(path);
    std::string line;
    const json header = read_jsonl_header(in, "hyps", line);
    HypFile file;
    if (!header.is_null()) {
        check_hash(parse_hash(header), expect_hash, path);
        file.mode = header.value("mode", "");
    }
    auto consume = [&](const std::string& text) {
        if (text.empty()) return;
        const json j = json::parse(text);
        const size_t utt = j.at("utt").get<size_t>();
        if (file.by_utt.size() <= utt) file.by_utt.resize(utt + 1);
        Hypothesis h;
        h.tokens = j.at("tokens").get<TokenSeq>();
        for (const auto& s : j.at("statuses")) {
            h.statuses.push_back(status_from_name(s.get<std::string>()));
        }
        h.score = j.at("score").get<double>();
        for (const auto& s : j.at("name_spans")) {
            h.name_spans.push_back(NameSpan{s.at(0).get<int32_t>(), s.at(1).get<int32_t>(),
                                            s.at(2).get<int32_t>()});
        }
        file.by_utt[utt].push_back(std::move(h));
    };
    consume(line);
    while (std::getline(in, line)) consume(line);
    return file;
}

uint64_t file_hash(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a64(ss.str());
}

}  // namespace cfnt::io
