#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "cfnt/decoder.hpp"
#include "cfnt/eval.hpp"
#include "cfnt/io.hpp"
#include "cfnt/lattice.hpp"
#include "cfnt/name_trie.hpp"
#include "cfnt/toygen.hpp"

namespace py = pybind11;
using namespace cfnt;

namespace {

EncoderScores make_scores(const std::vector<std::vector<double>>& logits,
                          const std::vector<std::vector<double>>& blank_table) {
    EncoderScores es;
    es.num_frames = static_cast<int32_t>(logits.size());
    es.vocab_size = logits.empty() ? 0 : static_cast<int32_t>(logits[0].size());
    for (const auto& row : logits) {
        if (static_cast<int32_t>(row.size()) != es.vocab_size) {
            throw std::runtime_error("ragged logits");
        }
        es.logits.insert(es.logits.end(), row.begin(), row.end());
    }
    if (!blank_table.empty()) {
        es.blank_buckets = static_cast<int32_t>(blank_table[0].size());
        for (const auto& row : blank_table) {
            if (static_cast<int32_t>(row.size()) != es.blank_buckets) {
                throw std::runtime_error("ragged blank table");
            }
            es.blank_table.insert(es.blank_table.end(), row.begin(), row.end());
        }
    }
    es.validate();
    return es;
}

std::shared_ptr<NgramLm> make_ngram(int32_t vocab_size, bool class_based, bool has_eos,
                                    int32_t order,
                                    const std::vector<std::pair<TokenSeq, std::vector<double>>>&
                                            rows,
                                    const std::vector<double>& eos_probs) {
    std::map<TokenSeq, NgramLm::Row> table;
    for (size_t i = 0; i < rows.size(); ++i) {
        NgramLm::Row row;
        row.probs = rows[i].second;
        row.eos_prob = i < eos_probs.size() ? eos_probs[i] : 0.0;
        table.emplace(rows[i].first, std::move(row));
    }
    return std::make_shared<NgramLm>(vocab_size, class_based, has_eos, order, std::move(table));
}

py::dict hyp_to_dict(const Hypothesis& h) {
    py::dict d;
    d["tokens"] = h.tokens;
    py::list statuses;
    for (Status s : h.statuses) statuses.append(std::string(status_name(s)));
    d["statuses"] = statuses;
    d["score"] = h.score;
    py::list spans;
    for (const NameSpan& s : h.name_spans) {
        spans.append(py::make_tuple(s.start, s.end, s.name_index));
    }
    d["name_spans"] = spans;
    d["in_class"] = !h.is_outside();
    return d;
}

py::list hyps_to_list(const std::vector<Hypothesis>& hyps) {
    py::list out;
    for (const Hypothesis& h : hyps) out.append(hyp_to_dict(h));
    return out;
}

DecodeConfig make_config(int32_t beam, bool dynamic_beam, int32_t in_class_budget, int32_t nbest,
                         int32_t max_symbols) {
    DecodeConfig cfg;
    cfg.beam_size = beam;
    cfg.dynamic_beam = dynamic_beam;
    cfg.in_class_budget = in_class_budget;
    cfg.nbest = nbest;
    cfg.max_symbols_per_frame = max_symbols;
    cfg.validate();
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_cfnt, m) {
    m.doc() = "toy factorized-transducer decoding with class-based name biasing";

    py::class_<Vocabulary>(m, "Vocabulary")
            .def(py::init<std::vector<std::string>>())
            .def_property_readonly("size", &Vocabulary::size)
            .def_property_readonly("blank_id", &Vocabulary::blank_id)
            .def_property_readonly("class_id", &Vocabulary::class_id)
            .def("token", &Vocabulary::token)
            .def("tokens", &Vocabulary::tokens)
            .def("content_hash", [](const Vocabulary& v) { return hash_hex(v.content_hash()); })
            .def("tokenize", [](const Vocabulary& v, const std::string& s) {
                return tokenize(s, v);
            })
            .def("surface", [](const Vocabulary& v, const TokenSeq& seq) {
                return surface(seq, v);
            })
            .def("words", [](const Vocabulary& v, const TokenSeq& seq) {
                return words(seq, v);
            });

    py::class_<EncoderScores>(m, "EncoderScores")
            .def(py::init(&make_scores), py::arg("logits"),
                 py::arg("blank_table") = std::vector<std::vector<double>>{})
            .def_readonly("num_frames", &EncoderScores::num_frames)
            .def_readonly("vocab_size", &EncoderScores::vocab_size);

    py::class_<LanguageModel, std::shared_ptr<LanguageModel>>(m, "LanguageModel")
            .def_property_readonly("vocab_size", &LanguageModel::vocab_size)
            .def_property_readonly("class_based", &LanguageModel::class_based)
            .def_property_readonly("has_eos", &LanguageModel::has_eos);

    py::class_<NgramLm, LanguageModel, std::shared_ptr<NgramLm>>(m, "NgramLm");
    py::class_<RnnLm, LanguageModel, std::shared_ptr<RnnLm>>(m, "RnnLm");

    m.def("make_ngram_lm", &make_ngram, py::arg("vocab_size"), py::arg("class_based"),
          py::arg("has_eos"), py::arg("order"), py::arg("rows"),
          py::arg("eos_probs") = std::vector<double>{},
          "rows: list of (context, linear probs over the inventory)");

    py::class_<NameTrie>(m, "NameTrie")
            .def(py::init([](const std::vector<TokenSeq>& names) {
                return NameTrie::build(NameList{names});
            }))
            .def_property_readonly("name_count", &NameTrie::name_count)
            .def("allowed_tokens",
                 [](const NameTrie& t) { return t.allowed_tokens(t.root()); })
            .def("accepts", [](const NameTrie& t, const TokenSeq& seq) {
                TrieCursor cur = t.root();
                for (int32_t tok : seq) {
                    auto next = t.step(cur, tok);
                    if (!next) return false;
                    cur = *next;
                }
                return t.accepting_name(cur).has_value();
            });

    m.def("lm_sequence_logprob", &lm_sequence_logprob);
    m.def("emit_distribution",
          [](double blank, const std::vector<double>& voc, const std::vector<double>& name) {
              return emit_distribution(blank, voc, name);
          });

    m.def("forward_logprob",
          [](const EncoderScores& enc, const LanguageModel& lm, const TokenSeq& y) {
              const BucketBlankScorer blank(&enc);
              return forward_logprob(enc, blank, lm, y);
          });
    m.def("brute_force_logprob",
          [](const EncoderScores& enc, const LanguageModel& lm, const TokenSeq& y) {
              const BucketBlankScorer blank(&enc);
              return brute_force_logprob(enc, blank, lm, y, nullptr);
          });
    m.def("fnt_loss",
          [](const EncoderScores& enc, const LanguageModel& lm, const TokenSeq& y,
             double lambda_f) {
              const BucketBlankScorer blank(&enc);
              return fnt_loss(enc, blank, lm, y, LossConfig{lambda_f});
          },
          py::arg("enc"), py::arg("lm"), py::arg("y"), py::arg("lambda_f") = 0.1);

    m.def("fnt_greedy",
          [](const EncoderScores& enc, const LanguageModel& lm, int32_t max_symbols) {
              const BucketBlankScorer blank(&enc);
              return hyp_to_dict(fnt_greedy(enc, blank, lm, max_symbols));
          },
          py::arg("enc"), py::arg("lm"), py::arg("max_symbols") = 8);
    m.def("fnt_beam_search",
          [](const EncoderScores& enc, const LanguageModel& lm, int32_t beam, int32_t nbest,
             int32_t max_symbols) {
              const BucketBlankScorer blank(&enc);
              const DecodeConfig cfg = make_config(beam, false, -1, nbest, max_symbols);
              return hyps_to_list(fnt_beam_search(enc, blank, lm, cfg));
          },
          py::arg("enc"), py::arg("lm"), py::arg("beam") = 5, py::arg("nbest") = -1,
          py::arg("max_symbols") = 8);
    m.def("cfnt_beam_search",
          [](const EncoderScores& enc, const LanguageModel& lm, const NameTrie& trie,
             int32_t beam, bool dynamic_beam, int32_t in_class_budget, int32_t nbest,
             int32_t max_symbols) {
              const BucketBlankScorer blank(&enc);
              const DecodeConfig cfg =
                      make_config(beam, dynamic_beam, in_class_budget, nbest, max_symbols);
              return hyps_to_list(cfnt_beam_search(enc, blank, lm, trie, cfg));
          },
          py::arg("enc"), py::arg("lm"), py::arg("trie"), py::arg("beam") = 5,
          py::arg("dynamic_beam") = false, py::arg("in_class_budget") = -1,
          py::arg("nbest") = -1, py::arg("max_symbols") = 8);
    m.def("cfnt_greedy",
          [](const EncoderScores& enc, const LanguageModel& lm, const NameTrie& trie,
             int32_t max_symbols) {
              const BucketBlankScorer blank(&enc);
              return hyp_to_dict(cfnt_greedy(enc, blank, lm, trie, nullptr, max_symbols));
          },
          py::arg("enc"), py::arg("lm"), py::arg("trie"), py::arg("max_symbols") = 8);

    m.def("word_align", [](const std::vector<std::string>& ref,
                           const std::vector<std::string>& hyp) {
        py::list out;
        for (const AlignStep& s : word_align(ref, hyp)) {
            const char* op = s.op == EditOp::Match ? "match"
                           : s.op == EditOp::Sub   ? "sub"
                           : s.op == EditOp::Del   ? "del"
                                                   : "ins";
            out.append(py::make_tuple(op, s.ref_index, s.hyp_index));
        }
        return out;
    });
    m.def("wer", [](const std::vector<std::vector<std::string>>& refs,
                    const std::vector<std::vector<std::string>>& hyps) {
        const WerCounts c = wer(refs, hyps);
        py::dict d;
        d["wer"] = c.wer();
        d["substitutions"] = c.substitutions;
        d["deletions"] = c.deletions;
        d["insertions"] = c.insertions;
        d["hits"] = c.hits;
        d["ref_words"] = c.ref_words;
        return d;
    });

    m.def("gen_instance_files",
          [](uint64_t seed, const std::string& out_dir, int32_t vocab_size, int32_t utterances,
             int32_t n_names, double class_bias) {
              GenSpec spec;
              spec.vocab_size = vocab_size;
              spec.utterances = utterances;
              spec.n_names = n_names;
              spec.class_bias = class_bias;
              const GenResult result = gen_instance(seed, spec);
              const Vocabulary vocab = result.vocabulary();
              const std::filesystem::path dir(out_dir);
              std::filesystem::create_directories(dir);
              io::save_vocab(dir / "vocab.txt", vocab);
              io::save_names(dir / "names.txt", result.names, vocab);
              io::save_refs(dir / "refs.jsonl", result.refs, vocab);
              io::save_scores(dir / "scores.jsonl", result.scores, vocab.content_hash());
              io::BlankSpec blank;
              blank.buckets = spec.vocab_size + 1;
              io::save_ngram_model(dir / "model_word.json", result.word_lm, blank,
                                   vocab.content_hash());
              io::save_ngram_model(dir / "model_class.json", result.class_lm, blank,
                                   vocab.content_hash());
          },
          py::arg("seed"), py::arg("out_dir"), py::arg("vocab_size") = 24,
          py::arg("utterances") = 40, py::arg("n_names") = 8, py::arg("class_bias") = 1.0);

    m.def("load_vocab", [](const std::string& p) { return io::load_vocab(p); });
    m.def("load_model", [](const std::string& p) {
        return io::load_model(p, std::nullopt).lm;
    });
}
