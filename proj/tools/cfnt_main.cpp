// cfnt: toy factorized-transducer decoding with class-based name biasing.
// Subcommands: gen, decode, eval, oracle, loss. Exit codes: 0 success,
// 1 check failure (oracle mismatch), 2 usage or input error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfnt/decoder.hpp"
#include "cfnt/eval.hpp"
#include "cfnt/io.hpp"
#include "cfnt/lattice.hpp"
#include "cfnt/toygen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cfnt;

namespace {

struct GenArgs {
    std::string out_dir;
    uint64_t seed = 1;
    GenSpec spec;
};

int run_gen(const GenArgs& args) {
    const GenResult result = gen_instance(args.seed, args.spec);
    const Vocabulary vocab = result.vocabulary();
    const fs::path dir(args.out_dir);
    fs::create_directories(dir);

    io::save_vocab(dir / "vocab.txt", vocab);
    io::save_names(dir / "names.txt", result.names, vocab);
    io::save_refs(dir / "refs.jsonl", result.refs, vocab);
    io::save_scores(dir / "scores.jsonl", result.scores, vocab.content_hash());
    io::BlankSpec blank;  // bucket flavor: one bucket per last-token value
    blank.buckets = args.spec.vocab_size + 1;
    io::save_ngram_model(dir / "model_word.json", result.word_lm, blank, vocab.content_hash());
    io::save_ngram_model(dir / "model_class.json", result.class_lm, blank, vocab.content_hash());

    std::cout << "seed " << args.seed << "\n";
    for (const char* name : {"vocab.txt", "names.txt", "refs.jsonl", "scores.jsonl",
                             "model_word.json", "model_class.json"}) {
        std::cout << hash_hex(io::file_hash(dir / name)) << "  " << name << "\n";
    }
    return 0;
}

struct DecodeArgs {
    std::string mode = "fnt";
    std::string model_path, scores_path, vocab_path, out_path, name_list;
    bool empty_name_list = false;
    bool dynamic_beam = false;
    bool uniform_prior = false;
    int32_t beam = 5;
    int32_t nbest = -1;
    int32_t max_symbols = 8;
};

int run_decode(const DecodeArgs& args) {
    const bool class_mode = args.mode == "cfnt" || args.mode == "greedy-cfnt";
    if (class_mode && args.name_list.empty() && !args.empty_name_list) {
        throw CLI::ValidationError("--name-list or --empty-name-list is required for " +
                                   args.mode);
    }
    if (!class_mode && (!args.name_list.empty() || args.empty_name_list)) {
        throw CLI::ValidationError("name-list flags only apply to cfnt modes");
    }

    const Vocabulary vocab = io::load_vocab(args.vocab_path);
    const io::LoadedModel model = io::load_model(args.model_path, vocab.content_hash());
    const auto scores = io::load_scores(args.scores_path, vocab.content_hash());
    if (model.lm->vocab_size() != vocab.size()) {
        throw std::runtime_error("model vocab_size does not match vocab.txt");
    }
    if (class_mode && !model.lm->class_based()) {
        throw std::runtime_error("cfnt decode needs a class-based model");
    }

    NameList names;
    if (class_mode && !args.empty_name_list) names = io::load_names(args.name_list, vocab);
    const NameTrie trie = NameTrie::build(names);
    NamePrior prior;
    if (args.uniform_prior) {
        if (names.names.empty()) throw std::runtime_error("uniform prior needs a name list");
        prior = NamePrior::uniform(names);
    }

    DecodeConfig cfg;
    cfg.beam_size = args.beam;
    cfg.dynamic_beam = args.dynamic_beam;
    cfg.nbest = args.nbest;
    cfg.max_symbols_per_frame = args.max_symbols;
    cfg.validate();

    std::vector<std::vector<Hypothesis>> by_utt;
    by_utt.reserve(scores.size());
    for (const EncoderScores& es : scores) {
        auto blank = io::make_blank_scorer(model.blank, es);
        if (args.mode == "fnt") {
            by_utt.push_back(fnt_beam_search(es, *blank, *model.lm, cfg));
        } else if (args.mode == "cfnt") {
            by_utt.push_back(
                    cfnt_beam_search(es, *blank, *model.lm, trie, cfg,
                                     args.uniform_prior ? &prior : nullptr));
        } else if (args.mode == "greedy-fnt") {
            by_utt.push_back({fnt_greedy(es, *blank, *model.lm, cfg.max_symbols_per_frame)});
        } else {
            by_utt.push_back({cfnt_greedy(es, *blank, *model.lm, trie,
                                          args.uniform_prior ? &prior : nullptr,
                                          cfg.max_symbols_per_frame)});
        }
    }

    if (args.out_path.empty()) {
        io::save_hyps("/dev/stdout", by_utt, args.mode, vocab.content_hash());
    } else {
        io::save_hyps(args.out_path, by_utt, args.mode, vocab.content_hash());
    }
    std::cerr << "decoded " << scores.size() << " utterances (" << args.mode << ")\n";
    return 0;
}

struct EvalArgs {
    std::string refs_path, hyps_path, vocab_path, name_list, out_path;
    std::string entity_mode = "spans";
    bool per_utt = false;
};

json report_to_json(const EvalReport& report, bool per_utt) {
    auto entity_json = [](const EntityCounts& e) {
        return json{{"ref_entities", e.ref_entities},
                    {"hyp_entities", e.hyp_entities},
                    {"correct_entities", e.correct},
                    {"recalled_entities", e.recalled},
                    {"entity_precision", e.precision()},
                    {"entity_recall", e.recall()},
                    {"entity_f1", e.f1()},
                    {"degenerate", e.degenerate}};
    };
    auto wer_json = [](const WerCounts& w) {
        return json{{"wer", w.wer()},           {"substitutions", w.substitutions},
                    {"deletions", w.deletions}, {"insertions", w.insertions},
                    {"hits", w.hits},           {"ref_words", w.ref_words}};
    };
    json j = wer_json(report.wer);
    j.update(entity_json(report.entities));
    if (per_utt) {
        json rows = json::array();
        for (const UttBreakdown& u : report.per_utt) {
            json row = wer_json(u.wer);
            row.update(entity_json(u.entities));
            rows.push_back(std::move(row));
        }
        j["per_utt"] = std::move(rows);
    }
    return j;
}

int run_eval(const EvalArgs& args) {
    const Vocabulary vocab = io::load_vocab(args.vocab_path);
    const auto refs = io::load_refs(args.refs_path, vocab);
    const io::HypFile hyps = io::load_hyps(args.hyps_path, vocab.content_hash());
    if (hyps.by_utt.size() != refs.size()) {
        throw std::runtime_error("pairing error: " + std::to_string(refs.size()) +
                                 " references vs " + std::to_string(hyps.by_utt.size()) +
                                 " decoded utterances");
    }

    const EntityMode mode =
            args.entity_mode == "match" ? EntityMode::Match : EntityMode::Spans;
    if (mode == EntityMode::Spans && hyps.mode != "cfnt" && hyps.mode != "greedy-cfnt") {
        throw std::runtime_error("entity mode 'spans' needs cfnt decodes (file has mode '" +
                                 hyps.mode + "')");
    }
    NameList names;
    if (mode == EntityMode::Match) {
        if (args.name_list.empty()) {
            throw std::runtime_error("entity mode 'match' needs --name-list");
        }
        names = io::load_names(args.name_list, vocab);
    }

    std::vector<DecodedUtterance> top1;
    top1.reserve(hyps.by_utt.size());
    for (const auto& nbest : hyps.by_utt) {
        DecodedUtterance d;
        if (!nbest.empty()) {
            d.tokens = nbest.front().tokens;
            d.name_spans = nbest.front().name_spans;
        }
        top1.push_back(std::move(d));
    }

    const EvalReport report = evaluate_corpus(refs, top1, vocab, mode,
                                              names.names.empty() ? nullptr : &names,
                                              args.per_utt);
    const json j = report_to_json(report, args.per_utt);
    if (args.out_path.empty()) {
        std::cout << j.dump(1) << "\n";
    } else {
        std::ofstream out(args.out_path);
        if (!out) throw std::runtime_error("cannot write " + args.out_path);
        out << j.dump(1) << "\n";
    }
    return 0;
}

struct OracleArgs {
    int32_t max_t = 4;
    int32_t max_u = 3;
    int32_t max_v = 4;
    int32_t trials = 500;
    uint64_t seed = 1;
    double tolerance = 1e-10;
    std::string model_path;  // optional: validate loadability before running
};

int run_oracle(const OracleArgs& args) {
    if (args.max_t < 1 || args.max_u < 0 || args.max_v < 1 || args.trials < 1) {
        throw CLI::ValidationError("oracle: sizes and trials must be positive");
    }
    if (args.max_t + args.max_u > 16) {
        throw CLI::ValidationError("oracle: max_t + max_u exceeds the enumeration guard of 16");
    }
    if (!args.model_path.empty()) {
        io::load_model(args.model_path, std::nullopt);
    }
    Rng rng(args.seed);
    double worst = 0.0;
    for (int32_t i = 0; i < args.trials; ++i) {
        RandomInstanceSpec spec;
        spec.T = rng.uniform_int(1, args.max_t);
        spec.U = rng.uniform_int(0, args.max_u);
        spec.V = rng.uniform_int(1, args.max_v);
        const uint64_t trial_seed = args.seed * 1000003 + i;
        const RandomInstance inst = gen_random_instance(trial_seed, spec);
        const BucketBlankScorer blank(&inst.scores);
        const double fwd = forward_logprob(inst.scores, blank, inst.lm, inst.y);
        const double brute = brute_force_logprob(inst.scores, blank, inst.lm, inst.y);
        const double diff = std::abs(fwd - brute);
        worst = std::max(worst, diff);
        if (!(diff <= args.tolerance)) {
            std::cout << "oracle FAIL: trial " << i << " seed " << trial_seed << " T=" << spec.T
                      << " U=" << spec.U << " V=" << spec.V << " |forward-brute|=" << diff
                      << "\n";
            return 1;
        }
    }
    std::cout << "oracle pass: " << args.trials << " trials, max |forward-brute| = " << worst
              << " (tolerance " << args.tolerance << ")\n";
    return 0;
}

struct LossArgs {
    std::string model_path, scores_path, refs_path, vocab_path;
    double lambda_f = 0.1;
};

int run_loss(const LossArgs& args) {
    if (args.lambda_f < 0.0) {
        throw CLI::ValidationError("--lambda-f must be >= 0");
    }
    const Vocabulary vocab = io::load_vocab(args.vocab_path);
    const io::LoadedModel model = io::load_model(args.model_path, vocab.content_hash());
    const auto scores = io::load_scores(args.scores_path, vocab.content_hash());
    const auto refs = io::load_refs(args.refs_path, vocab);
    if (scores.size() != refs.size()) {
        throw std::runtime_error("pairing error: " + std::to_string(refs.size()) +
                                 " references vs " + std::to_string(scores.size()) + " scores");
    }
    LossConfig cfg;
    cfg.lambda_f = args.lambda_f;
    std::cout << "#utt\tj_t\tlm_logprob\tj_f\n";
    for (size_t u = 0; u < refs.size(); ++u) {
        auto blank = io::make_blank_scorer(model.blank, scores[u]);
        const double jt = -forward_logprob(scores[u], *blank, *model.lm, refs[u].tokens);
        const double lm_lp = lm_sequence_logprob(*model.lm, refs[u].tokens);
        const double jf = fnt_loss(scores[u], *blank, *model.lm, refs[u].tokens, cfg);
        std::cout << u << "\t" << jt << "\t" << lm_lp << "\t" << jf << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"toy factorized-transducer decoding with class-based name biasing"};
    app.require_subcommand(1);

    GenArgs gen;
    CLI::App* cmd_gen = app.add_subcommand("gen", "generate a seeded toy instance");
    cmd_gen->add_option("--out", gen.out_dir, "output directory")->required();
    cmd_gen->add_option("--seed", gen.seed, "rng seed");
    cmd_gen->add_option("--v", gen.spec.vocab_size, "surface vocabulary size");
    cmd_gen->add_option("--utts", gen.spec.utterances, "number of utterances");
    cmd_gen->add_option("--names", gen.spec.n_names, "name list size");
    cmd_gen->add_option("--name-len-min", gen.spec.name_len.min, "min tokens per name");
    cmd_gen->add_option("--name-len", gen.spec.name_len.max, "max tokens per name");
    cmd_gen->add_option("--t-min", gen.spec.t_frames.min, "min frames per utterance");
    cmd_gen->add_option("--t-max", gen.spec.t_frames.max, "max frames per utterance");
    cmd_gen->add_option("--u-min", gen.spec.u_tokens.min, "min tokens per utterance");
    cmd_gen->add_option("--u-max", gen.spec.u_tokens.max, "max tokens per utterance");
    cmd_gen->add_option("--class-bias", gen.spec.class_bias,
                        "weight of the tagged stream in the class LM");
    cmd_gen->add_option("--name-prob", gen.spec.name_prob, "per-slot name insertion chance");
    cmd_gen->add_option("--signal", gen.spec.signal, "encoder logit boost at scheduled frames");
    cmd_gen->add_option("--noise", gen.spec.noise, "logit noise sigma");

    DecodeArgs dec;
    CLI::App* cmd_decode = app.add_subcommand("decode", "decode precomputed encoder scores");
    cmd_decode->add_option("--mode", dec.mode, "fnt|cfnt|greedy-fnt|greedy-cfnt")
            ->check(CLI::IsMember({"fnt", "cfnt", "greedy-fnt", "greedy-cfnt"}));
    cmd_decode->add_option("--model", dec.model_path, "model.json")->required();
    cmd_decode->add_option("--scores", dec.scores_path, "scores.jsonl")->required();
    cmd_decode->add_option("--vocab", dec.vocab_path, "vocab.txt")->required();
    cmd_decode->add_option("--out", dec.out_path, "output hyps.jsonl (stdout when omitted)");
    cmd_decode->add_option("--beam", dec.beam, "beam size");
    cmd_decode->add_option("--nbest", dec.nbest, "n-best size (default: beam)");
    cmd_decode->add_option("--max-symbols", dec.max_symbols, "emission cap per frame");
    cmd_decode->add_flag("--dynamic-beam", dec.dynamic_beam,
                         "reserve extra slots for in-class hypotheses");
    cmd_decode->add_option("--name-list", dec.name_list, "names.txt for cfnt modes");
    cmd_decode->add_flag("--empty-name-list", dec.empty_name_list,
                         "run cfnt with an empty name list");
    cmd_decode->add_flag("--uniform-name-prior", dec.uniform_prior,
                         "enable a uniform per-name prior at completion");

    EvalArgs ev;
    CLI::App* cmd_eval = app.add_subcommand("eval", "score decodes against references");
    cmd_eval->add_option("--refs", ev.refs_path, "refs.jsonl")->required();
    cmd_eval->add_option("--hyps", ev.hyps_path, "hyps.jsonl")->required();
    cmd_eval->add_option("--vocab", ev.vocab_path, "vocab.txt")->required();
    cmd_eval->add_option("--name-list", ev.name_list, "names.txt (match mode)");
    cmd_eval->add_option("--entity-mode", ev.entity_mode, "spans|match")
            ->check(CLI::IsMember({"spans", "match"}));
    cmd_eval->add_option("--out", ev.out_path, "report.json (stdout when omitted)");
    cmd_eval->add_flag("--per-utt", ev.per_utt, "include a per-utterance breakdown");

    OracleArgs orc;
    CLI::App* cmd_oracle =
            app.add_subcommand("oracle", "forward vs brute-force lattice equivalence trials");
    cmd_oracle->add_option("--max-t", orc.max_t, "max frames");
    cmd_oracle->add_option("--max-u", orc.max_u, "max labels");
    cmd_oracle->add_option("--max-v", orc.max_v, "max vocabulary size");
    cmd_oracle->add_option("--trials", orc.trials, "number of trials");
    cmd_oracle->add_option("--seed", orc.seed, "rng seed");
    cmd_oracle->add_option("--tolerance", orc.tolerance, "log-domain tolerance");
    cmd_oracle->add_option("--model", orc.model_path, "optional model.json to validate");

    LossArgs loss;
    CLI::App* cmd_loss = app.add_subcommand("loss", "per-utterance transducer and LM losses");
    cmd_loss->add_option("--model", loss.model_path, "model.json")->required();
    cmd_loss->add_option("--scores", loss.scores_path, "scores.jsonl")->required();
    cmd_loss->add_option("--refs", loss.refs_path, "refs.jsonl")->required();
    cmd_loss->add_option("--vocab", loss.vocab_path, "vocab.txt")->required();
    cmd_loss->add_option("--lambda-f", loss.lambda_f, "LM loss weight (>= 0)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the message
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        if (cmd_gen->parsed()) return run_gen(gen);
        if (cmd_decode->parsed()) return run_decode(dec);
        if (cmd_eval->parsed()) return run_eval(ev);
        if (cmd_oracle->parsed()) return run_oracle(orc);
        if (cmd_loss->parsed()) return run_loss(loss);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
