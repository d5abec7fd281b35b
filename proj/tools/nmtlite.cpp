// SPDX-License-Identifier: Apache-2.0
//
// nmtlite — the whole pipeline as one binary:
//   synth-data     generate the bundled toy translation task
//   train-bpe      learn a subword model from raw text
//   pretrain-lm    left-to-right LM pretraining for one side
//   estimate-fisher  diagonal Fisher of an LM on held-out text
//   finetune       train / fine-tune the translator (reg: none|ewc|lm-objective)
//   translate      beam-search decode a file of sentences
//   evaluate       corpus BLEU of hypotheses against references
//   average        parameter-average checkpoints
//   exp-depth-sweep    encoder-transfer-depth experiment (CSV)
//   exp-convergence    reg-mode convergence comparison (CSV)

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nmt/beam.hpp"
#include "nmt/bleu.hpp"
#include "nmt/bpe.hpp"
#include "nmt/checkpoint.hpp"
#include "nmt/data.hpp"
#include "nmt/errors.hpp"
#include "nmt/eval.hpp"
#include "nmt/ewc.hpp"
#include "nmt/io.hpp"
#include "nmt/runconfig.hpp"
#include "nmt/synth.hpp"
#include "nmt/train.hpp"

using namespace nmt;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    auto in = io::open_input(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::string body;
    for (const auto& l : lines) {
        body += l;
        body += '\n';
    }
    io::atomic_write_file(path, body);
}

void bind_vocab(int64_t& cfg_vocab, const BpeModel& model, const char* key) {
    int64_t v = model.vocab_size();
    if (cfg_vocab == 0)
        cfg_vocab = v;
    else if (cfg_vocab != v)
        throw ConfigError(std::string("model.") + key + " = " + std::to_string(cfg_vocab) +
                          " disagrees with the BPE model (" + std::to_string(v) + ")");
}

std::string require_path(const std::string& value, const char* key) {
    if (value.empty()) throw ConfigError(std::string("config key '") + key + "' is required here");
    return value;
}

double wall_now() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

std::string csv_num(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

// ---- finetune (shared by the experiment harnesses) -------------------------

struct FinetuneOverrides {
    std::optional<uint64_t> seed;
    std::optional<std::string> reg_mode;
};

struct FinetuneOutcome {
    TrainResult result;
    ModelConfig model;
    RunConfig resolved;
};

int64_t resolve_lm_layers(const std::string& dir, int64_t requested) {
    CheckpointMeta meta = load_checkpoint_meta(dir);
    if (meta.kind != "lm-src" && meta.kind != "lm-tgt")
        throw ConfigError("checkpoint " + dir + " has kind '" + meta.kind + "', expected a pretrained LM");
    return requested > 0 ? requested : meta.lm_layers;
}

// fisher artifacts cover the whole LM; the penalty anchors only the
// transferred subset, so restrict the map to the anchor's keys
FisherMap fisher_for_anchor(const std::string& dir, const AnchorParams& anchor) {
    ParameterStore full = load_checkpoint_params(dir);
    CheckpointMeta meta = load_checkpoint_meta(dir);
    if (meta.kind != "fisher")
        throw ConfigError("checkpoint " + dir + " has kind '" + meta.kind + "', expected a fisher map");
    FisherMap out;
    for (const auto& [name, value] : anchor.values) {
        auto it = full.find(name);
        if (it == full.end())
            throw ContractError("fisher map " + dir + " lacks an entry for transferred parameter " + name);
        out.emplace(name, it->second);
    }
    return out;
}

RegMode build_reg_mode(const RunConfig& rc, const TransferResult& transfer, const BpeModel& bpe_src,
                       const BpeModel& bpe_tgt) {
    RegMode reg;
    if (rc.reg.mode == "none") {
        reg.kind = RegKind::none;
        return reg;
    }
    if (rc.reg.mode == "ewc") {
        reg.kind = RegKind::ewc;
        if (rc.reg.lambda_src > 0.0) {
            if (transfer.src_anchor.values.empty())
                throw ConfigError("reg.lambda_src > 0 needs transfer.src_lm so there is something to anchor");
            EwcSideTerm term;
            term.lambda = static_cast<float>(rc.reg.lambda_src);
            term.anchor = transfer.src_anchor;
            term.fisher = fisher_for_anchor(require_path(rc.reg.fisher_src, "reg.fisher_src"), term.anchor);
            reg.ewc_src = std::move(term);
        }
        if (rc.reg.lambda_tgt > 0.0) {
            if (transfer.tgt_anchor.values.empty())
                throw ConfigError("reg.lambda_tgt > 0 needs transfer.tgt_lm so there is something to anchor");
            EwcSideTerm term;
            term.lambda = static_cast<float>(rc.reg.lambda_tgt);
            term.anchor = transfer.tgt_anchor;
            term.fisher = fisher_for_anchor(require_path(rc.reg.fisher_tgt, "reg.fisher_tgt"), term.anchor);
            reg.ewc_tgt = std::move(term);
        }
        if (!reg.ewc_src && !reg.ewc_tgt)
            throw ConfigError("reg.mode = ewc needs lambda_src or lambda_tgt > 0 plus the matching fisher map");
        return reg;
    }
    // lm_objective: the one mode that reads monolingual text at fine-tuning time
    reg.kind = RegKind::lm_objective;
    reg.lm_weight = static_cast<float>(rc.reg.lm_weight);
    reg.mono_src = load_mono_corpus(require_path(rc.data.mono_src, "data.mono_src"), bpe_src);
    reg.mono_tgt = load_mono_corpus(require_path(rc.data.mono_tgt, "data.mono_tgt"), bpe_tgt);
    return reg;
}

FinetuneOutcome run_finetune(RunConfig rc, const std::string& out_dir, const FinetuneOverrides& ov) {
    if (ov.seed) rc.training.seed = *ov.seed;
    if (ov.reg_mode) rc.reg.mode = *ov.reg_mode;
    rc.validate();

    BpeModel bpe_src = load_bpe(require_path(rc.data.bpe_src, "data.bpe_src"));
    BpeModel bpe_tgt = load_bpe(require_path(rc.data.bpe_tgt, "data.bpe_tgt"));
    bind_vocab(rc.model.src_vocab, bpe_src, "src_vocab");
    bind_vocab(rc.model.tgt_vocab, bpe_tgt, "tgt_vocab");
    rc.model.validate();

    auto train = load_parallel_corpus(require_path(rc.data.train_src, "data.train_src"),
                                      require_path(rc.data.train_tgt, "data.train_tgt"), bpe_src, bpe_tgt);
    auto dev = load_parallel_corpus(require_path(rc.data.dev_src, "data.dev_src"),
                                    require_path(rc.data.dev_tgt, "data.dev_tgt"), bpe_src, bpe_tgt);

    TransferPlan plan;
    plan.fresh_seed = rc.transfer.fresh_seed;
    if (!rc.transfer.src_lm.empty())
        plan.src_lm = TransferSide{rc.transfer.src_lm, resolve_lm_layers(rc.transfer.src_lm, rc.transfer.src_layers)};
    if (!rc.transfer.tgt_lm.empty())
        plan.tgt_lm = TransferSide{rc.transfer.tgt_lm, resolve_lm_layers(rc.transfer.tgt_lm, rc.transfer.tgt_layers)};
    TransferResult transfer = transfer_init(rc.model, plan);

    RegMode reg = build_reg_mode(rc, transfer, bpe_src, bpe_tgt);

    TrainSettings st;
    st.optim = rc.optimizer;
    st.max_steps = rc.training.max_steps;
    st.eval_every = rc.training.eval_every;
    st.keep_best = rc.training.keep_best;
    st.token_budget = rc.training.token_budget;
    st.dropout = rc.model.dropout;
    st.seed = rc.training.seed;
    st.out_dir = out_dir;

    write_resolved_config(rc, out_dir);
    FinetuneOutcome out{train_translator(rc.model, std::move(transfer.params), reg, train, dev, st), rc.model, rc};
    return out;
}

std::vector<std::string> decode_corpus(const ParameterStore& params, const ModelConfig& cfg, const BpeModel& bpe_src,
                                       const BpeModel& bpe_tgt, const std::vector<std::string>& src_lines,
                                       int64_t beam, double alpha, int64_t max_len) {
    std::vector<std::string> out;
    for (const auto& line : src_lines) {
        std::vector<int32_t> ids = encode_line(bpe_src, line);
        BeamHypothesis hyp = beam_search(params, cfg, ids, beam, alpha, max_len);
        out.push_back(decode_ids(bpe_tgt, hyp.tokens));
    }
    return out;
}

// ---- subcommand runners -----------------------------------------------------

struct SynthArgs {
    std::string out_dir;
    SynthSpec spec;
};

void cmd_synth_data(const SynthArgs& a) {
    write_synth_task(a.out_dir, a.spec);
    std::cout << "wrote synthetic task to " << a.out_dir << "\n";
}

struct TrainBpeArgs {
    std::string input, output;
    int64_t vocab_size = 500;
};

void cmd_train_bpe(const TrainBpeArgs& a) {
    auto lines = read_lines(a.input);
    BpeModel model = train_bpe(lines, static_cast<int32_t>(a.vocab_size));
    save_bpe(model, a.output);
    std::cout << "wrote " << a.output << " (vocab " << model.vocab_size() << ")\n";
}

struct PretrainArgs {
    std::string config, out_dir, side;
    int64_t layers = 0;
    std::optional<uint64_t> seed;
};

void cmd_pretrain_lm(const PretrainArgs& a) {
    RunConfig rc = load_run_config(a.config);
    if (a.seed) rc.training.seed = *a.seed;
    if (a.layers < 1) throw ConfigError("--layers must be at least 1");
    Side side = a.side == "src" ? Side::src : Side::tgt;

    BpeModel bpe_src = load_bpe(require_path(rc.data.bpe_src, "data.bpe_src"));
    BpeModel bpe_tgt = load_bpe(require_path(rc.data.bpe_tgt, "data.bpe_tgt"));
    bind_vocab(rc.model.src_vocab, bpe_src, "src_vocab");
    bind_vocab(rc.model.tgt_vocab, bpe_tgt, "tgt_vocab");
    rc.model.validate();

    const BpeModel& bpe = side == Side::src ? bpe_src : bpe_tgt;
    const std::string& mono = side == Side::src ? rc.data.mono_src : rc.data.mono_tgt;
    const std::string& mono_dev = side == Side::src ? rc.data.mono_dev_src : rc.data.mono_dev_tgt;
    auto train = load_mono_corpus(require_path(mono, side == Side::src ? "data.mono_src" : "data.mono_tgt"), bpe);
    auto dev = load_mono_corpus(
        require_path(mono_dev, side == Side::src ? "data.mono_dev_src" : "data.mono_dev_tgt"), bpe);

    TrainSettings st;
    st.optim = rc.optimizer;
    st.max_steps = rc.training.max_steps;
    st.eval_every = rc.training.eval_every;
    st.keep_best = rc.training.keep_best;
    st.token_budget = rc.training.token_budget;
    st.dropout = rc.model.dropout;
    st.seed = rc.training.seed;
    st.out_dir = a.out_dir;

    write_resolved_config(rc, a.out_dir);
    TrainResult res = train_lm(rc.model, side, a.layers, train, dev, st);
    std::cout << "best dev perplexity " << csv_num(res.best_dev_perplexity, 4) << " at step " << res.best_step
              << "\nbest checkpoint " << res.best_checkpoint_dir << "\n";
}

struct FisherArgs {
    std::string checkpoint, bpe, data, output;
    int64_t max_examples = 0;
};

void cmd_estimate_fisher(const FisherArgs& a) {
    CheckpointMeta meta = load_checkpoint_meta(a.checkpoint);
    if (meta.kind != "lm-src" && meta.kind != "lm-tgt")
        throw ConfigError("checkpoint " + a.checkpoint + " has kind '" + meta.kind + "', expected a pretrained LM");
    Side side = meta.kind == "lm-src" ? Side::src : Side::tgt;
    ParameterStore params = load_checkpoint_params(a.checkpoint);

    BpeModel bpe = load_bpe(a.bpe);
    int64_t expect = side == Side::src ? meta.config.src_vocab : meta.config.tgt_vocab;
    if (bpe.vocab_size() != expect)
        throw ConfigError("BPE vocab " + std::to_string(bpe.vocab_size()) + " does not match the checkpoint (" +
                          std::to_string(expect) + ")");

    auto held_out = load_mono_corpus(a.data, bpe);
    if (a.max_examples > 0 && static_cast<int64_t>(held_out.size()) > a.max_examples)
        held_out.resize(static_cast<size_t>(a.max_examples));

    FisherMap fisher = estimate_fisher_lm(params, meta.config, side, held_out);

    CheckpointMeta out_meta;
    out_meta.kind = "fisher";
    out_meta.config = meta.config;
    out_meta.step = meta.step;
    out_meta.seed = meta.seed;
    out_meta.lm_layers = meta.lm_layers;
    out_meta.extra["source_checkpoint"] = a.checkpoint;
    out_meta.extra["source_kind"] = meta.kind;
    out_meta.extra["examples"] = static_cast<int64_t>(held_out.size());
    save_checkpoint(a.output, fisher, out_meta);
    std::cout << "wrote fisher map for " << fisher.size() << " parameters to " << a.output << "\n";
}

struct FinetuneArgs {
    std::string config, out_dir, reg, io_audit;
    std::optional<uint64_t> seed;
};

void cmd_finetune(const FinetuneArgs& a) {
    FinetuneOverrides ov;
    ov.seed = a.seed;
    if (!a.reg.empty()) ov.reg_mode = a.reg == "lm-objective" ? std::string("lm_objective") : a.reg;
    FinetuneOutcome out = run_finetune(load_run_config(a.config), a.out_dir, ov);
    std::cout << "best dev perplexity " << csv_num(out.result.best_dev_perplexity, 4) << " at step "
              << out.result.best_step << "\nfinal dev perplexity " << csv_num(out.result.final_dev_perplexity, 4)
              << "\nbest checkpoint " << out.result.best_checkpoint_dir << "\n";
    if (!a.io_audit.empty()) write_lines(a.io_audit, io::read_audit_log());
}

struct TranslateArgs {
    std::string checkpoint, bpe_src, bpe_tgt, input, output;
    int64_t beam = 4;
    double alpha = 1.0;
    int64_t max_len = 0;
};

void cmd_translate(const TranslateArgs& a) {
    CheckpointMeta meta = load_checkpoint_meta(a.checkpoint);
    if (meta.kind != "nmt" && meta.kind != "average")
        throw ConfigError("checkpoint " + a.checkpoint + " has kind '" + meta.kind + "', expected a translator");
    ParameterStore params = load_checkpoint_params(a.checkpoint);
    BpeModel bpe_src = load_bpe(a.bpe_src);
    BpeModel bpe_tgt = load_bpe(a.bpe_tgt);
    auto lines = read_lines(a.input);
    auto hyps = decode_corpus(params, meta.config, bpe_src, bpe_tgt, lines, a.beam, a.alpha, a.max_len);
    write_lines(a.output, hyps);
    std::cout << "wrote " << hyps.size() << " hypotheses to " << a.output << "\n";
}

struct EvaluateArgs {
    std::string hyp, ref;
    bool breakdown = false;
    bool smooth = false;
};

void cmd_evaluate(const EvaluateArgs& a) {
    auto hyps = read_lines(a.hyp);
    auto refs = read_lines(a.ref);
    BleuBreakdown b = bleu_breakdown(hyps, refs, a.smooth);
    std::printf("BLEU = %.2f\n", b.bleu);
    if (a.breakdown) {
        for (int n = 0; n < 4; ++n)
            std::printf("p%d = %.4f (%" PRId64 "/%" PRId64 ")\n", n + 1, b.precisions[n], b.matched[n], b.total[n]);
        std::printf("BP = %.4f (hyp %" PRId64 ", ref %" PRId64 ")\n", b.brevity_penalty, b.hyp_tokens, b.ref_tokens);
    }
}

struct AverageArgs {
    std::vector<std::string> inputs;
    std::string output;
};

void cmd_average(const AverageArgs& a) {
    average_checkpoints(a.inputs, a.output);
    std::cout << "averaged " << a.inputs.size() << " checkpoints into " << a.output << "\n";
}

struct DepthSweepArgs {
    std::string config, out_dir;
    std::vector<std::string> lms, fishers;
    int64_t beam = 4;
    double alpha = 1.0;
};

// one row of the sweep: fine-tune, decode the test set with the best
// checkpoint, score; depth 0 = no-pretraining baseline
std::string sweep_row(const RunConfig& base, const std::string& out_dir, int64_t depth, const std::string& lm,
                      const std::string& fisher, int64_t beam, double alpha) {
    RunConfig rc = base;
    rc.transfer.src_lm = lm;
    rc.transfer.tgt_lm.clear();
    rc.reg.fisher_src = fisher;
    rc.reg.fisher_tgt.clear();
    rc.reg.lambda_tgt = 0.0;
    rc.reg.mode = lm.empty() ? "none" : "ewc";
    if (lm.empty()) rc.reg.lambda_src = 0.0;

    double t0 = wall_now();
    FinetuneOutcome out = run_finetune(rc, out_dir, {});
    double wall = wall_now() - t0;

    BpeModel bpe_src = load_bpe(rc.data.bpe_src);
    BpeModel bpe_tgt = load_bpe(rc.data.bpe_tgt);
    const std::string& eval_src = rc.data.test_src.empty() ? rc.data.dev_src : rc.data.test_src;
    const std::string& eval_tgt = rc.data.test_tgt.empty() ? rc.data.dev_tgt : rc.data.test_tgt;
    ParameterStore best = load_checkpoint_params(out.result.best_checkpoint_dir);
    auto src_lines = read_lines(eval_src);
    auto refs = read_lines(eval_tgt);
    auto hyps = decode_corpus(best, out.model, bpe_src, bpe_tgt, src_lines, beam, alpha, 0);
    double score = bleu(hyps, refs);

    return std::to_string(depth) + "," + csv_num(out.result.best_dev_perplexity, 6) + "," + csv_num(score, 4) +
           "," + csv_num(wall, 3);
}

void cmd_exp_depth_sweep(const DepthSweepArgs& a) {
    if (a.lms.size() != a.fishers.size())
        throw ConfigError("--lm-src and --fisher-src must be given the same number of times");
    RunConfig base = load_run_config(a.config);
    if (!a.lms.empty() && base.reg.lambda_src <= 0.0)
        throw ConfigError("depth sweep needs reg.lambda_src > 0 for its EWC rows");

    std::string csv = "depth,best_dev_perplexity,bleu,wall_seconds\n";
    io::ensure_dir(a.out_dir);
    csv += sweep_row(base, a.out_dir + "/baseline", 0, "", "", a.beam, a.alpha) + "\n";
    for (size_t i = 0; i < a.lms.size(); ++i) {
        int64_t depth = 0;
        try {
            depth = load_checkpoint_meta(a.lms[i]).lm_layers;
        } catch (const Error& e) {
            std::cerr << "warning: skipping " << a.lms[i] << ": " << e.what() << "\n";
            csv += "-1,nan,nan,0.000\n";
            continue;
        }
        csv += sweep_row(base, a.out_dir + "/depth-" + std::to_string(depth), depth, a.lms[i], a.fishers[i],
                         a.beam, a.alpha) +
               "\n";
    }
    io::atomic_write_file(a.out_dir + "/depth-sweep.csv", csv);
    std::cout << csv;
}

struct ConvergenceArgs {
    std::string config, out_dir;
};

void cmd_exp_convergence(const ConvergenceArgs& a) {
    RunConfig base = load_run_config(a.config);
    std::string csv = "mode,step,examples_seen,wall_seconds,dev_perplexity,mean_step_ms\n";
    io::ensure_dir(a.out_dir);
    for (const std::string mode : {"none", "ewc", "lm_objective"}) {
        RunConfig rc = base;
        rc.reg.mode = mode;
        FinetuneOutcome out = run_finetune(rc, a.out_dir + "/" + mode, {});
        for (const EvalPoint& p : out.result.evals)
            csv += mode + "," + std::to_string(p.step) + "," + std::to_string(p.examples_seen) + "," +
                   csv_num(p.wall_seconds, 3) + "," + csv_num(p.dev_perplexity, 6) + "," +
                   csv_num(p.mean_step_ms, 3) + "\n";
    }
    io::atomic_write_file(a.out_dir + "/convergence.csv", csv);
    std::cout << csv;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nmtlite — transformer NMT with LM transfer and elastic weight consolidation"};
    app.require_subcommand(1);

    auto synth = std::make_shared<SynthArgs>();
    auto* c0 = app.add_subcommand("synth-data", "generate the bundled synthetic translation task");
    c0->add_option("--out-dir", synth->out_dir)->required();
    c0->add_option("--seed", synth->spec.seed);
    c0->add_option("--word-types", synth->spec.word_types);
    c0->add_option("--mono-lines", synth->spec.mono_lines);
    c0->add_option("--mono-dev-lines", synth->spec.mono_dev_lines);
    c0->add_option("--train-pairs", synth->spec.train_pairs);
    c0->add_option("--dev-pairs", synth->spec.dev_pairs);
    c0->add_option("--test-pairs", synth->spec.test_pairs);
    c0->add_option("--min-len", synth->spec.min_len);
    c0->add_option("--max-len", synth->spec.max_len);
    c0->callback([synth] { cmd_synth_data(*synth); });

    auto tb = std::make_shared<TrainBpeArgs>();
    auto* c1 = app.add_subcommand("train-bpe", "learn a BPE subword model");
    c1->add_option("--input", tb->input)->required();
    c1->add_option("--vocab-size", tb->vocab_size)->required();
    c1->add_option("--output", tb->output)->required();
    c1->callback([tb] { cmd_train_bpe(*tb); });

    auto pl = std::make_shared<PretrainArgs>();
    auto* c2 = app.add_subcommand("pretrain-lm", "pretrain a left-to-right LM for one side");
    c2->add_option("--config", pl->config)->required();
    c2->add_option("--side", pl->side)->required()->check(CLI::IsMember({"src", "tgt"}));
    c2->add_option("--layers", pl->layers)->required();
    c2->add_option("--out-dir", pl->out_dir)->required();
    c2->add_option_function<uint64_t>("--seed", [pl](uint64_t s) { pl->seed = s; });
    c2->callback([pl] { cmd_pretrain_lm(*pl); });

    auto fi = std::make_shared<FisherArgs>();
    auto* c3 = app.add_subcommand("estimate-fisher", "diagonal empirical Fisher of an LM");
    c3->add_option("--checkpoint", fi->checkpoint)->required();
    c3->add_option("--bpe", fi->bpe)->required();
    c3->add_option("--data", fi->data)->required();
    c3->add_option("--output", fi->output)->required();
    c3->add_option("--max-examples", fi->max_examples);
    c3->callback([fi] { cmd_estimate_fisher(*fi); });

    auto ft = std::make_shared<FinetuneArgs>();
    auto* c4 = app.add_subcommand("finetune", "train or fine-tune the translator");
    c4->add_option("--config", ft->config)->required();
    c4->add_option("--out-dir", ft->out_dir)->required();
    c4->add_option("--reg", ft->reg)->check(CLI::IsMember({"none", "ewc", "lm-objective", "lm_objective"}));
    c4->add_option("--io-audit", ft->io_audit);
    c4->add_option_function<uint64_t>("--seed", [ft](uint64_t s) { ft->seed = s; });
    c4->callback([ft] { cmd_finetune(*ft); });

    auto tr = std::make_shared<TranslateArgs>();
    auto* c5 = app.add_subcommand("translate", "beam-search decode a file");
    c5->add_option("--checkpoint", tr->checkpoint)->required();
    c5->add_option("--bpe-src", tr->bpe_src)->required();
    c5->add_option("--bpe-tgt", tr->bpe_tgt)->required();
    c5->add_option("--input", tr->input)->required();
    c5->add_option("--output", tr->output)->required();
    c5->add_option("--beam", tr->beam);
    c5->add_option("--alpha", tr->alpha);
    c5->add_option("--max-len", tr->max_len);
    c5->callback([tr] { cmd_translate(*tr); });

    auto ev = std::make_shared<EvaluateArgs>();
    auto* c6 = app.add_subcommand("evaluate", "corpus BLEU");
    c6->add_option("--hyp", ev->hyp)->required();
    c6->add_option("--ref", ev->ref)->required();
    c6->add_flag("--breakdown", ev->breakdown);
    c6->add_flag("--smooth", ev->smooth);
    c6->callback([ev] { cmd_evaluate(*ev); });

    auto av = std::make_shared<AverageArgs>();
    auto* c7 = app.add_subcommand("average", "parameter-average checkpoints");
    c7->add_option("--inputs", av->inputs)->required()->expected(-1);
    c7->add_option("--output", av->output)->required();
    c7->callback([av] { cmd_average(*av); });

    auto ds = std::make_shared<DepthSweepArgs>();
    auto* c8 = app.add_subcommand("exp-depth-sweep", "encoder transfer-depth experiment");
    c8->add_option("--config", ds->config)->required();
    c8->add_option("--out-dir", ds->out_dir)->required();
    c8->add_option("--lm-src", ds->lms)->expected(-1);
    c8->add_option("--fisher-src", ds->fishers)->expected(-1);
    c8->add_option("--beam", ds->beam);
    c8->add_option("--alpha", ds->alpha);
    c8->callback([ds] { cmd_exp_depth_sweep(*ds); });

    auto cv = std::make_shared<ConvergenceArgs>();
    auto* c9 = app.add_subcommand("exp-convergence", "reg-mode convergence comparison");
    c9->add_option("--config", cv->config)->required();
    c9->add_option("--out-dir", cv->out_dir)->required();
    c9->callback([cv] { cmd_exp_convergence(*cv); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
