// SPDX-License-Identifier: Apache-2.0
#include "nmt/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "nmt/checkpoint.hpp"
#include "nmt/errors.hpp"
#include "nmt/eval.hpp"
#include "nmt/io.hpp"

namespace nmt {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

// distinct rng streams per purpose, so adding a consumer never shifts another
constexpr uint64_t kStreamDropout = 0xD80;
constexpr uint64_t kStreamBatches = 0xBA7;
constexpr uint64_t kStreamMonoSrc = 0x305;
constexpr uint64_t kStreamMonoTgt = 0x316;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string step_dir_name(int64_t step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "step-%06lld", static_cast<long long>(step));
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// ---- transfer ---------------------------------------------------------------

struct SideNames {
    const char* kind;  // expected checkpoint kind
    const char* stack; // parameter prefix of the matching stack
    std::vector<std::string> embeds;
};

SideNames side_names(Side side, const ModelConfig& cfg) {
    if (side == Side::src) return {"lm-src", "enc", {"src_embed"}};
    SideNames n{"lm-tgt", "dec", {"tgt_embed", "tgt_out_bias"}};
    if (!cfg.tie_tgt_embeddings) n.embeds.push_back("tgt_out_weight");
    return n;
}

void check_lm_compatible(Side side, const TransferSide& ts, const CheckpointMeta& meta, const ModelConfig& cfg) {
    const SideNames names = side_names(side, cfg);
    std::vector<std::string> bad;
    if (meta.kind != names.kind)
        bad.push_back("kind is '" + meta.kind + "', expected '" + names.kind + "'");
    if (meta.config.model_dim != cfg.model_dim) bad.push_back("model_dim");
    if (meta.config.ff_dim != cfg.ff_dim) bad.push_back("ff_dim");
    if (meta.config.heads != cfg.heads) bad.push_back("heads");
    if (side == Side::src && meta.config.src_vocab != cfg.src_vocab) bad.push_back("src_vocab");
    if (side == Side::tgt && meta.config.tgt_vocab != cfg.tgt_vocab) bad.push_back("tgt_vocab");
    if (side == Side::tgt && meta.config.tie_tgt_embeddings != cfg.tie_tgt_embeddings)
        bad.push_back("tie_tgt_embeddings");
    if (ts.layers < 0) bad.push_back("negative layer count");
    if (ts.layers > meta.lm_layers)
        bad.push_back("layers-to-transfer " + std::to_string(ts.layers) + " exceeds LM depth " +
                      std::to_string(meta.lm_layers));
    int64_t stack_depth = side == Side::src ? cfg.enc_layers : cfg.dec_layers;
    if (ts.layers > stack_depth)
        bad.push_back("layers-to-transfer " + std::to_string(ts.layers) + " exceeds stack depth " +
                      std::to_string(stack_depth));
    if (bad.empty()) return;
    std::string msg = "LM checkpoint " + ts.checkpoint_dir + " is incompatible with the translator config:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ContractError(msg);
}

AnchorParams transfer_side(ParameterStore& params, const ModelConfig& cfg, Side side, const TransferSide& ts) {
    CheckpointMeta meta = load_checkpoint_meta(ts.checkpoint_dir);
    check_lm_compatible(side, ts, meta, cfg);
    ParameterStore lm = load_checkpoint_params(ts.checkpoint_dir);
    const SideNames names = side_names(side, cfg);

    std::vector<std::string> wanted = names.embeds;
    for (int64_t i = 0; i < ts.layers; ++i) {
        std::string prefix = std::string(names.stack) + "." + std::to_string(i) + ".";
        for (const auto& [name, t] : lm)
            if (name.rfind(prefix, 0) == 0) wanted.push_back(name);
    }

    AnchorParams anchor;
    for (const auto& name : wanted) {
        auto src = lm.find(name);
        if (src == lm.end())
            throw ContractError("LM checkpoint " + ts.checkpoint_dir + " is missing parameter " + name);
        auto dst = params.find(name);
        if (dst == params.end()) continue; // pretraining-only parameter (the LM's own head bias)
        if (!dst->second.same_shape(src->second))
            throw ContractError("parameter " + name + " has shape " + shape_str(src->second.shape) +
                                " in the LM checkpoint but " + shape_str(dst->second.shape) +
                                " in the translator");
        dst->second.data = src->second.data;
        anchor.values.emplace(name, src->second);
    }
    return anchor;
}

// ---- shared training loop -----------------------------------------------------

struct LoopCallbacks {
    std::function<std::vector<Batch>(int64_t epoch)> epoch_batches;
    std::function<Graph::Id(Graph&, const IdMap<float>&, const Batch&, const ForwardOptions&)> loss;
    std::function<double(const ParameterStore&)> dev_perplexity;
    std::function<CheckpointMeta(int64_t step)> make_meta;
};

void check_settings(const TrainSettings& s) {
    s.optim.validate();
    if (s.max_steps < 1) throw ConfigError("training needs at least one step");
    if (s.eval_every < 1) throw ConfigError("eval cadence must be at least 1");
    if (s.keep_best < 1) throw ConfigError("k-best tracking needs k >= 1");
    if (s.token_budget < 1) throw ConfigError("token budget must be positive");
    if (!(s.dropout >= 0.0f && s.dropout < 1.0f)) throw ConfigError("dropout must lie in [0, 1)");
    if (s.out_dir.empty()) throw ConfigError("training needs an output directory");
}

TrainResult run_loop(ParameterStore params, const TrainSettings& s, const LoopCallbacks& cb,
                     const std::string& mode_label) {
    check_settings(s);
    std::string ckpt_root = s.out_dir + "/checkpoints";
    io::ensure_dir(ckpt_root);
    io::ensure_dir(s.out_dir + "/logs");
    std::ofstream log(s.out_dir + "/logs/steps.csv", std::ios::trunc);
    if (!log) throw IoError("cannot write step log under " + s.out_dir);
    log << "step,wall_seconds,examples_seen,train_loss,dev_perplexity,mode\n";

    OptimizerState opt_state = make_optimizer_state(params);
    Rng dropout_rng(mix_seed(s.seed, kStreamDropout));

    int64_t epoch = 0;
    std::vector<Batch> batches = cb.epoch_batches(epoch);
    if (batches.empty()) throw DataError("training corpus produced no batches");
    size_t batch_idx = 0;

    TrainResult result;
    std::vector<std::pair<double, int64_t>> ranked; // (dev ppl, step)
    int64_t examples_seen = 0;
    double step_time = 0.0;
    auto run_start = Clock::now();

    for (int64_t step = 1; step <= s.max_steps; ++step) {
        if (batch_idx == batches.size()) {
            batches = cb.epoch_batches(++epoch);
            batch_idx = 0;
        }
        const Batch& batch = batches[batch_idx++];

        auto t0 = Clock::now();
        Graph g;
        IdMap<float> bound = bind_parameters(g, params, true);
        ForwardOptions fopt{s.dropout, &dropout_rng};
        Graph::Id loss = cb.loss(g, bound, batch, fopt);
        float loss_value = g.value(loss).data[0];
        if (!std::isfinite(loss_value))
            throw NumericError("training diverged: non-finite loss at step " + std::to_string(step));
        g.backward(loss);
        GradientMap grads;
        for (const auto& [name, id] : bound)
            if (g.has_grad(id)) grads.emplace(name, g.grad(id));
        adam_step(params, grads, opt_state, s.optim);
        step_time += seconds_since(t0);
        examples_seen += batch.rows;

        bool eval_now = step % s.eval_every == 0 || step == s.max_steps;
        double ppl = 0.0;
        if (eval_now) {
            ppl = cb.dev_perplexity(params);
            CheckpointMeta meta = cb.make_meta(step);
            meta.extra["dev_perplexity"] = ppl;
            meta.extra["examples_seen"] = examples_seen;
            save_checkpoint(ckpt_root + "/" + step_dir_name(step), params, meta);
            result.evals.push_back({step, examples_seen, seconds_since(run_start), ppl,
                                    step_time * 1000.0 / static_cast<double>(step)});
            ranked.emplace_back(ppl, step);
        }

        log << step << ',' << fixed(seconds_since(run_start), 3) << ',' << examples_seen << ','
            << fixed(loss_value, 6) << ',' << (eval_now ? fixed(ppl, 6) : std::string()) << ',' << mode_label
            << '\n';
    }
    log.close();

    std::sort(ranked.begin(), ranked.end()); // ppl asc, then earlier step
    result.best_dev_perplexity = ranked.front().first;
    result.best_step = ranked.front().second;
    result.best_checkpoint_dir = ckpt_root + "/" + step_dir_name(result.best_step);
    for (size_t i = 0; i < ranked.size() && i < static_cast<size_t>(s.keep_best); ++i)
        result.k_best_dirs.push_back(ckpt_root + "/" + step_dir_name(ranked[i].second));
    result.final_dev_perplexity = result.evals.back().dev_perplexity;
    result.mean_step_ms = step_time * 1000.0 / static_cast<double>(s.max_steps);
    result.params = std::move(params);

    json best{{"best_step", result.best_step},
              {"dev_perplexity", result.best_dev_perplexity},
              {"k_best", json::array()}};
    for (const auto& d : result.k_best_dirs) best["k_best"].push_back(d.substr(ckpt_root.size() + 1));
    io::atomic_write_file(ckpt_root + "/BEST", best.dump(2) + "\n");
    return result;
}

// cycling monolingual batch source for the lm_objective baseline
struct MonoStream {
    const std::vector<MonoExample>& corpus;
    BatchSide side;
    uint64_t seed;
    int64_t epoch = 0;
    std::vector<Batch> batches;
    size_t idx = 0;

    MonoStream(const std::vector<MonoExample>& c, BatchSide bs, uint64_t sd) : corpus(c), side(bs), seed(sd) {}

    const Batch& next(int64_t budget) {
        if (idx == batches.size()) {
            batches = make_batches(corpus, side, budget, kDefaultBucketWidth, mix_seed(seed, epoch++));
            if (batches.empty()) throw DataError("monolingual corpus produced no batches");
            idx = 0;
        }
        return batches[idx++];
    }
};

} // namespace

// ---- transfer ---------------------------------------------------------------

TransferResult transfer_init(const ModelConfig& cfg, const TransferPlan& plan) {
    cfg.validate();
    TransferResult out;
    out.params = init_parameters(cfg, plan.fresh_seed);
    if (plan.src_lm) out.src_anchor = transfer_side(out.params, cfg, Side::src, *plan.src_lm);
    if (plan.tgt_lm) out.tgt_anchor = transfer_side(out.params, cfg, Side::tgt, *plan.tgt_lm);
    return out;
}

// ---- regularization ------------------------------------------------------------

void RegMode::validate() const {
    switch (kind) {
    case RegKind::none:
        return;
    case RegKind::ewc:
        if (!ewc_src && !ewc_tgt) throw ConfigError("ewc mode needs a fisher/anchor pair for at least one side");
        if (ewc_src) validate_anchor_fisher(ewc_src->anchor, ewc_src->fisher);
        if (ewc_tgt) validate_anchor_fisher(ewc_tgt->anchor, ewc_tgt->fisher);
        return;
    case RegKind::lm_objective:
        if (mono_src.empty() && mono_tgt.empty())
            throw ConfigError("lm_objective mode needs a monolingual corpus for at least one side");
        if (!(lm_weight > 0)) throw ConfigError("lm_objective weight must be positive");
        return;
    }
    throw ContractError("unknown regularization kind");
}

const char* RegMode::label() const {
    switch (kind) {
    case RegKind::none: return "none";
    case RegKind::ewc: return "ewc";
    case RegKind::lm_objective: return "lm_objective";
    }
    return "?";
}

Graph::Id total_loss_node(Graph& g, const IdMap<float>& bound, const ModelConfig& cfg, const Batch& parallel,
                          const Batch* mono_src, const Batch* mono_tgt, const RegMode& reg,
                          const ForwardOptions& opt) {
    Graph::Id total = mt_loss_node(g, bound, cfg, parallel, opt);
    switch (reg.kind) {
    case RegKind::none:
        break;
    case RegKind::ewc: {
        if (reg.ewc_src)
            total = g.add(total, ewc_penalty_node<float>(g, bound, reg.ewc_src->anchor.values,
                                                         reg.ewc_src->fisher, reg.ewc_src->lambda));
        if (reg.ewc_tgt)
            total = g.add(total, ewc_penalty_node<float>(g, bound, reg.ewc_tgt->anchor.values,
                                                         reg.ewc_tgt->fisher, reg.ewc_tgt->lambda));
        break;
    }
    case RegKind::lm_objective: {
        std::optional<Graph::Id> extra;
        if (!reg.mono_src.empty()) {
            if (!mono_src) throw ConfigError("lm_objective step is missing its source monolingual batch");
            // the translator has no source LM head bias; run the tied head
            // with a frozen zero bias
            IdMap<float> with_head = bound;
            with_head.emplace("src_out_bias", g.constant(Tensor::zeros({cfg.src_vocab})));
            auto l = lm_loss_node(g, with_head, cfg, *mono_src, Side::src, opt);
            extra = extra ? g.add(*extra, l) : l;
        }
        if (!reg.mono_tgt.empty()) {
            if (!mono_tgt) throw ConfigError("lm_objective step is missing its target monolingual batch");
            auto l = lm_loss_node(g, bound, cfg, *mono_tgt, Side::tgt, opt);
            extra = extra ? g.add(*extra, l) : l;
        }
        if (!extra) throw ConfigError("lm_objective mode has no monolingual corpus configured");
        total = g.add(total, g.scale(*extra, reg.lm_weight));
        break;
    }
    }
    return total;
}

// ---- public training entry points ----------------------------------------------

TrainResult train_lm(const ModelConfig& cfg, Side side, int64_t lm_layers, const std::vector<MonoExample>& train,
                     const std::vector<MonoExample>& dev, const TrainSettings& settings) {
    cfg.validate();
    int64_t stack_depth = side == Side::src ? cfg.enc_layers : cfg.dec_layers;
    if (lm_layers < 1 || lm_layers > stack_depth)
        throw ConfigError("LM depth " + std::to_string(lm_layers) + " must lie in [1, " +
                          std::to_string(stack_depth) + "]");
    if (train.empty()) throw DataError("LM training corpus is empty");
    if (dev.empty()) throw DataError("LM dev corpus is empty");

    ParameterStore params = init_lm_parameters(cfg, side, lm_layers, settings.seed);
    BatchSide bs = side == Side::src ? BatchSide::mono_src : BatchSide::mono_tgt;

    LoopCallbacks cb;
    cb.epoch_batches = [&, bs](int64_t epoch) {
        return make_batches(train, bs, settings.token_budget, kDefaultBucketWidth,
                            mix_seed(settings.seed, kStreamBatches, static_cast<uint64_t>(epoch)));
    };
    cb.loss = [&, side](Graph& g, const IdMap<float>& bound, const Batch& b, const ForwardOptions& opt) {
        return lm_loss_node(g, bound, cfg, b, side, opt);
    };
    cb.dev_perplexity = [&, side](const ParameterStore& p) {
        return perplexity_lm(p, cfg, side, dev, settings.token_budget);
    };
    cb.make_meta = [&, side, lm_layers](int64_t step) {
        CheckpointMeta meta;
        meta.kind = side == Side::src ? "lm-src" : "lm-tgt";
        meta.config = cfg;
        meta.step = step;
        meta.seed = settings.seed;
        meta.lm_layers = lm_layers;
        return meta;
    };
    std::string label = settings.mode_label.empty() ? (side == Side::src ? "lm-src" : "lm-tgt")
                                                    : settings.mode_label;
    return run_loop(std::move(params), settings, cb, label);
}

TrainResult train_translator(const ModelConfig& cfg, ParameterStore initial, const RegMode& reg,
                             const std::vector<ParallelExample>& train, const std::vector<ParallelExample>& dev,
                             const TrainSettings& settings) {
    cfg.validate();
    reg.validate();
    if (train.empty()) throw DataError("parallel training corpus is empty");
    if (dev.empty()) throw DataError("parallel dev corpus is empty");
    // anchors must name real parameters before the loop burns any time
    for (const auto* term : {reg.ewc_src ? &*reg.ewc_src : nullptr, reg.ewc_tgt ? &*reg.ewc_tgt : nullptr}) {
        if (!term) continue;
        for (const auto& [name, t] : term->anchor.values) {
            auto it = initial.find(name);
            if (it == initial.end()) throw ContractError("anchor names unknown parameter " + name);
            if (!it->second.same_shape(t)) throw ContractError("anchor shape mismatch on " + name);
        }
    }

    std::shared_ptr<MonoStream> src_stream, tgt_stream;
    if (reg.kind == RegKind::lm_objective) {
        if (!reg.mono_src.empty())
            src_stream = std::make_shared<MonoStream>(reg.mono_src, BatchSide::mono_src,
                                                      mix_seed(settings.seed, kStreamMonoSrc));
        if (!reg.mono_tgt.empty())
            tgt_stream = std::make_shared<MonoStream>(reg.mono_tgt, BatchSide::mono_tgt,
                                                      mix_seed(settings.seed, kStreamMonoTgt));
    }

    LoopCallbacks cb;
    cb.epoch_batches = [&](int64_t epoch) {
        return make_batches(train, settings.token_budget, kDefaultBucketWidth,
                            mix_seed(settings.seed, kStreamBatches, static_cast<uint64_t>(epoch)));
    };
    cb.loss = [&, src_stream, tgt_stream](Graph& g, const IdMap<float>& bound, const Batch& b,
                                          const ForwardOptions& opt) {
        const Batch* ms = src_stream ? &src_stream->next(settings.token_budget) : nullptr;
        const Batch* mt = tgt_stream ? &tgt_stream->next(settings.token_budget) : nullptr;
        return total_loss_node(g, bound, cfg, b, ms, mt, reg, opt);
    };
    cb.dev_perplexity = [&](const ParameterStore& p) { return perplexity_mt(p, cfg, dev, settings.token_budget); };
    cb.make_meta = [&](int64_t step) {
        CheckpointMeta meta;
        meta.kind = "nmt";
        meta.config = cfg;
        meta.step = step;
        meta.seed = settings.seed;
        return meta;
    };
    std::string label = settings.mode_label.empty() ? reg.label() : settings.mode_label;
    return run_loop(std::move(initial), settings, cb, label);
}

} // namespace nmt
