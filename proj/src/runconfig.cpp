// SPDX-License-Identifier: Apache-2.0
#include "nmt/runconfig.hpp"

#include <set>

#include "nmt/errors.hpp"
#include "nmt/io.hpp"

namespace nmt {

namespace {

// Tracks which keys a section consumed; everything left over is an error.
class Section {
public:
    Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("config section '" + (path_.empty() ? "<root>" : path_) + "' must be a JSON object");
    }

    void read(const char* key, std::string& out) {
        const nlohmann::json* v = take(key);
        if (!v) return;
        if (!v->is_string()) throw type_error(key, "a string");
        out = v->get<std::string>();
    }
    void read(const char* key, bool& out) {
        const nlohmann::json* v = take(key);
        if (!v) return;
        if (!v->is_boolean()) throw type_error(key, "a boolean");
        out = v->get<bool>();
    }
    void read(const char* key, int64_t& out) {
        const nlohmann::json* v = take(key);
        if (!v) return;
        if (!v->is_number_integer()) throw type_error(key, "an integer");
        out = v->get<int64_t>();
    }
    void read(const char* key, uint64_t& out) {
        const nlohmann::json* v = take(key);
        if (!v) return;
        if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<int64_t>() < 0))
            throw type_error(key, "a nonnegative integer");
        out = v->get<uint64_t>();
    }
    void read(const char* key, double& out) {
        const nlohmann::json* v = take(key);
        if (!v) return;
        if (!v->is_number()) throw type_error(key, "a number");
        out = v->get<double>();
    }
    void read(const char* key, float& out) {
        double d = out;
        read(key, d);
        out = static_cast<float>(d);
    }

    const nlohmann::json* object(const char* key) {
        const nlohmann::json* v = take(key);
        if (v && !v->is_object()) throw type_error(key, "an object");
        return v;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + dotted(it.key()) + "'");
    }

private:
    const nlohmann::json* take(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }
    std::string dotted(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    ConfigError type_error(const char* key, const char* want) const {
        return ConfigError("config key '" + dotted(key) + "' must be " + want);
    }

    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

} // namespace

RunConfig parse_run_config(const nlohmann::json& j) {
    RunConfig cfg;
    Section root(j, "");

    if (const auto* m = root.object("model")) {
        Section s(*m, "model");
        s.read("enc_layers", cfg.model.enc_layers);
        s.read("dec_layers", cfg.model.dec_layers);
        s.read("model_dim", cfg.model.model_dim);
        s.read("ff_dim", cfg.model.ff_dim);
        s.read("heads", cfg.model.heads);
        s.read("src_vocab", cfg.model.src_vocab);
        s.read("tgt_vocab", cfg.model.tgt_vocab);
        s.read("dropout", cfg.model.dropout);
        s.read("tie_tgt_embeddings", cfg.model.tie_tgt_embeddings);
        s.finish();
    }
    if (const auto* d = root.object("data")) {
        Section s(*d, "data");
        s.read("bpe_src", cfg.data.bpe_src);
        s.read("bpe_tgt", cfg.data.bpe_tgt);
        s.read("train_src", cfg.data.train_src);
        s.read("train_tgt", cfg.data.train_tgt);
        s.read("dev_src", cfg.data.dev_src);
        s.read("dev_tgt", cfg.data.dev_tgt);
        s.read("test_src", cfg.data.test_src);
        s.read("test_tgt", cfg.data.test_tgt);
        s.read("mono_src", cfg.data.mono_src);
        s.read("mono_tgt", cfg.data.mono_tgt);
        s.read("mono_dev_src", cfg.data.mono_dev_src);
        s.read("mono_dev_tgt", cfg.data.mono_dev_tgt);
        s.finish();
    }
    if (const auto* o = root.object("optimizer")) {
        Section s(*o, "optimizer");
        s.read("base_lr", cfg.optimizer.base_lr);
        s.read("warmup_steps", cfg.optimizer.warmup_steps);
        s.read("decay_gamma", cfg.optimizer.decay_gamma);
        s.read("beta1", cfg.optimizer.beta1);
        s.read("beta2", cfg.optimizer.beta2);
        s.read("eps", cfg.optimizer.eps);
        s.read("clip_norm", cfg.optimizer.clip_norm);
        s.finish();
    }
    if (const auto* t = root.object("training")) {
        Section s(*t, "training");
        s.read("max_steps", cfg.training.max_steps);
        s.read("eval_every", cfg.training.eval_every);
        s.read("keep_best", cfg.training.keep_best);
        s.read("token_budget", cfg.training.token_budget);
        s.read("seed", cfg.training.seed);
        s.finish();
    }
    if (const auto* t = root.object("transfer")) {
        Section s(*t, "transfer");
        s.read("src_lm", cfg.transfer.src_lm);
        s.read("tgt_lm", cfg.transfer.tgt_lm);
        s.read("src_layers", cfg.transfer.src_layers);
        s.read("tgt_layers", cfg.transfer.tgt_layers);
        s.read("fresh_seed", cfg.transfer.fresh_seed);
        s.finish();
    }
    if (const auto* r = root.object("reg")) {
        Section s(*r, "reg");
        s.read("mode", cfg.reg.mode);
        s.read("lambda_src", cfg.reg.lambda_src);
        s.read("lambda_tgt", cfg.reg.lambda_tgt);
        s.read("fisher_src", cfg.reg.fisher_src);
        s.read("fisher_tgt", cfg.reg.fisher_tgt);
        s.read("lm_weight", cfg.reg.lm_weight);
        s.finish();
    }
    root.finish();
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::string text = io::read_text_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    return parse_run_config(j);
}

void RunConfig::validate() const {
    // model vocabs may still be unbound here, so this checks everything else
    if (model.enc_layers < 1 || model.dec_layers < 1) throw ConfigError("model layers must be positive");
    if (model.model_dim < 1 || model.ff_dim < 1) throw ConfigError("model dims must be positive");
    if (model.heads < 1 || model.model_dim % model.heads != 0)
        throw ConfigError("model_dim must be divisible by heads");
    if (!(model.dropout >= 0.0f && model.dropout < 1.0f)) throw ConfigError("dropout must be in [0, 1)");
    if (model.src_vocab < 0 || model.tgt_vocab < 0) throw ConfigError("vocab sizes cannot be negative");
    optimizer.validate();
    if (training.max_steps < 1) throw ConfigError("training.max_steps must be positive");
    if (training.eval_every < 1) throw ConfigError("training.eval_every must be positive");
    if (training.keep_best < 1) throw ConfigError("training.keep_best must be positive");
    if (training.token_budget < 8) throw ConfigError("training.token_budget is too small to fit a sentence");
    if (transfer.src_layers < 0 || transfer.tgt_layers < 0)
        throw ConfigError("transfer layer counts cannot be negative");
    if (reg.mode != "none" && reg.mode != "ewc" && reg.mode != "lm_objective")
        throw ConfigError("reg.mode must be one of none|ewc|lm_objective, got '" + reg.mode + "'");
    if (reg.lambda_src < 0.0 || reg.lambda_tgt < 0.0) throw ConfigError("EWC lambdas cannot be negative");
    if (reg.lm_weight <= 0.0) throw ConfigError("reg.lm_weight must be positive");
}

nlohmann::json run_config_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["model"] = {{"enc_layers", cfg.model.enc_layers},
                  {"dec_layers", cfg.model.dec_layers},
                  {"model_dim", cfg.model.model_dim},
                  {"ff_dim", cfg.model.ff_dim},
                  {"heads", cfg.model.heads},
                  {"src_vocab", cfg.model.src_vocab},
                  {"tgt_vocab", cfg.model.tgt_vocab},
                  {"dropout", cfg.model.dropout},
                  {"tie_tgt_embeddings", cfg.model.tie_tgt_embeddings}};
    j["data"] = {{"bpe_src", cfg.data.bpe_src},     {"bpe_tgt", cfg.data.bpe_tgt},
                 {"train_src", cfg.data.train_src}, {"train_tgt", cfg.data.train_tgt},
                 {"dev_src", cfg.data.dev_src},     {"dev_tgt", cfg.data.dev_tgt},
                 {"test_src", cfg.data.test_src},   {"test_tgt", cfg.data.test_tgt},
                 {"mono_src", cfg.data.mono_src},   {"mono_tgt", cfg.data.mono_tgt},
                 {"mono_dev_src", cfg.data.mono_dev_src}, {"mono_dev_tgt", cfg.data.mono_dev_tgt}};
    j["optimizer"] = {{"base_lr", cfg.optimizer.base_lr}, {"warmup_steps", cfg.optimizer.warmup_steps},
                      {"decay_gamma", cfg.optimizer.decay_gamma}, {"beta1", cfg.optimizer.beta1},
                      {"beta2", cfg.optimizer.beta2},     {"eps", cfg.optimizer.eps},
                      {"clip_norm", cfg.optimizer.clip_norm}};
    j["training"] = {{"max_steps", cfg.training.max_steps},
                     {"eval_every", cfg.training.eval_every},
                     {"keep_best", cfg.training.keep_best},
                     {"token_budget", cfg.training.token_budget},
                     {"seed", cfg.training.seed}};
    j["transfer"] = {{"src_lm", cfg.transfer.src_lm},
                     {"tgt_lm", cfg.transfer.tgt_lm},
                     {"src_layers", cfg.transfer.src_layers},
                     {"tgt_layers", cfg.transfer.tgt_layers},
                     {"fresh_seed", cfg.transfer.fresh_seed}};
    j["reg"] = {{"mode", cfg.reg.mode},
                {"lambda_src", cfg.reg.lambda_src},
                {"lambda_tgt", cfg.reg.lambda_tgt},
                {"fisher_src", cfg.reg.fisher_src},
                {"fisher_tgt", cfg.reg.fisher_tgt},
                {"lm_weight", cfg.reg.lm_weight}};
    return j;
}

void write_resolved_config(const RunConfig& cfg, const std::string& out_dir) {
    io::ensure_dir(out_dir);
    io::atomic_write_file(out_dir + "/resolved-config", run_config_json(cfg).dump(2) + "\n");
}

} // namespace nmt
