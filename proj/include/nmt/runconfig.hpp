// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <json.hpp>

#include "nmt/model.hpp"
#include "nmt/optimizer.hpp"

namespace nmt {

// One JSON document drives a whole run. Parsing is strict: a key the schema
// does not know is an error, not a silent no-op, and the fully-resolved
// document (defaults expanded) is written next to every run's outputs.

struct RunConfig {
    // src_vocab/tgt_vocab may stay 0 here; they are derived from the BPE
    // models when data is bound, and a nonzero value must then agree.
    ModelConfig model;

    struct Data {
        std::string bpe_src, bpe_tgt;
        std::string train_src, train_tgt;
        std::string dev_src, dev_tgt;
        std::string test_src, test_tgt;
        std::string mono_src, mono_tgt;
        std::string mono_dev_src, mono_dev_tgt;
    } data;

    OptimizerConfig optimizer;

    struct Training {
        int64_t max_steps = 1000;
        int64_t eval_every = 500;
        int64_t keep_best = 4;
        int64_t token_budget = 1024;
        uint64_t seed = 1;
    } training;

    struct Transfer {
        std::string src_lm, tgt_lm; // checkpoint dirs, empty = no transfer
        int64_t src_layers = 0;     // 0 = every layer the LM has
        int64_t tgt_layers = 0;
        uint64_t fresh_seed = 1;
    } transfer;

    struct Reg {
        std::string mode = "none"; // none | ewc | lm_objective
        double lambda_src = 0.0;
        double lambda_tgt = 0.0;
        std::string fisher_src, fisher_tgt; // fisher checkpoint dirs
        double lm_weight = 1.0;
    } reg;

    void validate() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

nlohmann::json run_config_json(const RunConfig& cfg);
void write_resolved_config(const RunConfig& cfg, const std::string& out_dir);

} // namespace nmt
