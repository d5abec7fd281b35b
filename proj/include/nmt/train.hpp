// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nmt/data.hpp"
#include "nmt/ewc.hpp"
#include "nmt/forward.hpp"
#include "nmt/model.hpp"
#include "nmt/optimizer.hpp"
#include "nmt/tensor.hpp"

namespace nmt {

// ---- transfer -------------------------------------------------------------

struct TransferSide {
    std::string checkpoint_dir; // pretrained LM checkpoint
    int64_t layers = 0;         // bottom layers to copy; embeddings always copy
};

struct TransferPlan {
    std::optional<TransferSide> src_lm;
    std::optional<TransferSide> tgt_lm;
    uint64_t fresh_seed = 1; // init for everything not transferred
};

struct TransferResult {
    ParameterStore params;
    // exact copies of the transferred values; empty when a side is not
    // configured. These are the theta* the quadratic penalty anchors to.
    AnchorParams src_anchor;
    AnchorParams tgt_anchor;
};

// Fresh init from the plan seed, then bitwise copy of the embeddings and the
// bottom `layers` of the matching stack from each configured LM checkpoint.
// Cross-attention and layers above the transfer depth keep their fresh init.
TransferResult transfer_init(const ModelConfig& cfg, const TransferPlan& plan);

// ---- regularization modes ---------------------------------------------------

enum class RegKind { none, ewc, lm_objective };

struct EwcSideTerm {
    float lambda = 0.0f;
    AnchorParams anchor;
    FisherMap fisher;
};

struct RegMode {
    RegKind kind = RegKind::none;
    // ewc: at least one side configured
    std::optional<EwcSideTerm> ewc_src;
    std::optional<EwcSideTerm> ewc_tgt;
    // lm_objective: weighted LM losses on fresh monolingual batches each step
    float lm_weight = 1.0f;
    std::vector<MonoExample> mono_src;
    std::vector<MonoExample> mono_tgt;

    void validate() const;
    const char* label() const; // step-log mode column
};

// mt loss plus the mode's extra terms. For lm_objective the caller supplies
// one monolingual batch per configured side (null otherwise).
Graph::Id total_loss_node(Graph& g, const IdMap<float>& bound, const ModelConfig& cfg, const Batch& parallel,
                          const Batch* mono_src, const Batch* mono_tgt, const RegMode& reg,
                          const ForwardOptions& opt);

// ---- training loops ---------------------------------------------------------

struct TrainSettings {
    OptimizerConfig optim;
    int64_t max_steps = 1000;
    int64_t eval_every = 500; // dev perplexity + checkpoint cadence
    int64_t keep_best = 4;    // k best checkpoints tracked for averaging
    int64_t token_budget = 1024;
    float dropout = 0.1f;
    uint64_t seed = 1;
    std::string out_dir;    // gets checkpoints/ and logs/steps.csv
    std::string mode_label; // step-log mode column when reg does not apply
};

struct EvalPoint {
    int64_t step = 0;
    int64_t examples_seen = 0;
    double wall_seconds = 0.0;
    double dev_perplexity = 0.0;
    double mean_step_ms = 0.0; // forward+backward+update only, eval excluded
};

struct TrainResult {
    ParameterStore params; // state after the last step
    std::vector<EvalPoint> evals;
    std::string best_checkpoint_dir;
    double best_dev_perplexity = 0.0;
    int64_t best_step = 0;
    double final_dev_perplexity = 0.0;
    double mean_step_ms = 0.0;
    std::vector<std::string> k_best_dirs; // best first
};

// Left-to-right LM pretraining for one side; checkpoints carry kind
// "lm-src"/"lm-tgt" and the stack depth so transfer can validate.
TrainResult train_lm(const ModelConfig& cfg, Side side, int64_t lm_layers, const std::vector<MonoExample>& train,
                     const std::vector<MonoExample>& dev, const TrainSettings& settings);

// Fine-tuning (or from-scratch training when `initial` came from a plain
// init): batches -> total loss -> backward -> clipped Adam, dev perplexity
// every eval_every steps, k-best tracking by lowest dev perplexity.
TrainResult train_translator(const ModelConfig& cfg, ParameterStore initial, const RegMode& reg,
                             const std::vector<ParallelExample>& train, const std::vector<ParallelExample>& dev,
                             const TrainSettings& settings);

} // namespace nmt
