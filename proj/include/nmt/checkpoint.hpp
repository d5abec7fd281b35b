// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "nmt/model.hpp"
#include "nmt/tensor.hpp"

namespace nmt {

// A checkpoint is a directory: `manifest` (JSON) plus one raw file per
// parameter — little-endian float32, row-major, filename = canonical name
// with '.' replaced by '__'. The same container stores model weights and
// Fisher maps. Manifests carry no wall-clock timestamps: a rerun with the
// same seed must reproduce every byte.

struct CheckpointMeta {
    int64_t format_version = 1;
    std::string kind; // "nmt" | "lm-src" | "lm-tgt" | "fisher" | "average"
    ModelConfig config;
    int64_t step = 0;
    uint64_t seed = 0;
    int64_t lm_layers = 0;        // meaningful for lm-* and fisher kinds
    nlohmann::json extra;         // metric history, constituents, counters
};

nlohmann::json config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);

// Writes into `<dir>.tmp` then renames, so readers never see a partial
// checkpoint and an interrupted save leaves any previous one intact.
void save_checkpoint(const std::string& dir, const ParameterStore& params, const CheckpointMeta& meta);

CheckpointMeta load_checkpoint_meta(const std::string& dir);
ParameterStore load_checkpoint_params(const std::string& dir);

// Coordinatewise arithmetic mean. Inputs are sorted before accumulation and
// sums run in double, so the result is independent of argument order.
void average_checkpoints(const std::vector<std::string>& dirs, const std::string& out_dir);

std::string tensor_filename(const std::string& param_name);

} // namespace nmt
