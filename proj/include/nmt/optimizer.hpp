// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "nmt/tensor.hpp"

namespace nmt {

struct OptimizerConfig {
    double base_lr = 3e-3;
    int64_t warmup_steps = 4000;
    double decay_gamma = 0.5; // lr multiplier per warmup-length interval after warmup
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-9;
    double clip_norm = 1.0; // 0 disables clipping

    void validate() const;
};

struct OptimizerState {
    int64_t step = 0;
    std::map<std::string, Tensor> m; // first moments
    std::map<std::string, Tensor> v; // second moments
};

OptimizerState make_optimizer_state(const ParameterStore& params);

// Linear ramp to base_lr over warmup_steps, then exponential decay:
// t <= W: base*t/W;  t > W: base*gamma^((t-W)/W). Continuous at t = W.
double lr_at_step(int64_t t, const OptimizerConfig& cfg);

// Global-norm clipping followed by Adam with bias correction. Returns the
// pre-clip gradient norm for step logs. Parameters without gradients this
// step are left untouched (their moments too).
double adam_step(ParameterStore& params, const GradientMap& grads, OptimizerState& state,
                 const OptimizerConfig& cfg);

} // namespace nmt
