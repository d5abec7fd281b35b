// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "nmt/data.hpp"
#include "nmt/model.hpp"
#include "nmt/tensor.hpp"

namespace nmt {

// exp(mean per-token NLL) with dropout off. The mean runs over every
// predicted token in the corpus (positions after the first), accumulated in
// double, so the result does not depend on how sentences pack into batches.
double perplexity_lm(const ParameterStore& params, const ModelConfig& cfg, Side side,
                     const std::vector<MonoExample>& corpus, int64_t token_budget);

// mt mode: target tokens conditioned on sources, teacher forcing.
double perplexity_mt(const ParameterStore& params, const ModelConfig& cfg,
                     const std::vector<ParallelExample>& corpus, int64_t token_budget);

} // namespace nmt
