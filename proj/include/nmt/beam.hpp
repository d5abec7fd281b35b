// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nmt/model.hpp"
#include "nmt/tensor.hpp"

namespace nmt {

struct BeamHypothesis {
    std::vector<int32_t> tokens; // BOS-prefixed; ends with EOS iff finished
    double cum_logprob = 0.0;
    bool finished = false;
    bool truncated = false; // nothing finished within max_len

    // ranking score: cumulative log-prob / (emitted tokens)^alpha;
    // alpha = 1 is the mean per-token log-prob
    double score(double alpha) const;
};

// Scorer contract: all live prefixes share one length; return one row of
// next-token log-probabilities per prefix.
using StepScorer =
    std::function<std::vector<std::vector<float>>(const std::vector<std::vector<int32_t>>&)>;

// Standard beam search with exhaustive retirement: any selected candidate
// ending in EOS leaves the beam and is kept until the end; the search stops
// only when the beam empties or max_len is reached. Ties in candidate
// selection break toward the lower token id. If nothing finishes, the best
// unfinished hypothesis is returned with the truncation flag set.
BeamHypothesis beam_search_core(const StepScorer& scorer, int64_t vocab, int64_t beam_size, double alpha,
                                int64_t max_len);

// Independent greedy loop (argmax each step, lower id on ties); the
// beam_size=1 equivalence check runs against this, so it must not share the
// beam machinery.
std::vector<int32_t> greedy_decode(const StepScorer& scorer, int64_t vocab, int64_t max_len);

// Model-backed decoding of one source sentence (ids without BOS/EOS
// handling applied here; pass exactly what the corpus loader produced).
// max_len = 0 picks the default 2 * src length + 10.
BeamHypothesis beam_search(const ParameterStore& params, const ModelConfig& cfg,
                           const std::vector<int32_t>& src_ids, int64_t beam_size, double alpha,
                           int64_t max_len = 0);

// The same model wrapped as a StepScorer (used by both beam_search and the
// decoding invariant tests).
StepScorer model_step_scorer(const ParameterStore& params, const ModelConfig& cfg,
                             const std::vector<int32_t>& src_ids);

} // namespace nmt
