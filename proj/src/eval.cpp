// SPDX-License-Identifier: Apache-2.0
#include "nmt/eval.hpp"

#include <cmath>

#include "nmt/errors.hpp"
#include "nmt/forward.hpp"

namespace nmt {

namespace {

// evaluation batching is pinned to one seed so a given corpus always packs
// (and therefore rounds) the same way
constexpr uint64_t kEvalBatchSeed = 0x9e11;

double finish(double nll_sum, double tokens) {
    if (!(tokens > 0)) throw DataError("perplexity needs at least one predicted token");
    double ppl = std::exp(nll_sum / tokens);
    if (!std::isfinite(ppl)) throw NumericError("perplexity overflowed; model has diverged");
    return ppl;
}

} // namespace

double perplexity_lm(const ParameterStore& params, const ModelConfig& cfg, Side side,
                     const std::vector<MonoExample>& corpus, int64_t token_budget) {
    if (corpus.empty()) throw DataError("perplexity over an empty corpus");
    auto batches = make_batches(corpus, side == Side::src ? BatchSide::mono_src : BatchSide::mono_tgt,
                                token_budget, kDefaultBucketWidth, kEvalBatchSeed);
    double nll = 0.0;
    for (const Batch& b : batches) {
        Graph g;
        auto bound = bind_parameters(g, params, false);
        nll += static_cast<double>(g.value(lm_loss_node(g, bound, cfg, b, side, {}, Reduction::sum)).data[0]);
    }
    double tokens = 0.0;
    for (const auto& ex : corpus) tokens += static_cast<double>(ex.ids.size()) - 1.0;
    return finish(nll, tokens);
}

double perplexity_mt(const ParameterStore& params, const ModelConfig& cfg,
                     const std::vector<ParallelExample>& corpus, int64_t token_budget) {
    if (corpus.empty()) throw DataError("perplexity over an empty corpus");
    auto batches = make_batches(corpus, token_budget, kDefaultBucketWidth, kEvalBatchSeed);
    double nll = 0.0;
    for (const Batch& b : batches) {
        Graph g;
        auto bound = bind_parameters(g, params, false);
        nll += static_cast<double>(g.value(mt_loss_node(g, bound, cfg, b, {}, Reduction::sum)).data[0]);
    }
    double tokens = 0.0;
    for (const auto& ex : corpus) tokens += static_cast<double>(ex.tgt_ids.size()) - 1.0;
    return finish(nll, tokens);
}

} // namespace nmt
