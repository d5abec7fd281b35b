// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nmt/data.hpp"
#include "nmt/forward.hpp"
#include "nmt/model.hpp"
#include "nmt/tensor.hpp"

namespace nmt {

// Diagonal empirical Fisher: one tensor per parameter, same shapes,
// entries >= 0. Keys are a subset of the anchor checkpoint's keys.
using FisherMap = std::map<std::string, Tensor>;

// Frozen copy of pretrained values; the theta* of the quadratic penalty.
struct AnchorParams {
    ParameterStore values;
};

// Per-example loss hook for the estimator: must return the NLL *summed*
// over the example's tokens so the squared gradient matches the summed
// token log-likelihood convention.
using ExampleLoss = std::function<Graph::Id(Graph&, const IdMap<float>&, size_t example_index)>;

// F_i = (1/N) * sum_examples (d example_nll_sum / d theta_i)^2, strictly
// sequential over examples. Parameters the loss never touches get all-zero
// entries.
FisherMap estimate_fisher_core(const ParameterStore& params, size_t n_examples, const ExampleLoss& example_loss);

// The production path: Fisher of a side LM on its held-out sentences,
// dropout off.
FisherMap estimate_fisher_lm(const ParameterStore& lm_params, const ModelConfig& cfg, Side side,
                             const std::vector<MonoExample>& held_out);

void validate_fisher(const FisherMap& fisher);
// anchor and fisher must cover exactly the same names with equal shapes
void validate_anchor_fisher(const AnchorParams& anchor, const FisherMap& fisher);

// sum over anchored coordinates of (lambda/2) * F_i * (theta_i - theta*_i)^2
double ewc_penalty_value(const ParameterStore& current, const AnchorParams& anchor, const FisherMap& fisher,
                         double lambda);

// Differentiable version; gradient w.r.t. theta_i is exactly
// lambda * F_i * (theta_i - theta*_i), and exactly zero for parameters
// outside the anchor set. anchor/fisher must outlive the graph.
template <class S>
typename GraphOf<S>::Id ewc_penalty_node(GraphOf<S>& g, const IdMap<S>& bound, const StoreOf<S>& anchor,
                                         const StoreOf<S>& fisher, S lambda);

} // namespace nmt
