// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nmt/data.hpp"
#include "nmt/graph.hpp"
#include "nmt/model.hpp"

namespace nmt {

// Graph builders for the encoder-decoder and its LM modes. Templated on the
// scalar so the gradient-check oracle can run the identical network in
// double precision; training instantiates float.

template <class S>
using IdMap = std::map<std::string, typename GraphOf<S>::Id>;

struct ForwardOptions {
    float dropout = 0.0f; // 0 disables all dropout
    Rng* rng = nullptr;   // must be set when dropout > 0
};

template <class S>
IdMap<S> bind_parameters(GraphOf<S>& g, const StoreOf<S>& store, bool requires_grad);

// Self-attention stack over source tokens. NMT uses bidirectional mode; the
// source-side LM runs the same stack causally.
template <class S>
typename GraphOf<S>::Id encoder_states(GraphOf<S>& g, const IdMap<S>& p, const ModelConfig& cfg,
                                       const std::vector<int32_t>& ids, const std::vector<float>& mask,
                                       int64_t rows, int64_t len, MaskMode mode, const ForwardOptions& opt);

// Decoder logits, causal over tgt. Without enc_states the cross-attention
// sublayer (and its norm) is skipped entirely — that is the tgt LM mode —
// and the cross_attn parameters are never even looked up.
template <class S>
typename GraphOf<S>::Id decoder_logits(GraphOf<S>& g, const IdMap<S>& p, const ModelConfig& cfg,
                                       const std::vector<int32_t>& tgt_ids, const std::vector<float>& tgt_mask,
                                       int64_t rows, int64_t tgt_len,
                                       std::optional<typename GraphOf<S>::Id> enc_states,
                                       const std::vector<float>* src_mask, int64_t src_len,
                                       const ForwardOptions& opt);

// Causal encoder stack plus the tied src_embed head: the source-side LM.
template <class S>
typename GraphOf<S>::Id src_lm_logits(GraphOf<S>& g, const IdMap<S>& p, const ModelConfig& cfg,
                                      const std::vector<int32_t>& ids, const std::vector<float>& mask,
                                      int64_t rows, int64_t len, const ForwardOptions& opt);

// Next-token NLL over a monolingual batch: positions 0..L-2 predict 1..L-1,
// padding masked out. Training uses the mean; Fisher estimation needs the
// per-sentence sum.
template <class S>
typename GraphOf<S>::Id lm_loss_node(GraphOf<S>& g, const IdMap<S>& p, const ModelConfig& cfg, const Batch& batch,
                                     Side side, const ForwardOptions& opt, Reduction red = Reduction::mean);

// Mean per-token NLL of target tokens given source (teacher forcing).
template <class S>
typename GraphOf<S>::Id mt_loss_node(GraphOf<S>& g, const IdMap<S>& p, const ModelConfig& cfg, const Batch& batch,
                                     const ForwardOptions& opt, Reduction red = Reduction::mean);

// Evaluation conveniences: build, run forward only, return the scalar.
float lm_loss_value(const ParameterStore& params, const ModelConfig& cfg, const Batch& batch, Side side);
float mt_loss_value(const ParameterStore& params, const ModelConfig& cfg, const Batch& batch);

} // namespace nmt
