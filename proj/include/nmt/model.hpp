// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nmt/tensor.hpp"

namespace nmt {

enum class Side { src, tgt };
enum class MaskMode { bidirectional, causal };

inline const char* side_name(Side s) { return s == Side::src ? "src" : "tgt"; }

struct ModelConfig {
    int64_t enc_layers = 6;
    int64_t dec_layers = 6;
    int64_t model_dim = 512;
    int64_t ff_dim = 2048;
    int64_t heads = 16;
    int64_t src_vocab = 0;
    int64_t tgt_vocab = 0;
    float dropout = 0.1f;
    bool tie_tgt_embeddings = true;

    void validate() const;
};

// Canonical parameter name -> shape. Transfer and selective regularization
// are defined purely over these names, so the schema is the contract:
//   src_embed, tgt_embed, tgt_out_bias
//   enc.<i>.self_attn.{q,k,v,o}   enc.<i>.ff.{w1,b1,w2,b2}   enc.<i>.norm{1,2}.{gain,bias}
//   dec.<i>.self_attn.*           dec.<i>.cross_attn.*       dec.<i>.ff.*
//   dec.<i>.norm{1,2,3}.*
// With tying off, tgt_out_weight appears as a separate projection.
std::map<std::string, std::vector<int64_t>> nmt_param_shapes(const ModelConfig& cfg);

// A side LM is the matching stack minus anything cross-lingual: the src LM
// is the encoder stack run causally with a tied src_embed head plus
// src_out_bias; the tgt LM is the decoder stack without cross_attn/norm2.
std::map<std::string, std::vector<int64_t>> lm_param_shapes(const ModelConfig& cfg, Side side, int64_t lm_layers);

// Scaled-normal init: 2-d weights get std = fan_in^-0.5 (embeddings use
// model_dim as fan-in so the tied head stays well-scaled), biases zero,
// norm gains one. Filling follows sorted name order with one generator,
// so a seed pins every byte.
ParameterStore init_from_shapes(const std::map<std::string, std::vector<int64_t>>& shapes, int64_t model_dim,
                                uint64_t seed);
ParameterStore init_parameters(const ModelConfig& cfg, uint64_t seed);
ParameterStore init_lm_parameters(const ModelConfig& cfg, Side side, int64_t lm_layers, uint64_t seed);

} // namespace nmt
