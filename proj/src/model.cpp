// SPDX-License-Identifier: Apache-2.0
#include "nmt/model.hpp"

#include <cmath>

#include "nmt/errors.hpp"
#include "nmt/rng.hpp"

namespace nmt {

void ModelConfig::validate() const {
    if (enc_layers < 1 || dec_layers < 1) throw ConfigError("layer counts must be positive");
    if (model_dim < 1 || ff_dim < 1) throw ConfigError("model_dim and ff_dim must be positive");
    if (heads < 1 || model_dim % heads != 0)
        throw ConfigError("model_dim " + std::to_string(model_dim) + " not divisible by heads " +
                          std::to_string(heads));
    if (src_vocab < 1 || tgt_vocab < 1) throw ConfigError("vocab sizes must be set before building a model");
    if (!(dropout >= 0.0f && dropout < 1.0f)) throw ConfigError("dropout must lie in [0, 1)");
}

namespace {

void add_layer_shapes(std::map<std::string, std::vector<int64_t>>& out, const std::string& prefix, int64_t d,
                      int64_t f, bool cross_attn, int64_t norms) {
    for (const char* w : {"q", "k", "v", "o"}) out[prefix + ".self_attn." + w] = {d, d};
    if (cross_attn)
        for (const char* w : {"q", "k", "v", "o"}) out[prefix + ".cross_attn." + w] = {d, d};
    out[prefix + ".ff.w1"] = {d, f};
    out[prefix + ".ff.b1"] = {f};
    out[prefix + ".ff.w2"] = {f, d};
    out[prefix + ".ff.b2"] = {d};
    for (int64_t n = 1; n <= norms; ++n) {
        out[prefix + ".norm" + std::to_string(n) + ".gain"] = {d};
        out[prefix + ".norm" + std::to_string(n) + ".bias"] = {d};
    }
}

} // namespace

std::map<std::string, std::vector<int64_t>> nmt_param_shapes(const ModelConfig& cfg) {
    cfg.validate();
    std::map<std::string, std::vector<int64_t>> out;
    out["src_embed"] = {cfg.src_vocab, cfg.model_dim};
    out["tgt_embed"] = {cfg.tgt_vocab, cfg.model_dim};
    for (int64_t i = 0; i < cfg.enc_layers; ++i)
        add_layer_shapes(out, "enc." + std::to_string(i), cfg.model_dim, cfg.ff_dim, false, 2);
    for (int64_t i = 0; i < cfg.dec_layers; ++i)
        add_layer_shapes(out, "dec." + std::to_string(i), cfg.model_dim, cfg.ff_dim, true, 3);
    out["tgt_out_bias"] = {cfg.tgt_vocab};
    if (!cfg.tie_tgt_embeddings) out["tgt_out_weight"] = {cfg.tgt_vocab, cfg.model_dim};
    return out;
}

std::map<std::string, std::vector<int64_t>> lm_param_shapes(const ModelConfig& cfg, Side side, int64_t lm_layers) {
    cfg.validate();
    int64_t stack = side == Side::src ? cfg.enc_layers : cfg.dec_layers;
    if (lm_layers < 1 || lm_layers > stack)
        throw ConfigError("lm layer count " + std::to_string(lm_layers) + " outside [1, " + std::to_string(stack) +
                          "]");
    std::map<std::string, std::vector<int64_t>> out;
    if (side == Side::src) {
        out["src_embed"] = {cfg.src_vocab, cfg.model_dim};
        out["src_out_bias"] = {cfg.src_vocab};
        for (int64_t i = 0; i < lm_layers; ++i)
            add_layer_shapes(out, "enc." + std::to_string(i), cfg.model_dim, cfg.ff_dim, false, 2);
    } else {
        out["tgt_embed"] = {cfg.tgt_vocab, cfg.model_dim};
        out["tgt_out_bias"] = {cfg.tgt_vocab};
        for (int64_t i = 0; i < lm_layers; ++i) {
            std::string prefix = "dec." + std::to_string(i);
            for (const char* w : {"q", "k", "v", "o"}) out[prefix + ".self_attn." + w] = {cfg.model_dim, cfg.model_dim};
            out[prefix + ".ff.w1"] = {cfg.model_dim, cfg.ff_dim};
            out[prefix + ".ff.b1"] = {cfg.ff_dim};
            out[prefix + ".ff.w2"] = {cfg.ff_dim, cfg.model_dim};
            out[prefix + ".ff.b2"] = {cfg.model_dim};
            // norm2 belongs to cross-attention, which an LM never has
            for (const char* n : {"norm1", "norm3"}) {
                out[prefix + "." + n + ".gain"] = {cfg.model_dim};
                out[prefix + "." + n + ".bias"] = {cfg.model_dim};
            }
        }
    }
    return out;
}

ParameterStore init_from_shapes(const std::map<std::string, std::vector<int64_t>>& shapes, int64_t model_dim,
                                uint64_t seed) {
    Rng rng(seed);
    ParameterStore store;
    for (const auto& [name, shape] : shapes) {
        Tensor t = Tensor::zeros(shape);
        size_t dot = name.rfind('.');
        std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
        if (leaf == "gain") {
            for (float& v : t.data) v = 1.0f;
        } else if (leaf == "bias" || leaf == "b1" || leaf == "b2" || name == "tgt_out_bias" ||
                   name == "src_out_bias") {
            // stays zero
        } else if (shape.size() == 2) {
            // fan-in scaling; embeddings and output projections key off
            // model_dim so the tied head sees the same scale as projections
            int64_t fan_in = name.find("embed") != std::string::npos || name == "tgt_out_weight" ? model_dim
                                                                                                 : shape[0];
            float std_dev = static_cast<float>(1.0 / std::sqrt(static_cast<double>(fan_in)));
            for (float& v : t.data) v = static_cast<float>(rng.normal()) * std_dev;
        } else {
            throw ContractError("no initialization rule for parameter " + name);
        }
        store.emplace(name, std::move(t));
    }
    return store;
}

ParameterStore init_parameters(const ModelConfig& cfg, uint64_t seed) {
    return init_from_shapes(nmt_param_shapes(cfg), cfg.model_dim, seed);
}

ParameterStore init_lm_parameters(const ModelConfig& cfg, Side side, int64_t lm_layers, uint64_t seed) {
    return init_from_shapes(lm_param_shapes(cfg, side, lm_layers), cfg.model_dim, seed);
}

} // namespace nmt
