// SPDX-License-Identifier: Apache-2.0
#include "nmt/forward.hpp"

#include <cmath>

#include "nmt/errors.hpp"

namespace nmt {

namespace {

constexpr float kMaskedScore = -1e9f;

template <class S>
typename GraphOf<S>::Id pid(const IdMap<S>& p, const std::string& name) {
    auto it = p.find(name);
    if (it == p.end()) throw ContractError("parameter " + name + " not bound in this graph");
    return it->second;
}

// (len, dim) sinusoid table: even columns sine, odd columns cosine.
template <class S>
TensorOf<S> sinusoid_table(int64_t len, int64_t dim) {
    TensorOf<S> t = TensorOf<S>::zeros({len, dim});
    for (int64_t pos = 0; pos < len; ++pos) {
        for (int64_t i = 0; 2 * i < dim; ++i) {
            double angle = static_cast<double>(pos) /
                           std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(dim));
            t.data[pos * dim + 2 * i] = static_cast<S>(std::sin(angle));
            if (2 * i + 1 < dim) t.data[pos * dim + 2 * i + 1] = static_cast<S>(std::cos(angle));
        }
    }
    return t;
}

// Additive attention mask (rows*heads, q_len, k_len): 0 where attention is
// allowed, a large negative where it is not. exp() of the masked score
// underflows to exactly zero, which is what makes padding invariance hold
// bit for bit.
template <class S>
TensorOf<S> attn_mask(int64_t rows, int64_t heads, int64_t q_len, int64_t k_len,
                      const std::vector<float>& key_mask, bool causal) {
    TensorOf<S> m = TensorOf<S>::zeros({rows * heads, q_len, k_len});
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t q = 0; q < q_len; ++q) {
            for (int64_t k = 0; k < k_len; ++k) {
                bool blocked = key_mask[static_cast<size_t>(r * k_len + k)] == 0.0f || (causal && k > q);
                if (!blocked) continue;
                for (int64_t h = 0; h < heads; ++h)
                    m.data[(((r * heads + h) * q_len) + q) * k_len + k] = static_cast<S>(kMaskedScore);
            }
        }
    }
    return m;
}

template <class S>
typename GraphOf<S>::Id maybe_dropout(GraphOf<S>& g, typename GraphOf<S>::Id x, const ForwardOptions& opt) {
    if (opt.dropout <= 0.0f) return x;
    if (!opt.rng) throw ContractError("dropout enabled without a generator");
    return g.dropout(x, static_cast<S>(opt.dropout), *opt.rng);
}

// x -> embed * sqrt(D) + positions, then dropout. Returns (B, L, D).
template <class S>
typename GraphOf<S>::Id embed_input(GraphOf<S>& g, const IdMap<S>& p, const std::string& table,
                                    const ModelConfig& cfg, const std::vector<int32_t>& ids, int64_t rows,
                                    int64_t len, const ForwardOptions& opt) {
    auto e = g.embedding(pid<S>(p, table), ids);
    e = g.scale(e, static_cast<S>(std::sqrt(static_cast<double>(cfg.model_dim))));
    auto x = g.reshape(e, {rows, len, cfg.model_dim});
    x = g.add_seq(x, g.constant(sinusoid_table<S>(len, cfg.model_dim)));
    return maybe_dropout(g, x, opt);
}

// Projects (B, L, D) through a (D, D) or (D, F) weight.
template <class S>
typename GraphOf<S>::Id project(GraphOf<S>& g, typename GraphOf<S>::Id x, typename GraphOf<S>::Id w) {
    const auto& xs = g.shape(x);
    int64_t rows = xs[0], len = xs[1], d_in = xs[2];
    auto flat = g.reshape(x, {rows * len, d_in});
    auto y = g.matmul(flat, w);
    return g.reshape(y, {rows, len, g.shape(w)[1]});
}

// Multi-head attention with pre-computed additive mask. q_in and kv_in are
// already normalized by the caller; output is the o-projection (no residual).
template <class S>
typename GraphOf<S>::Id attention_block(GraphOf<S>& g, const IdMap<S>& p, const std::string& prefix,
                                        typename GraphOf<S>::Id q_in, typename GraphOf<S>::Id kv_in,
                                        const TensorOf<S>& mask, const ModelConfig& cfg,
                                        const ForwardOptions& opt) {
    int64_t d_head = cfg.model_dim / cfg.heads;
    auto q = g.split_heads(project(g, q_in, pid<S>(p, prefix + ".q")), cfg.heads);
    auto k = g.split_heads(project(g, kv_in, pid<S>(p, prefix + ".k")), cfg.heads);
    auto v = g.split_heads(project(g, kv_in, pid<S>(p, prefix + ".v")), cfg.heads);
    auto scores = g.scale(g.bmm_nt(q, k), static_cast<S>(1.0 / std::sqrt(static_cast<double>(d_head))));
    scores = g.add(scores, g.constant(mask));
    auto probs = maybe_dropout(g, g.softmax(scores, 2), opt);
    auto ctx = g.merge_heads(g.bmm(probs, v), cfg.heads);
    return project(g, ctx, pid<S>(p, prefix + ".o"));
}

template <class S>
typename GraphOf<S>::Id norm_of(GraphOf<S>& g, const IdMap<S>& p, const std::string& prefix,
                                typename GraphOf<S>::Id x) {
    return g.layer_norm(x, pid<S>(p, prefix + ".gain"), pid<S>(p, prefix + ".bias"));
}

template <class S>
typename GraphOf<S>::Id ff_block(GraphOf<S>& g, const IdMap<S>& p, const std::string& prefix,
                                 typename GraphOf<S>::Id x) {
    auto h = g.relu(g.add_bias(project(g, x, pid<S>(p, prefix + ".w1")), pid<S>(p, prefix + ".b1")));
    return g.add_bias(project(g, h, pid<S>(p, prefix + ".w2")), pid<S>(p, prefix + ".b2"));
}

// Tied (or explicit) output head: logits = norm(h) E^T / sqrt(D) + bias.
// Pre-norm residual stacks grow state variance with depth, so the head
// first standardizes rows (fixed gain 1 / bias 0 — not learnable, keeping
// the parameter schema unchanged); with the 1/sqrt(D) scale the untrained
// loss then sits at ln(vocab) regardless of depth or width.
template <class S>
typename GraphOf<S>::Id output_head(GraphOf<S>& g, const IdMap<S>& p, typename GraphOf<S>::Id states,
                                    const ModelConfig& cfg, const std::string& weight_name,
                                    const std::string& bias_name, int64_t vocab) {
    const auto& ss = g.shape(states);
    int64_t rows = ss[0], len = ss[1];
    auto ones = g.constant(TensorOf<S>::full({cfg.model_dim}, S(1)));
    auto zeros = g.constant(TensorOf<S>::zeros({cfg.model_dim}));
    auto flat = g.reshape(g.layer_norm(states, ones, zeros), {rows * len, cfg.model_dim});
    auto logits = g.matmul_nt(flat, pid<S>(p, weight_name));
    logits = g.scale(logits, static_cast<S>(1.0 / std::sqrt(static_cast<double>(cfg.model_dim))));
    logits = g.add_bias(logits, pid<S>(p, bias_name));
    return g.reshape(logits, {rows, len, vocab});
}

// The bound store may hold fewer stack layers than the config (LM
// checkpoints at shallower depth); run the layers that exist, bottom-up.
template <class S>
int64_t bound_layers(const IdMap<S>& p, const std::string& stack, int64_t configured) {
    int64_t n = 0;
    while (n < configured && p.count(stack + "." + std::to_string(n) + ".ff.w1")) ++n;
    if (n == 0) throw ContractError("no " + stack + " layers bound in this graph");
    return n;
}

} // namespace

template <class S>
IdMap<S> bind_parameters(GraphOf<S>& g, const StoreOf<S>& store, bool requires_grad) {
    IdMap<S> ids;
    for (const auto& [name, tensor] : store) ids.emplace(name, g.leaf(tensor, requires_grad));
    return ids;
}

template <class S>
typename GraphOf<S>::Id encoder_states(GraphOf<S>& g, const IdMap<S>& p, const ModelConfig& cfg,
                                       const std::vector<int32_t>& ids, const std::vector<float>& mask,
                                       int64_t rows, int64_t len, MaskMode mode, const ForwardOptions& opt) {
    if (rows < 1 || len < 1) throw DataError("encoder got an empty batch");
    if (ids.size() != static_cast<size_t>(rows * len) || mask.size() != ids.size())
        throw DimensionError("encoder batch buffers disagree with rows x len");
    auto x = embed_input(g, p, "src_embed", cfg, ids, rows, len, opt);
    TensorOf<S> m = attn_mask<S>(rows, cfg.heads, len, len, mask, mode == MaskMode::causal);
    int64_t layers = bound_layers<S>(p, "enc", cfg.enc_layers);
    for (int64_t i = 0; i < layers; ++i) {
        std::string prefix = "enc." + std::to_string(i);
        auto normed = norm_of(g, p, prefix + ".norm1", x);
        x = g.add(x, maybe_dropout(g, attention_block(g, p, prefix + ".self_attn", normed, normed, m, cfg, opt), opt));
        auto normed2 = norm_of(g, p, prefix + ".norm2", x);
        x = g.add(x, maybe_dropout(g, ff_block(g, p, prefix + ".ff", normed2), opt));
    }
    return x;
}

template <class S>
typename GraphOf<S>::Id decoder_logits(GraphOf<S>& g, const IdMap<S>& p, const ModelConfig& cfg,
                                       const std::vector<int32_t>& tgt_ids, const std::vector<float>& tgt_mask,
                                       int64_t rows, int64_t tgt_len,
                                       std::optional<typename GraphOf<S>::Id> enc_states,
                                       const std::vector<float>* src_mask, int64_t src_len,
                                       const ForwardOptions& opt) {
    if (rows < 1 || tgt_len < 1) throw DataError("decoder got an empty batch");
    if (tgt_ids.size() != static_cast<size_t>(rows * tgt_len) || tgt_mask.size() != tgt_ids.size())
        throw DimensionError("decoder batch buffers disagree with rows x len");
    if (enc_states && (!src_mask || src_mask->size() != static_cast<size_t>(rows * src_len)))
        throw DimensionError("cross-attention requires a source mask of rows x src_len");

    auto x = embed_input(g, p, "tgt_embed", cfg, tgt_ids, rows, tgt_len, opt);
    TensorOf<S> self_mask = attn_mask<S>(rows, cfg.heads, tgt_len, tgt_len, tgt_mask, true);
    TensorOf<S> cross_mask;
    if (enc_states) cross_mask = attn_mask<S>(rows, cfg.heads, tgt_len, src_len, *src_mask, false);

    int64_t layers = bound_layers<S>(p, "dec", cfg.dec_layers);
    for (int64_t i = 0; i < layers; ++i) {
        std::string prefix = "dec." + std::to_string(i);
        auto normed = norm_of(g, p, prefix + ".norm1", x);
        x = g.add(x, maybe_dropout(
                         g, attention_block(g, p, prefix + ".self_attn", normed, normed, self_mask, cfg, opt), opt));
        if (enc_states) {
            auto normed_q = norm_of(g, p, prefix + ".norm2", x);
            x = g.add(x, maybe_dropout(g,
                                       attention_block(g, p, prefix + ".cross_attn", normed_q, *enc_states,
                                                       cross_mask, cfg, opt),
                                       opt));
        }
        auto normed3 = norm_of(g, p, prefix + ".norm3", x);
        x = g.add(x, maybe_dropout(g, ff_block(g, p, prefix + ".ff", normed3), opt));
    }
    std::string head = cfg.tie_tgt_embeddings ? "tgt_embed" : "tgt_out_weight";
    return output_head(g, p, x, cfg, head, "tgt_out_bias", cfg.tgt_vocab);
}

template <class S>
typename GraphOf<S>::Id src_lm_logits(GraphOf<S>& g, const IdMap<S>& p, const ModelConfig& cfg,
                                      const std::vector<int32_t>& ids, const std::vector<float>& mask,
                                      int64_t rows, int64_t len, const ForwardOptions& opt) {
    auto states = encoder_states(g, p, cfg, ids, mask, rows, len, MaskMode::causal, opt);
    return output_head(g, p, states, cfg, "src_embed", "src_out_bias", cfg.src_vocab);
}

namespace {

struct ShiftedBatch {
    std::vector<int32_t> in_ids;
    std::vector<float> in_mask;
    std::vector<int32_t> targets;
    std::vector<float> target_mask;
    int64_t rows = 0;
    int64_t len = 0; // input length = original - 1
};

// positions 0..L-2 predict 1..L-1
ShiftedBatch shift_for_next_token(const std::vector<int32_t>& ids, const std::vector<float>& mask, int64_t rows,
                                  int64_t len) {
    if (rows < 1) throw DataError("empty batch");
    if (len < 2) throw DataError("sequences must hold at least two tokens to shift");
    ShiftedBatch s;
    s.rows = rows;
    s.len = len - 1;
    s.in_ids.resize(static_cast<size_t>(rows * s.len));
    s.in_mask.resize(static_cast<size_t>(rows * s.len));
    s.targets.resize(static_cast<size_t>(rows * s.len));
    s.target_mask.resize(static_cast<size_t>(rows * s.len));
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t c = 0; c < s.len; ++c) {
            size_t src_idx = static_cast<size_t>(r * len + c);
            size_t dst_idx = static_cast<size_t>(r * s.len + c);
            s.in_ids[dst_idx] = ids[src_idx];
            s.in_mask[dst_idx] = mask[src_idx];
            s.targets[dst_idx] = ids[src_idx + 1];
            s.target_mask[dst_idx] = mask[src_idx + 1];
        }
    }
    return s;
}

} // namespace

template <class S>
typename GraphOf<S>::Id lm_loss_node(GraphOf<S>& g, const IdMap<S>& p, const ModelConfig& cfg, const Batch& batch,
                                     Side side, const ForwardOptions& opt, Reduction red) {
    BatchSide want = side == Side::src ? BatchSide::mono_src : BatchSide::mono_tgt;
    if (batch.side != want) throw ContractError("batch side does not match the requested language model");
    ShiftedBatch s = shift_for_next_token(batch.src, batch.src_mask, batch.rows, batch.src_len);
    typename GraphOf<S>::Id logits =
        side == Side::src
            ? src_lm_logits(g, p, cfg, s.in_ids, s.in_mask, s.rows, s.len, opt)
            : decoder_logits(g, p, cfg, s.in_ids, s.in_mask, s.rows, s.len, std::nullopt, nullptr, 0, opt);
    int64_t vocab = side == Side::src ? cfg.src_vocab : cfg.tgt_vocab;
    auto flat = g.reshape(logits, {s.rows * s.len, vocab});
    return g.cross_entropy(flat, s.targets, s.target_mask, red);
}

template <class S>
typename GraphOf<S>::Id mt_loss_node(GraphOf<S>& g, const IdMap<S>& p, const ModelConfig& cfg, const Batch& batch,
                                     const ForwardOptions& opt, Reduction red) {
    if (batch.side != BatchSide::parallel) throw ContractError("translation loss needs a parallel batch");
    auto enc = encoder_states(g, p, cfg, batch.src, batch.src_mask, batch.rows, batch.src_len,
                              MaskMode::bidirectional, opt);
    ShiftedBatch s = shift_for_next_token(batch.tgt, batch.tgt_mask, batch.rows, batch.tgt_len);
    auto logits = decoder_logits(g, p, cfg, s.in_ids, s.in_mask, s.rows, s.len,
                                 std::optional<typename GraphOf<S>::Id>(enc), &batch.src_mask, batch.src_len, opt);
    auto flat = g.reshape(logits, {s.rows * s.len, cfg.tgt_vocab});
    return g.cross_entropy(flat, s.targets, s.target_mask, red);
}

float lm_loss_value(const ParameterStore& params, const ModelConfig& cfg, const Batch& batch, Side side) {
    Graph g;
    auto p = bind_parameters(g, params, false);
    return g.value(lm_loss_node(g, p, cfg, batch, side, {})).data[0];
}

float mt_loss_value(const ParameterStore& params, const ModelConfig& cfg, const Batch& batch) {
    Graph g;
    auto p = bind_parameters(g, params, false);
    return g.value(mt_loss_node(g, p, cfg, batch, {})).data[0];
}

// training runs float; the gradient-check oracle runs the same code in double
template IdMap<float> bind_parameters(GraphOf<float>&, const StoreOf<float>&, bool);
template IdMap<double> bind_parameters(GraphOf<double>&, const StoreOf<double>&, bool);
template GraphOf<float>::Id encoder_states(GraphOf<float>&, const IdMap<float>&, const ModelConfig&,
                                           const std::vector<int32_t>&, const std::vector<float>&, int64_t, int64_t,
                                           MaskMode, const ForwardOptions&);
template GraphOf<double>::Id encoder_states(GraphOf<double>&, const IdMap<double>&, const ModelConfig&,
                                            const std::vector<int32_t>&, const std::vector<float>&, int64_t,
                                            int64_t, MaskMode, const ForwardOptions&);
template GraphOf<float>::Id decoder_logits(GraphOf<float>&, const IdMap<float>&, const ModelConfig&,
                                           const std::vector<int32_t>&, const std::vector<float>&, int64_t, int64_t,
                                           std::optional<GraphOf<float>::Id>, const std::vector<float>*, int64_t,
                                           const ForwardOptions&);
template GraphOf<double>::Id decoder_logits(GraphOf<double>&, const IdMap<double>&, const ModelConfig&,
                                            const std::vector<int32_t>&, const std::vector<float>&, int64_t,
                                            int64_t, std::optional<GraphOf<double>::Id>, const std::vector<float>*,
                                            int64_t, const ForwardOptions&);
template GraphOf<float>::Id src_lm_logits(GraphOf<float>&, const IdMap<float>&, const ModelConfig&,
                                          const std::vector<int32_t>&, const std::vector<float>&, int64_t, int64_t,
                                          const ForwardOptions&);
template GraphOf<double>::Id src_lm_logits(GraphOf<double>&, const IdMap<double>&, const ModelConfig&,
                                           const std::vector<int32_t>&, const std::vector<float>&, int64_t, int64_t,
                                           const ForwardOptions&);
template GraphOf<float>::Id lm_loss_node(GraphOf<float>&, const IdMap<float>&, const ModelConfig&, const Batch&,
                                         Side, const ForwardOptions&, Reduction);
template GraphOf<double>::Id lm_loss_node(GraphOf<double>&, const IdMap<double>&, const ModelConfig&, const Batch&,
                                          Side, const ForwardOptions&, Reduction);
template GraphOf<float>::Id mt_loss_node(GraphOf<float>&, const IdMap<float>&, const ModelConfig&, const Batch&,
                                         const ForwardOptions&, Reduction);
template GraphOf<double>::Id mt_loss_node(GraphOf<double>&, const IdMap<double>&, const ModelConfig&, const Batch&,
                                          const ForwardOptions&, Reduction);

} // namespace nmt
