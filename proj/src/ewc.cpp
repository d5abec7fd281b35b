// SPDX-License-Identifier: Apache-2.0
#include "nmt/ewc.hpp"

#include <cmath>

#include "nmt/errors.hpp"

namespace nmt {

FisherMap estimate_fisher_core(const ParameterStore& params, size_t n_examples, const ExampleLoss& example_loss) {
    if (n_examples == 0) throw DataError("Fisher estimation needs a non-empty held-out set");

    StoreOf<double> acc;
    for (const auto& [name, t] : params) acc.emplace(name, TensorOf<double>::zeros(t.shape));

    for (size_t i = 0; i < n_examples; ++i) {
        Graph g;
        IdMap<float> bound = bind_parameters(g, params, true);
        Graph::Id loss = example_loss(g, bound, i);
        if (g.value(loss).numel() != 1) throw ContractError("per-example loss must be scalar");
        g.backward(loss);
        for (const auto& [name, id] : bound) {
            if (!g.has_grad(id)) continue;
            const Tensor& grad = g.grad(id);
            auto& a = acc.at(name);
            for (size_t k = 0; k < grad.data.size(); ++k) {
                float gv = grad.data[k];
                if (!std::isfinite(gv))
                    throw NumericError("non-finite gradient in " + name + " on held-out example " +
                                       std::to_string(i));
                a.data[k] += static_cast<double>(gv) * static_cast<double>(gv);
            }
        }
    }

    double inv_n = 1.0 / static_cast<double>(n_examples);
    FisherMap fisher;
    for (auto& [name, a] : acc) {
        Tensor t = Tensor::zeros(a.shape);
        for (size_t k = 0; k < a.data.size(); ++k) t.data[k] = static_cast<float>(a.data[k] * inv_n);
        fisher.emplace(name, std::move(t));
    }
    return fisher;
}

FisherMap estimate_fisher_lm(const ParameterStore& lm_params, const ModelConfig& cfg, Side side,
                             const std::vector<MonoExample>& held_out) {
    return estimate_fisher_core(lm_params, held_out.size(), [&](Graph& g, const IdMap<float>& bound, size_t i) {
        const MonoExample& ex = held_out[i];
        Batch b;
        b.side = side == Side::src ? BatchSide::mono_src : BatchSide::mono_tgt;
        b.rows = 1;
        b.src_len = static_cast<int64_t>(ex.ids.size());
        b.src = ex.ids;
        b.src_mask.assign(ex.ids.size(), 1.0f);
        return lm_loss_node(g, bound, cfg, b, side, {}, Reduction::sum);
    });
}

void validate_fisher(const FisherMap& fisher) {
    for (const auto& [name, t] : fisher)
        for (float v : t.data)
            if (!std::isfinite(v) || v < 0.0f)
                throw ContractError("Fisher entry for " + name + " is negative or non-finite");
}

void validate_anchor_fisher(const AnchorParams& anchor, const FisherMap& fisher) {
    for (const auto& [name, t] : anchor.values) {
        auto it = fisher.find(name);
        if (it == fisher.end()) throw ContractError("Fisher map is missing anchored parameter " + name);
        if (!it->second.same_shape(t)) throw ContractError("Fisher/anchor shape mismatch on " + name);
    }
    for (const auto& [name, t] : fisher)
        if (!anchor.values.count(name)) throw ContractError("Fisher map has unanchored parameter " + name);
    validate_fisher(fisher);
}

double ewc_penalty_value(const ParameterStore& current, const AnchorParams& anchor, const FisherMap& fisher,
                         double lambda) {
    validate_anchor_fisher(anchor, fisher);
    double total = 0.0;
    for (const auto& [name, a] : anchor.values) {
        auto it = current.find(name);
        if (it == current.end()) throw ContractError("current parameters are missing anchored name " + name);
        const Tensor& f = fisher.at(name);
        for (size_t k = 0; k < a.data.size(); ++k) {
            double d = static_cast<double>(it->second.data[k]) - static_cast<double>(a.data[k]);
            total += 0.5 * lambda * static_cast<double>(f.data[k]) * d * d;
        }
    }
    return total;
}

template <class S>
typename GraphOf<S>::Id ewc_penalty_node(GraphOf<S>& g, const IdMap<S>& bound, const StoreOf<S>& anchor,
                                         const StoreOf<S>& fisher, S lambda) {
    std::vector<typename GraphOf<S>::QuadTerm> terms;
    for (const auto& [name, a] : anchor) {
        auto fit = fisher.find(name);
        if (fit == fisher.end()) throw ContractError("Fisher map is missing anchored parameter " + name);
        auto bit = bound.find(name);
        if (bit == bound.end()) throw ContractError("anchored parameter " + name + " is not bound in this graph");
        terms.push_back({bit->second, &a, &fit->second});
    }
    if (terms.empty()) throw ConfigError("anchoring penalty configured with an empty anchor set");
    return g.quad_anchoring_penalty(std::move(terms), lambda);
}

template GraphOf<float>::Id ewc_penalty_node(GraphOf<float>&, const IdMap<float>&, const StoreOf<float>&,
                                             const StoreOf<float>&, float);
template GraphOf<double>::Id ewc_penalty_node(GraphOf<double>&, const IdMap<double>&, const StoreOf<double>&,
                                              const StoreOf<double>&, double);

} // namespace nmt
