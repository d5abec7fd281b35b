// SPDX-License-Identifier: Apache-2.0
#include "nmt/optimizer.hpp"

#include <cmath>

#include "nmt/errors.hpp"

namespace nmt {

void OptimizerConfig::validate() const {
    if (base_lr <= 0) throw ConfigError("base learning rate must be positive");
    if (warmup_steps < 1) throw ConfigError("warmup must last at least one step");
    if (decay_gamma <= 0) throw ConfigError("decay factor must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
        throw ConfigError("Adam betas must lie in [0, 1)");
    if (eps <= 0) throw ConfigError("Adam epsilon must be positive");
    if (clip_norm < 0) throw ConfigError("clip norm must be nonnegative");
}

OptimizerState make_optimizer_state(const ParameterStore& params) {
    OptimizerState s;
    for (const auto& [name, t] : params) {
        s.m.emplace(name, Tensor::zeros(t.shape));
        s.v.emplace(name, Tensor::zeros(t.shape));
    }
    return s;
}

double lr_at_step(int64_t t, const OptimizerConfig& cfg) {
    cfg.validate();
    if (t < 1) throw ConfigError("schedule steps start at 1");
    double w = static_cast<double>(cfg.warmup_steps);
    if (t <= cfg.warmup_steps) return cfg.base_lr * static_cast<double>(t) / w;
    return cfg.base_lr * std::pow(cfg.decay_gamma, (static_cast<double>(t) - w) / w);
}

double adam_step(ParameterStore& params, const GradientMap& grads, OptimizerState& state,
                 const OptimizerConfig& cfg) {
    cfg.validate();
    double sq_sum = 0.0;
    for (const auto& [name, g] : grads) {
        auto it = params.find(name);
        if (it == params.end()) throw ContractError("gradient for unknown parameter " + name);
        if (!g.same_shape(it->second))
            throw ContractError("gradient shape " + shape_str(g.shape) + " does not match parameter " + name);
        for (float v : g.data) {
            if (!std::isfinite(v)) throw NumericError("non-finite gradient in " + name);
            sq_sum += static_cast<double>(v) * static_cast<double>(v);
        }
    }
    double norm = std::sqrt(sq_sum);
    double scale = cfg.clip_norm > 0 && norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;

    int64_t t = ++state.step;
    double lr = lr_at_step(t, cfg);
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));

    for (const auto& [name, g] : grads) {
        Tensor& p = params.at(name);
        Tensor& m = state.m.at(name);
        Tensor& v = state.v.at(name);
        for (size_t i = 0; i < p.data.size(); ++i) {
            double gi = static_cast<double>(g.data[i]) * scale;
            double mi = cfg.beta1 * static_cast<double>(m.data[i]) + (1.0 - cfg.beta1) * gi;
            double vi = cfg.beta2 * static_cast<double>(v.data[i]) + (1.0 - cfg.beta2) * gi * gi;
            m.data[i] = static_cast<float>(mi);
            v.data[i] = static_cast<float>(vi);
            double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps);
            p.data[i] = static_cast<float>(static_cast<double>(p.data[i]) - update);
        }
    }
    return norm;
}

} // namespace nmt
