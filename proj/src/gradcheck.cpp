// SPDX-License-Identifier: Apache-2.0
#include "nmt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "nmt/errors.hpp"

namespace nmt {

double relative_error(double a, double b) {
    double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
    return std::fabs(a - b) / denom;
}

namespace {

double eval_loss(const LossBuilder& build, const StoreOf<double>& params,
                 std::map<std::string, TensorOf<double>>* grads_out) {
    DGraph g;
    std::map<std::string, DGraph::Id> ids;
    for (const auto& [name, t] : params) ids.emplace(name, g.leaf(t, true));
    DGraph::Id loss = build(g, ids);
    if (g.value(loss).numel() != 1)
        throw ContractError("gradient check requires a scalar loss");
    double v = g.value(loss).data[0];
    if (grads_out) {
        g.backward(loss);
        for (const auto& [name, id] : ids) {
            if (g.has_grad(id)) (*grads_out)[name] = g.grad(id);
        }
    }
    return v;
}

} // namespace

GradCheckReport check_gradients(const LossBuilder& build, const StoreOf<double>& params,
                                double eps, int64_t max_elems_per_param, Rng* rng) {
    if (eps <= 0) throw ConfigError("gradient check eps must be positive");

    std::map<std::string, TensorOf<double>> analytic;
    double base1 = eval_loss(build, params, &analytic);
    double base2 = eval_loss(build, params, nullptr);
    if (std::memcmp(&base1, &base2, sizeof(double)) != 0)
        throw DeterminismError("loss builder is not deterministic: " + std::to_string(base1) +
                               " vs " + std::to_string(base2));

    Rng fallback(0x6fd5u);
    Rng& pick = rng ? *rng : fallback;

    GradCheckReport rep;
    StoreOf<double> work = params;
    for (const auto& [name, t] : params) {
        int64_t n = t.numel();
        std::vector<int64_t> indices;
        if (max_elems_per_param > 0 && n > max_elems_per_param) {
            // Sample without replacement; tensors here are small enough that
            // retry-on-collision would also work, but this is simpler to reason about.
            std::vector<int64_t> all(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
            pick.shuffle(all);
            indices.assign(all.begin(), all.begin() + static_cast<size_t>(max_elems_per_param));
            std::sort(indices.begin(), indices.end());
        } else {
            indices.resize(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) indices[static_cast<size_t>(i)] = i;
        }

        const TensorOf<double>* ga = nullptr;
        auto it = analytic.find(name);
        if (it != analytic.end()) ga = &it->second;

        auto& wt = work.at(name);
        for (int64_t idx : indices) {
            double saved = wt.data[static_cast<size_t>(idx)];
            wt.data[static_cast<size_t>(idx)] = saved + eps;
            double up = eval_loss(build, work, nullptr);
            wt.data[static_cast<size_t>(idx)] = saved - eps;
            double down = eval_loss(build, work, nullptr);
            wt.data[static_cast<size_t>(idx)] = saved;

            double numeric = (up - down) / (2.0 * eps);
            double a = ga ? ga->data[static_cast<size_t>(idx)] : 0.0;
            double rel = relative_error(a, numeric);
            ++rep.elements_checked;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_param = name;
                rep.worst_index = idx;
                rep.analytic = a;
                rep.numeric = numeric;
            }
        }
    }
    return rep;
}

} // namespace nmt
