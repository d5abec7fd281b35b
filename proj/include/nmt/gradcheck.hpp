// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <string>

#include "nmt/graph.hpp"
#include "nmt/rng.hpp"
#include "nmt/tensor.hpp"

namespace nmt {

// Finite-difference validation of the tape. Runs in double precision
// regardless of what the training build uses; central differences in float
// would drown real bugs in rounding noise.

using DGraph = GraphOf<double>;
using LossBuilder = std::function<DGraph::Id(DGraph&, const std::map<std::string, DGraph::Id>&)>;

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    int64_t worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
    int64_t elements_checked = 0;
};

// Builds the loss twice (bitwise-equal values required, else
// DeterminismError), backprops once, then perturbs parameter elements with
// central differences of width eps. max_elems_per_param caps the work for
// large tensors (0 = exhaustive); sampled indices come from rng so runs
// stay reproducible.
GradCheckReport check_gradients(const LossBuilder& build,
                                const StoreOf<double>& params,
                                double eps = 1e-4,
                                int64_t max_elems_per_param = 0,
                                Rng* rng = nullptr);

double relative_error(double a, double b);

} // namespace nmt
