// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nmt/errors.hpp"

namespace nmt {

inline std::string shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

inline int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t e : shape) n *= e;
    return n;
}

// Dense row-major tensor. Scalars use an empty shape and one element.
// Training runs on float; the double instantiation exists for the
// finite-difference gradient oracles.
template <class S>
struct TensorOf {
    std::vector<int64_t> shape;
    std::vector<S> data;

    TensorOf() = default;
    TensorOf(std::vector<int64_t> sh, std::vector<S> d) : shape(std::move(sh)), data(std::move(d)) {
        if (shape_numel(shape) != static_cast<int64_t>(data.size()))
            throw DimensionError("tensor shape " + shape_str(shape) + " does not match data length " +
                                 std::to_string(data.size()));
        for (int64_t e : shape)
            if (e <= 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    }

    static TensorOf zeros(std::vector<int64_t> sh) {
        std::vector<S> d(static_cast<size_t>(shape_numel(sh)), S(0));
        return TensorOf(std::move(sh), std::move(d));
    }
    static TensorOf full(std::vector<int64_t> sh, S v) {
        std::vector<S> d(static_cast<size_t>(shape_numel(sh)), v);
        return TensorOf(std::move(sh), std::move(d));
    }
    static TensorOf scalar(S v) { return TensorOf({}, {v}); }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    bool same_shape(const TensorOf& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (S v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

using Tensor = TensorOf<float>;

template <class To, class From>
TensorOf<To> tensor_cast(const TensorOf<From>& t) {
    std::vector<To> d(t.data.size());
    for (size_t i = 0; i < d.size(); ++i) d[i] = static_cast<To>(t.data[i]);
    TensorOf<To> out;
    out.shape = t.shape;
    out.data = std::move(d);
    return out;
}

// Named parameter collection; std::map keeps iteration order stable,
// which every deterministic reduction in the toolkit relies on.
template <class S>
using StoreOf = std::map<std::string, TensorOf<S>>;

using ParameterStore = StoreOf<float>;
using GradientMap = std::map<std::string, Tensor>;

template <class To, class From>
StoreOf<To> store_cast(const StoreOf<From>& s) {
    StoreOf<To> out;
    for (const auto& [k, v] : s) out.emplace(k, tensor_cast<To>(v));
    return out;
}

} // namespace nmt
