// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nmt/errors.hpp"
#include "nmt/rng.hpp"
#include "nmt/tensor.hpp"

namespace nmt {

enum class Reduction { mean, sum };

// Reverse-mode tape over dense tensors. Nodes are appended in forward
// order, so creation order is already a topological order; backward walks
// it in reverse. One graph per training step, single-threaded.
//
// Instantiated for float (training) and double (gradient-check oracles).
template <class S>
class GraphOf {
public:
    using Id = int32_t;
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using MatMap = Eigen::Map<Mat>;
    using ConstMatMap = Eigen::Map<const Mat>;

    Id leaf(TensorOf<S> value, bool requires_grad) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }
    Id constant(TensorOf<S> value) { return leaf(std::move(value), false); }

    const TensorOf<S>& value(Id id) const { return nodes_[check(id)].value; }
    const std::vector<int64_t>& shape(Id id) const { return nodes_[check(id)].value.shape; }

    bool has_grad(Id id) const { return !nodes_[check(id)].grad.data.empty(); }
    const TensorOf<S>& grad(Id id) const {
        if (!has_grad(id)) throw ContractError("gradient not computed for node " + std::to_string(id));
        return nodes_[id].grad;
    }

    size_t size() const { return nodes_.size(); }

    // ---- elementwise and structural ops ----

    Id add(Id a, Id b) {
        require_same_shape("add", a, b);
        TensorOf<S> out = value(a);
        const auto& vb = value(b).data;
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += vb[i];
        return make(std::move(out), {a, b}, [](GraphOf& g, Id self) {
            const auto& go = g.nodes_[self].grad.data;
            Id a2 = g.nodes_[self].parents[0], b2 = g.nodes_[self].parents[1];
            if (S* da = g.grad_ptr(a2))
                for (size_t i = 0; i < go.size(); ++i) da[i] += go[i];
            if (S* db = g.grad_ptr(b2))
                for (size_t i = 0; i < go.size(); ++i) db[i] += go[i];
        });
    }

    Id sub(Id a, Id b) {
        require_same_shape("sub", a, b);
        TensorOf<S> out = value(a);
        const auto& vb = value(b).data;
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= vb[i];
        return make(std::move(out), {a, b}, [](GraphOf& g, Id self) {
            const auto& go = g.nodes_[self].grad.data;
            Id a2 = g.nodes_[self].parents[0], b2 = g.nodes_[self].parents[1];
            if (S* da = g.grad_ptr(a2))
                for (size_t i = 0; i < go.size(); ++i) da[i] += go[i];
            if (S* db = g.grad_ptr(b2))
                for (size_t i = 0; i < go.size(); ++i) db[i] -= go[i];
        });
    }

    Id mul(Id a, Id b) {
        require_same_shape("mul", a, b);
        TensorOf<S> out = value(a);
        const auto& vb = value(b).data;
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= vb[i];
        return make(std::move(out), {a, b}, [](GraphOf& g, Id self) {
            const auto& go = g.nodes_[self].grad.data;
            Id a2 = g.nodes_[self].parents[0], b2 = g.nodes_[self].parents[1];
            const auto& va = g.value(a2).data;
            const auto& vb2 = g.value(b2).data;
            if (S* da = g.grad_ptr(a2))
                for (size_t i = 0; i < go.size(); ++i) da[i] += go[i] * vb2[i];
            if (S* db = g.grad_ptr(b2))
                for (size_t i = 0; i < go.size(); ++i) db[i] += go[i] * va[i];
        });
    }

    Id scale(Id x, S c) {
        TensorOf<S> out = value(x);
        for (S& v : out.data) v *= c;
        return make(std::move(out), {x}, [c](GraphOf& g, Id self) {
            const auto& go = g.nodes_[self].grad.data;
            if (S* dx = g.grad_ptr(g.nodes_[self].parents[0]))
                for (size_t i = 0; i < go.size(); ++i) dx[i] += go[i] * c;
        });
    }

    Id relu(Id x) {
        TensorOf<S> out = value(x);
        for (S& v : out.data) v = v > S(0) ? v : S(0);
        return make(std::move(out), {x}, [](GraphOf& g, Id self) {
            const auto& go = g.nodes_[self].grad.data;
            Id p = g.nodes_[self].parents[0];
            const auto& vx = g.value(p).data;
            if (S* dx = g.grad_ptr(p))
                for (size_t i = 0; i < go.size(); ++i)
                    if (vx[i] > S(0)) dx[i] += go[i];
        });
    }

    Id sum(Id x) {
        S acc = 0;
        for (S v : value(x).data) acc += v;
        return make(TensorOf<S>::scalar(acc), {x}, [](GraphOf& g, Id self) {
            S go = g.nodes_[self].grad.data[0];
            Id p = g.nodes_[self].parents[0];
            if (S* dx = g.grad_ptr(p)) {
                size_t n = g.value(p).data.size();
                for (size_t i = 0; i < n; ++i) dx[i] += go;
            }
        });
    }

    Id mean(Id x) {
        int64_t n = value(x).numel();
        return scale(sum(x), S(1) / static_cast<S>(n));
    }

    Id reshape(Id x, std::vector<int64_t> new_shape) {
        if (shape_numel(new_shape) != value(x).numel())
            throw DimensionError("reshape from " + shape_str(shape(x)) + " to " + shape_str(new_shape));
        TensorOf<S> out;
        out.shape = std::move(new_shape);
        out.data = value(x).data;
        return make(std::move(out), {x}, [](GraphOf& g, Id self) {
            const auto& go = g.nodes_[self].grad.data;
            if (S* dx = g.grad_ptr(g.nodes_[self].parents[0]))
                for (size_t i = 0; i < go.size(); ++i) dx[i] += go[i];
        });
    }

    // x: (..., D) plus bias (D), broadcast over leading dims.
    Id add_bias(Id x, Id b) {
        const auto& xs = shape(x);
        const auto& bs = shape(b);
        if (bs.size() != 1 || xs.empty() || xs.back() != bs[0])
            throw DimensionError("add_bias " + shape_str(xs) + " vs " + shape_str(bs));
        int64_t d = bs[0];
        TensorOf<S> out = value(x);
        const auto& vb = value(b).data;
        int64_t rows = out.numel() / d;
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < d; ++j) out.data[r * d + j] += vb[j];
        return make(std::move(out), {x, b}, [d](GraphOf& g, Id self) {
            const auto& go = g.nodes_[self].grad.data;
            Id xa = g.nodes_[self].parents[0], ba = g.nodes_[self].parents[1];
            int64_t rows = static_cast<int64_t>(go.size()) / d;
            if (S* dx = g.grad_ptr(xa))
                for (size_t i = 0; i < go.size(); ++i) dx[i] += go[i];
            if (S* db = g.grad_ptr(ba))
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t j = 0; j < d; ++j) db[j] += go[r * d + j];
        });
    }

    // x: (B, L, D) plus p: (L, D), broadcast over the batch dimension.
    Id add_seq(Id x, Id p) {
        const auto& xs = shape(x);
        const auto& ps = shape(p);
        if (xs.size() != 3 || ps.size() != 2 || xs[1] != ps[0] || xs[2] != ps[1])
            throw DimensionError("add_seq " + shape_str(xs) + " vs " + shape_str(ps));
        int64_t b = xs[0], ld = ps[0] * ps[1];
        TensorOf<S> out = value(x);
        const auto& vp = value(p).data;
        for (int64_t i = 0; i < b; ++i)
            for (int64_t j = 0; j < ld; ++j) out.data[i * ld + j] += vp[j];
        return make(std::move(out), {x, p}, [b, ld](GraphOf& g, Id self) {
            const auto& go = g.nodes_[self].grad.data;
            Id xa = g.nodes_[self].parents[0], pa = g.nodes_[self].parents[1];
            if (S* dx = g.grad_ptr(xa))
                for (size_t i = 0; i < go.size(); ++i) dx[i] += go[i];
            if (S* dp = g.grad_ptr(pa))
                for (int64_t i = 0; i < b; ++i)
                    for (int64_t j = 0; j < ld; ++j) dp[j] += go[i * ld + j];
        });
    }

    // ---- matrix products (Eigen-backed kernels) ----

    Id matmul(Id a, Id b) {
        const auto& as = shape(a);
        const auto& bs = shape(b);
        if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0])
            throw DimensionError("matmul " + shape_str(as) + " x " + shape_str(bs));
        int64_t m = as[0], k = as[1], n = bs[1];
        TensorOf<S> out = TensorOf<S>::zeros({m, n});
        ConstMatMap A(value(a).data.data(), m, k), B(value(b).data.data(), k, n);
        MatMap(out.data.data(), m, n) = A * B;
        return make(std::move(out), {a, b}, [m, k, n](GraphOf& g, Id self) {
            Id a2 = g.nodes_[self].parents[0], b2 = g.nodes_[self].parents[1];
            ConstMatMap GO(g.nodes_[self].grad.data.data(), m, n);
            ConstMatMap A(g.value(a2).data.data(), m, k), B(g.value(b2).data.data(), k, n);
            if (S* da = g.grad_ptr(a2)) MatMap(da, m, k) += GO * B.transpose();
            if (S* db = g.grad_ptr(b2)) MatMap(db, k, n) += A.transpose() * GO;
        });
    }

    // a: (m, k), b: (n, k) -> a * b^T: (m, n). Used for tied output heads.
    Id matmul_nt(Id a, Id b) {
        const auto& as = shape(a);
        const auto& bs = shape(b);
        if (as.size() != 2 || bs.size() != 2 || as[1] != bs[1])
            throw DimensionError("matmul_nt " + shape_str(as) + " x " + shape_str(bs));
        int64_t m = as[0], k = as[1], n = bs[0];
        TensorOf<S> out = TensorOf<S>::zeros({m, n});
        ConstMatMap A(value(a).data.data(), m, k), B(value(b).data.data(), n, k);
        MatMap(out.data.data(), m, n) = A * B.transpose();
        return make(std::move(out), {a, b}, [m, k, n](GraphOf& g, Id self) {
            Id a2 = g.nodes_[self].parents[0], b2 = g.nodes_[self].parents[1];
            ConstMatMap GO(g.nodes_[self].grad.data.data(), m, n);
            ConstMatMap A(g.value(a2).data.data(), m, k), B(g.value(b2).data.data(), n, k);
            if (S* da = g.grad_ptr(a2)) MatMap(da, m, k) += GO * B;
            if (S* db = g.grad_ptr(b2)) MatMap(db, n, k) += GO.transpose() * A;
        });
    }

    // Batched products for attention. a: (N, m, k), b: (N, k, n) or (N, n, k).
    Id bmm(Id a, Id b) {
        const auto& as = shape(a);
        const auto& bs = shape(b);
        if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0] || as[2] != bs[1])
            throw DimensionError("bmm " + shape_str(as) + " x " + shape_str(bs));
        int64_t N = as[0], m = as[1], k = as[2], n = bs[2];
        TensorOf<S> out = TensorOf<S>::zeros({N, m, n});
        for (int64_t i = 0; i < N; ++i) {
            ConstMatMap A(value(a).data.data() + i * m * k, m, k);
            ConstMatMap B(value(b).data.data() + i * k * n, k, n);
            MatMap(out.data.data() + i * m * n, m, n) = A * B;
        }
        return make(std::move(out), {a, b}, [N, m, k, n](GraphOf& g, Id self) {
            Id a2 = g.nodes_[self].parents[0], b2 = g.nodes_[self].parents[1];
            S* da = g.grad_ptr(a2);
            S* db = g.grad_ptr(b2);
            for (int64_t i = 0; i < N; ++i) {
                ConstMatMap GO(g.nodes_[self].grad.data.data() + i * m * n, m, n);
                ConstMatMap A(g.value(a2).data.data() + i * m * k, m, k);
                ConstMatMap B(g.value(b2).data.data() + i * k * n, k, n);
                if (da) MatMap(da + i * m * k, m, k) += GO * B.transpose();
                if (db) MatMap(db + i * k * n, k, n) += A.transpose() * GO;
            }
        });
    }

    Id bmm_nt(Id a, Id b) {
        const auto& as = shape(a);
        const auto& bs = shape(b);
        if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0] || as[2] != bs[2])
            throw DimensionError("bmm_nt " + shape_str(as) + " x " + shape_str(bs));
        int64_t N = as[0], m = as[1], k = as[2], n = bs[1];
        TensorOf<S> out = TensorOf<S>::zeros({N, m, n});
        for (int64_t i = 0; i < N; ++i) {
            ConstMatMap A(value(a).data.data() + i * m * k, m, k);
            ConstMatMap B(value(b).data.data() + i * n * k, n, k);
            MatMap(out.data.data() + i * m * n, m, n) = A * B.transpose();
        }
        return make(std::move(out), {a, b}, [N, m, k, n](GraphOf& g, Id self) {
            Id a2 = g.nodes_[self].parents[0], b2 = g.nodes_[self].parents[1];
            S* da = g.grad_ptr(a2);
            S* db = g.grad_ptr(b2);
            for (int64_t i = 0; i < N; ++i) {
                ConstMatMap GO(g.nodes_[self].grad.data.data() + i * m * n, m, n);
                ConstMatMap A(g.value(a2).data.data() + i * m * k, m, k);
                ConstMatMap B(g.value(b2).data.data() + i * n * k, n, k);
                if (da) MatMap(da + i * m * k, m, k) += GO * B;
                if (db) MatMap(db + i * n * k, n, k) += GO.transpose() * A;
            }
        });
    }

    // ---- attention head reshuffles ----

    // (B, L, D) -> (B*H, L, D/H)
    Id split_heads(Id x, int64_t heads) {
        const auto& xs = shape(x);
        if (xs.size() != 3 || xs[2] % heads != 0)
            throw DimensionError("split_heads on " + shape_str(xs) + " with " + std::to_string(heads) + " heads");
        int64_t B = xs[0], L = xs[1], D = xs[2], Dh = D / heads;
        TensorOf<S> out = TensorOf<S>::zeros({B * heads, L, Dh});
        const auto& vx = value(x).data;
        for (int64_t b = 0; b < B; ++b)
            for (int64_t h = 0; h < heads; ++h)
                for (int64_t l = 0; l < L; ++l)
                    std::copy_n(&vx[(b * L + l) * D + h * Dh], Dh, &out.data[(((b * heads + h) * L) + l) * Dh]);
        return make(std::move(out), {x}, [B, L, D, Dh, heads](GraphOf& g, Id self) {
            const auto& go = g.nodes_[self].grad.data;
            if (S* dx = g.grad_ptr(g.nodes_[self].parents[0]))
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t h = 0; h < heads; ++h)
                        for (int64_t l = 0; l < L; ++l)
                            for (int64_t c = 0; c < Dh; ++c)
                                dx[(b * L + l) * D + h * Dh + c] += go[(((b * heads + h) * L) + l) * Dh + c];
        });
    }

    // (B*H, L, Dh) -> (B, L, H*Dh)
    Id merge_heads(Id x, int64_t heads) {
        const auto& xs = shape(x);
        if (xs.size() != 3 || xs[0] % heads != 0)
            throw DimensionError("merge_heads on " + shape_str(xs) + " with " + std::to_string(heads) + " heads");
        int64_t B = xs[0] / heads, L = xs[1], Dh = xs[2], D = heads * Dh;
        TensorOf<S> out = TensorOf<S>::zeros({B, L, D});
        const auto& vx = value(x).data;
        for (int64_t b = 0; b < B; ++b)
            for (int64_t h = 0; h < heads; ++h)
                for (int64_t l = 0; l < L; ++l)
                    std::copy_n(&vx[(((b * heads + h) * L) + l) * Dh], Dh, &out.data[(b * L + l) * D + h * Dh]);
        return make(std::move(out), {x}, [B, L, D, Dh, heads](GraphOf& g, Id self) {
            const auto& go = g.nodes_[self].grad.data;
            if (S* dx = g.grad_ptr(g.nodes_[self].parents[0]))
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t h = 0; h < heads; ++h)
                        for (int64_t l = 0; l < L; ++l)
                            for (int64_t c = 0; c < Dh; ++c)
                                dx[(((b * heads + h) * L) + l) * Dh + c] += go[(b * L + l) * D + h * Dh + c];
        });
    }

    // ---- normalizations and activations ----

    Id softmax(Id x, int axis) {
        const auto& xs = shape(x);
        int rank = static_cast<int>(xs.size());
        if (rank == 0) throw DimensionError("softmax on a scalar");
        if (axis < 0) axis += rank;
        if (axis < 0 || axis >= rank)
            throw DimensionError("softmax axis " + std::to_string(axis) + " invalid for " + shape_str(xs));
        int64_t alen = xs[axis];
        int64_t inner = 1;
        for (int i = axis + 1; i < rank; ++i) inner *= xs[i];
        int64_t outer = value(x).numel() / (alen * inner);
        TensorOf<S> out = value(x);
        softmax_inplace(out.data.data(), outer, alen, inner);
        return make(std::move(out), {x}, [outer, alen, inner](GraphOf& g, Id self) {
            const auto& y = g.nodes_[self].value.data;
            const auto& go = g.nodes_[self].grad.data;
            if (S* dx = g.grad_ptr(g.nodes_[self].parents[0])) {
                for (int64_t o = 0; o < outer; ++o)
                    for (int64_t i = 0; i < inner; ++i) {
                        int64_t base = o * alen * inner + i;
                        S dot = 0;
                        for (int64_t a = 0; a < alen; ++a) dot += go[base + a * inner] * y[base + a * inner];
                        for (int64_t a = 0; a < alen; ++a) {
                            int64_t idx = base + a * inner;
                            dx[idx] += y[idx] * (go[idx] - dot);
                        }
                    }
            }
        });
    }

    static constexpr double kLayerNormEps = 1e-6;

    // Normalize over the last dimension, then affine transform.
    Id layer_norm(Id x, Id gain, Id bias) {
        const auto& xs = shape(x);
        const auto& gs = shape(gain);
        const auto& bs = shape(bias);
        if (xs.empty() || gs.size() != 1 || bs.size() != 1 || gs[0] != xs.back() || bs[0] != xs.back())
            throw DimensionError("layer_norm " + shape_str(xs) + " gain " + shape_str(gs) + " bias " + shape_str(bs));
        int64_t d = xs.back();
        int64_t rows = value(x).numel() / d;
        TensorOf<S> out = TensorOf<S>::zeros(xs);
        const auto& vx = value(x).data;
        const auto& vg = value(gain).data;
        const auto& vb = value(bias).data;
        for (int64_t r = 0; r < rows; ++r) {
            S mu = 0, var = 0;
            for (int64_t j = 0; j < d; ++j) mu += vx[r * d + j];
            mu /= static_cast<S>(d);
            for (int64_t j = 0; j < d; ++j) {
                S c = vx[r * d + j] - mu;
                var += c * c;
            }
            var /= static_cast<S>(d);
            S inv = S(1) / std::sqrt(var + static_cast<S>(kLayerNormEps));
            for (int64_t j = 0; j < d; ++j)
                out.data[r * d + j] = (vx[r * d + j] - mu) * inv * vg[j] + vb[j];
        }
        return make(std::move(out), {x, gain, bias}, [d, rows](GraphOf& g, Id self) {
            Id xa = g.nodes_[self].parents[0];
            Id ga = g.nodes_[self].parents[1];
            Id ba = g.nodes_[self].parents[2];
            const auto& vx = g.value(xa).data;
            const auto& vg = g.value(ga).data;
            const auto& go = g.nodes_[self].grad.data;
            S* dx = g.grad_ptr(xa);
            S* dg = g.grad_ptr(ga);
            S* db = g.grad_ptr(ba);
            std::vector<S> xhat(static_cast<size_t>(d));
            for (int64_t r = 0; r < rows; ++r) {
                S mu = 0, var = 0;
                for (int64_t j = 0; j < d; ++j) mu += vx[r * d + j];
                mu /= static_cast<S>(d);
                for (int64_t j = 0; j < d; ++j) {
                    S c = vx[r * d + j] - mu;
                    var += c * c;
                }
                var /= static_cast<S>(d);
                S inv = S(1) / std::sqrt(var + static_cast<S>(kLayerNormEps));
                for (int64_t j = 0; j < d; ++j) xhat[j] = (vx[r * d + j] - mu) * inv;
                if (dg)
                    for (int64_t j = 0; j < d; ++j) dg[j] += go[r * d + j] * xhat[j];
                if (db)
                    for (int64_t j = 0; j < d; ++j) db[j] += go[r * d + j];
                if (dx) {
                    S mean_dxhat = 0, mean_dxhat_xhat = 0;
                    for (int64_t j = 0; j < d; ++j) {
                        S dxh = go[r * d + j] * vg[j];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xhat[j];
                    }
                    mean_dxhat /= static_cast<S>(d);
                    mean_dxhat_xhat /= static_cast<S>(d);
                    for (int64_t j = 0; j < d; ++j) {
                        S dxh = go[r * d + j] * vg[j];
                        dx[r * d + j] += inv * (dxh - mean_dxhat - xhat[j] * mean_dxhat_xhat);
                    }
                }
            }
        });
    }

    // ---- lookup, dropout, losses ----

    // table: (V, D); ids are plain data, not graph nodes. Output (n, D).
    Id embedding(Id table, std::vector<int32_t> ids) {
        const auto& ts = shape(table);
        if (ts.size() != 2) throw DimensionError("embedding table must be 2-d, got " + shape_str(ts));
        int64_t V = ts[0], D = ts[1];
        for (int32_t id : ids)
            if (id < 0 || id >= V)
                throw IndexError("token id " + std::to_string(id) + " out of range for vocab " + std::to_string(V));
        TensorOf<S> out = TensorOf<S>::zeros({static_cast<int64_t>(ids.size()), D});
        const auto& vt = value(table).data;
        for (size_t i = 0; i < ids.size(); ++i)
            std::copy_n(&vt[static_cast<int64_t>(ids[i]) * D], D, &out.data[i * D]);
        auto ids_ptr = std::make_shared<std::vector<int32_t>>(std::move(ids));
        return make(std::move(out), {table}, [ids_ptr, D](GraphOf& g, Id self) {
            const auto& go = g.nodes_[self].grad.data;
            if (S* dt = g.grad_ptr(g.nodes_[self].parents[0])) {
                const auto& v = *ids_ptr;
                for (size_t i = 0; i < v.size(); ++i)
                    for (int64_t j = 0; j < D; ++j) dt[static_cast<int64_t>(v[i]) * D + j] += go[i * D + j];
            }
        });
    }

    // Inverted dropout; scales kept activations by 1/(1-rate).
    Id dropout(Id x, S rate, Rng& rng) {
        if (rate <= S(0)) return x;
        if (rate >= S(1)) throw ConfigError("dropout rate must be < 1");
        auto mask = std::make_shared<std::vector<S>>(value(x).data.size());
        S keep_scale = S(1) / (S(1) - rate);
        TensorOf<S> out = value(x);
        for (size_t i = 0; i < out.data.size(); ++i) {
            S m = static_cast<S>(rng.uniform()) < rate ? S(0) : keep_scale;
            (*mask)[i] = m;
            out.data[i] *= m;
        }
        return make(std::move(out), {x}, [mask](GraphOf& g, Id self) {
            const auto& go = g.nodes_[self].grad.data;
            if (S* dx = g.grad_ptr(g.nodes_[self].parents[0]))
                for (size_t i = 0; i < go.size(); ++i) dx[i] += go[i] * (*mask)[i];
        });
    }

    // logits: (P, V); per-position negative log-likelihood of targets,
    // reduced over unmasked positions. Masked positions contribute nothing.
    Id cross_entropy(Id logits, std::vector<int32_t> targets, std::vector<float> mask, Reduction red) {
        const auto& ls = shape(logits);
        if (ls.size() != 2) throw DimensionError("cross_entropy logits must be 2-d, got " + shape_str(ls));
        int64_t P = ls[0], V = ls[1];
        if (static_cast<int64_t>(targets.size()) != P || static_cast<int64_t>(mask.size()) != P)
            throw DimensionError("cross_entropy targets/mask length " + std::to_string(targets.size()) + "/" +
                                 std::to_string(mask.size()) + " vs " + std::to_string(P) + " positions");
        double n_unmasked = 0;
        for (float m : mask) n_unmasked += m != 0.0f ? 1.0 : 0.0;
        if (n_unmasked == 0) throw DataError("cross_entropy: all positions masked");
        const auto& vl = value(logits).data;
        double acc = 0;
        for (int64_t p = 0; p < P; ++p) {
            if (mask[p] == 0.0f) continue;
            int32_t t = targets[p];
            if (t < 0 || t >= V)
                throw IndexError("target id " + std::to_string(t) + " out of vocabulary range " + std::to_string(V));
            const S* row = &vl[p * V];
            S mx = row[0];
            for (int64_t v = 1; v < V; ++v) mx = std::max(mx, row[v]);
            double se = 0;
            for (int64_t v = 0; v < V; ++v) se += std::exp(static_cast<double>(row[v] - mx));
            acc += std::log(se) + static_cast<double>(mx) - static_cast<double>(row[t]);
        }
        S weight = red == Reduction::mean ? static_cast<S>(1.0 / n_unmasked) : S(1);
        S loss = red == Reduction::mean ? static_cast<S>(acc / n_unmasked) : static_cast<S>(acc);
        auto tgt = std::make_shared<std::vector<int32_t>>(std::move(targets));
        auto msk = std::make_shared<std::vector<float>>(std::move(mask));
        return make(TensorOf<S>::scalar(loss), {logits}, [tgt, msk, weight, P, V](GraphOf& g, Id self) {
            S go = g.nodes_[self].grad.data[0];
            Id la = g.nodes_[self].parents[0];
            const auto& vl = g.value(la).data;
            if (S* dl = g.grad_ptr(la)) {
                for (int64_t p = 0; p < P; ++p) {
                    if ((*msk)[p] == 0.0f) continue;
                    const S* row = &vl[p * V];
                    S mx = row[0];
                    for (int64_t v = 1; v < V; ++v) mx = std::max(mx, row[v]);
                    double se = 0;
                    for (int64_t v = 0; v < V; ++v) se += std::exp(static_cast<double>(row[v] - mx));
                    S w = go * weight;
                    for (int64_t v = 0; v < V; ++v) {
                        S prob = static_cast<S>(std::exp(static_cast<double>(row[v] - mx)) / se);
                        dl[p * V + v] += w * (prob - ((*tgt)[p] == v ? S(1) : S(0)));
                    }
                }
            }
        });
    }

    // Fused quadratic anchoring penalty: sum_i (lambda/2) F_i (theta_i - anchor_i)^2
    // over all listed parameters. Anchor/fisher tensors must outlive the graph.
    struct QuadTerm {
        Id param;
        const TensorOf<S>* anchor;
        const TensorOf<S>* fisher;
    };
    Id quad_anchoring_penalty(std::vector<QuadTerm> terms, S lambda) {
        using Arr = Eigen::Array<S, Eigen::Dynamic, 1>;
        using ConstArrMap = Eigen::Map<const Arr>;
        double acc = 0;
        std::vector<Id> parents;
        for (const auto& t : terms) {
            const auto& v = value(t.param);
            if (!v.same_shape(*t.anchor) || !v.same_shape(*t.fisher))
                throw ContractError("anchoring penalty shape mismatch on node " + std::to_string(t.param));
            auto n = static_cast<Eigen::Index>(v.data.size());
            ConstArrMap th(v.data.data(), n), star(t.anchor->data.data(), n), f(t.fisher->data.data(), n);
            acc += 0.5 * static_cast<double>(lambda) *
                   static_cast<double>((f * (th - star).square()).template cast<double>().sum());
            parents.push_back(t.param);
        }
        auto tp = std::make_shared<std::vector<QuadTerm>>(std::move(terms));
        return make(TensorOf<S>::scalar(static_cast<S>(acc)), std::move(parents), [tp, lambda](GraphOf& g, Id self) {
            if (lambda == S(0)) return;
            S go = g.nodes_[self].grad.data[0];
            for (const auto& t : *tp) {
                const auto& v = g.value(t.param).data;
                if (S* dp = g.grad_ptr(t.param)) {
                    auto n = static_cast<Eigen::Index>(v.size());
                    ConstArrMap th(v.data(), n), star(t.anchor->data.data(), n), f(t.fisher->data.data(), n);
                    Eigen::Map<Arr>(dp, n) += (go * lambda) * f * (th - star);
                }
            }
        });
    }

    // ---- backward ----

    // Reverse pass from a scalar loss. Gradients are produced for every
    // requires_grad node reachable from the loss; unreachable parameters
    // simply never get a gradient tensor.
    void backward(Id loss) {
        if (value(loss).numel() != 1)
            throw ContractError("backward requires a scalar loss, got shape " + shape_str(shape(loss)));
        std::vector<char> reach(nodes_.size(), 0);
        std::vector<Id> stack{loss};
        reach[loss] = 1;
        while (!stack.empty()) {
            Id id = stack.back();
            stack.pop_back();
            for (Id p : nodes_[id].parents) {
                if (!reach[p] && nodes_[p].requires_grad) {
                    reach[p] = 1;
                    stack.push_back(p);
                }
            }
        }
        for (size_t i = 0; i < nodes_.size(); ++i) {
            if (reach[i] && nodes_[i].requires_grad && nodes_[i].grad.data.empty())
                nodes_[i].grad = TensorOf<S>::zeros(nodes_[i].value.shape);
        }
        if (nodes_[loss].grad.data.empty()) nodes_[loss].grad = TensorOf<S>::zeros(nodes_[loss].value.shape);
        nodes_[loss].grad.data[0] = S(1);
        for (Id id = loss; id >= 0; --id) {
            if (!reach[id] || !nodes_[id].backprop) continue;
            nodes_[id].backprop(*this, id);
        }
    }

private:
    struct Node {
        TensorOf<S> value;
        TensorOf<S> grad;
        bool requires_grad = false;
        std::vector<Id> parents;
        std::function<void(GraphOf&, Id)> backprop;
    };

    std::vector<Node> nodes_;

    Id check(Id id) const {
        if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
            throw ContractError("invalid graph node id " + std::to_string(id));
        return id;
    }

    void require_same_shape(const char* op, Id a, Id b) const {
        if (!value(a).same_shape(value(b)))
            throw DimensionError(std::string(op) + " shape mismatch: " + shape_str(shape(a)) + " vs " +
                                 shape_str(shape(b)));
    }

    Id make(TensorOf<S> value, std::vector<Id> parents, std::function<void(GraphOf&, Id)> backprop) {
        Node n;
        n.value = std::move(value);
        for (Id p : parents) check(p);
        n.requires_grad = false;
        for (Id p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
        n.parents = std::move(parents);
        if (n.requires_grad) n.backprop = std::move(backprop);
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }

    // Returns the gradient buffer of a node, or nullptr when no gradient
    // flows there (constant, or unreachable from the loss).
    S* grad_ptr(Id id) {
        if (!nodes_[id].requires_grad || nodes_[id].grad.data.empty()) return nullptr;
        return nodes_[id].grad.data.data();
    }

    static void softmax_inplace(S* data, int64_t outer, int64_t alen, int64_t inner) {
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t i = 0; i < inner; ++i) {
                int64_t base = o * alen * inner + i;
                S mx = data[base];
                for (int64_t a = 1; a < alen; ++a) mx = std::max(mx, data[base + a * inner]);
                double se = 0;
                for (int64_t a = 0; a < alen; ++a) se += std::exp(static_cast<double>(data[base + a * inner] - mx));
                for (int64_t a = 0; a < alen; ++a)
                    data[base + a * inner] =
                        static_cast<S>(std::exp(static_cast<double>(data[base + a * inner] - mx)) / se);
            }
    }
};

using Graph = GraphOf<float>;

} // namespace nmt
