// SPDX-License-Identifier: Apache-2.0
//
// wchlab - dimensionality-guided sizing laboratory for wireless channel models
// Copyright (C) 2026 the wchlab authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef WCH_TENSOR_HPP
#define WCH_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "wch/errors.hpp"

namespace wch::nn {

/// Dense 2-D tensor of 64-bit reals, row-major. Vectors are 1 x n rows.
struct Tensor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

    double &at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    const double &at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
    std::size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }
    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }
};

using EigenMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using EigenCMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline EigenMap map(Tensor &t) { return EigenMap(t.v.data(), long(t.rows), long(t.cols)); }
inline EigenCMap map(const Tensor &t) {
    return EigenCMap(t.v.data(), long(t.rows), long(t.cols));
}

/// One node of the recorded computation. Leaves hold parameters or constants;
/// interior nodes remember their parents and how to push gradient to them.
struct Node {
    Tensor value;
    Tensor grad; // allocated on first use, same shape as value
    bool needs_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node &)> backprop; // empty for leaves

    void ensure_grad() {
        if (grad.empty())
            grad = Tensor(value.rows, value.cols);
    }
    void clear_grad() { grad = Tensor(); }
};

using Var = std::shared_ptr<Node>;

inline Var leaf(Tensor value, bool needs_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->needs_grad = needs_grad;
    return n;
}

inline Var constant(Tensor value) { return leaf(std::move(value), false); }

namespace detail {

inline void shape_check(bool ok, const char *op, const Tensor &a, const Tensor &b) {
    if (!ok)
        throw_error(ErrorCode::invalid_shape, std::string(op) + ": incompatible shapes " +
                                                  a.shape_str() + " and " + b.shape_str());
}

inline Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node &)> bp) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto &p : n->parents)
        n->needs_grad = n->needs_grad || p->needs_grad;
    if (n->needs_grad)
        n->backprop = std::move(bp);
    return n;
}

inline void accumulate(Node &parent, const Eigen::MatrixXd &delta) {
    if (!parent.needs_grad)
        return;
    parent.ensure_grad();
    map(parent.grad) += delta;
}

} // namespace detail

/// C = op(A) * op(B) with optional transposes.
inline Var matmul(const Var &a, const Var &b, bool trans_a = false, bool trans_b = false) {
    const std::size_t am = trans_a ? a->value.cols : a->value.rows;
    const std::size_t ak = trans_a ? a->value.rows : a->value.cols;
    const std::size_t bk = trans_b ? b->value.cols : b->value.rows;
    const std::size_t bn = trans_b ? b->value.rows : b->value.cols;
    detail::shape_check(ak == bk, "matmul", a->value, b->value);

    Tensor out(am, bn);
    const auto A = map(a->value);
    const auto B = map(b->value);
    if (!trans_a && !trans_b)
        map(out) = A * B;
    else if (trans_a && !trans_b)
        map(out) = A.transpose() * B;
    else if (!trans_a && trans_b)
        map(out) = A * B.transpose();
    else
        map(out) = A.transpose() * B.transpose();

    return detail::make_op(std::move(out), {a, b}, [trans_a, trans_b](Node &n) {
        const auto dC = map(n.grad);
        Node &pa = *n.parents[0];
        Node &pb = *n.parents[1];
        const auto A = map(pa.value);
        const auto B = map(pb.value);
        if (!trans_a && !trans_b) {
            detail::accumulate(pa, dC * B.transpose());
            detail::accumulate(pb, A.transpose() * dC);
        } else if (trans_a && !trans_b) {
            detail::accumulate(pa, B * dC.transpose());
            detail::accumulate(pb, A * dC);
        } else if (!trans_a && trans_b) {
            detail::accumulate(pa, dC * B);
            detail::accumulate(pb, dC.transpose() * A);
        } else {
            detail::accumulate(pa, B.transpose() * dC.transpose());
            detail::accumulate(pb, dC.transpose() * A.transpose());
        }
    });
}

inline Var add(const Var &a, const Var &b) {
    detail::shape_check(a->value.rows == b->value.rows && a->value.cols == b->value.cols,
                        "add", a->value, b->value);
    Tensor out = a->value;
    map(out) += map(b->value);
    return detail::make_op(std::move(out), {a, b}, [](Node &n) {
        detail::accumulate(*n.parents[0], map(n.grad));
        detail::accumulate(*n.parents[1], map(n.grad));
    });
}

/// Adds a 1 x n bias row to every row of a (the only broadcast in the engine).
inline Var add_row_bias(const Var &a, const Var &bias) {
    detail::shape_check(bias->value.rows == 1 && bias->value.cols == a->value.cols,
                        "add_row_bias", a->value, bias->value);
    Tensor out = a->value;
    map(out).rowwise() += Eigen::RowVectorXd::Map(bias->value.v.data(), long(bias->value.cols));
    return detail::make_op(std::move(out), {a, bias}, [](Node &n) {
        detail::accumulate(*n.parents[0], map(n.grad));
        detail::accumulate(*n.parents[1], map(n.grad).colwise().sum());
    });
}

inline Var scale(const Var &a, double s) {
    Tensor out = a->value;
    map(out) *= s;
    return detail::make_op(std::move(out), {a},
                           [s](Node &n) { detail::accumulate(*n.parents[0], map(n.grad) * s); });
}

/// Row-wise layer normalization with affine parameters (1 x n each):
/// y = gain .* (x - mean) / sqrt(var + eps) + bias.
inline Var layer_norm(const Var &x, const Var &gain, const Var &bias, double eps = 1e-5) {
    detail::shape_check(gain->value.rows == 1 && gain->value.cols == x->value.cols,
                        "layer_norm", x->value, gain->value);
    detail::shape_check(bias->value.rows == 1 && bias->value.cols == x->value.cols,
                        "layer_norm", x->value, bias->value);
    const std::size_t rows = x->value.rows, cols = x->value.cols;
    Tensor out(rows, cols);
    // cache the normalized values and inverse stddev for the backward pass
    auto xhat = std::make_shared<Tensor>(rows, cols);
    auto inv_std = std::make_shared<std::vector<double>>(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        const double *row = x->value.v.data() + i * cols;
        double mean = 0.0;
        for (std::size_t j = 0; j < cols; ++j)
            mean += row[j];
        mean /= double(cols);
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j)
            var += (row[j] - mean) * (row[j] - mean);
        var /= double(cols);
        const double inv = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = inv;
        for (std::size_t j = 0; j < cols; ++j) {
            const double xh = (row[j] - mean) * inv;
            xhat->at(i, j) = xh;
            out.at(i, j) = gain->value.v[j] * xh + bias->value.v[j];
        }
    }
    return detail::make_op(std::move(out), {x, gain, bias}, [xhat, inv_std](Node &n) {
        Node &px = *n.parents[0];
        Node &pg = *n.parents[1];
        Node &pb = *n.parents[2];
        const std::size_t rows = n.value.rows, cols = n.value.cols;
        Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(long(rows), long(cols));
        Eigen::MatrixXd dg = Eigen::MatrixXd::Zero(1, long(cols));
        Eigen::MatrixXd db = Eigen::MatrixXd::Zero(1, long(cols));
        for (std::size_t i = 0; i < rows; ++i) {
            double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
                const double dy = n.grad.at(i, j);
                const double xh = xhat->at(i, j);
                dg(0, long(j)) += dy * xh;
                db(0, long(j)) += dy;
                const double dxh = dy * pg.value.v[j];
                mean_dxhat += dxh;
                mean_dxhat_xhat += dxh * xh;
            }
            mean_dxhat /= double(cols);
            mean_dxhat_xhat /= double(cols);
            const double inv = (*inv_std)[i];
            for (std::size_t j = 0; j < cols; ++j) {
                const double dxh = n.grad.at(i, j) * pg.value.v[j];
                dx(long(i), long(j)) =
                    inv * (dxh - mean_dxhat - xhat->at(i, j) * mean_dxhat_xhat);
            }
        }
        detail::accumulate(px, dx);
        detail::accumulate(pg, dg);
        detail::accumulate(pb, db);
    });
}

/// Exact GELU: 0.5 x (1 + erf(x / sqrt(2))).
inline Var gelu(const Var &a) {
    Tensor out = a->value;
    for (auto &v : out.v)
        v = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
    return detail::make_op(std::move(out), {a}, [](Node &n) {
        Node &p = *n.parents[0];
        Eigen::MatrixXd d(static_cast<Eigen::Index>(n.value.rows),
                          static_cast<Eigen::Index>(n.value.cols));
        constexpr double inv_sqrt_2pi = 0.3989422804014327;
        for (std::size_t i = 0; i < n.value.size(); ++i) {
            const double x = p.value.v[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
            d(long(i / n.value.cols), long(i % n.value.cols)) =
                n.grad.v[i] * (cdf + x * pdf);
        }
        detail::accumulate(p, d);
    });
}

/// Row-wise softmax with the usual max-shift for stability.
inline Var softmax_rows(const Var &a) {
    const std::size_t rows = a->value.rows, cols = a->value.cols;
    Tensor out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const double *row = a->value.v.data() + i * cols;
        const double m = *std::max_element(row, row + cols);
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            const double e = std::exp(row[j] - m);
            out.at(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < cols; ++j)
            out.at(i, j) /= sum;
    }
    return detail::make_op(std::move(out), {a}, [](Node &n) {
        Node &p = *n.parents[0];
        const std::size_t rows = n.value.rows, cols = n.value.cols;
        Eigen::MatrixXd d(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t i = 0; i < rows; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < cols; ++j)
                dot += n.grad.at(i, j) * n.value.at(i, j);
            for (std::size_t j = 0; j < cols; ++j)
                d(long(i), long(j)) = n.value.at(i, j) * (n.grad.at(i, j) - dot);
        }
        detail::accumulate(p, d);
    });
}

inline Var slice_cols(const Var &a, std::size_t c0, std::size_t c1) {
    require(c0 < c1 && c1 <= a->value.cols, ErrorCode::invalid_shape,
            "slice_cols: range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                ") out of bounds for " + a->value.shape_str());
    const std::size_t rows = a->value.rows, w = c1 - c0;
    Tensor out(rows, w);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < w; ++j)
            out.at(i, j) = a->value.at(i, c0 + j);
    return detail::make_op(std::move(out), {a}, [c0, w](Node &n) {
        Node &p = *n.parents[0];
        if (!p.needs_grad)
            return;
        p.ensure_grad();
        for (std::size_t i = 0; i < n.value.rows; ++i)
            for (std::size_t j = 0; j < w; ++j)
                p.grad.at(i, c0 + j) += n.grad.at(i, j);
    });
}

inline Var concat_cols(const std::vector<Var> &parts) {
    require(!parts.empty(), ErrorCode::invalid_argument, "concat_cols: no inputs");
    const std::size_t rows = parts.front()->value.rows;
    std::size_t cols = 0;
    for (const auto &p : parts) {
        detail::shape_check(p->value.rows == rows, "concat_cols", parts.front()->value,
                            p->value);
        cols += p->value.cols;
    }
    Tensor out(rows, cols);
    std::size_t off = 0;
    for (const auto &p : parts) {
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < p->value.cols; ++j)
                out.at(i, off + j) = p->value.at(i, j);
        off += p->value.cols;
    }
    return detail::make_op(std::move(out), parts, [](Node &n) {
        std::size_t off = 0;
        for (auto &pp : n.parents) {
            Node &p = *pp;
            if (p.needs_grad) {
                p.ensure_grad();
                for (std::size_t i = 0; i < p.value.rows; ++i)
                    for (std::size_t j = 0; j < p.value.cols; ++j)
                        p.grad.at(i, j) += n.grad.at(i, off + j);
            }
            off += p.value.cols;
        }
    });
}

/// Selects rows of a by index (repeats allowed).
inline Var gather_rows(const Var &a, const std::vector<std::uint32_t> &idx) {
    require(!idx.empty(), ErrorCode::invalid_argument, "gather_rows: empty index list");
    for (const auto i : idx)
        require(i < a->value.rows, ErrorCode::invalid_shape,
                "gather_rows: index " + std::to_string(i) + " out of range for " +
                    a->value.shape_str());
    const std::size_t cols = a->value.cols;
    Tensor out(idx.size(), cols);
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < cols; ++j)
            out.at(r, j) = a->value.at(idx[r], j);
    auto indices = idx;
    return detail::make_op(std::move(out), {a}, [indices](Node &n) {
        Node &p = *n.parents[0];
        if (!p.needs_grad)
            return;
        p.ensure_grad();
        for (std::size_t r = 0; r < indices.size(); ++r)
            for (std::size_t j = 0; j < n.value.cols; ++j)
                p.grad.at(indices[r], j) += n.grad.at(r, j);
    });
}

/// Builds a full row set from a pool of source rows plus a fill row: output
/// row r is source row row_source[r], or the fill row where row_source[r] is
/// negative. This is how masked token slots receive the learned mask token.
inline Var compose_rows(const Var &source, const Var &fill,
                        const std::vector<std::int32_t> &row_source) {
    detail::shape_check(fill->value.rows == 1 && fill->value.cols == source->value.cols,
                        "compose_rows", source->value, fill->value);
    require(!row_source.empty(), ErrorCode::invalid_argument, "compose_rows: empty layout");
    for (const auto s : row_source)
        require(s < std::int32_t(source->value.rows), ErrorCode::invalid_shape,
                "compose_rows: source row " + std::to_string(s) + " out of range for " +
                    source->value.shape_str());
    const std::size_t cols = source->value.cols;
    Tensor out(row_source.size(), cols);
    for (std::size_t r = 0; r < row_source.size(); ++r) {
        const double *src = row_source[r] >= 0
                                ? source->value.v.data() + std::size_t(row_source[r]) * cols
                                : fill->value.v.data();
        std::copy(src, src + cols, out.v.data() + r * cols);
    }
    auto layout = row_source;
    return detail::make_op(std::move(out), {source, fill}, [layout](Node &n) {
        Node &ps = *n.parents[0];
        Node &pf = *n.parents[1];
        const std::size_t cols = n.value.cols;
        if (ps.needs_grad)
            ps.ensure_grad();
        if (pf.needs_grad)
            pf.ensure_grad();
        for (std::size_t r = 0; r < layout.size(); ++r) {
            if (layout[r] >= 0) {
                if (ps.needs_grad)
                    for (std::size_t j = 0; j < cols; ++j)
                        ps.grad.at(std::size_t(layout[r]), j) += n.grad.at(r, j);
            } else if (pf.needs_grad) {
                for (std::size_t j = 0; j < cols; ++j)
                    pf.grad.at(0, j) += n.grad.at(r, j);
            }
        }
    });
}

/// Mean squared error over the positions where mask is non-zero:
/// sum(mask .* (pred - target)^2) / count(mask != 0). Returns a 1x1 tensor.
inline Var mse(const Var &pred, const Var &target, const Var &mask) {
    detail::shape_check(pred->value.rows == target->value.rows &&
                            pred->value.cols == target->value.cols,
                        "mse", pred->value, target->value);
    detail::shape_check(pred->value.rows == mask->value.rows &&
                            pred->value.cols == mask->value.cols,
                        "mse", pred->value, mask->value);
    std::size_t count = 0;
    double acc = 0.0;
    for (std::size_t i = 0; i < pred->value.size(); ++i) {
        if (mask->value.v[i] != 0.0) {
            const double e = pred->value.v[i] - target->value.v[i];
            acc += e * e;
            ++count;
        }
    }
    require(count > 0, ErrorCode::invalid_argument, "mse: mask selects no positions");
    Tensor out(1, 1);
    out.v[0] = acc / double(count);
    return detail::make_op(std::move(out), {pred, target, mask}, [count](Node &n) {
        Node &pp = *n.parents[0];
        Node &pt = *n.parents[1];
        const Node &pm = *n.parents[2];
        const double g = n.grad.v[0] * 2.0 / double(count);
        if (pp.needs_grad) {
            pp.ensure_grad();
            for (std::size_t i = 0; i < pp.value.size(); ++i)
                if (pm.value.v[i] != 0.0)
                    pp.grad.v[i] += g * (pp.value.v[i] - pt.value.v[i]);
        }
        if (pt.needs_grad) {
            pt.ensure_grad();
            for (std::size_t i = 0; i < pt.value.size(); ++i)
                if (pm.value.v[i] != 0.0)
                    pt.grad.v[i] -= g * (pp.value.v[i] - pt.value.v[i]);
        }
    });
}

/// Full (non-causal) multi-head self-attention over token rows. q, k, v are
/// T x E with n_heads dividing E; per head: softmax(q k^T / sqrt(dh)) v.
inline Var multi_head_attention(const Var &q, const Var &k, const Var &v,
                                std::size_t n_heads) {
    detail::shape_check(q->value.rows == k->value.rows && q->value.cols == k->value.cols,
                        "multi_head_attention", q->value, k->value);
    detail::shape_check(q->value.rows == v->value.rows && q->value.cols == v->value.cols,
                        "multi_head_attention", q->value, v->value);
    require(n_heads >= 1 && q->value.cols % n_heads == 0, ErrorCode::invalid_shape,
            "multi_head_attention: n_heads = " + std::to_string(n_heads) +
                " must divide embed width " + std::to_string(q->value.cols));
    const std::size_t dh = q->value.cols / n_heads;
    const double att_scale = 1.0 / std::sqrt(double(dh));
    std::vector<Var> heads;
    heads.reserve(n_heads);
    for (std::size_t h = 0; h < n_heads; ++h) {
        const std::size_t c0 = h * dh, c1 = (h + 1) * dh;
        const Var qh = slice_cols(q, c0, c1);
        const Var kh = slice_cols(k, c0, c1);
        const Var vh = slice_cols(v, c0, c1);
        const Var att = softmax_rows(scale(matmul(qh, kh, false, true), att_scale));
        heads.push_back(matmul(att, vh));
    }
    return n_heads == 1 ? heads.front() : concat_cols(heads);
}

/// Reverse-mode sweep from a scalar loss. Populates gradients on every
/// reachable node with needs_grad set; leaves accumulate across calls until
/// cleared by the optimizer.
inline void backward(const Var &loss) {
    require(loss != nullptr, ErrorCode::invalid_argument, "backward: null loss");
    require(loss->value.rows == 1 && loss->value.cols == 1, ErrorCode::invalid_argument,
            "backward requires a scalar loss, got " + loss->value.shape_str());
    if (!loss->needs_grad)
        return; // nothing trainable upstream

    // topological order by iterative DFS
    std::vector<Node *> order;
    std::unordered_set<Node *> seen;
    std::vector<std::pair<Node *, std::size_t>> stack{{loss.get(), 0}};
    seen.insert(loss.get());
    while (!stack.empty()) {
        auto &[node, next] = stack.back();
        if (next < node->parents.size()) {
            Node *p = node->parents[next++].get();
            if (p->needs_grad && seen.insert(p).second)
                stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss->ensure_grad();
    loss->grad.v[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node *n = *it;
        if (n->backprop && !n->grad.empty())
            n->backprop(*n);
    }
}

/// Named set of parameter tensors; flipping trainable freezes every leaf.
struct ParamGroup {
    std::string name;
    std::vector<Var> tensors;
    bool trainable = true;

    void set_trainable(bool on) {
        trainable = on;
        for (auto &t : tensors)
            t->needs_grad = on;
    }
    std::uint64_t count() const {
        std::uint64_t c = 0;
        for (const auto &t : tensors)
            c += t->value.size();
        return c;
    }
};

struct ParamCount {
    std::vector<std::pair<std::string, std::uint64_t>> per_group;
    std::uint64_t total = 0;
};

inline ParamCount param_count(const std::vector<const ParamGroup *> &groups) {
    ParamCount out;
    for (const auto *g : groups) {
        for (const auto &[name, n] : out.per_group)
            require(name != g->name, ErrorCode::invalid_argument,
                    "duplicate parameter group name: " + g->name);
        out.per_group.emplace_back(g->name, g->count());
        out.total += g->count();
    }
    return out;
}

/// Adam with bias correction. Moments are kept per parameter tensor; the
/// state must stay with the model it was created for.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::unordered_map<const Node *, std::pair<std::vector<double>, std::vector<double>>>
        moments;
};

inline void adam_step(const std::vector<ParamGroup *> &groups, AdamState &st) {
    ++st.step;
    const double bc1 = 1.0 - std::pow(st.beta1, double(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, double(st.step));
    for (ParamGroup *g : groups) {
        if (!g->trainable)
            continue;
        for (auto &t : g->tensors) {
            require(!t->grad.empty(), ErrorCode::invalid_state,
                    "adam_step: missing gradient for a trainable tensor in group '" +
                        g->name + "'");
            auto &[m, v] = st.moments[t.get()];
            if (m.empty()) {
                m.assign(t->value.size(), 0.0);
                v.assign(t->value.size(), 0.0);
            }
            for (std::size_t i = 0; i < t->value.size(); ++i) {
                const double gr = t->grad.v[i];
                m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * gr;
                v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * gr * gr;
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                t->value.v[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
            }
            t->clear_grad();
        }
    }
}

inline void zero_grad(const std::vector<ParamGroup *> &groups) {
    for (ParamGroup *g : groups)
        for (auto &t : g->tensors)
            t->clear_grad();
}

} // namespace wch::nn

#endif
