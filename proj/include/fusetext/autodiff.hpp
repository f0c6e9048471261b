#pragma once

// Tape-based reverse-mode differentiation over fusetext::Tensor.
//
// A Tape records every operation of one forward pass. Parameters are named
// leaves; backward() on a 1x1 output returns the gradient of every parameter
// that was bound on the tape. A tape is single use: after backward() it is
// consumed and rejects further differentiation.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "fusetext/tensor.hpp"

namespace fusetext {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    Shape shape() const { return value().shape(); }
    Tape* tape() const { return tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

using ParamGrads = std::map<std::string, Tensor>;

class Tape {
public:
    using Backprop = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value) {
        nodes_.push_back(Node{std::move(value), {}, false, false, nullptr});
        return Var(this, nodes_.size() - 1);
    }

    // Binds a named parameter. Repeated binds of one name return the same leaf.
    Var parameter(const std::string& name, const Tensor& value) {
        if (auto it = params_.find(name); it != params_.end()) return Var(this, it->second);
        nodes_.push_back(Node{value, {}, false, true, nullptr});
        params_.emplace(name, nodes_.size() - 1);
        return Var(this, nodes_.size() - 1);
    }

    Var record(Tensor value, std::initializer_list<Var> inputs, Backprop backprop) {
        bool needs = false;
        for (const Var& v : inputs) {
            if (v.tape() != this) throw ContractError("operation mixes variables from different tapes");
            needs = needs || nodes_[v.id()].requires_grad;
        }
        nodes_.push_back(Node{std::move(value), {}, false, needs, needs ? std::move(backprop) : nullptr});
        return Var(this, nodes_.size() - 1);
    }

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    // Gradient buffer of a node, zero-initialized on first access.
    Tensor& grad(std::size_t id) {
        Node& n = nodes_[id];
        if (!n.grad_ready) {
            n.grad = Tensor(n.value.rows(), n.value.cols());
            n.grad_ready = true;
        }
        return n.grad;
    }

    std::size_t size() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }
    std::vector<std::string> parameter_names() const {
        std::vector<std::string> names;
        for (const auto& [name, id] : params_) names.push_back(name);
        return names;
    }

    ParamGrads backward(Var output) {
        if (output.tape() != this) throw ContractError("backward: output belongs to another tape");
        if (consumed_) throw ContractError("backward: tape already consumed");
        if (output.value().size() != 1) {
            throw ContractError("backward: output must be a scalar, got " + shape_string(output.shape()));
        }
        consumed_ = true;
        grad(output.id())[0] = 1.0;
        for (std::size_t i = output.id() + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.backprop && n.grad_ready) n.backprop(*this, i);
        }
        ParamGrads out;
        for (const auto& [name, id] : params_) {
            Node& n = nodes_[id];
            out.emplace(name, n.grad_ready ? n.grad : Tensor(n.value.rows(), n.value.cols()));
        }
        return out;
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool grad_ready;
        bool requires_grad;
        Backprop backprop;
    };
    std::deque<Node> nodes_;
    std::map<std::string, std::size_t> params_;
    bool consumed_ = false;
};

inline const Tensor& Var::value() const {
    if (!tape_) throw ContractError("use of an unbound variable");
    return tape_->value(id_);
}

namespace ad {

namespace detail {
inline bool needs(Tape& t, const Var& v) { return t.requires_grad(v.id()); }
}  // namespace detail

inline Var matmul(Var a, Var b) {
    Tape& t = *a.tape();
    Tensor out = dense::matmul(a.value(), b.value());
    return t.record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (detail::needs(t, a)) dense::gemm_nt_acc(g, b.value(), t.grad(a.id()));
        if (detail::needs(t, b)) dense::gemm_tn_acc(a.value(), g, t.grad(b.id()));
    });
}

// a * b^T without materializing the transpose.
inline Var matmul_nt(Var a, Var b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()) + "^T");
    }
    Tape& t = *a.tape();
    Tensor out(a.rows(), b.rows());
    dense::gemm_nt_acc(a.value(), b.value(), out);
    return t.record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (detail::needs(t, a)) dense::gemm_acc(g, b.value(), t.grad(a.id()));
        if (detail::needs(t, b)) dense::gemm_tn_acc(g, a.value(), t.grad(b.id()));
    });
}

inline Var transpose(Var a) {
    Tape& t = *a.tape();
    return t.record(dense::transpose(a.value()), {a}, [a](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad(a.id());
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) ga(j, i) += g(i, j);
    });
}

inline Var add(Var a, Var b) {
    dense::require_same_shape(a.value(), b.value(), "add");
    Tape& t = *a.tape();
    Tensor out = a.value();
    dense::axpy(1.0, b.value(), out);
    return t.record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (detail::needs(t, a)) dense::axpy(1.0, g, t.grad(a.id()));
        if (detail::needs(t, b)) dense::axpy(1.0, g, t.grad(b.id()));
    });
}

inline Var sub(Var a, Var b) {
    dense::require_same_shape(a.value(), b.value(), "sub");
    Tape& t = *a.tape();
    Tensor out = a.value();
    dense::axpy(-1.0, b.value(), out);
    return t.record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (detail::needs(t, a)) dense::axpy(1.0, g, t.grad(a.id()));
        if (detail::needs(t, b)) dense::axpy(-1.0, g, t.grad(b.id()));
    });
}

// Elementwise product.
inline Var mul(Var a, Var b) {
    dense::require_same_shape(a.value(), b.value(), "mul");
    Tape& t = *a.tape();
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    return t.record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (detail::needs(t, a)) {
            Tensor& ga = t.grad(a.id());
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
        }
        if (detail::needs(t, b)) {
            Tensor& gb = t.grad(b.id());
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
        }
    });
}

// x + row, with the 1xn row broadcast over every row of x.
inline Var add_row(Var x, Var row) {
    if (row.rows() != 1 || row.cols() != x.cols()) {
        throw ShapeError("add_row: " + shape_string(row.shape()) + " cannot broadcast over " +
                         shape_string(x.shape()));
    }
    Tape& t = *x.tape();
    Tensor out = x.value();
    const Tensor& r = row.value();
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += r[j];
    return t.record(std::move(out), {x, row}, [x, row](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (detail::needs(t, x)) dense::axpy(1.0, g, t.grad(x.id()));
        if (detail::needs(t, row)) {
            Tensor& gr = t.grad(row.id());
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
        }
    });
}

// x * row elementwise, with the 1xn row broadcast over every row of x.
inline Var mul_row(Var x, Var row) {
    if (row.rows() != 1 || row.cols() != x.cols()) {
        throw ShapeError("mul_row: " + shape_string(row.shape()) + " cannot broadcast over " +
                         shape_string(x.shape()));
    }
    Tape& t = *x.tape();
    Tensor out = x.value();
    const Tensor& r = row.value();
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= r[j];
    return t.record(std::move(out), {x, row}, [x, row](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = x.value();
        const Tensor& rv = row.value();
        if (detail::needs(t, x)) {
            Tensor& gx = t.grad(x.id());
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gx(i, j) += g(i, j) * rv[j];
        }
        if (detail::needs(t, row)) {
            Tensor& gr = t.grad(row.id());
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j) * xv(i, j);
        }
    });
}

inline Var scale(Var a, double s) {
    Tape& t = *a.tape();
    Tensor out = a.value();
    for (double& v : out.data()) v *= s;
    return t.record(std::move(out), {a}, [a, s](Tape& t, std::size_t self) {
        dense::axpy(s, t.grad(self), t.grad(a.id()));
    });
}

inline Var add_scalar(Var a, double s) {
    Tape& t = *a.tape();
    Tensor out = a.value();
    for (double& v : out.data()) v += s;
    return t.record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
        dense::axpy(1.0, t.grad(self), t.grad(a.id()));
    });
}

inline Var sum(Var a) {
    Tape& t = *a.tape();
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return t.record(Tensor::scalar(s), {a}, [a](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        for (double& v : t.grad(a.id()).data()) v += g;
    });
}

inline Var mean(Var a) {
    if (a.value().size() == 0) throw ContractError("mean of an empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

inline Var softmax_rows(Var x) {
    Tape& t = *x.tape();
    return t.record(dense::softmax_rows(x.value()), {x}, [x](Tape& t, std::size_t self) {
        const Tensor& y = t.value(self);
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(x.id());
        for (std::size_t i = 0; i < y.rows(); ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
            for (std::size_t j = 0; j < y.cols(); ++j) gx(i, j) += y(i, j) * (g(i, j) - dot);
        }
    });
}

inline Var concat_cols(Var a, Var b) {
    Tape& t = *a.tape();
    const std::size_t p = a.cols();
    return t.record(dense::concat_cols(a.value(), b.value()), {a, b}, [a, b, p](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (detail::needs(t, a)) {
            Tensor& ga = t.grad(a.id());
            for (std::size_t i = 0; i < ga.rows(); ++i)
                for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(i, j);
        }
        if (detail::needs(t, b)) {
            Tensor& gb = t.grad(b.id());
            for (std::size_t i = 0; i < gb.rows(); ++i)
                for (std::size_t j = 0; j < gb.cols(); ++j) gb(i, j) += g(i, p + j);
        }
    });
}

inline Var slice_cols(Var a, std::size_t begin, std::size_t count) {
    Tape& t = *a.tape();
    return t.record(dense::slice_cols(a.value(), begin, count), {a}, [a, begin](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad(a.id());
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) ga(i, begin + j) += g(i, j);
    });
}

inline Var slice_rows(Var a, std::size_t begin, std::size_t count) {
    Tape& t = *a.tape();
    return t.record(dense::slice_rows(a.value(), begin, count), {a}, [a, begin](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad(a.id());
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) ga(begin + i, j) += g(i, j);
    });
}

// Repeats a 1xn row n_rows times.
inline Var broadcast_rows(Var row, std::size_t n_rows) {
    if (row.rows() != 1) throw ShapeError("broadcast_rows expects a row vector, got " + shape_string(row.shape()));
    Tape& t = *row.tape();
    Tensor out(n_rows, row.cols());
    for (std::size_t i = 0; i < n_rows; ++i)
        for (std::size_t j = 0; j < row.cols(); ++j) out(i, j) = row.value()[j];
    return t.record(std::move(out), {row}, [row](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gr = t.grad(row.id());
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
    });
}

// Embedding lookup: row i of the result is table[ids[i]].
inline Var gather_rows(Var table, const std::vector<std::size_t>& ids) {
    Tape& t = *table.tape();
    const Tensor& tv = table.value();
    Tensor out(ids.size(), tv.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= tv.rows()) {
            throw ContractError("gather_rows: index " + std::to_string(ids[i]) + " outside table of " +
                                std::to_string(tv.rows()) + " rows");
        }
        for (std::size_t j = 0; j < tv.cols(); ++j) out(i, j) = tv(ids[i], j);
    }
    return t.record(std::move(out), {table}, [table, ids](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gt = t.grad(table.id());
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) gt(ids[i], j) += g(i, j);
    });
}

// Row g of the result is the mean of the rows of x whose group index is g.
inline Var group_mean_rows(Var x, const std::vector<std::size_t>& group_of_row, std::size_t n_groups) {
    if (group_of_row.size() != x.rows()) {
        throw ShapeError("group_mean_rows: " + std::to_string(group_of_row.size()) + " group indices for " +
                         std::to_string(x.rows()) + " rows");
    }
    std::vector<double> counts(n_groups, 0.0);
    for (std::size_t gidx : group_of_row) {
        if (gidx >= n_groups) throw ContractError("group_mean_rows: group index out of range");
        counts[gidx] += 1.0;
    }
    for (std::size_t gidx = 0; gidx < n_groups; ++gidx) {
        if (counts[gidx] == 0.0) {
            throw ContractError("group_mean_rows: group " + std::to_string(gidx) + " has no rows");
        }
    }
    Tape& t = *x.tape();
    const Tensor& xv = x.value();
    Tensor out(n_groups, xv.cols());
    for (std::size_t i = 0; i < xv.rows(); ++i)
        for (std::size_t j = 0; j < xv.cols(); ++j) out(group_of_row[i], j) += xv(i, j);
    for (std::size_t gidx = 0; gidx < n_groups; ++gidx)
        for (std::size_t j = 0; j < xv.cols(); ++j) out(gidx, j) /= counts[gidx];
    return t.record(std::move(out), {x}, [x, group_of_row, counts](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(x.id());
        for (std::size_t i = 0; i < gx.rows(); ++i) {
            const std::size_t gidx = group_of_row[i];
            for (std::size_t j = 0; j < gx.cols(); ++j) gx(i, j) += g(gidx, j) / counts[gidx];
        }
    });
}

inline double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

// Exact (erf) GELU.
inline Var gelu(Var x) {
    Tape& t = *x.tape();
    Tensor out = x.value();
    for (double& v : out.data()) v = gelu_value(v);
    return t.record(std::move(out), {x}, [x](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = x.value();
        Tensor& gx = t.grad(x.id());
        const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = xv[i];
            const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            gx[i] += g[i] * (cdf + v * pdf);
        }
    });
}

inline double sigmoid_value(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline Var sigmoid(Var x) {
    Tape& t = *x.tape();
    Tensor out = x.value();
    for (double& v : out.data()) v = sigmoid_value(v);
    return t.record(std::move(out), {x}, [x](Tape& t, std::size_t self) {
        const Tensor& y = t.value(self);
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(x.id());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

// log(clamp(x, lo, hi)); zero gradient where the clamp is active.
inline Var log_clamped(Var x, double lo, double hi) {
    Tape& t = *x.tape();
    Tensor out = x.value();
    for (double& v : out.data()) v = std::log(std::clamp(v, lo, hi));
    return t.record(std::move(out), {x}, [x, lo, hi](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = x.value();
        Tensor& gx = t.grad(x.id());
        for (std::size_t i = 0; i < g.size(); ++i)
            if (xv[i] > lo && xv[i] < hi) gx[i] += g[i] / xv[i];
    });
}

// Per-row standardization (x - mean) / sqrt(var + eps), biased variance.
inline Var normalize_rows(Var x, double eps) {
    Tape& t = *x.tape();
    const Tensor& xv = x.value();
    const std::size_t n = xv.cols();
    Tensor out(xv.rows(), n);
    std::vector<double> inv_std(xv.rows());
    for (std::size_t i = 0; i < xv.rows(); ++i) {
        double mu = 0.0;
        for (double v : xv.row(i)) mu += v;
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (double v : xv.row(i)) var += (v - mu) * (v - mu);
        var /= static_cast<double>(n);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) out(i, j) = (xv(i, j) - mu) * inv_std[i];
    }
    return t.record(std::move(out), {x}, [x, inv_std](Tape& t, std::size_t self) {
        const Tensor& y = t.value(self);
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(x.id());
        const double n = static_cast<double>(y.cols());
        for (std::size_t i = 0; i < y.rows(); ++i) {
            double mean_g = 0.0, mean_gy = 0.0;
            for (std::size_t j = 0; j < y.cols(); ++j) {
                mean_g += g(i, j);
                mean_gy += g(i, j) * y(i, j);
            }
            mean_g /= n;
            mean_gy /= n;
            for (std::size_t j = 0; j < y.cols(); ++j)
                gx(i, j) += inv_std[i] * (g(i, j) - mean_g - y(i, j) * mean_gy);
        }
    });
}

}  // namespace ad

// ---------------------------------------------------------------------------
// Finite-difference gradient oracle.

struct GradEntry {
    std::string name;
    std::size_t index = 0;  // worst coordinate within the tensor
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct GradReport {
    double max_abs_err = 0.0;
    double max_rel_err = 0.0;
    std::vector<GradEntry> per_parameter;
};

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

// Builds the scalar loss on a fresh tape, binding parameters by name.
using LossFn = std::function<Var(Tape&, const ParamStore&)>;

// Three-point: (f(p+h) - f(p-h)) / 2h.
// Five-point: (f(p-2h) - 8f(p-h) + 8f(p+h) - f(p+2h)) / 12h, fourth order, so
// a larger h keeps round-off small where the true gradient is exactly zero.
enum class Stencil { three_point, five_point };

// Compares backward() against central differences with step `eps` for every
// coordinate of every parameter in `params`.
inline GradReport grad_check(const LossFn& loss_fn, const ParamStore& params, double eps,
                             Stencil stencil = Stencil::three_point) {
    if (!(eps > 0.0)) throw ContractError("grad_check: eps must be positive");
    GradReport report;
    if (params.empty()) return report;

    auto evaluate = [&](const ParamStore& p) {
        Tape tape;
        const double v = loss_fn(tape, p).value().item();
        if (!std::isfinite(v)) throw ContractError("grad_check: loss is not finite");
        return v;
    };

    ParamGrads analytic;
    {
        Tape tape;
        Var loss = loss_fn(tape, params);
        if (!std::isfinite(loss.value().item())) throw ContractError("grad_check: loss is not finite");
        analytic = tape.backward(loss);
    }

    ParamStore probe = params;
    for (const auto& [name, tensor] : params) {
        GradEntry worst{name, 0, 0.0, 0.0, -1.0};
        const auto it = analytic.find(name);
        Tensor& slot = probe.at(name);
        for (std::size_t i = 0; i < tensor.size(); ++i) {
            const double original = tensor[i];
            auto at = [&](double offset) {
                slot[i] = original + offset;
                const double v = evaluate(probe);
                slot[i] = original;
                return v;
            };
            const double numeric = stencil == Stencil::three_point
                                       ? (at(eps) - at(-eps)) / (2.0 * eps)
                                       : (at(-2.0 * eps) - 8.0 * at(-eps) + 8.0 * at(eps) - at(2.0 * eps)) / (12.0 * eps);
            const double a = it == analytic.end() ? 0.0 : it->second[i];
            const double rel = relative_error(a, numeric);
            report.max_abs_err = std::max(report.max_abs_err, std::abs(a - numeric));
            if (rel > worst.rel_err) worst = GradEntry{name, i, a, numeric, rel};
        }
        worst.rel_err = std::max(worst.rel_err, 0.0);
        report.max_rel_err = std::max(report.max_rel_err, worst.rel_err);
        report.per_parameter.push_back(worst);
    }
    return report;
}

}  // namespace fusetext
