#pragma once

// Hierarchical classification head: a C-way softmax classifier, a binary
// harmfulness classifier, and their gated fusion. The scalar binary output is
// spread over the class simplex (expand_binary) before the convex gate.

#include <string>
#include <vector>

#include "fusetext/autodiff.hpp"
#include "fusetext/tensor.hpp"

namespace fusetext::heads {

inline void validate_mask(const std::vector<bool>& harmful_mask) {
    bool any_harmful = false, any_benign = false;
    for (bool h : harmful_mask) (h ? any_harmful : any_benign) = true;
    if (!any_harmful || !any_benign)
        throw ValidationError("harmful_mask needs at least one harmful and one non-harmful class");
}

inline void validate_gate(double lambda_gate) {
    if (!(lambda_gate >= 0.0 && lambda_gate <= 1.0))
        throw ValidationError("lambda_gate must lie in [0, 1], got " + std::to_string(lambda_gate));
}

// softmax(W_p h + b_p); w_p is C x width, b_p is 1 x C.
inline Var primary_head(Var h_att, Var w_p, Var b_p) {
    if (w_p.cols() != h_att.cols() || b_p.cols() != w_p.rows() || b_p.rows() != 1) {
        throw ShapeError("primary_head: features " + shape_string(h_att.shape()) + ", W_p " +
                         shape_string(w_p.shape()) + ", b_p " + shape_string(b_p.shape()));
    }
    return ad::softmax_rows(ad::add_row(ad::matmul_nt(h_att, w_p), b_p));
}

// sigmoid(W_b h + b_b); w_b is 1 x width, b_b is 1 x 1.
inline Var binary_head(Var h_att, Var w_b, Var b_b) {
    if (w_b.shape() != Shape{1, h_att.cols()} || b_b.shape() != Shape{1, 1}) {
        throw ShapeError("binary_head: features " + shape_string(h_att.shape()) + ", W_b " +
                         shape_string(w_b.shape()) + ", b_b " + shape_string(b_b.shape()));
    }
    return ad::sigmoid(ad::add(ad::matmul_nt(h_att, w_b), b_b));
}

namespace detail {

// Distributes `mass` over the classes of one block proportionally to y,
// uniformly when the block of y sums to zero.
inline void spread(const Tensor& y, const std::vector<bool>& mask, bool block, double mass, Tensor& out) {
    double s = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i] == block) s += y[i], ++count;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] != block) continue;
        out[i] = s > 0.0 ? mass * y[i] / s : mass / static_cast<double>(count);
    }
}

}  // namespace detail

// y_binary mass over harmful classes, 1 - y_binary over the rest, each block
// shaped like the corresponding block of y_primary.
inline Var expand_binary(Var y_binary, Var y_primary, const std::vector<bool>& harmful_mask) {
    if (y_binary.shape() != Shape{1, 1}) throw ShapeError("expand_binary: y_binary must be scalar");
    if (y_primary.rows() != 1 || y_primary.cols() != harmful_mask.size())
        throw ShapeError("expand_binary: y_primary " + shape_string(y_primary.shape()) + " vs mask of " +
                         std::to_string(harmful_mask.size()));
    validate_mask(harmful_mask);
    Tape& t = *y_binary.tape();
    const double b = y_binary.value()[0];
    Tensor out(1, harmful_mask.size());
    detail::spread(y_primary.value(), harmful_mask, true, b, out);
    detail::spread(y_primary.value(), harmful_mask, false, 1.0 - b, out);
    return t.record(std::move(out), {y_binary, y_primary}, [y_binary, y_primary, harmful_mask](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& p = y_primary.value();
        const double b = y_binary.value()[0];
        double g_b = 0.0;
        Tensor g_p(1, p.cols());
        for (bool block : {true, false}) {
            const double mass = block ? b : 1.0 - b;
            double s = 0.0, gp_dot = 0.0, g_sum = 0.0;
            std::size_t count = 0;
            for (std::size_t i = 0; i < harmful_mask.size(); ++i) {
                if (harmful_mask[i] != block) continue;
                s += p[i];
                gp_dot += g[i] * p[i];
                g_sum += g[i];
                ++count;
            }
            double g_mass;
            if (s > 0.0) {
                g_mass = gp_dot / s;
                for (std::size_t i = 0; i < harmful_mask.size(); ++i)
                    if (harmful_mask[i] == block) g_p[i] += mass / s * (g[i] - gp_dot / s);
            } else {
                g_mass = g_sum / static_cast<double>(count);
            }
            g_b += block ? g_mass : -g_mass;
        }
        if (t.requires_grad(y_binary.id())) t.grad(y_binary.id())[0] += g_b;
        if (t.requires_grad(y_primary.id())) dense::axpy(1.0, g_p, t.grad(y_primary.id()));
    });
}

// lambda * y_primary + (1 - lambda) * expanded
inline Var gate_fuse(Var y_primary, Var expanded, double lambda_gate) {
    validate_gate(lambda_gate);
    return ad::add(ad::scale(y_primary, lambda_gate), ad::scale(expanded, 1.0 - lambda_gate));
}

// argmax with the lowest index winning ties.
inline std::size_t predict_class(std::span<const double> y_final) {
    if (y_final.empty()) throw ContractError("predict_class: empty distribution");
    std::size_t best = 0;
    for (std::size_t i = 1; i < y_final.size(); ++i)
        if (y_final[i] > y_final[best]) best = i;
    return best;
}

struct Prediction {
    std::vector<double> y_primary;
    double y_binary = 0.0;
    std::vector<double> y_final;
    std::size_t predicted_class = 0;
};

// Tensor-level conveniences.

inline Tensor primary_head(const Tensor& h_att, const Tensor& w_p, const Tensor& b_p) {
    Tape t;
    return primary_head(t.constant(h_att), t.constant(w_p), t.constant(b_p)).value();
}

inline double binary_head(const Tensor& h_att, const Tensor& w_b, const Tensor& b_b) {
    Tape t;
    return binary_head(t.constant(h_att), t.constant(w_b), t.constant(b_b)).value()[0];
}

inline Tensor expand_binary(double y_binary, const Tensor& y_primary, const std::vector<bool>& harmful_mask) {
    Tape t;
    return expand_binary(t.constant(Tensor::scalar(y_binary)), t.constant(y_primary), harmful_mask).value();
}

inline Tensor gate_fuse(const Tensor& y_primary, const Tensor& expanded, double lambda_gate) {
    Tape t;
    return gate_fuse(t.constant(y_primary), t.constant(expanded), lambda_gate).value();
}

}  // namespace fusetext::heads
