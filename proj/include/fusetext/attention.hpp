#pragma once

// Auxiliary fusion and the dual attention pooling over positions.
//
//   H_fused row i = [h_i ; e]                       (e broadcast to every position)
//   alpha = softmax_i(w_s . h_i),       H_SA = sum_i alpha_i h_i
//   beta  = softmax_i(w_c . [h_i; e_i]), H_CA = sum_i beta_i [h_i; e_i]
//   H_att = [H_SA ; H_CA]

#include "fusetext/autodiff.hpp"
#include "fusetext/tensor.hpp"

namespace fusetext::attention {

struct Fused {
    Var h_fused;  // n x (2d + a)
    Var e;        // n x a, the auxiliary row repeated per position
};

inline Fused fuse_aux(Var h_concat, Var aux_row) {
    if (aux_row.rows() != 1) throw ShapeError("fuse_aux: auxiliary embedding must be a row, got " +
                                              shape_string(aux_row.shape()));
    Var e = ad::broadcast_rows(aux_row, h_concat.rows());
    return {ad::concat_cols(h_concat, e), e};
}

struct Pooled {
    Var weights;  // 1 x n
    Var pooled;   // 1 x width
};

// Scalar score per row via `scorer` (1 x width), softmax over positions,
// weighted sum of rows.
inline Pooled attention_pool(Var h, Var scorer) {
    if (h.rows() == 0) throw ContractError("attention_pool: no positions");
    if (scorer.rows() != 1 || scorer.cols() != h.cols()) {
        throw ShapeError("attention scorer " + shape_string(scorer.shape()) + " does not match states " +
                         shape_string(h.shape()));
    }
    Var scores = ad::matmul_nt(scorer, h);  // 1 x n
    Var weights = ad::softmax_rows(scores);
    return {weights, ad::matmul(weights, h)};
}

inline Pooled self_attention_pool(Var h, Var w_s) { return attention_pool(h, w_s); }

inline Pooled cross_attention_pool(Var h, Var e, Var w_c) {
    if (h.rows() != e.rows()) {
        throw ShapeError("cross_attention_pool: row mismatch " + shape_string(h.shape()) + " vs " +
                         shape_string(e.shape()));
    }
    return attention_pool(ad::concat_cols(h, e), w_c);
}

inline Var concat_attention(Var h_sa, Var h_ca) {
    if (h_sa.rows() != 1 || h_ca.rows() != 1) throw ShapeError("concat_attention expects row vectors");
    return ad::concat_cols(h_sa, h_ca);
}

// Tensor-level conveniences (no gradient tracking).

struct PooledValues {
    Tensor weights;
    Tensor pooled;
};

inline PooledValues self_attention_pool(const Tensor& h, const Tensor& w_s) {
    Tape t;
    auto p = self_attention_pool(t.constant(h), t.constant(w_s));
    return {p.weights.value(), p.pooled.value()};
}

inline PooledValues cross_attention_pool(const Tensor& h, const Tensor& e, const Tensor& w_c) {
    Tape t;
    auto p = cross_attention_pool(t.constant(h), t.constant(e), t.constant(w_c));
    return {p.weights.value(), p.pooled.value()};
}

inline Tensor fuse_aux(const Tensor& h_concat, const Tensor& aux_row) {
    Tape t;
    return fuse_aux(t.constant(h_concat), t.constant(aux_row)).h_fused.value();
}

inline Tensor concat_attention(const Tensor& h_sa, const Tensor& h_ca) {
    Tape t;
    return concat_attention(t.constant(h_sa), t.constant(h_ca)).value();
}

}  // namespace fusetext::attention
