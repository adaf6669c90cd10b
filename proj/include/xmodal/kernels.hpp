// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "xmodal/tensor.hpp"

namespace xmodal {

// Forward kernels. Pure functions; shape-checked; the graph engine dispatches
// to these and adds the reverse-mode rules.
//
// Reduction conventions (fixed for reproducibility):
//  - feature-axis reductions (dot, matmul inner loop, layer-norm statistics)
//    run sequentially over the index;
//  - token-axis and statistical reductions (softmax normalizer, attention
//    value mixing, mean pooling, prototype means, log-sum-exp) use
//    stable_sum, which is invariant to input order.

// a [M x K] @ b [K x N] -> [M x N]. Rank-1 a is treated as a single row and
// yields a rank-1 result. sorted_inner selects stable_sum for the inner loop.
Tensor k_matmul(const Tensor& a, const Tensor& b, bool sorted_inner = false);

Tensor k_transpose(const Tensor& a);

Tensor k_add(const Tensor& a, const Tensor& b);
Tensor k_sub(const Tensor& a, const Tensor& b);
Tensor k_mul(const Tensor& a, const Tensor& b);
Tensor k_scale(const Tensor& a, double c);

// a [T x D] + v [D], broadcast over rows.
Tensor k_add_rowvec(const Tensor& a, const Tensor& v);

// [T x D] -> [D], stable mean over rows.
Tensor k_mean_rows(const Tensor& a);

// Coordinate-wise stable mean over a list of same-shape tensors.
Tensor k_mean_n(const std::vector<const Tensor*>& xs);

// Sequential sum over a list of same-shape tensors (leading-index order).
Tensor k_add_n(const std::vector<const Tensor*>& xs);

Tensor k_sum_all(const Tensor& a);

// Rank-1 (axis 0) or rank-2 (axis 0 = columns, axis 1 = rows).
// Max-subtracted; slices sum to 1.
Tensor k_softmax(const Tensor& a, int axis);

// Per-row normalization to mean 0 / variance 1 (biased), then affine.
Tensor k_layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

Tensor k_gelu(const Tensor& x);

Tensor k_concat_rows(const std::vector<const Tensor*>& xs);  // rank-1 input = one row
Tensor k_concat_cols(const std::vector<const Tensor*>& xs);
Tensor k_slice_cols(const Tensor& a, int c0, int c1);
Tensor k_row(const Tensor& a, int r);

Tensor k_dot(const Tensor& a, const Tensor& b);
Tensor k_sq_l2(const Tensor& a, const Tensor& b);
Tensor k_cosine(const Tensor& a, const Tensor& b);  // zero-norm input -> NumericError
Tensor k_sqrt(const Tensor& a);
Tensor k_log_sum_exp(const Tensor& a);
Tensor k_stack(const std::vector<const Tensor*>& scalars);

// Stable cross-entropy: log-sum-exp(logits) - logits[label].
Tensor k_cross_entropy(const Tensor& logits, int label);

}  // namespace xmodal
