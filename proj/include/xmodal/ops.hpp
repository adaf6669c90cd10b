// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xmodal/graph.hpp"
#include "xmodal/params.hpp"
#include "xmodal/tensor.hpp"

namespace xmodal {

// Eager layer operations. Same kernels as the graph engine, with input
// finiteness enforced at the boundary.

Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
double cosine_similarity(const Tensor& a, const Tensor& b);
double sq_l2_distance(const Tensor& a, const Tensor& b);

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // all projections D x D, biases D
};

struct AttentionNodes {
  NodeId wq, bq, wk, bk, wv, bv, wo, bo;
};

// Scaled dot-product self-attention over tokens [T x D] with H heads splitting
// the feature axis. No positional encoding anywhere, so the op is exactly
// permutation-equivariant in the token axis (value-mixing sums are
// order-invariant by construction).
NodeId multi_head_self_attention(Graph& g, NodeId tokens, const AttentionNodes& p, int heads);

Tensor multi_head_self_attention(const Tensor& tokens, const AttentionParams& p, int heads);

// Pre-LN transformer stack: x + attn(ln(x)), then x + mlp(ln(x)), repeated
// `depth` times, with a final layer norm. MLP hidden width is 4*dim.
struct TransformerShape {
  int depth = 2;
  int heads = 4;
  int dim = 64;
  int mlp_hidden() const { return 4 * dim; }
};

void init_transformer(ParamStore& ps, const std::string& prefix, const TransformerShape& shape,
                      std::uint64_t seed, double scale);
NodeId transformer_stack(Graph& g, ParamRef& pr, const std::string& prefix, NodeId tokens,
                         const TransformerShape& shape);
std::size_t transformer_param_count(const TransformerShape& shape);

constexpr double kLayerNormEps = 1e-5;

}  // namespace xmodal
