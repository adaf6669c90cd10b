// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/ops.hpp"

#include <cmath>

#include "xmodal/errors.hpp"
#include "xmodal/kernels.hpp"

namespace xmodal {

Tensor softmax(const Tensor& x, int axis) {
  x.ensure_finite("softmax input");
  return k_softmax(x, axis);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  x.ensure_finite("layer_norm input");
  return k_layer_norm(x, gain, bias, eps);
}

double cosine_similarity(const Tensor& a, const Tensor& b) {
  a.ensure_finite("cosine_similarity input");
  b.ensure_finite("cosine_similarity input");
  return k_cosine(a, b).scalar_value();
}

double sq_l2_distance(const Tensor& a, const Tensor& b) {
  a.ensure_finite("sq_l2_distance input");
  b.ensure_finite("sq_l2_distance input");
  return k_sq_l2(a, b).scalar_value();
}

NodeId multi_head_self_attention(Graph& g, NodeId tokens, const AttentionNodes& p, int heads) {
  const Tensor& x = g.value(tokens);
  if (x.rank() != 2) throw DataError("attention: tokens must be rank 2, got " + x.dims_str());
  const int D = x.cols();
  if (heads <= 0 || D % heads != 0)
    throw ConfigError("attention: width " + std::to_string(D) + " not divisible by " +
                      std::to_string(heads) + " heads");
  const int dh = D / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  const NodeId q = g.add_rowvec(g.matmul(tokens, p.wq), p.bq);
  const NodeId k = g.add_rowvec(g.matmul(tokens, p.wk), p.bk);
  const NodeId v = g.add_rowvec(g.matmul(tokens, p.wv), p.bv);

  std::vector<NodeId> head_outs;
  head_outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const int c0 = h * dh, c1 = (h + 1) * dh;
    const NodeId qh = g.slice_cols(q, c0, c1);
    const NodeId kh = g.slice_cols(k, c0, c1);
    const NodeId vh = g.slice_cols(v, c0, c1);
    const NodeId scores = g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt_dh);
    const NodeId attn = g.softmax(scores, 1);
    // Value mixing reduces over the token axis: stable accumulation keeps the
    // op exactly permutation-equivariant.
    head_outs.push_back(g.matmul(attn, vh, /*sorted_inner=*/true));
  }
  const NodeId merged = heads == 1 ? head_outs[0] : g.concat_cols(head_outs);
  return g.add_rowvec(g.matmul(merged, p.wo), p.bo);
}

Tensor multi_head_self_attention(const Tensor& tokens, const AttentionParams& p, int heads) {
  tokens.ensure_finite("attention input");
  Graph g;
  AttentionNodes nodes{g.constant(p.wq), g.constant(p.bq), g.constant(p.wk), g.constant(p.bk),
                       g.constant(p.wv), g.constant(p.bv), g.constant(p.wo), g.constant(p.bo)};
  const NodeId out = multi_head_self_attention(g, g.constant(tokens), nodes, heads);
  g.forward();
  return g.value(out);
}

void init_transformer(ParamStore& ps, const std::string& prefix, const TransformerShape& shape,
                      std::uint64_t seed, double scale) {
  if (shape.depth < 1) throw ConfigError("transformer: depth must be >= 1");
  if (shape.dim % shape.heads != 0)
    throw ConfigError("transformer: dim not divisible by heads");
  const int D = shape.dim, H = shape.mlp_hidden();
  for (int b = 0; b < shape.depth; ++b) {
    const std::string p = prefix + ".blk" + std::to_string(b);
    init_ones(ps, p + ".ln1.g", {D});
    init_zeros(ps, p + ".ln1.b", {D});
    for (const char* w : {".attn.wq", ".attn.wk", ".attn.wv", ".attn.wo"})
      init_gaussian(ps, p + w, {D, D}, seed, scale);
    for (const char* bnm : {".attn.bq", ".attn.bk", ".attn.bv", ".attn.bo"})
      init_zeros(ps, p + bnm, {D});
    init_ones(ps, p + ".ln2.g", {D});
    init_zeros(ps, p + ".ln2.b", {D});
    init_gaussian(ps, p + ".mlp.w1", {D, H}, seed, scale);
    init_zeros(ps, p + ".mlp.b1", {H});
    init_gaussian(ps, p + ".mlp.w2", {H, D}, seed, scale);
    init_zeros(ps, p + ".mlp.b2", {D});
  }
  init_ones(ps, prefix + ".lnf.g", {D});
  init_zeros(ps, prefix + ".lnf.b", {D});
}

NodeId transformer_stack(Graph& g, ParamRef& pr, const std::string& prefix, NodeId tokens,
                         const TransformerShape& shape) {
  NodeId x = tokens;
  for (int b = 0; b < shape.depth; ++b) {
    const std::string p = prefix + ".blk" + std::to_string(b);
    const NodeId norm1 =
        g.layer_norm(x, pr.node(g, p + ".ln1.g"), pr.node(g, p + ".ln1.b"), kLayerNormEps);
    AttentionNodes attn{pr.node(g, p + ".attn.wq"), pr.node(g, p + ".attn.bq"),
                        pr.node(g, p + ".attn.wk"), pr.node(g, p + ".attn.bk"),
                        pr.node(g, p + ".attn.wv"), pr.node(g, p + ".attn.bv"),
                        pr.node(g, p + ".attn.wo"), pr.node(g, p + ".attn.bo")};
    x = g.add(x, multi_head_self_attention(g, norm1, attn, shape.heads));
    const NodeId norm2 =
        g.layer_norm(x, pr.node(g, p + ".ln2.g"), pr.node(g, p + ".ln2.b"), kLayerNormEps);
    const NodeId h1 = g.gelu(g.add_rowvec(g.matmul(norm2, pr.node(g, p + ".mlp.w1")),
                                          pr.node(g, p + ".mlp.b1")));
    const NodeId h2 =
        g.add_rowvec(g.matmul(h1, pr.node(g, p + ".mlp.w2")), pr.node(g, p + ".mlp.b2"));
    x = g.add(x, h2);
  }
  return g.layer_norm(x, pr.node(g, prefix + ".lnf.g"), pr.node(g, prefix + ".lnf.b"),
                      kLayerNormEps);
}

std::size_t transformer_param_count(const TransformerShape& shape) {
  const std::size_t D = shape.dim, H = shape.mlp_hidden();
  const std::size_t per_block = 2 * D                    // ln1
                                + 4 * (D * D + D)        // attention
                                + 2 * D                  // ln2
                                + D * H + H + H * D + D; // mlp
  return static_cast<std::size_t>(shape.depth) * per_block + 2 * D;  // + final ln
}

}  // namespace xmodal
