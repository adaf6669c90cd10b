// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/fusion.hpp"

#include <algorithm>

#include "xmodal/errors.hpp"
#include "xmodal/kernels.hpp"

namespace xmodal {

void FusionConfig::validate() const {
  if (depth < 1) throw ConfigError("fusion: depth must be >= 1");
  if (dim <= 0 || heads <= 0 || dim % heads != 0)
    throw ConfigError("fusion: dim must be divisible by heads");
}

void DropConfig::validate() const {
  if (p < 0.0 || p > 1.0) throw ConfigError("modality drop: p must lie in [0, 1]");
  if (!keep_at_least_one) throw ConfigError("modality drop: keep_at_least_one must stay on");
}

namespace {

std::string embedding_name(Modality m) { return std::string("fusion.emb.") + modality_name(m); }

}  // namespace

void init_fusion(ParamStore& ps, const FusionConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int D = cfg.dim;
  for (Modality m : kAllModalities) init_gaussian(ps, embedding_name(m), {D}, seed, kInitScale);
  init_transformer(ps, "fusion", cfg.transformer(), seed, kInitScale);
  init_gaussian(ps, "fusion.cls", {D}, seed, kInitScale);
  if (cfg.kind == FusionKind::kMlp) {
    const int H = 6 * D;
    init_gaussian(ps, "mlpfuse.w1", {3 * D, H}, seed, kInitScale);
    init_zeros(ps, "mlpfuse.b1", {H});
    init_gaussian(ps, "mlpfuse.w2", {H, D}, seed, kInitScale);
    init_zeros(ps, "mlpfuse.b2", {D});
  }
}

std::size_t fusion_param_count(const FusionConfig& cfg) {
  const std::size_t D = cfg.dim;
  return transformer_param_count(cfg.transformer()) + 3 * D /*embeddings*/ + D /*cls*/;
}

std::size_t mlp_fuse_param_count(int dim) {
  const std::size_t D = dim, H = 6 * D;
  return 3 * D * H + H + H * D + D;
}

namespace {

void check_mask_inputs(const std::vector<std::pair<Modality, NodeId>>& tokens,
                       const ModalityMask& mask) {
  if (mask.empty()) throw DataError("fuse: empty modality mask");
  for (Modality m : mask.list()) {
    const bool present = std::any_of(tokens.begin(), tokens.end(),
                                     [m](const auto& p) { return p.first == m; });
    if (!present)
      throw DataError(std::string("fuse: modality ") + modality_name(m) +
                      " in mask but absent from input");
  }
}

}  // namespace

NodeId fusion_feature(Graph& g, ParamRef& pr, const FusionConfig& cfg,
                      const std::vector<std::pair<Modality, NodeId>>& tokens,
                      const ModalityMask& mask) {
  if (cfg.kind == FusionKind::kMlp)
    throw ConfigError("fusion_feature: config selects the MLP baseline; use mlp_fusion_feature");
  check_mask_inputs(tokens, mask);
  std::vector<NodeId> parts;
  if (cfg.pooling == Pooling::kCls) parts.push_back(pr.node(g, "fusion.cls"));
  for (Modality m : mask.list()) {
    for (const auto& [mod, node] : tokens) {
      if (mod != m) continue;
      parts.push_back(g.add_rowvec(node, pr.node(g, embedding_name(m))));
      break;
    }
  }
  NodeId seq = parts.size() == 1 && g.value(parts[0]).rank() == 2 ? parts[0]
                                                                  : g.concat_rows(parts);
  TransformerShape shape = cfg.transformer();
  const NodeId out = transformer_stack(g, pr, "fusion", seq, shape);
  if (cfg.pooling == Pooling::kCls) return g.row(out, 0);
  return g.mean_rows(out);
}

NodeId mlp_fusion_feature(Graph& g, ParamRef& pr, const FusionConfig& cfg,
                          const std::vector<std::pair<Modality, NodeId>>& pooled,
                          const ModalityMask& mask) {
  check_mask_inputs(pooled, mask);
  const int D = cfg.dim;
  std::vector<NodeId> slots;
  for (Modality m : kAllModalities) {
    NodeId slot = -1;
    if (mask.has(m)) {
      for (const auto& [mod, node] : pooled)
        if (mod == m) slot = node;
    }
    if (slot < 0) slot = g.constant(Tensor::zeros({D}));  // zero vector for absent modalities
    slots.push_back(slot);
  }
  // Single row [1 x 3D]: each pooled vector becomes a one-row matrix first.
  const NodeId x = g.concat_cols(
      {g.concat_rows({slots[0]}), g.concat_rows({slots[1]}), g.concat_rows({slots[2]})});
  const NodeId h1 = g.gelu(
      g.add_rowvec(g.matmul(x, pr.node(g, "mlpfuse.w1")), pr.node(g, "mlpfuse.b1")));
  const NodeId h2 =
      g.add_rowvec(g.matmul(h1, pr.node(g, "mlpfuse.w2")), pr.node(g, "mlpfuse.b2"));
  return g.row(h2, 0);
}

Tensor fuse_token_matrix(const std::vector<EncodedModality>& encoded, const ModalityMask& mask,
                         const ParamStore& ps, const FusionConfig& cfg) {
  cfg.validate();
  if (mask.empty()) throw DataError("fuse: empty modality mask");
  std::vector<Tensor> parts;
  for (Modality m : mask.list()) {
    const EncodedModality* found = nullptr;
    for (const EncodedModality& e : encoded)
      if (e.modality == m) found = &e;
    if (!found)
      throw DataError(std::string("fuse: modality ") + modality_name(m) +
                      " in mask but absent from input");
    parts.push_back(k_add_rowvec(found->tokens_out, ps_get(ps, embedding_name(m))));
  }
  std::vector<const Tensor*> views;
  for (const Tensor& t : parts) views.push_back(&t);
  return k_concat_rows(views);
}

Tensor fusion_pool(const Tensor& tokens, const ParamStore& ps, const FusionConfig& cfg) {
  tokens.ensure_finite("fusion input");
  Graph g;
  ParamRef pr(ps, /*trainable=*/false);
  NodeId seq = g.constant(tokens);
  if (cfg.pooling == Pooling::kCls) seq = g.concat_rows({pr.node(g, "fusion.cls"), seq});
  TransformerShape shape = cfg.transformer();
  const NodeId out = transformer_stack(g, pr, "fusion", seq, shape);
  const NodeId z = cfg.pooling == Pooling::kCls ? g.row(out, 0) : g.mean_rows(out);
  g.forward();
  return g.value(z);
}

UnifiedFeature fuse(const std::vector<EncodedModality>& encoded, const ModalityMask& mask,
                    const ParamStore& ps, const FusionConfig& cfg) {
  if (cfg.kind == FusionKind::kMlp) return mlp_fuse(encoded, mask, ps, cfg);
  UnifiedFeature f;
  f.z = fusion_pool(fuse_token_matrix(encoded, mask, ps, cfg), ps, cfg);
  f.provenance = mask;
  return f;
}

UnifiedFeature unimodal_project(const EncodedModality& encoded, const ParamStore& ps,
                                const FusionConfig& cfg) {
  if (!ps.count(embedding_name(encoded.modality)))
    throw ConfigError(std::string("unimodal_project: no embedding for ") +
                      modality_name(encoded.modality));
  return fuse({encoded}, ModalityMask::single(encoded.modality), ps, cfg);
}

UnifiedFeature mlp_fuse(const std::vector<EncodedModality>& encoded, const ModalityMask& mask,
                        const ParamStore& ps, const FusionConfig& cfg) {
  if (mask.empty()) throw DataError("mlp_fuse: empty modality mask");
  const int D = cfg.dim;
  Graph g;
  ParamRef pr(ps, /*trainable=*/false);
  std::vector<std::pair<Modality, NodeId>> pooled;
  for (const EncodedModality& e : encoded)
    pooled.emplace_back(e.modality, g.constant(e.pooled));
  const NodeId z = mlp_fusion_feature(g, pr, cfg, pooled, mask);
  g.forward();
  UnifiedFeature f;
  f.z = g.value(z);
  f.provenance = mask;
  if (f.z.dims()[0] != D) throw DataError("mlp_fuse: output width mismatch");
  return f;
}

void init_fusion_head(ParamStore& ps, int dim, int num_classes, std::uint64_t seed) {
  init_gaussian(ps, "head.fuse.w", {dim, num_classes}, seed, kInitScale);
  init_zeros(ps, "head.fuse.b", {num_classes});
}

Tensor fusion_logits(const UnifiedFeature& feature, const ParamStore& ps) {
  return k_add(k_matmul(feature.z, ps_get(ps, "head.fuse.w")), ps_get(ps, "head.fuse.b"));
}

NodeId fusion_logits_node(Graph& g, ParamRef& pr, NodeId feature) {
  return g.add(g.matmul(feature, pr.node(g, "head.fuse.w")), pr.node(g, "head.fuse.b"));
}

DropDetail sample_modality_drop_detail(const ModalityMask& mask, const DropConfig& cfg,
                                       Rng& rng) {
  cfg.validate();
  if (mask.empty()) throw DataError("modality drop: empty input mask");
  DropDetail d;
  for (Modality m : mask.list()) {
    const bool dropped = rng.uniform01() < cfg.p;
    d.raw.set(m, !dropped);
  }
  d.kept = d.raw;
  if (d.kept.empty()) {
    const auto present = mask.list();
    d.kept.set(present[rng.uniform_int(present.size())]);
    d.resampled = true;
  }
  return d;
}

ModalityMask sample_modality_drop(const ModalityMask& mask, const DropConfig& cfg, Rng& rng) {
  return sample_modality_drop_detail(mask, cfg, rng).kept;
}

}  // namespace xmodal
