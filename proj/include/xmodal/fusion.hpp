// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "xmodal/encoders.hpp"
#include "xmodal/graph.hpp"
#include "xmodal/params.hpp"
#include "xmodal/rng.hpp"
#include "xmodal/types.hpp"

namespace xmodal {

enum class Pooling { kMean, kCls };
enum class FusionKind { kAttention, kMlp };

struct FusionConfig {
  int depth = 2;
  int heads = 4;
  int dim = 64;
  Pooling pooling = Pooling::kMean;  // mean pooling outperforms CLS; CLS kept as option
  FusionKind kind = FusionKind::kAttention;

  TransformerShape transformer() const { return {depth, heads, dim}; }

  // Full-scale shape: two layers, 12 heads, width 768.
  static FusionConfig paper_default() { return {2, 12, 768, Pooling::kMean, FusionKind::kAttention}; }
  static FusionConfig desk_default() { return {2, 4, 64, Pooling::kMean, FusionKind::kAttention}; }

  void validate() const;
};

struct DropConfig {
  double p = 0.6;
  bool keep_at_least_one = true;  // always true; an empty forward pass is undefined

  void validate() const;
};

// Parameter init: modality embeddings e^m, the fusion transformer, a learned
// CLS token, and (for the MLP baseline) the two-layer perceptron.
void init_fusion(ParamStore& ps, const FusionConfig& cfg, std::uint64_t seed);
std::size_t fusion_param_count(const FusionConfig& cfg);   // attention path, embeddings included
std::size_t mlp_fuse_param_count(int dim);                 // hidden width 6D matches the above

// Token matrix entering the fusion transformer: masked-in modalities'
// tokens (+ e^m per token), concatenated in canonical order.
Tensor fuse_token_matrix(const std::vector<EncodedModality>& encoded, const ModalityMask& mask,
                         const ParamStore& ps, const FusionConfig& cfg);

// Transformer + pooling over an arbitrary token matrix [S x D]. Used by fuse()
// and directly by permutation-invariance checks.
Tensor fusion_pool(const Tensor& tokens, const ParamStore& ps, const FusionConfig& cfg);

// Eq.-style fused feature over the masked-in modalities. A singleton mask is
// the unimodal path, bit for bit.
UnifiedFeature fuse(const std::vector<EncodedModality>& encoded, const ModalityMask& mask,
                    const ParamStore& ps, const FusionConfig& cfg);

UnifiedFeature unimodal_project(const EncodedModality& encoded, const ParamStore& ps,
                                const FusionConfig& cfg);

// MLP baseline: pooled features concatenated in fixed order (video, audio,
// imu), zero vectors in masked-out slots, then a 2-layer perceptron.
UnifiedFeature mlp_fuse(const std::vector<EncodedModality>& encoded, const ModalityMask& mask,
                        const ParamStore& ps, const FusionConfig& cfg);

// Graph builders, for training. `tokens` pairs each present modality with an
// encoded [T_m x D] node.
NodeId fusion_feature(Graph& g, ParamRef& pr, const FusionConfig& cfg,
                      const std::vector<std::pair<Modality, NodeId>>& tokens,
                      const ModalityMask& mask);
NodeId mlp_fusion_feature(Graph& g, ParamRef& pr, const FusionConfig& cfg,
                          const std::vector<std::pair<Modality, NodeId>>& pooled,
                          const ModalityMask& mask);

// Classifier head attached to the fused feature ("head.fuse.w|b").
void init_fusion_head(ParamStore& ps, int dim, int num_classes, std::uint64_t seed);
Tensor fusion_logits(const UnifiedFeature& feature, const ParamStore& ps);
NodeId fusion_logits_node(Graph& g, ParamRef& pr, NodeId feature);

// Training-time modality dropout. Each present modality is dropped
// independently with probability p; if all drop, one survivor is resampled
// uniformly from the input mask.
struct DropDetail {
  ModalityMask kept;
  ModalityMask raw;      // Bernoulli stage before the keep-at-least-one rule
  bool resampled = false;
};

DropDetail sample_modality_drop_detail(const ModalityMask& mask, const DropConfig& cfg, Rng& rng);
ModalityMask sample_modality_drop(const ModalityMask& mask, const DropConfig& cfg, Rng& rng);

}  // namespace xmodal
