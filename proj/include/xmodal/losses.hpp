// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "xmodal/graph.hpp"
#include "xmodal/types.hpp"

namespace xmodal {

// ---------------------------------------------------------------------------
// Cross-entropy
// ---------------------------------------------------------------------------

// log-sum-exp(logits) - logits[label]; gradient is softmax - one-hot.
double cross_entropy(const Tensor& logits, int label);

// ---------------------------------------------------------------------------
// Contrastive alignment
// ---------------------------------------------------------------------------

// Video-anchored, asymmetric, exactly two pair terms (video-audio, video-imu).
// The optional reverse term is an ablation flag, off by default.
struct AlignConfig {
  double tau = 0.07;
  bool symmetric = false;

  void validate() const;  // tau > 0
};

// Features from one temporal location. Missing modalities carry no feature
// and contribute no term for their pair.
struct AlignTriple {
  std::optional<Tensor> video;
  std::optional<Tensor> audio;
  std::optional<Tensor> imu;

  const std::optional<Tensor>& get(Modality m) const;
};

using AlignBatch = std::vector<AlignTriple>;

// Per anchor (video feature at location t) and pair modality m: the positive
// is m's feature at t, negatives are m's features at every other location in
// the batch; similarity is cosine scaled by 1/tau. Per-anchor terms are
// averaged over anchors and summed over the two pairs.
double alignment_loss(const AlignBatch& batch, const AlignConfig& cfg);

// Graph form over unified-feature nodes; id -1 marks an absent modality.
using AlignTripleNodes = std::array<NodeId, 3>;
NodeId alignment_loss_node(Graph& g, const std::vector<AlignTripleNodes>& triples,
                           const AlignConfig& cfg);

// ---------------------------------------------------------------------------
// Cross-modal prototypical loss
// ---------------------------------------------------------------------------

struct SupportGroup {
  int label = 0;
  ModalityMask mask;  // provenance of the features
  std::vector<Tensor> features;
};

struct Prototype {
  int label = 0;
  ModalityMask mask;
  Tensor centroid;
};

// One prototype per group; centroid is the exact (stable) mean.
std::vector<Prototype> prototypes(const std::vector<SupportGroup>& groups);

enum class ProtoDistance { kSquaredL2, kL2 };

// P_k = softmax_k(-d(query, c_k)). Requires exactly one prototype per class
// 0..N-1; query modality may differ from prototype modality.
Tensor proto_probabilities(const Tensor& query, const std::vector<Prototype>& protos,
                           ProtoDistance metric = ProtoDistance::kSquaredL2);

// -log P_y with a 1e-30 floor (warned) to avoid -inf on saturated inputs.
double proto_loss(const Tensor& probs, int true_class);

// Graph form of the episode loss: mean over queries of
// lse(-d(query, c_*)) + d(query, c_y), with centroids built in-graph from the
// support feature nodes (one centroid per class over all support features).
NodeId proto_episode_loss_node(Graph& g, const std::vector<std::vector<NodeId>>& support_by_class,
                               const std::vector<std::pair<NodeId, int>>& queries,
                               ProtoDistance metric = ProtoDistance::kSquaredL2);

}  // namespace xmodal
