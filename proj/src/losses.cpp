// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "xmodal/errors.hpp"
#include "xmodal/kernels.hpp"

namespace xmodal {

double cross_entropy(const Tensor& logits, int label) {
  logits.ensure_finite("cross_entropy logits");
  return k_cross_entropy(logits, label).scalar_value();
}

void AlignConfig::validate() const {
  if (tau <= 0.0) throw ConfigError("alignment: tau must be positive");
}

const std::optional<Tensor>& AlignTriple::get(Modality m) const {
  switch (m) {
    case Modality::kVideo:
      return video;
    case Modality::kAudio:
      return audio;
    case Modality::kImu:
      return imu;
  }
  throw DataError("align: unknown modality");
}

namespace {

// Shared between eager and graph paths: one anchored InfoNCE term per
// (anchor location, pair modality), positives first.
NodeId anchored_pair_terms(Graph& g, const std::vector<AlignTripleNodes>& triples,
                           int anchor_idx, int other_idx, double tau,
                           std::vector<NodeId>& terms) {
  const std::size_t B = triples.size();
  for (std::size_t t = 0; t < B; ++t) {
    const NodeId anchor = triples[t][anchor_idx];
    const NodeId positive = triples[t][other_idx];
    if (anchor < 0 || positive < 0) continue;
    std::vector<NodeId> logits;
    const NodeId pos_logit = g.scale(g.cosine(anchor, positive), 1.0 / tau);
    logits.push_back(pos_logit);
    for (std::size_t j = 0; j < B; ++j) {
      if (j == t) continue;
      const NodeId neg = triples[j][other_idx];
      if (neg < 0) continue;
      logits.push_back(g.scale(g.cosine(anchor, neg), 1.0 / tau));
    }
    // -log(exp(pos)/sum(exp)) = lse(all) - pos
    terms.push_back(g.sub(g.log_sum_exp(g.stack(logits)), pos_logit));
  }
  if (terms.empty()) return -1;
  return g.scale(g.add_n(terms), 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

NodeId alignment_loss_node(Graph& g, const std::vector<AlignTripleNodes>& triples,
                           const AlignConfig& cfg) {
  cfg.validate();
  if (triples.empty()) throw DataError("alignment: empty batch");
  constexpr int kVideoIdx = 0;
  std::vector<NodeId> pair_means;
  for (int other : {1, 2}) {  // audio, imu
    std::vector<NodeId> terms;
    const NodeId mean = anchored_pair_terms(g, triples, kVideoIdx, other, cfg.tau, terms);
    if (mean >= 0) pair_means.push_back(mean);
    if (cfg.symmetric) {
      std::vector<NodeId> rev;
      const NodeId rmean = anchored_pair_terms(g, triples, other, kVideoIdx, cfg.tau, rev);
      if (rmean >= 0) pair_means.push_back(rmean);
    }
  }
  if (pair_means.empty()) return g.constant(Tensor::scalar(0.0));
  if (pair_means.size() == 1) return pair_means[0];
  return g.add_n(pair_means);
}

double alignment_loss(const AlignBatch& batch, const AlignConfig& cfg) {
  cfg.validate();
  if (batch.empty()) throw DataError("alignment: empty batch");
  Graph g;
  std::vector<AlignTripleNodes> nodes;
  nodes.reserve(batch.size());
  for (const AlignTriple& t : batch) {
    AlignTripleNodes n{-1, -1, -1};
    for (Modality m : kAllModalities) {
      const auto& f = t.get(m);
      if (f) {
        f->ensure_finite("alignment feature");
        n[static_cast<int>(m)] = g.constant(*f);
      }
    }
    nodes.push_back(n);
  }
  const NodeId loss = alignment_loss_node(g, nodes, cfg);
  g.forward();
  return g.value(loss).scalar_value();
}

std::vector<Prototype> prototypes(const std::vector<SupportGroup>& groups) {
  if (groups.empty()) throw DataError("prototypes: no support groups");
  std::vector<Prototype> out;
  out.reserve(groups.size());
  for (const SupportGroup& grp : groups) {
    if (grp.features.empty())
      throw DataError("prototypes: empty support group for class " + std::to_string(grp.label));
    std::vector<const Tensor*> views;
    for (const Tensor& f : grp.features) views.push_back(&f);
    out.push_back({grp.label, grp.mask, k_mean_n(views)});
  }
  return out;
}

Tensor proto_probabilities(const Tensor& query, const std::vector<Prototype>& protos,
                           ProtoDistance metric) {
  if (protos.empty()) throw DataError("proto_probabilities: no prototypes");
  const int N = static_cast<int>(protos.size());
  std::vector<int> seen(N, 0);
  Tensor neg_d = Tensor::zeros({N});
  for (const Prototype& p : protos) {
    if (p.label < 0 || p.label >= N || seen[p.label]++)
      throw DataError("proto_probabilities: prototypes must cover classes 0..N-1 exactly once");
    double d = k_sq_l2(query, p.centroid).scalar_value();
    if (metric == ProtoDistance::kL2) d = std::sqrt(d);
    neg_d[p.label] = -d;
  }
  return k_softmax(neg_d, 0);
}

double proto_loss(const Tensor& probs, int true_class) {
  if (probs.rank() != 1) throw DataError("proto_loss: probs must be rank 1");
  const int N = probs.dims()[0];
  if (true_class < 0 || true_class >= N) throw DataError("proto_loss: class out of range");
  double total = 0.0;
  for (int i = 0; i < N; ++i) {
    if (probs[i] < 0.0) throw DataError("proto_loss: negative probability");
    total += probs[i];
  }
  if (std::fabs(total - 1.0) > 1e-9) throw DataError("proto_loss: probabilities must sum to 1");
  double p = probs[true_class];
  if (p < 1e-30) {
    std::fprintf(stderr, "[xmodal] proto_loss: probability %.3e floored at 1e-30\n", p);
    p = 1e-30;
  }
  return -std::log(p);
}

NodeId proto_episode_loss_node(Graph& g, const std::vector<std::vector<NodeId>>& support_by_class,
                               const std::vector<std::pair<NodeId, int>>& queries,
                               ProtoDistance metric) {
  const int N = static_cast<int>(support_by_class.size());
  if (N < 2) throw DataError("proto loss: need at least two classes");
  if (queries.empty()) throw DataError("proto loss: no queries");
  std::vector<NodeId> centroids;
  centroids.reserve(N);
  for (const auto& feats : support_by_class) {
    if (feats.empty()) throw DataError("proto loss: class with empty support");
    centroids.push_back(feats.size() == 1 ? feats[0] : g.mean_n(feats));
  }
  std::vector<NodeId> per_query;
  per_query.reserve(queries.size());
  for (const auto& [qnode, label] : queries) {
    if (label < 0 || label >= N) throw DataError("proto loss: query label out of range");
    std::vector<NodeId> dists;
    dists.reserve(N);
    for (int k = 0; k < N; ++k) {
      NodeId d = g.sq_l2(qnode, centroids[k]);
      if (metric == ProtoDistance::kL2) d = g.sqrt_op(d);
      dists.push_back(d);
    }
    // -log softmax(-d)[y] = lse(-d) + d_y
    const NodeId lse = g.log_sum_exp(g.scale(g.stack(dists), -1.0));
    per_query.push_back(g.add(lse, dists[label]));
  }
  const NodeId sum = per_query.size() == 1 ? per_query[0] : g.add_n(per_query);
  return g.scale(sum, 1.0 / static_cast<double>(per_query.size()));
}

}  // namespace xmodal
