// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/model.hpp"

#include "xmodal/errors.hpp"
#include "xmodal/kernels.hpp"

namespace xmodal {

void ModelConfig::validate() const {
  encoder.validate();
  fusion.validate();
  if (encoder.dim != fusion.dim)
    throw ConfigError("model: encoder width " + std::to_string(encoder.dim) +
                      " != fusion width " + std::to_string(fusion.dim));
}

ModelConfig ModelConfig::desk_default() {
  ModelConfig cfg;
  cfg.encoder = EncoderConfig::desk_default();
  cfg.fusion = FusionConfig::desk_default();
  return cfg;
}

Model build_model(const ModelConfig& cfg, int num_classes, std::uint64_t seed) {
  cfg.validate();
  if (num_classes < 2) throw ConfigError("model: need at least two classes");
  Model m;
  m.cfg = cfg;
  m.num_classes = num_classes;
  for (Modality mod : kAllModalities) {
    init_encoder(m.params, cfg.encoder, mod, seed);
    init_unimodal_head(m.params, mod, cfg.encoder.dim, num_classes, seed);
  }
  init_fusion(m.params, cfg.fusion, seed);
  init_fusion_head(m.params, cfg.fusion.dim, num_classes, seed);
  return m;
}

namespace {

std::vector<EncodedModality> encode_masked(const Model& model, const TokensByModality& tokens,
                                           const ModalityMask& mask) {
  std::vector<EncodedModality> encoded;
  for (Modality m : mask.list()) {
    auto it = tokens.find(m);
    if (it == tokens.end())
      throw DataError(std::string("model_embed: modality ") + modality_name(m) +
                      " in mask but missing from example");
    ModalitySample sample{m, it->second, ""};
    encoded.push_back(encode(sample, model.params, model.cfg.encoder));
  }
  return encoded;
}

}  // namespace

Tensor model_embed(const Model& model, const TokensByModality& tokens, const ModalityMask& mask) {
  return fuse(encode_masked(model, tokens, mask), mask, model.params, model.cfg.fusion).z;
}

Tensor encoder_pooled_embed(const Model& model, const TokensByModality& tokens, Modality m) {
  auto it = tokens.find(m);
  if (it == tokens.end())
    throw DataError(std::string("encoder_pooled_embed: missing modality ") + modality_name(m));
  ModalitySample sample{m, it->second, ""};
  return encode(sample, model.params, model.cfg.encoder).pooled;
}

Tensor model_logits(const Model& model, const TokensByModality& tokens, const ModalityMask& mask) {
  UnifiedFeature f;
  f.z = model_embed(model, tokens, mask);
  f.provenance = mask;
  return fusion_logits(f, model.params);
}

NodeId model_feature_node(Graph& g, ParamRef& enc_ref, ParamRef& fus_ref, const Model& model,
                          const TokensByModality& tokens, const ModalityMask& mask) {
  std::vector<std::pair<Modality, NodeId>> encoded;
  for (Modality m : mask.list()) {
    auto it = tokens.find(m);
    if (it == tokens.end())
      throw DataError(std::string("model_feature_node: modality ") + modality_name(m) +
                      " in mask but missing from example");
    encoded.emplace_back(m,
                         encoder_tokens(g, enc_ref, model.cfg.encoder, m, g.constant(it->second)));
  }
  if (model.cfg.fusion.kind == FusionKind::kMlp) {
    std::vector<std::pair<Modality, NodeId>> pooled;
    for (const auto& [m, node] : encoded) pooled.emplace_back(m, g.mean_rows(node));
    return mlp_fusion_feature(g, fus_ref, model.cfg.fusion, pooled, mask);
  }
  return fusion_feature(g, fus_ref, model.cfg.fusion, encoded, mask);
}

int argmax_index(const Tensor& v) {
  if (v.rank() != 1 || v.size() == 0) throw DataError("argmax: expected non-empty vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace xmodal
