// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>

#include "xmodal/encoders.hpp"
#include "xmodal/fusion.hpp"
#include "xmodal/params.hpp"
#include "xmodal/types.hpp"

namespace xmodal {

struct ModelConfig {
  EncoderConfig encoder;
  FusionConfig fusion;

  void validate() const;  // widths must agree
  static ModelConfig desk_default();
};

// Full multimodal network: three encoders, fusion, unimodal pretrain heads and
// the fused classifier head, all in one named parameter store.
struct Model {
  ModelConfig cfg;
  int num_classes = 0;
  ParamStore params;
};

Model build_model(const ModelConfig& cfg, int num_classes, std::uint64_t seed);

using TokensByModality = std::map<Modality, Tensor>;

// Frozen forward: encode each masked-in modality and fuse. The z vector of
// Eq-style fused features for inference paths.
Tensor model_embed(const Model& model, const TokensByModality& tokens, const ModalityMask& mask);

// Pooled output of a single encoder, bypassing fusion (unimodal baselines).
Tensor encoder_pooled_embed(const Model& model, const TokensByModality& tokens, Modality m);

// Classifier logits from the fused feature.
Tensor model_logits(const Model& model, const TokensByModality& tokens, const ModalityMask& mask);

// Graph builder: raw tokens for one example -> fused feature node.
// Encoders/fusion enter as trainable params or frozen constants per the refs.
NodeId model_feature_node(Graph& g, ParamRef& enc_ref, ParamRef& fus_ref, const Model& model,
                          const TokensByModality& tokens, const ModalityMask& mask);

int argmax_index(const Tensor& v);  // lowest index wins ties

}  // namespace xmodal
