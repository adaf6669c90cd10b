// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "xmodal/graph.hpp"
#include "xmodal/ops.hpp"
#include "xmodal/params.hpp"
#include "xmodal/types.hpp"

namespace xmodal {

// Small per-modality transformer stacks with a shared output width. They stand
// in for heavyweight per-modality backbones; everything downstream only sees
// the [T_m x D] token sequences and their pooled means.
struct EncoderModalityShape {
  int input_width = 0;
  int token_count = 0;
};

struct EncoderConfig {
  std::array<EncoderModalityShape, 3> shapes{};  // indexed by Modality
  int depth = 2;
  int heads = 4;
  int dim = 64;  // shared output width D, identical across modalities

  const EncoderModalityShape& shape(Modality m) const {
    return shapes[static_cast<int>(m)];
  }
  EncoderModalityShape& shape(Modality m) { return shapes[static_cast<int>(m)]; }
  TransformerShape transformer() const { return {depth, heads, dim}; }

  static EncoderConfig desk_default();  // D=64, depth 2, heads 4; T = 8/6/4

  void validate() const;  // throws ConfigError
};

std::string encoder_prefix(Modality m);

// Deterministic init (Gaussian, scale 0.02) of one modality's encoder.
void init_encoder(ParamStore& ps, const EncoderConfig& cfg, Modality m, std::uint64_t seed);

// All three modalities. The spec-level build operation.
ParamStore build_encoder(const EncoderConfig& cfg, std::uint64_t seed);

std::size_t encoder_param_count(const EncoderConfig& cfg, Modality m);

// Graph builder: raw tokens [T_m x D_in_m] -> output tokens [T_m x D].
NodeId encoder_tokens(Graph& g, ParamRef& pr, const EncoderConfig& cfg, Modality m,
                      NodeId tokens_in);

// Eager forward. pooled is the stable mean of tokens_out.
EncodedModality encode(const ModalitySample& sample, const ParamStore& ps,
                       const EncoderConfig& cfg);

// Linear classifier head on the pooled feature. Head params live at
// "head.uni.<modality>.w|b".
void init_unimodal_head(ParamStore& ps, Modality m, int dim, int num_classes,
                        std::uint64_t seed);
Tensor unimodal_logits(const EncodedModality& encoded, const ParamStore& ps, int num_classes);
NodeId unimodal_logits_node(Graph& g, ParamRef& pr, Modality m, NodeId pooled, int num_classes);

constexpr double kInitScale = 0.02;

}  // namespace xmodal
