// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/encoders.hpp"

#include "xmodal/errors.hpp"
#include "xmodal/kernels.hpp"

namespace xmodal {

EncoderConfig EncoderConfig::desk_default() {
  EncoderConfig cfg;
  cfg.shape(Modality::kVideo) = {16, 8};
  cfg.shape(Modality::kAudio) = {12, 6};
  cfg.shape(Modality::kImu) = {8, 4};
  cfg.depth = 2;
  cfg.heads = 4;
  cfg.dim = 64;
  return cfg;
}

void EncoderConfig::validate() const {
  if (depth < 1) throw ConfigError("encoder: depth must be >= 1");
  if (dim <= 0) throw ConfigError("encoder: dim must be positive");
  if (heads <= 0 || dim % heads != 0)
    throw ConfigError("encoder: dim must be divisible by heads");
  for (Modality m : kAllModalities) {
    const auto& s = shape(m);
    if (s.input_width <= 0 || s.token_count <= 0)
      throw ConfigError(std::string("encoder: bad shape for ") + modality_name(m));
  }
}

std::string encoder_prefix(Modality m) { return std::string("enc.") + modality_name(m); }

void init_encoder(ParamStore& ps, const EncoderConfig& cfg, Modality m, std::uint64_t seed) {
  cfg.validate();
  const std::string p = encoder_prefix(m);
  const int din = cfg.shape(m).input_width;
  const int D = cfg.dim;
  init_gaussian(ps, p + ".in.w", {din, D}, seed, kInitScale);
  init_zeros(ps, p + ".in.b", {D});
  init_transformer(ps, p, cfg.transformer(), seed, kInitScale);
  init_gaussian(ps, p + ".out.w", {D, D}, seed, kInitScale);
  init_zeros(ps, p + ".out.b", {D});
}

ParamStore build_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
  ParamStore ps;
  for (Modality m : kAllModalities) init_encoder(ps, cfg, m, seed);
  return ps;
}

std::size_t encoder_param_count(const EncoderConfig& cfg, Modality m) {
  const std::size_t din = cfg.shape(m).input_width;
  const std::size_t D = cfg.dim;
  return din * D + D                                  // input projection
         + transformer_param_count(cfg.transformer()) //
         + D * D + D;                                 // output projection
}

NodeId encoder_tokens(Graph& g, ParamRef& pr, const EncoderConfig& cfg, Modality m,
                      NodeId tokens_in) {
  const std::string p = encoder_prefix(m);
  const Tensor& in = g.value(tokens_in);
  if (in.rank() != 2 || in.cols() != cfg.shape(m).input_width)
    throw DataError(std::string("encoder: ") + modality_name(m) + " tokens " + in.dims_str() +
                    " do not match configured input width " +
                    std::to_string(cfg.shape(m).input_width));
  NodeId x = g.add_rowvec(g.matmul(tokens_in, pr.node(g, p + ".in.w")), pr.node(g, p + ".in.b"));
  TransformerShape shape = cfg.transformer();
  x = transformer_stack(g, pr, p, x, shape);
  return g.add_rowvec(g.matmul(x, pr.node(g, p + ".out.w")), pr.node(g, p + ".out.b"));
}

EncodedModality encode(const ModalitySample& sample, const ParamStore& ps,
                       const EncoderConfig& cfg) {
  if (!ps.count(encoder_prefix(sample.modality) + ".in.w"))
    throw ConfigError(std::string("encode: no parameters for modality ") +
                      modality_name(sample.modality));
  sample.tokens.ensure_finite("encode input");
  Graph g;
  ParamRef pr(ps, /*trainable=*/false);
  const NodeId out = encoder_tokens(g, pr, cfg, sample.modality, g.constant(sample.tokens));
  g.forward();
  EncodedModality enc;
  enc.modality = sample.modality;
  enc.tokens_out = g.value(out);
  enc.pooled = k_mean_rows(enc.tokens_out);
  return enc;
}

void init_unimodal_head(ParamStore& ps, Modality m, int dim, int num_classes,
                        std::uint64_t seed) {
  const std::string p = std::string("head.uni.") + modality_name(m);
  init_gaussian(ps, p + ".w", {dim, num_classes}, seed, kInitScale);
  init_zeros(ps, p + ".b", {num_classes});
}

Tensor unimodal_logits(const EncodedModality& encoded, const ParamStore& ps, int num_classes) {
  const std::string p = std::string("head.uni.") + modality_name(encoded.modality);
  const Tensor& w = ps_get(ps, p + ".w");
  if (w.dims()[0] != encoded.pooled.dims()[0])
    throw DataError("unimodal_logits: head width mismatch");
  if (w.dims()[1] != num_classes)
    throw DataError("unimodal_logits: head has " + std::to_string(w.dims()[1]) +
                    " classes, expected " + std::to_string(num_classes));
  return k_add(k_matmul(encoded.pooled, w), ps_get(ps, p + ".b"));
}

NodeId unimodal_logits_node(Graph& g, ParamRef& pr, Modality m, NodeId pooled, int num_classes) {
  const std::string p = std::string("head.uni.") + modality_name(m);
  const NodeId w = pr.node(g, p + ".w");
  if (g.value(w).dims()[1] != num_classes)
    throw DataError("unimodal_logits: head class count mismatch");
  return g.add(g.matmul(pooled, w), pr.node(g, p + ".b"));
}

}  // namespace xmodal
