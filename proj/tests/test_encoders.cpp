// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "xmodal/encoders.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/kernels.hpp"

using namespace xmodal;
using xtest::rand_tensor;

namespace {

EncoderConfig small_config() {
  EncoderConfig cfg;
  cfg.shape(Modality::kVideo) = {6, 4};
  cfg.shape(Modality::kAudio) = {5, 3};
  cfg.shape(Modality::kImu) = {4, 2};
  cfg.depth = 1;
  cfg.heads = 2;
  cfg.dim = 8;
  return cfg;
}

ModalitySample sample_for(const EncoderConfig& cfg, Modality m, Rng& rng) {
  return {m, rand_tensor({cfg.shape(m).token_count, cfg.shape(m).input_width}, rng), "s"};
}

}  // namespace

TEST_CASE("build_encoder is deterministic per seed") {
  const EncoderConfig cfg = small_config();
  const ParamStore a = build_encoder(cfg, 123);
  const ParamStore b = build_encoder(cfg, 123);
  const ParamStore c = build_encoder(cfg, 124);
  REQUIRE(a.size() == b.size());
  for (const auto& [name, tensor] : a) CHECK(tensor.bit_equal(b.at(name)));
  bool any_diff = false;
  for (const auto& [name, tensor] : a)
    if (!tensor.bit_equal(c.at(name))) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("parameter count matches the hand-counted formula for the desk shape") {
  // D=64, depth 2, heads 4, video input 16x8:
  //   in: 16*64+64 = 1088
  //   per block: ln 128 + attn 4*(64*64+64) = 16640 + ln 128
  //              + mlp 64*256+256 + 256*64+64 = 33088          -> 49984
  //   final ln 128, out: 64*64+64 = 4160
  const EncoderConfig cfg = EncoderConfig::desk_default();
  const std::size_t expected_video = 1088 + 2 * 49984 + 128 + 4160;
  CHECK(encoder_param_count(cfg, Modality::kVideo) == expected_video);

  ParamStore ps;
  init_encoder(ps, cfg, Modality::kVideo, 7);
  std::size_t actual = 0;
  for (const auto& [name, tensor] : ps) actual += tensor.size();
  CHECK(actual == expected_video);
}

TEST_CASE("zero output projection gives a zero pooled vector") {
  const EncoderConfig cfg = small_config();
  ParamStore ps = build_encoder(cfg, 5);
  ps["enc.video.out.w"] = Tensor::zeros({cfg.dim, cfg.dim});
  ps["enc.video.out.b"] = Tensor::zeros({cfg.dim});
  Rng rng(1);
  const EncodedModality enc = encode(sample_for(cfg, Modality::kVideo, rng), ps, cfg);
  for (std::size_t i = 0; i < enc.pooled.size(); ++i) CHECK(enc.pooled[i] == 0.0);
}

TEST_CASE("duplicating input tokens duplicates output rows and preserves pooled exactly") {
  const EncoderConfig cfg = small_config();
  const ParamStore ps = build_encoder(cfg, 9);
  Rng rng(2);
  ModalitySample sample = sample_for(cfg, Modality::kAudio, rng);

  EncoderConfig doubled = cfg;
  doubled.shape(Modality::kAudio).token_count *= 2;
  ModalitySample twice = sample;
  const int T = sample.tokens.rows(), W = sample.tokens.cols();
  Tensor dup = Tensor::zeros({2 * T, W});
  for (int t = 0; t < T; ++t)
    for (int w = 0; w < W; ++w) {
      dup(2 * t, w) = sample.tokens(t, w);
      dup(2 * t + 1, w) = sample.tokens(t, w);
    }
  twice.tokens = dup;

  const EncodedModality enc1 = encode(sample, ps, cfg);
  const EncodedModality enc2 = encode(twice, ps, doubled);
  for (int t = 0; t < T; ++t)
    for (int d = 0; d < cfg.dim; ++d) {
      CHECK(enc2.tokens_out(2 * t, d) == enc1.tokens_out(t, d));
      CHECK(enc2.tokens_out(2 * t + 1, d) == enc1.tokens_out(t, d));
    }
  CHECK(enc2.pooled.bit_equal(enc1.pooled));
}

TEST_CASE("input token permutation permutes output rows and preserves pooled") {
  const EncoderConfig cfg = small_config();
  const ParamStore ps = build_encoder(cfg, 11);
  Rng rng(3);
  ModalitySample sample = sample_for(cfg, Modality::kVideo, rng);
  const int T = sample.tokens.rows(), W = sample.tokens.cols();
  std::vector<int> perm(T);
  for (int t = 0; t < T; ++t) perm[t] = (t + 2) % T;
  ModalitySample shuffled = sample;
  Tensor p = Tensor::zeros({T, W});
  for (int t = 0; t < T; ++t)
    for (int w = 0; w < W; ++w) p(t, w) = sample.tokens(perm[t], w);
  shuffled.tokens = p;

  const EncodedModality a = encode(sample, ps, cfg);
  const EncodedModality b = encode(shuffled, ps, cfg);
  for (int t = 0; t < T; ++t)
    for (int d = 0; d < cfg.dim; ++d) CHECK(b.tokens_out(t, d) == a.tokens_out(perm[t], d));
  CHECK(b.pooled.bit_equal(a.pooled));
}

TEST_CASE("pooled equals the stable mean of tokens_out") {
  const EncoderConfig cfg = small_config();
  const ParamStore ps = build_encoder(cfg, 13);
  Rng rng(4);
  const EncodedModality enc = encode(sample_for(cfg, Modality::kImu, rng), ps, cfg);
  CHECK(enc.pooled.bit_equal(k_mean_rows(enc.tokens_out)));
}

TEST_CASE("modalities never share parameters") {
  const EncoderConfig cfg = small_config();
  ParamStore ps = build_encoder(cfg, 17);
  Rng rng(5);
  const ModalitySample video = sample_for(cfg, Modality::kVideo, rng);
  const EncodedModality before = encode(video, ps, cfg);
  // perturb every audio parameter
  for (auto& [name, tensor] : ps)
    if (name.rfind("enc.audio.", 0) == 0)
      for (std::size_t i = 0; i < tensor.size(); ++i) tensor[i] += 0.25;
  const EncodedModality after = encode(video, ps, cfg);
  CHECK(after.tokens_out.bit_equal(before.tokens_out));
  CHECK(after.pooled.bit_equal(before.pooled));
}

TEST_CASE("encode rejects unknown modality and wrong widths") {
  const EncoderConfig cfg = small_config();
  ParamStore ps;
  init_encoder(ps, cfg, Modality::kVideo, 1);
  Rng rng(6);
  CHECK_THROWS_AS(encode(sample_for(cfg, Modality::kAudio, rng), ps, cfg), ConfigError);

  ModalitySample bad = sample_for(cfg, Modality::kVideo, rng);
  bad.tokens = rand_tensor({6, 7}, rng);  // wrong input width
  CHECK_THROWS_AS(encode(bad, ps, cfg), DataError);
}

TEST_CASE("unimodal classifier head") {
  const EncoderConfig cfg = small_config();
  Rng rng(8);

  SUBCASE("zero head weights give uniform softmax") {
    ParamStore ps;
    init_unimodal_head(ps, Modality::kVideo, cfg.dim, 5, 3);
    ps["head.uni.video.w"] = Tensor::zeros({cfg.dim, 5});
    EncodedModality enc;
    enc.modality = Modality::kVideo;
    enc.tokens_out = rand_tensor({3, cfg.dim}, rng);
    enc.pooled = k_mean_rows(enc.tokens_out);
    const Tensor logits = unimodal_logits(enc, ps, 5);
    for (int i = 0; i < 5; ++i) CHECK(logits[i] == 0.0);
    const Tensor probs = k_softmax(logits, 0);
    for (int i = 0; i < 5; ++i) CHECK(probs[i] == doctest::Approx(0.2).epsilon(1e-12));
  }

  SUBCASE("two-class head on a two-dim feature matches hand arithmetic") {
    ParamStore ps;
    ps["head.uni.audio.w"] = Tensor({2, 2}, {1.0, -2.0, 0.5, 3.0});
    ps["head.uni.audio.b"] = Tensor({2}, {0.25, -1.0});
    EncodedModality enc;
    enc.modality = Modality::kAudio;
    enc.tokens_out = Tensor({1, 2}, {2.0, -1.0});
    enc.pooled = Tensor({2}, {2.0, -1.0});
    const Tensor logits = unimodal_logits(enc, ps, 2);
    // [2, -1] @ [[1, -2], [0.5, 3]] + [0.25, -1] = [1.5+0.25, -7-1]
    CHECK(logits[0] == doctest::Approx(1.75).epsilon(1e-12));
    CHECK(logits[1] == doctest::Approx(-8.0).epsilon(1e-12));
    CHECK_THROWS_AS(unimodal_logits(enc, ps, 3), DataError);
  }

  SUBCASE("cross-entropy gradient through the head passes finite differences") {
    ParamStore ps = build_encoder(cfg, 19);
    init_unimodal_head(ps, Modality::kVideo, cfg.dim, 4, 19);
    Graph g;
    ParamRef pr(ps, true);
    const NodeId tokens =
        g.constant(rand_tensor({4, cfg.shape(Modality::kVideo).input_width}, rng));
    const NodeId enc = encoder_tokens(g, pr, cfg, Modality::kVideo, tokens);
    const NodeId logits = unimodal_logits_node(g, pr, Modality::kVideo, g.mean_rows(enc), 4);
    const NodeId loss = g.cross_entropy(logits, 2);
    const FdReport head_w =
        finite_difference_check(g, loss, g.param_id("head.uni.video.w"), 1e-5, 1e-4);
    CHECK(head_w.pass);
    const FdReport enc_w =
        finite_difference_check(g, loss, g.param_id("enc.video.in.w"), 1e-5, 1e-4);
    CHECK(enc_w.pass);
  }
}

TEST_CASE("encode is reproducible") {
  const EncoderConfig cfg = small_config();
  const ParamStore ps = build_encoder(cfg, 23);
  Rng rng(10);
  const ModalitySample sample = sample_for(cfg, Modality::kVideo, rng);
  const EncodedModality a = encode(sample, ps, cfg);
  const EncodedModality b = encode(sample, ps, cfg);
  CHECK(a.tokens_out.bit_equal(b.tokens_out));
  CHECK(a.pooled.bit_equal(b.pooled));
}
