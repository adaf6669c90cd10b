// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

namespace xmodal {

// Deterministic RNG with hand-rolled distributions so that streams are
// reproducible across standard libraries, not just across runs.
// Core generator: splitmix64-seeded xoshiro256**.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01();

  // Unbiased integer in [0, n), n > 0. Rejection sampling.
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via Box-Muller (one value per call, twin discarded).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::uint64_t s_[4];
};

// 64-bit FNV-1a, used to derive named sub-streams and config hashes.
std::uint64_t fnv1a64(std::string_view bytes);

// Stream derivation: mixes a base seed with a label or index.
std::uint64_t mix_seed(std::uint64_t base, std::string_view label);
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index);

}  // namespace xmodal
