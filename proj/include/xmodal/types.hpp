// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "xmodal/tensor.hpp"

namespace xmodal {

enum class Modality : int { kVideo = 0, kAudio = 1, kImu = 2 };

inline constexpr std::array<Modality, 3> kAllModalities{Modality::kVideo, Modality::kAudio,
                                                        Modality::kImu};

const char* modality_name(Modality m);
Modality modality_from_name(const std::string& name);  // throws DataError on unknown

// Subset of {video, audio, imu}. Canonical order is video, audio, imu.
struct ModalityMask {
  bool video = false;
  bool audio = false;
  bool imu = false;

  static ModalityMask all() { return {true, true, true}; }
  static ModalityMask single(Modality m);

  bool has(Modality m) const;
  void set(Modality m, bool value = true);
  int count() const { return int(video) + int(audio) + int(imu); }
  bool empty() const { return count() == 0; }
  std::vector<Modality> list() const;  // canonical order

  bool operator==(const ModalityMask&) const = default;

  bool subset_of(const ModalityMask& other) const;
  bool disjoint_with(const ModalityMask& other) const;

  // "video+audio" form (CSV-safe). parse() also accepts commas.
  std::string str() const;
  static ModalityMask parse(const std::string& text);
};

// One clip's single-modality token stream, as shipped by the data engine.
struct ModalitySample {
  Modality modality = Modality::kVideo;
  Tensor tokens;  // [T_m x D_in_m]
  std::string source_example_id;
};

// Per-modality encoder output: the token sequence handed to fusion, plus its
// mean pooling for MLP-style consumers.
struct EncodedModality {
  Modality modality = Modality::kVideo;
  Tensor tokens_out;  // [T_m x D]
  Tensor pooled;      // [D], mean of tokens_out
};

// A point in the shared feature space, with the mask that produced it.
struct UnifiedFeature {
  Tensor z;
  ModalityMask provenance;
};

}  // namespace xmodal
