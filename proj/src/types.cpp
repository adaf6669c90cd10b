// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/types.hpp"

#include <sstream>

#include "xmodal/errors.hpp"

namespace xmodal {

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::kVideo:
      return "video";
    case Modality::kAudio:
      return "audio";
    case Modality::kImu:
      return "imu";
  }
  throw DataError("unknown modality enum");
}

Modality modality_from_name(const std::string& name) {
  if (name == "video") return Modality::kVideo;
  if (name == "audio") return Modality::kAudio;
  if (name == "imu") return Modality::kImu;
  throw DataError("unknown modality '" + name + "'");
}

ModalityMask ModalityMask::single(Modality m) {
  ModalityMask mask;
  mask.set(m);
  return mask;
}

bool ModalityMask::has(Modality m) const {
  switch (m) {
    case Modality::kVideo:
      return video;
    case Modality::kAudio:
      return audio;
    case Modality::kImu:
      return imu;
  }
  return false;
}

void ModalityMask::set(Modality m, bool value) {
  switch (m) {
    case Modality::kVideo:
      video = value;
      return;
    case Modality::kAudio:
      audio = value;
      return;
    case Modality::kImu:
      imu = value;
      return;
  }
}

std::vector<Modality> ModalityMask::list() const {
  std::vector<Modality> out;
  for (Modality m : kAllModalities)
    if (has(m)) out.push_back(m);
  return out;
}

bool ModalityMask::subset_of(const ModalityMask& other) const {
  for (Modality m : kAllModalities)
    if (has(m) && !other.has(m)) return false;
  return true;
}

bool ModalityMask::disjoint_with(const ModalityMask& other) const {
  for (Modality m : kAllModalities)
    if (has(m) && other.has(m)) return false;
  return true;
}

std::string ModalityMask::str() const {
  std::string out;
  for (Modality m : kAllModalities) {
    if (!has(m)) continue;
    if (!out.empty()) out += '+';
    out += modality_name(m);
  }
  return out.empty() ? "none" : out;
}

ModalityMask ModalityMask::parse(const std::string& text) {
  ModalityMask mask;
  std::string token;
  std::istringstream is(text);
  std::string normalized = text;
  for (char& c : normalized)
    if (c == '+') c = ',';
  std::istringstream stream(normalized);
  while (std::getline(stream, token, ',')) {
    if (token.empty()) continue;
    mask.set(modality_from_name(token));
  }
  if (mask.empty()) throw DataError("empty modality mask '" + text + "'");
  return mask;
}

}  // namespace xmodal
