// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "xmodal/model.hpp"

namespace xmodal {

// Checkpoint container ("MMGC"): a config-hash header, the resolved run config
// (so eval commands can rebuild the model without the original file), the
// model shape, and every named parameter as an embedded float64 MMGT blob.
//
//   magic "MMGC" | version u8 (1) | config_hash u64 | num_classes u32 |
//   shape block (encoder depth/heads/dim, 3 x (input_width, token_count),
//                fusion depth/heads/dim/pooling/kind) |
//   config json (u32 length + bytes) |
//   u32 tensor count | per tensor: u16 name length, name, MMGT blob

struct CheckpointMeta {
  std::uint64_t config_hash = 0;
  std::string config_json;
};

void save_checkpoint(const std::string& path, const Model& model, const CheckpointMeta& meta);
Model load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

}  // namespace xmodal
