// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "xmodal/tensor.hpp"

namespace xmodal {

// MMGT tensor file layout, little-endian throughout:
//   bytes 0-3   magic "MMGT"
//   byte  4     version (1)
//   byte  5     dtype code: 0 = float32, 1 = float64
//   byte  6     rank
//   then        rank x u32 dims
//   then        payload, row-major
// Rank 0 is a scalar with a single payload value.
//
// Dataset tensors are written as float32 (code 0); checkpoints use float64
// (code 1) so training state round-trips exactly.

inline constexpr int kDtypeF32 = 0;
inline constexpr int kDtypeF64 = 1;

void write_tensor(const std::string& path, const Tensor& t, int dtype_code = kDtypeF32);
Tensor read_tensor(const std::string& path);

// In-memory encode/decode (used by the checkpoint container).
std::string encode_tensor(const Tensor& t, int dtype_code);
Tensor decode_tensor(const std::string& bytes, std::size_t* offset);

}  // namespace xmodal
