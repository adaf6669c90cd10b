// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace xmodal {

// Error taxonomy maps onto CLI exit codes: usage/config -> 1, data -> 2, numeric -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad flags, malformed invocations, inconsistent model configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed files, missing tensors, id collisions, shape mismatches at module boundaries.
struct DataError : Error {
  using Error::Error;
};

// NaN/Inf or degenerate values (zero-norm cosine). Never silently propagated.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace xmodal
