// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "xmodal/params.hpp"

namespace xmodal {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  ParamStore m;  // first moments, lazily created per parameter
  ParamStore v;  // second moments
};

// One bias-corrected Adam update. Only parameters present in `grads` move;
// moments are keyed by name and created on first sight. Deterministic given
// identical inputs.
void adam_step(ParamStore& params, const GradMap& grads, AdamState& state,
               const AdamConfig& cfg);

}  // namespace xmodal
