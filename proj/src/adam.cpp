// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/adam.hpp"

#include <cmath>

#include "xmodal/errors.hpp"

namespace xmodal {

void adam_step(ParamStore& params, const GradMap& grads, AdamState& state,
               const AdamConfig& cfg) {
  if (cfg.lr <= 0) throw ConfigError("adam: lr must be positive");
  if (cfg.beta1 < 0 || cfg.beta1 >= 1 || cfg.beta2 < 0 || cfg.beta2 >= 1)
    throw ConfigError("adam: betas must lie in [0, 1)");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (const auto& [name, g] : grads) {
    auto pit = params.find(name);
    if (pit == params.end()) throw ConfigError("adam: gradient for unknown parameter '" + name + "'");
    Tensor& p = pit->second;
    if (!p.same_dims(g)) throw DataError("adam: grad dims mismatch for '" + name + "'");
    g.ensure_finite("adam grad '" + name + "'");
    Tensor& m = state.m.try_emplace(name, Tensor::zeros(p.dims())).first->second;
    Tensor& v = state.v.try_emplace(name, Tensor::zeros(p.dims())).first->second;
    if (!m.same_dims(p)) throw DataError("adam: state dims mismatch for '" + name + "'");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace xmodal
