// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/params.hpp"

#include "xmodal/errors.hpp"

namespace xmodal {

const Tensor& ps_get(const ParamStore& ps, const std::string& name) {
  auto it = ps.find(name);
  if (it == ps.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

Tensor gaussian_tensor(std::vector<int> dims, std::uint64_t seed, const std::string& name,
                       double scale) {
  Rng rng(mix_seed(seed, name));
  Tensor t = Tensor::zeros(std::move(dims));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
  return t;
}

void init_gaussian(ParamStore& ps, const std::string& name, std::vector<int> dims,
                   std::uint64_t seed, double scale) {
  ps[name] = gaussian_tensor(std::move(dims), seed, name, scale);
}

void init_zeros(ParamStore& ps, const std::string& name, std::vector<int> dims) {
  ps[name] = Tensor::zeros(std::move(dims));
}

void init_ones(ParamStore& ps, const std::string& name, std::vector<int> dims) {
  ps[name] = Tensor::full(std::move(dims), 1.0);
}

NodeId ParamRef::node(Graph& g, const std::string& name) {
  if (trainable_) return g.param(name, ps_get(*store_, name));
  auto it = cache_.find(name);
  if (it != cache_.end()) return it->second;
  const NodeId id = g.constant(ps_get(*store_, name));
  cache_[name] = id;
  return id;
}

}  // namespace xmodal
