// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "xmodal/graph.hpp"
#include "xmodal/rng.hpp"
#include "xmodal/tensor.hpp"

namespace xmodal {

// Named parameter tensors. std::map keeps iteration order deterministic.
using ParamStore = std::map<std::string, Tensor>;
using GradMap = std::map<std::string, Tensor>;

const Tensor& ps_get(const ParamStore& ps, const std::string& name);

// Gaussian init drawn from a stream derived from (seed, name), so parameter
// values do not depend on creation order.
Tensor gaussian_tensor(std::vector<int> dims, std::uint64_t seed, const std::string& name,
                       double scale);

void init_gaussian(ParamStore& ps, const std::string& name, std::vector<int> dims,
                   std::uint64_t seed, double scale);
void init_zeros(ParamStore& ps, const std::string& name, std::vector<int> dims);
void init_ones(ParamStore& ps, const std::string& name, std::vector<int> dims);

// Feeds store tensors into a graph either as trainable params (deduped by
// name) or as frozen constants (deduped locally).
class ParamRef {
 public:
  ParamRef(const ParamStore& store, bool trainable) : store_(&store), trainable_(trainable) {}

  NodeId node(Graph& g, const std::string& name);

  bool trainable() const { return trainable_; }
  const ParamStore& store() const { return *store_; }

 private:
  const ParamStore* store_;
  bool trainable_;
  std::map<std::string, NodeId> cache_;
};

}  // namespace xmodal
