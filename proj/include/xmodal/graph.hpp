// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "xmodal/tensor.hpp"

namespace xmodal {

using NodeId = int;

enum class OpKind : std::uint8_t {
  kParam,
  kConst,
  kAdd,
  kSub,
  kMul,
  kScale,
  kMatMul,
  kTranspose,
  kAddRowVec,
  kMeanRows,
  kMeanN,
  kAddN,
  kSumAll,
  kSoftmax,
  kLayerNorm,
  kGelu,
  kConcatRows,
  kConcatCols,
  kSliceCols,
  kRow,
  kDot,
  kSqL2,
  kCosine,
  kSqrt,
  kLogSumExp,
  kStack,
  kCrossEntropy,
};

// Recorded computation DAG. Nodes are appended in construction order, which is
// a topological order by definition (inputs must already exist), so the graph
// is acyclic by construction. Leaves are parameters (trainable, named) and
// constants. forward() re-evaluates everything, so leaf values can be
// perturbed and the graph re-run — the basis of the finite-difference checker.
class Graph {
 public:
  // Named trainable leaf. Re-declaring an existing name returns the existing
  // node (shape-checked), so builders can share parameters across a batch.
  NodeId param(const std::string& name, const Tensor& value);

  // Unnamed non-trainable leaf (inputs, frozen weights).
  NodeId constant(Tensor value);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId matmul(NodeId a, NodeId b, bool sorted_inner = false);
  NodeId transpose(NodeId a);
  NodeId add_rowvec(NodeId a, NodeId v);
  NodeId mean_rows(NodeId a);
  NodeId mean_n(const std::vector<NodeId>& xs);
  NodeId add_n(const std::vector<NodeId>& xs);
  NodeId sum_all(NodeId a);
  NodeId softmax(NodeId a, int axis);
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, double eps);
  NodeId gelu(NodeId a);
  NodeId concat_rows(const std::vector<NodeId>& xs);
  NodeId concat_cols(const std::vector<NodeId>& xs);
  NodeId slice_cols(NodeId a, int c0, int c1);
  NodeId row(NodeId a, int r);
  NodeId dot(NodeId a, NodeId b);
  NodeId sq_l2(NodeId a, NodeId b);
  NodeId cosine(NodeId a, NodeId b);
  NodeId sqrt_op(NodeId a);
  NodeId log_sum_exp(NodeId a);
  NodeId stack(const std::vector<NodeId>& scalars);
  NodeId cross_entropy(NodeId logits, int label);

  // Recomputes every non-leaf node in topological order. Output of each node
  // is checked finite; NaN/Inf raises NumericError.
  void forward();

  // Reverse-mode accumulation from a scalar output. Requires forward() first.
  void backward(NodeId output);

  const Tensor& value(NodeId id) const;
  const Tensor& grad(NodeId id) const;  // valid after backward()

  // Mutable access to a leaf's value (parameter perturbation / batch reload).
  Tensor& leaf_value(NodeId id);

  bool has_param(const std::string& name) const { return params_.count(name) > 0; }
  NodeId param_id(const std::string& name) const;
  const std::map<std::string, NodeId>& params() const { return params_; }

  // Gradients of all named parameters, keyed by name. Requires backward().
  std::map<std::string, Tensor> grads_by_name() const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind op;
    std::vector<NodeId> inputs;
    double attr = 0.0;   // scale factor or layer-norm eps
    int iattr = 0;       // axis / label / slice begin / row index
    int iattr2 = 0;      // slice end
    bool sorted = false; // matmul stable accumulation
    Tensor value;
    Tensor grad;
  };

  NodeId push(Node n);
  const Node& at(NodeId id) const;
  void check_id(NodeId id) const;
  Tensor eval(const Node& n) const;

  std::vector<Node> nodes_;
  std::map<std::string, NodeId> params_;
  bool forwarded_ = false;
  bool backwarded_ = false;
};

}  // namespace xmodal
