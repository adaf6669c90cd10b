// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/graph.hpp"

#include <cmath>

#include "xmodal/errors.hpp"
#include "xmodal/kernels.hpp"

namespace xmodal {

namespace {

std::vector<const Tensor*> gather(const std::vector<Tensor>& vals) {
  std::vector<const Tensor*> p;
  p.reserve(vals.size());
  for (const Tensor& t : vals) p.push_back(&t);
  return p;
}

}  // namespace

void Graph::check_id(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw DataError("graph: invalid node id " + std::to_string(id));
}

const Graph::Node& Graph::at(NodeId id) const {
  check_id(id);
  return nodes_[id];
}

NodeId Graph::push(Node n) {
  for (NodeId in : n.inputs) check_id(in);
  // Dry-run the kernel once so shape errors surface at construction time.
  if (n.op != OpKind::kParam && n.op != OpKind::kConst) n.value = eval(n);
  nodes_.push_back(std::move(n));
  forwarded_ = false;
  backwarded_ = false;
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::param(const std::string& name, const Tensor& value) {
  auto it = params_.find(name);
  if (it != params_.end()) {
    if (!nodes_[it->second].value.same_dims(value))
      throw ConfigError("graph: param '" + name + "' re-declared with different dims");
    return it->second;
  }
  value.ensure_finite("param '" + name + "'");
  Node n;
  n.op = OpKind::kParam;
  n.value = value;
  nodes_.push_back(std::move(n));
  const NodeId id = static_cast<NodeId>(nodes_.size() - 1);
  params_[name] = id;
  return id;
}

NodeId Graph::constant(Tensor value) {
  value.ensure_finite("constant");
  Node n;
  n.op = OpKind::kConst;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::add(NodeId a, NodeId b) { return push({OpKind::kAdd, {a, b}}); }
NodeId Graph::sub(NodeId a, NodeId b) { return push({OpKind::kSub, {a, b}}); }
NodeId Graph::mul(NodeId a, NodeId b) { return push({OpKind::kMul, {a, b}}); }

NodeId Graph::scale(NodeId a, double c) {
  Node n{OpKind::kScale, {a}};
  n.attr = c;
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b, bool sorted_inner) {
  Node n{OpKind::kMatMul, {a, b}};
  n.sorted = sorted_inner;
  return push(std::move(n));
}

NodeId Graph::transpose(NodeId a) { return push({OpKind::kTranspose, {a}}); }
NodeId Graph::add_rowvec(NodeId a, NodeId v) { return push({OpKind::kAddRowVec, {a, v}}); }
NodeId Graph::mean_rows(NodeId a) { return push({OpKind::kMeanRows, {a}}); }
NodeId Graph::mean_n(const std::vector<NodeId>& xs) { return push({OpKind::kMeanN, xs}); }
NodeId Graph::add_n(const std::vector<NodeId>& xs) { return push({OpKind::kAddN, xs}); }
NodeId Graph::sum_all(NodeId a) { return push({OpKind::kSumAll, {a}}); }

NodeId Graph::softmax(NodeId a, int axis) {
  Node n{OpKind::kSoftmax, {a}};
  n.iattr = axis;
  return push(std::move(n));
}

NodeId Graph::layer_norm(NodeId x, NodeId gain, NodeId bias, double eps) {
  Node n{OpKind::kLayerNorm, {x, gain, bias}};
  n.attr = eps;
  return push(std::move(n));
}

NodeId Graph::gelu(NodeId a) { return push({OpKind::kGelu, {a}}); }
NodeId Graph::concat_rows(const std::vector<NodeId>& xs) {
  return push({OpKind::kConcatRows, xs});
}
NodeId Graph::concat_cols(const std::vector<NodeId>& xs) {
  return push({OpKind::kConcatCols, xs});
}

NodeId Graph::slice_cols(NodeId a, int c0, int c1) {
  Node n{OpKind::kSliceCols, {a}};
  n.iattr = c0;
  n.iattr2 = c1;
  return push(std::move(n));
}

NodeId Graph::row(NodeId a, int r) {
  Node n{OpKind::kRow, {a}};
  n.iattr = r;
  return push(std::move(n));
}

NodeId Graph::dot(NodeId a, NodeId b) { return push({OpKind::kDot, {a, b}}); }
NodeId Graph::sq_l2(NodeId a, NodeId b) { return push({OpKind::kSqL2, {a, b}}); }
NodeId Graph::cosine(NodeId a, NodeId b) { return push({OpKind::kCosine, {a, b}}); }
NodeId Graph::sqrt_op(NodeId a) { return push({OpKind::kSqrt, {a}}); }
NodeId Graph::log_sum_exp(NodeId a) { return push({OpKind::kLogSumExp, {a}}); }
NodeId Graph::stack(const std::vector<NodeId>& scalars) { return push({OpKind::kStack, scalars}); }

NodeId Graph::cross_entropy(NodeId logits, int label) {
  Node n{OpKind::kCrossEntropy, {logits}};
  n.iattr = label;
  return push(std::move(n));
}

Tensor Graph::eval(const Node& n) const {
  std::vector<Tensor> in;
  in.reserve(n.inputs.size());
  for (NodeId id : n.inputs) in.push_back(at(id).value);
  switch (n.op) {
    case OpKind::kParam:
    case OpKind::kConst:
      return n.value;
    case OpKind::kAdd:
      return k_add(in[0], in[1]);
    case OpKind::kSub:
      return k_sub(in[0], in[1]);
    case OpKind::kMul:
      return k_mul(in[0], in[1]);
    case OpKind::kScale:
      return k_scale(in[0], n.attr);
    case OpKind::kMatMul:
      return k_matmul(in[0], in[1], n.sorted);
    case OpKind::kTranspose:
      return k_transpose(in[0]);
    case OpKind::kAddRowVec:
      return k_add_rowvec(in[0], in[1]);
    case OpKind::kMeanRows:
      return k_mean_rows(in[0]);
    case OpKind::kMeanN:
      return k_mean_n(gather(in));
    case OpKind::kAddN:
      return k_add_n(gather(in));
    case OpKind::kSumAll:
      return k_sum_all(in[0]);
    case OpKind::kSoftmax:
      return k_softmax(in[0], n.iattr);
    case OpKind::kLayerNorm:
      return k_layer_norm(in[0], in[1], in[2], n.attr);
    case OpKind::kGelu:
      return k_gelu(in[0]);
    case OpKind::kConcatRows:
      return k_concat_rows(gather(in));
    case OpKind::kConcatCols:
      return k_concat_cols(gather(in));
    case OpKind::kSliceCols:
      return k_slice_cols(in[0], n.iattr, n.iattr2);
    case OpKind::kRow:
      return k_row(in[0], n.iattr);
    case OpKind::kDot:
      return k_dot(in[0], in[1]);
    case OpKind::kSqL2:
      return k_sq_l2(in[0], in[1]);
    case OpKind::kCosine:
      return k_cosine(in[0], in[1]);
    case OpKind::kSqrt:
      return k_sqrt(in[0]);
    case OpKind::kLogSumExp:
      return k_log_sum_exp(in[0]);
    case OpKind::kStack:
      return k_stack(gather(in));
    case OpKind::kCrossEntropy:
      return k_cross_entropy(in[0], n.iattr);
  }
  throw Error("graph: unknown op");
}

void Graph::forward() {
  for (Node& n : nodes_) {
    if (n.op == OpKind::kParam || n.op == OpKind::kConst) continue;
    n.value = eval(n);
    n.value.ensure_finite("forward");
  }
  forwarded_ = true;
  backwarded_ = false;
}

const Tensor& Graph::value(NodeId id) const { return at(id).value; }

const Tensor& Graph::grad(NodeId id) const {
  if (!backwarded_) throw Error("graph: grad() before backward()");
  return at(id).grad;
}

Tensor& Graph::leaf_value(NodeId id) {
  check_id(id);
  Node& n = nodes_[id];
  if (n.op != OpKind::kParam && n.op != OpKind::kConst)
    throw ConfigError("graph: leaf_value on non-leaf node");
  forwarded_ = false;
  return n.value;
}

NodeId Graph::param_id(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("graph: unknown param '" + name + "'");
  return it->second;
}

std::map<std::string, Tensor> Graph::grads_by_name() const {
  if (!backwarded_) throw Error("graph: grads_by_name() before backward()");
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : params_) out.emplace(name, nodes_[id].grad);
  return out;
}

void Graph::backward(NodeId output) {
  check_id(output);
  if (!forwarded_) forward();
  if (!nodes_[output].value.is_scalar())
    throw ConfigError("backward: output must be scalar, got " +
                      nodes_[output].value.dims_str());

  for (Node& n : nodes_) n.grad = Tensor::zeros(n.value.dims().empty() ? std::vector<int>{} : n.value.dims());
  nodes_[output].grad = Tensor::scalar(1.0);

  for (NodeId id = output; id >= 0; --id) {
    Node& n = nodes_[id];
    const Tensor& g = n.grad;
    bool all_zero = true;
    for (std::size_t i = 0; i < g.size() && all_zero; ++i) all_zero = (g[i] == 0.0);
    if (all_zero && id != output) continue;

    auto gin = [&](std::size_t k) -> Tensor& { return nodes_[n.inputs[k]].grad; };
    auto vin = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].value; };

    switch (n.op) {
      case OpKind::kParam:
      case OpKind::kConst:
        break;
      case OpKind::kAdd:
        for (std::size_t i = 0; i < g.size(); ++i) {
          gin(0)[i] += g[i];
          gin(1)[i] += g[i];
        }
        break;
      case OpKind::kSub:
        for (std::size_t i = 0; i < g.size(); ++i) {
          gin(0)[i] += g[i];
          gin(1)[i] -= g[i];
        }
        break;
      case OpKind::kMul:
        for (std::size_t i = 0; i < g.size(); ++i) {
          gin(0)[i] += g[i] * vin(1)[i];
          gin(1)[i] += g[i] * vin(0)[i];
        }
        break;
      case OpKind::kScale:
        for (std::size_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i] * n.attr;
        break;
      case OpKind::kMatMul: {
        const Tensor& a = vin(0);
        const Tensor& b = vin(1);
        const bool a_vec = a.rank() == 1;
        const int M = a_vec ? 1 : a.dims()[0];
        const int K = a_vec ? a.dims()[0] : a.dims()[1];
        const int N = b.dims()[1];
        // dA += g @ B^T ; dB += A^T @ g
        for (int i = 0; i < M; ++i)
          for (int k = 0; k < K; ++k) {
            double s = 0.0;
            for (int j = 0; j < N; ++j)
              s += g[static_cast<std::size_t>(i) * N + j] * b[static_cast<std::size_t>(k) * N + j];
            gin(0)[static_cast<std::size_t>(i) * K + k] += s;
          }
        for (int k = 0; k < K; ++k)
          for (int j = 0; j < N; ++j) {
            double s = 0.0;
            for (int i = 0; i < M; ++i)
              s += a[static_cast<std::size_t>(i) * K + k] * g[static_cast<std::size_t>(i) * N + j];
            gin(1)[static_cast<std::size_t>(k) * N + j] += s;
          }
        break;
      }
      case OpKind::kTranspose: {
        const int R = n.value.rows(), C = n.value.cols();
        for (int i = 0; i < R; ++i)
          for (int j = 0; j < C; ++j)
            gin(0)[static_cast<std::size_t>(j) * R + i] += g[static_cast<std::size_t>(i) * C + j];
        break;
      }
      case OpKind::kAddRowVec: {
        const int T = n.value.rows(), D = n.value.cols();
        for (std::size_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i];
        for (int t = 0; t < T; ++t)
          for (int d = 0; d < D; ++d) gin(1)[d] += g[static_cast<std::size_t>(t) * D + d];
        break;
      }
      case OpKind::kMeanRows: {
        const Tensor& a = vin(0);
        const int T = a.rows(), D = a.cols();
        const double inv = 1.0 / T;
        for (int t = 0; t < T; ++t)
          for (int d = 0; d < D; ++d) gin(0)[static_cast<std::size_t>(t) * D + d] += g[d] * inv;
        break;
      }
      case OpKind::kMeanN: {
        const double inv = 1.0 / static_cast<double>(n.inputs.size());
        for (std::size_t k = 0; k < n.inputs.size(); ++k)
          for (std::size_t i = 0; i < g.size(); ++i) gin(k)[i] += g[i] * inv;
        break;
      }
      case OpKind::kAddN:
        for (std::size_t k = 0; k < n.inputs.size(); ++k)
          for (std::size_t i = 0; i < g.size(); ++i) gin(k)[i] += g[i];
        break;
      case OpKind::kSumAll: {
        const double gv = g.scalar_value();
        for (std::size_t i = 0; i < gin(0).size(); ++i) gin(0)[i] += gv;
        break;
      }
      case OpKind::kSoftmax: {
        const Tensor& s = n.value;
        auto slice_bwd = [&](int count, int stride, std::size_t base) {
          double dotv = 0.0;
          for (int i = 0; i < count; ++i)
            dotv += g[base + static_cast<std::size_t>(i) * stride] *
                    s[base + static_cast<std::size_t>(i) * stride];
          for (int i = 0; i < count; ++i) {
            const std::size_t ix = base + static_cast<std::size_t>(i) * stride;
            gin(0)[ix] += s[ix] * (g[ix] - dotv);
          }
        };
        if (s.rank() == 1) {
          slice_bwd(s.dims()[0], 1, 0);
        } else {
          const int T = s.rows(), D = s.cols();
          if (n.iattr == 1)
            for (int t = 0; t < T; ++t) slice_bwd(D, 1, static_cast<std::size_t>(t) * D);
          else
            for (int d = 0; d < D; ++d) slice_bwd(T, D, static_cast<std::size_t>(d));
        }
        break;
      }
      case OpKind::kLayerNorm: {
        const Tensor& x = vin(0);
        const Tensor& gain = vin(1);
        const int R = x.rank() == 1 ? 1 : x.dims()[0];
        const int D = x.rank() == 1 ? x.dims()[0] : x.dims()[1];
        const double eps = n.attr;
        for (int t = 0; t < R; ++t) {
          const std::size_t base = static_cast<std::size_t>(t) * D;
          double mean = 0.0;
          for (int d = 0; d < D; ++d) mean += x[base + d];
          mean /= D;
          double var = 0.0;
          for (int d = 0; d < D; ++d) var += (x[base + d] - mean) * (x[base + d] - mean);
          var /= D;
          const double inv = 1.0 / std::sqrt(var + eps);
          double m_gy = 0.0, m_gyx = 0.0;
          for (int d = 0; d < D; ++d) {
            const double xhat = (x[base + d] - mean) * inv;
            const double gy = g[base + d] * gain[d];
            m_gy += gy;
            m_gyx += gy * xhat;
            gin(1)[d] += g[base + d] * xhat;  // gain
            gin(2)[d] += g[base + d];         // bias
          }
          m_gy /= D;
          m_gyx /= D;
          for (int d = 0; d < D; ++d) {
            const double xhat = (x[base + d] - mean) * inv;
            gin(0)[base + d] += (g[base + d] * gain[d] - m_gy - xhat * m_gyx) * inv;
          }
        }
        break;
      }
      case OpKind::kGelu: {
        const Tensor& x = vin(0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double v = x[i];
          const double phi = 0.5 * (1.0 + std::erf(v * 0.7071067811865475244));
          const double pdf = std::exp(-0.5 * v * v) * 0.3989422804014326779;
          gin(0)[i] += g[i] * (phi + v * pdf);
        }
        break;
      }
      case OpKind::kConcatRows: {
        const int D = n.value.cols();
        int r = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const Tensor& ink = vin(k);
          const int rk = ink.rank() == 1 ? 1 : ink.dims()[0];
          for (int t = 0; t < rk; ++t)
            for (int d = 0; d < D; ++d)
              gin(k)[static_cast<std::size_t>(t) * D + d] +=
                  g[static_cast<std::size_t>(r + t) * D + d];
          r += rk;
        }
        break;
      }
      case OpKind::kConcatCols: {
        const int R = n.value.rows(), C = n.value.cols();
        int c = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const int ck = vin(k).cols();
          for (int i = 0; i < R; ++i)
            for (int j = 0; j < ck; ++j)
              gin(k)[static_cast<std::size_t>(i) * ck + j] +=
                  g[static_cast<std::size_t>(i) * C + c + j];
          c += ck;
        }
        break;
      }
      case OpKind::kSliceCols: {
        const int C = vin(0).cols();
        const int T = n.value.rows(), W = n.value.cols();
        for (int t = 0; t < T; ++t)
          for (int j = 0; j < W; ++j)
            gin(0)[static_cast<std::size_t>(t) * C + n.iattr + j] +=
                g[static_cast<std::size_t>(t) * W + j];
        break;
      }
      case OpKind::kRow: {
        const int D = vin(0).cols();
        for (int d = 0; d < D; ++d)
          gin(0)[static_cast<std::size_t>(n.iattr) * D + d] += g[d];
        break;
      }
      case OpKind::kDot: {
        const double gv = g.scalar_value();
        for (std::size_t i = 0; i < vin(0).size(); ++i) {
          gin(0)[i] += gv * vin(1)[i];
          gin(1)[i] += gv * vin(0)[i];
        }
        break;
      }
      case OpKind::kSqL2: {
        const double gv = g.scalar_value();
        for (std::size_t i = 0; i < vin(0).size(); ++i) {
          const double d = vin(0)[i] - vin(1)[i];
          gin(0)[i] += gv * 2.0 * d;
          gin(1)[i] -= gv * 2.0 * d;
        }
        break;
      }
      case OpKind::kCosine: {
        const double gv = g.scalar_value();
        const Tensor& a = vin(0);
        const Tensor& b = vin(1);
        double na2 = 0.0, nb2 = 0.0, ab = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
          na2 += a[i] * a[i];
          nb2 += b[i] * b[i];
          ab += a[i] * b[i];
        }
        const double na = std::sqrt(na2), nb = std::sqrt(nb2);
        const double c = ab / (na * nb);
        for (std::size_t i = 0; i < a.size(); ++i) {
          gin(0)[i] += gv * (b[i] / (na * nb) - c * a[i] / na2);
          gin(1)[i] += gv * (a[i] / (na * nb) - c * b[i] / nb2);
        }
        break;
      }
      case OpKind::kSqrt: {
        const Tensor& x = vin(0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (x[i] > 0.0) gin(0)[i] += g[i] * 0.5 / std::sqrt(x[i]);
          // derivative at 0 clamped to 0 (plain-l2 distance at coincident points)
        }
        break;
      }
      case OpKind::kLogSumExp: {
        const double gv = g.scalar_value();
        const Tensor sm = k_softmax(vin(0), 0);
        for (std::size_t i = 0; i < sm.size(); ++i) gin(0)[i] += gv * sm[i];
        break;
      }
      case OpKind::kStack:
        for (std::size_t k = 0; k < n.inputs.size(); ++k) gin(k)[0] += g[k];
        break;
      case OpKind::kCrossEntropy: {
        const double gv = g.scalar_value();
        const Tensor sm = k_softmax(vin(0), 0);
        for (std::size_t i = 0; i < sm.size(); ++i) {
          const double onehot = (static_cast<int>(i) == n.iattr) ? 1.0 : 0.0;
          gin(0)[i] += gv * (sm[i] - onehot);
        }
        break;
      }
    }
  }
  backwarded_ = true;
}

}  // namespace xmodal
