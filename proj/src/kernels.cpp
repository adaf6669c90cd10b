// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xmodal/errors.hpp"

namespace xmodal {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw DataError(msg);
}

// Views a rank-1 or rank-2 tensor as a matrix.
struct MatView {
  const Tensor* t;
  int rows;
  int cols;
};

MatView as_mat(const Tensor& t, const char* op) {
  if (t.rank() == 1) return {&t, 1, t.dims()[0]};
  if (t.rank() == 2) return {&t, t.dims()[0], t.dims()[1]};
  throw DataError(std::string(op) + ": expected rank 1 or 2, got " + t.dims_str());
}

}  // namespace

Tensor k_matmul(const Tensor& a, const Tensor& b, bool sorted_inner) {
  const MatView ma = as_mat(a, "matmul");
  const MatView mb = as_mat(b, "matmul");
  require(ma.cols == mb.rows, "matmul: inner dims " + a.dims_str() + " @ " + b.dims_str());
  const int M = ma.rows, K = ma.cols, N = mb.cols;
  Tensor out = (a.rank() == 1) ? Tensor::zeros({N}) : Tensor::zeros({M, N});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  if (!sorted_inner) {
    for (int i = 0; i < M; ++i) {
      for (int k = 0; k < K; ++k) {
        const double av = pa[i * K + k];
        const double* pbk = pb + static_cast<std::size_t>(k) * N;
        double* poi = po + static_cast<std::size_t>(i) * N;
        for (int j = 0; j < N; ++j) poi[j] += av * pbk[j];
      }
    }
  } else {
    std::vector<double> buf(K);
    for (int i = 0; i < M; ++i) {
      for (int j = 0; j < N; ++j) {
        for (int k = 0; k < K; ++k) buf[k] = pa[i * K + k] * pb[static_cast<std::size_t>(k) * N + j];
        std::vector<double> terms = buf;
        po[static_cast<std::size_t>(i) * N + j] = stable_sum(terms);
      }
    }
  }
  return out;
}

Tensor k_transpose(const Tensor& a) {
  const MatView m = as_mat(a, "transpose");
  require(a.rank() == 2, "transpose: expected rank 2");
  Tensor out = Tensor::zeros({m.cols, m.rows});
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out(j, i) = a(i, j);
  return out;
}

Tensor k_add(const Tensor& a, const Tensor& b) {
  require(a.same_dims(b), "add: shape mismatch " + a.dims_str() + " vs " + b.dims_str());
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor k_sub(const Tensor& a, const Tensor& b) {
  require(a.same_dims(b), "sub: shape mismatch " + a.dims_str() + " vs " + b.dims_str());
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor k_mul(const Tensor& a, const Tensor& b) {
  require(a.same_dims(b), "mul: shape mismatch " + a.dims_str() + " vs " + b.dims_str());
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

Tensor k_scale(const Tensor& a, double c) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return out;
}

Tensor k_add_rowvec(const Tensor& a, const Tensor& v) {
  require(a.rank() == 2 && v.rank() == 1 && a.cols() == v.dims()[0],
          "add_rowvec: " + a.dims_str() + " + " + v.dims_str());
  Tensor out = a;
  const int T = a.rows(), D = a.cols();
  for (int t = 0; t < T; ++t)
    for (int d = 0; d < D; ++d) out(t, d) += v[d];
  return out;
}

Tensor k_mean_rows(const Tensor& a) {
  require(a.rank() == 2, "mean_rows: expected rank 2, got " + a.dims_str());
  const int T = a.rows(), D = a.cols();
  Tensor out = Tensor::zeros({D});
  std::vector<double> buf(T);
  const double inv = 1.0 / T;
  for (int d = 0; d < D; ++d) {
    for (int t = 0; t < T; ++t) buf[t] = a(t, d);
    std::vector<double> terms = buf;
    out[d] = stable_sum(terms) * inv;
  }
  return out;
}

Tensor k_mean_n(const std::vector<const Tensor*>& xs) {
  require(!xs.empty(), "mean_n: empty list");
  Tensor out = Tensor::zeros(xs[0]->dims());
  const double inv = 1.0 / static_cast<double>(xs.size());
  std::vector<double> buf(xs.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < xs.size(); ++k) {
      require(xs[k]->same_dims(*xs[0]), "mean_n: shape mismatch");
      buf[k] = (*xs[k])[i];
    }
    std::vector<double> terms = buf;
    out[i] = stable_sum(terms) * inv;
  }
  return out;
}

Tensor k_add_n(const std::vector<const Tensor*>& xs) {
  require(!xs.empty(), "add_n: empty list");
  Tensor out = *xs[0];
  for (std::size_t k = 1; k < xs.size(); ++k) {
    require(xs[k]->same_dims(out), "add_n: shape mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*xs[k])[i];
  }
  return out;
}

Tensor k_sum_all(const Tensor& a) {
  std::vector<double> terms(a.data(), a.data() + a.size());
  return Tensor::scalar(stable_sum(terms));
}

namespace {

void softmax_slice(const double* x, double* out, int n, int stride) {
  double m = x[0];
  for (int i = 1; i < n; ++i) m = std::max(m, x[i * static_cast<std::size_t>(stride)]);
  std::vector<double> e(n);
  for (int i = 0; i < n; ++i) e[i] = std::exp(x[i * static_cast<std::size_t>(stride)] - m);
  std::vector<double> terms = e;
  const double z = stable_sum(terms);
  for (int i = 0; i < n; ++i) out[i * static_cast<std::size_t>(stride)] = e[i] / z;
}

}  // namespace

Tensor k_softmax(const Tensor& a, int axis) {
  if (a.rank() == 1) {
    require(axis == 0, "softmax: axis out of range for rank-1");
    Tensor out = Tensor::zeros(a.dims());
    softmax_slice(a.data(), out.data(), a.dims()[0], 1);
    return out;
  }
  require(a.rank() == 2 && (axis == 0 || axis == 1), "softmax: bad axis/rank " + a.dims_str());
  const int T = a.rows(), D = a.cols();
  Tensor out = Tensor::zeros(a.dims());
  if (axis == 1) {
    for (int t = 0; t < T; ++t) softmax_slice(a.data() + static_cast<std::size_t>(t) * D, out.data() + static_cast<std::size_t>(t) * D, D, 1);
  } else {
    for (int d = 0; d < D; ++d) softmax_slice(a.data() + d, out.data() + d, T, D);
  }
  return out;
}

Tensor k_layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (eps <= 0) throw ConfigError("layer_norm: eps must be positive");
  const MatView m = as_mat(x, "layer_norm");
  require(gain.rank() == 1 && bias.rank() == 1 && gain.dims()[0] == m.cols &&
              bias.dims()[0] == m.cols,
          "layer_norm: affine shape mismatch");
  Tensor out = Tensor::zeros(x.dims());
  const int D = m.cols;
  for (int t = 0; t < m.rows; ++t) {
    const double* row = x.data() + static_cast<std::size_t>(t) * D;
    double* orow = out.data() + static_cast<std::size_t>(t) * D;
    double mean = 0.0;
    for (int d = 0; d < D; ++d) mean += row[d];
    mean /= D;
    double var = 0.0;
    for (int d = 0; d < D; ++d) var += (row[d] - mean) * (row[d] - mean);
    var /= D;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int d = 0; d < D; ++d) orow[d] = (row[d] - mean) * inv * gain[d] + bias[d];
  }
  return out;
}

Tensor k_gelu(const Tensor& x) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = out[i];
    out[i] = 0.5 * v * (1.0 + std::erf(v * 0.7071067811865475244));
  }
  return out;
}

Tensor k_concat_rows(const std::vector<const Tensor*>& xs) {
  require(!xs.empty(), "concat_rows: empty list");
  int cols = -1, total = 0;
  for (const Tensor* t : xs) {
    const MatView m = as_mat(*t, "concat_rows");
    if (cols < 0) cols = m.cols;
    require(m.cols == cols, "concat_rows: column mismatch");
    total += m.rows;
  }
  Tensor out = Tensor::zeros({total, cols});
  int r = 0;
  for (const Tensor* t : xs) {
    const MatView m = as_mat(*t, "concat_rows");
    std::copy(t->data(), t->data() + t->size(), out.data() + static_cast<std::size_t>(r) * cols);
    r += m.rows;
  }
  return out;
}

Tensor k_concat_cols(const std::vector<const Tensor*>& xs) {
  require(!xs.empty(), "concat_cols: empty list");
  int rows = -1, total = 0;
  for (const Tensor* t : xs) {
    require(t->rank() == 2, "concat_cols: expected rank 2");
    if (rows < 0) rows = t->rows();
    require(t->rows() == rows, "concat_cols: row mismatch");
    total += t->cols();
  }
  Tensor out = Tensor::zeros({rows, total});
  int c = 0;
  for (const Tensor* t : xs) {
    for (int i = 0; i < rows; ++i)
      std::copy(t->data() + static_cast<std::size_t>(i) * t->cols(),
                t->data() + static_cast<std::size_t>(i + 1) * t->cols(),
                out.data() + static_cast<std::size_t>(i) * total + c);
    c += t->cols();
  }
  return out;
}

Tensor k_slice_cols(const Tensor& a, int c0, int c1) {
  require(a.rank() == 2 && 0 <= c0 && c0 < c1 && c1 <= a.cols(), "slice_cols: bad range");
  const int T = a.rows(), W = c1 - c0;
  Tensor out = Tensor::zeros({T, W});
  for (int t = 0; t < T; ++t)
    std::copy(a.data() + static_cast<std::size_t>(t) * a.cols() + c0,
              a.data() + static_cast<std::size_t>(t) * a.cols() + c1,
              out.data() + static_cast<std::size_t>(t) * W);
  return out;
}

Tensor k_row(const Tensor& a, int r) {
  require(a.rank() == 2 && 0 <= r && r < a.rows(), "row: index out of range");
  const int D = a.cols();
  std::vector<double> v(a.data() + static_cast<std::size_t>(r) * D,
                        a.data() + static_cast<std::size_t>(r + 1) * D);
  return Tensor({D}, std::move(v));
}

Tensor k_dot(const Tensor& a, const Tensor& b) {
  require(a.rank() == 1 && b.rank() == 1 && a.same_dims(b),
          "dot: " + a.dims_str() + " . " + b.dims_str());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return Tensor::scalar(s);
}

Tensor k_sq_l2(const Tensor& a, const Tensor& b) {
  require(a.rank() == 1 && b.rank() == 1 && a.same_dims(b),
          "sq_l2: dim mismatch " + a.dims_str() + " vs " + b.dims_str());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return Tensor::scalar(s);
}

Tensor k_cosine(const Tensor& a, const Tensor& b) {
  require(a.rank() == 1 && b.rank() == 1 && a.same_dims(b), "cosine: dim mismatch");
  double na = 0.0, nb = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
    ab += a[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine: zero-norm vector");
  return Tensor::scalar(ab / (std::sqrt(na) * std::sqrt(nb)));
}

Tensor k_sqrt(const Tensor& a) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] < 0) throw NumericError("sqrt: negative input");
    out[i] = std::sqrt(out[i]);
  }
  return out;
}

Tensor k_log_sum_exp(const Tensor& a) {
  require(a.rank() == 1, "log_sum_exp: expected rank 1");
  double m = a[0];
  for (std::size_t i = 1; i < a.size(); ++i) m = std::max(m, a[i]);
  std::vector<double> terms(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) terms[i] = std::exp(a[i] - m);
  return Tensor::scalar(m + std::log(stable_sum(terms)));
}

Tensor k_stack(const std::vector<const Tensor*>& scalars) {
  require(!scalars.empty(), "stack: empty list");
  const int n = static_cast<int>(scalars.size());
  std::vector<double> v(scalars.size());
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    require(scalars[i]->is_scalar(), "stack: inputs must be scalars");
    v[i] = scalars[i]->scalar_value();
  }
  return Tensor({n}, std::move(v));
}

Tensor k_cross_entropy(const Tensor& logits, int label) {
  require(logits.rank() == 1, "cross_entropy: logits must be rank 1");
  if (label < 0 || label >= logits.dims()[0])
    throw DataError("cross_entropy: label " + std::to_string(label) + " out of range");
  const Tensor lse = k_log_sum_exp(logits);
  return Tensor::scalar(lse.scalar_value() - logits[label]);
}

}  // namespace xmodal
