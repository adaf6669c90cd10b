// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace xmodal {

// Dense row-major tensor of doubles. Rank 0 is a scalar (one value).
// Invariant: product(dims) == data.size(); dims entries are positive.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}  // scalar zero
  Tensor(std::vector<int> dims, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<int> dims);
  static Tensor full(std::vector<int> dims, double v);

  const std::vector<int>& dims() const { return dims_; }
  int rank() const { return static_cast<int>(dims_.size()); }
  std::size_t size() const { return data_.size(); }

  bool is_scalar() const { return dims_.empty(); }
  double scalar_value() const;

  // Rank-2 accessors.
  int rows() const;
  int cols() const;
  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_cache_ + c]; }
  double operator()(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * cols_cache_ + c];
  }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<const double> span() const { return data_; }

  bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }
  bool bit_equal(const Tensor& other) const;

  // Throws NumericError if any element is NaN or Inf.
  void ensure_finite(const std::string& where) const;

  std::string dims_str() const;

 private:
  std::vector<int> dims_;
  std::vector<double> data_;
  int cols_cache_ = 1;  // last dim, for rank-2 indexing
};

// Order-invariant summation: sorts terms into a canonical order (value, then
// bit pattern) and reduces pairwise. The same multiset of doubles always
// produces the same result, and a tree over a duplicated multiset reduces to
// the original tree, so means are stable under support-set duplication.
// Used for token-axis and statistical reductions; destroys the buffer.
double stable_sum(std::vector<double>& buf);

// Plain left-to-right summation over the leading index; used for feature-axis
// dot products and batch-loss accumulation (documented fixed order).
double seq_sum(std::span<const double> xs);

std::size_t checked_numel(const std::vector<int>& dims, const std::string& where);

}  // namespace xmodal
