// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "xmodal/errors.hpp"

namespace xmodal {

std::size_t checked_numel(const std::vector<int>& dims, const std::string& where) {
  std::size_t n = 1;
  for (int d : dims) {
    if (d <= 0) throw DataError(where + ": non-positive dimension");
    if (n > (static_cast<std::size_t>(1) << 40) / static_cast<std::size_t>(d))
      throw DataError(where + ": dimension product overflow");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  const std::size_t n = checked_numel(dims_, "Tensor");
  if (n != data_.size()) throw DataError("Tensor: dims/data length mismatch");
  cols_cache_ = dims_.empty() ? 1 : dims_.back();
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(std::vector<int> dims) {
  const std::size_t n = checked_numel(dims, "Tensor::zeros");
  return Tensor(std::move(dims), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<int> dims, double v) {
  const std::size_t n = checked_numel(dims, "Tensor::full");
  return Tensor(std::move(dims), std::vector<double>(n, v));
}

double Tensor::scalar_value() const {
  if (!is_scalar()) throw DataError("scalar_value on non-scalar tensor " + dims_str());
  return data_[0];
}

int Tensor::rows() const {
  if (rank() != 2) throw DataError("rows() on rank-" + std::to_string(rank()) + " tensor");
  return dims_[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw DataError("cols() on rank-" + std::to_string(rank()) + " tensor");
  return dims_[1];
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (dims_ != other.dims_) return false;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(data_[i]) != std::bit_cast<std::uint64_t>(other.data_[i]))
      return false;
  }
  return true;
}

void Tensor::ensure_finite(const std::string& where) const {
  for (double v : data_) {
    if (!std::isfinite(v)) throw NumericError(where + ": non-finite value");
  }
}

std::string Tensor::dims_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

double stable_sum(std::vector<double>& buf) {
  if (buf.empty()) return 0.0;
  std::sort(buf.begin(), buf.end(), [](double a, double b) {
    if (a != b) return a < b;
    return std::bit_cast<std::uint64_t>(a) < std::bit_cast<std::uint64_t>(b);
  });
  std::size_t n = buf.size();
  while (n > 1) {
    std::size_t out = 0;
    std::size_t i = 0;
    for (; i + 1 < n; i += 2) buf[out++] = buf[i] + buf[i + 1];
    if (i < n) buf[out++] = buf[i];  // odd element carries to the next level
    n = out;
  }
  return buf[0];
}

double seq_sum(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}

}  // namespace xmodal
