// Copyright 2026 The hvic-lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hvic {

/// Raised when a loss or activation becomes non-finite during training.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-owning mutable view of a row-major matrix.
struct MatView {
  double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  double& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) const { return {data + r * cols, cols}; }
  std::size_t size() const { return rows * cols; }
};

/// Non-owning read-only view of a row-major matrix.
struct ConstMatView {
  const double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  ConstMatView() = default;
  ConstMatView(const double* d, std::size_t r, std::size_t c) : data(d), rows(r), cols(c) {}
  ConstMatView(const MatView& v) : data(v.data), rows(v.rows), cols(v.cols) {}  // NOLINT

  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data + r * cols, cols}; }
  std::size_t size() const { return rows * cols; }
};

/// Dense row-major matrix of doubles. Frames are rows, channels are columns.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  MatView view() { return {data_.data(), rows_, cols_}; }
  ConstMatView view() const { return {data_.data(), rows_, cols_}; }
  operator MatView() { return view(); }             // NOLINT
  operator ConstMatView() const { return view(); }  // NOLINT

  void fill(double v);
  void resize(std::size_t rows, std::size_t cols);

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix to_matrix(ConstMatView v);
Matrix transpose(ConstMatView a);
bool all_finite(std::span<const double> v);

/// c = a * b, or c += a * b when `accumulate`. Sums over the inner index in
/// ascending order so results match a naive triple loop exactly.
void gemm_nn(ConstMatView a, ConstMatView b, MatView c, bool accumulate = false);
/// c = a^T * b (or +=).
void gemm_tn(ConstMatView a, ConstMatView b, MatView c, bool accumulate = false);
/// c = a * b^T (or +=).
void gemm_nt(ConstMatView a, ConstMatView b, MatView c, bool accumulate = false);

/// Checked product; throws std::invalid_argument on dimension mismatch.
Matrix matmul(ConstMatView a, ConstMatView b);

/// Adds the column sums of `a` into `out` (length a.cols).
void add_column_sums(ConstMatView a, std::span<double> out);

struct SoftmaxXent {
  double loss = 0.0;
  std::vector<double> grad_logits;
};

/// Cross-entropy of a softmax against a target index, max-subtracted.
SoftmaxXent softmax_xent(std::span<const double> logits, std::size_t target);

/// Allocation-free variant; writes softmax - one_hot into `grad` and returns the loss.
double softmax_xent_into(std::span<const double> logits, std::size_t target, std::span<double> grad);

/// In-place numerically stable softmax of one row.
void softmax_inplace(std::span<double> row);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double step = 0.0;
  std::size_t n_checked = 0;
};

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central-difference comparison of `analytic` against f at `point`, over all coordinates.
GradCheckReport grad_check(const ScalarFunction& f, std::span<const double> analytic,
                           std::span<const double> point, double step = 1e-5);

/// Same, restricted to the listed coordinates.
GradCheckReport grad_check(const ScalarFunction& f, std::span<const double> analytic,
                           std::span<const double> point, double step,
                           std::span<const std::size_t> coordinates);

/// |a - n| / max(|a|, |n|, 1e-12)
double relative_error(double analytic, double numeric);

}  // namespace hvic
