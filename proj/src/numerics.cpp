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

#include "hvic/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace hvic {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw std::invalid_argument("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Matrix::resize(std::size_t rows, std::size_t cols) {
  rows_ = rows;
  cols_ = cols;
  data_.assign(rows * cols, 0.0);
}

Matrix to_matrix(ConstMatView v) {
  Matrix m(v.rows, v.cols);
  std::copy(v.data, v.data + v.size(), m.values().begin());
  return m;
}

Matrix transpose(ConstMatView a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

namespace {

std::string dims(const char* what, std::size_t r1, std::size_t c1, std::size_t r2, std::size_t c2) {
  std::ostringstream os;
  os << what << ": dimension mismatch " << r1 << "x" << c1 << " vs " << r2 << "x" << c2;
  return os.str();
}

// Register tile of MR rows by NV vectors of columns. Every entry is summed
// over l in ascending order from 0, exactly like a naive triple loop; the
// vector lanes only run across independent output columns.
#if defined(__AVX__)
typedef double Lanes __attribute__((vector_size(32)));
constexpr std::size_t kTileRows = 4, kTileVecs = 2;
#else
typedef double Lanes __attribute__((vector_size(16)));
constexpr std::size_t kTileRows = 2, kTileVecs = 4;
#endif
constexpr std::size_t kLanes = sizeof(Lanes) / sizeof(double);
constexpr std::size_t kTileCols = kLanes * kTileVecs;

template <std::size_t MR>
inline void gemm_tile(const double* a, const double* b, double* c, std::size_t k, std::size_t p, std::size_t i,
                      std::size_t j) {
  Lanes acc[MR][kTileVecs] = {};
  for (std::size_t l = 0; l < k; ++l) {
    Lanes bv[kTileVecs];
    std::memcpy(bv, b + l * p + j, sizeof bv);
    for (std::size_t r = 0; r < MR; ++r) {
      const double av = a[(i + r) * k + l];
      for (std::size_t q = 0; q < kTileVecs; ++q) acc[r][q] += av * bv[q];
    }
  }
  for (std::size_t r = 0; r < MR; ++r) std::memcpy(c + (i + r) * p + j, acc[r], sizeof acc[r]);
}

inline void gemm_entry(const double* a, const double* b, double* c, std::size_t k, std::size_t p, std::size_t i,
                       std::size_t j) {
  double acc = 0.0;
  for (std::size_t l = 0; l < k; ++l) acc += a[i * k + l] * b[l * p + j];
  c[i * p + j] = acc;
}

// c = a * b with a (m x k), b (k x p); c must not alias a or b.
void gemm_nn_kernel(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t p) {
  const std::size_t mt = m - m % kTileRows, pt = p - p % kTileCols;
  for (std::size_t i = 0; i < mt; i += kTileRows) {
    for (std::size_t j = 0; j < pt; j += kTileCols) gemm_tile<kTileRows>(a, b, c, k, p, i, j);
    for (std::size_t r = i; r < i + kTileRows; ++r)
      for (std::size_t j = pt; j < p; ++j) gemm_entry(a, b, c, k, p, r, j);
  }
  for (std::size_t i = mt; i < m; ++i) {
    for (std::size_t j = 0; j < pt; j += kTileCols) gemm_tile<1>(a, b, c, k, p, i, j);
    for (std::size_t j = pt; j < p; ++j) gemm_entry(a, b, c, k, p, i, j);
  }
}

// Writes the product, or adds it to c as (old + exact product).
void gemm_store(const double* a, const double* b, MatView c, std::size_t k, bool accumulate) {
  if (!accumulate) {
    gemm_nn_kernel(a, b, c.data, c.rows, k, c.cols);
    return;
  }
  thread_local std::vector<double> product;
  product.resize(c.size());
  gemm_nn_kernel(a, b, product.data(), c.rows, k, c.cols);
  for (std::size_t i = 0; i < c.size(); ++i) c.data[i] += product[i];
}

void transpose_into(ConstMatView a, std::vector<double>& out) {
  out.resize(a.size());
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out[j * a.rows + i] = a.data[i * a.cols + j];
}

}  // namespace

void gemm_nn(ConstMatView a, ConstMatView b, MatView c, bool accumulate) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols)
    throw std::invalid_argument(dims("gemm_nn", a.rows, a.cols, b.rows, b.cols));
  gemm_store(a.data, b.data, c, a.cols, accumulate);
}

void gemm_tn(ConstMatView a, ConstMatView b, MatView c, bool accumulate) {
  if (a.rows != b.rows || c.rows != a.cols || c.cols != b.cols)
    throw std::invalid_argument(dims("gemm_tn", a.rows, a.cols, b.rows, b.cols));
  thread_local std::vector<double> at;
  transpose_into(a, at);
  gemm_store(at.data(), b.data, c, a.rows, accumulate);
}

void gemm_nt(ConstMatView a, ConstMatView b, MatView c, bool accumulate) {
  if (a.cols != b.cols || c.rows != a.rows || c.cols != b.rows)
    throw std::invalid_argument(dims("gemm_nt", a.rows, a.cols, b.rows, b.cols));
  thread_local std::vector<double> bt;
  transpose_into(b, bt);
  gemm_store(a.data, bt.data(), c, a.cols, accumulate);
}

Matrix matmul(ConstMatView a, ConstMatView b) {
  if (a.cols != b.rows) throw std::invalid_argument(dims("matmul", a.rows, a.cols, b.rows, b.cols));
  Matrix c(a.rows, b.cols);
  gemm_nn(a, b, c);
  return c;
}

void add_column_sums(ConstMatView a, std::span<double> out) {
  if (out.size() != a.cols) throw std::invalid_argument("add_column_sums: size mismatch");
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.data + i * a.cols;
    for (std::size_t j = 0; j < a.cols; ++j) out[j] += ai[j];
  }
}

void softmax_inplace(std::span<double> row) {
  const double mx = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (double& x : row) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : row) x /= sum;
}

double softmax_xent_into(std::span<const double> logits, std::size_t target, std::span<double> grad) {
  const std::size_t k = logits.size();
  if (k < 2) throw std::invalid_argument("softmax_xent: need at least 2 classes");
  if (target >= k) throw std::invalid_argument("softmax_xent: target out of range");
  if (grad.size() != k) throw std::invalid_argument("softmax_xent: gradient size mismatch");
  if (!all_finite(logits)) throw std::invalid_argument("softmax_xent: non-finite logits");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    grad[i] = std::exp(logits[i] - mx);
    sum += grad[i];
  }
  const double log_z = mx + std::log(sum);
  for (std::size_t i = 0; i < k; ++i) grad[i] /= sum;
  grad[target] -= 1.0;
  return log_z - logits[target];
}

SoftmaxXent softmax_xent(std::span<const double> logits, std::size_t target) {
  SoftmaxXent out;
  out.grad_logits.resize(logits.size());
  out.loss = softmax_xent_into(logits, target, out.grad_logits);
  return out;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const ScalarFunction& f, std::span<const double> analytic,
                           std::span<const double> point, double step,
                           std::span<const std::size_t> coordinates) {
  if (analytic.size() != point.size())
    throw std::invalid_argument("grad_check: gradient and point sizes differ");
  GradCheckReport report;
  report.step = step;
  std::vector<double> x(point.begin(), point.end());
  for (std::size_t idx : coordinates) {
    if (idx >= x.size()) throw std::invalid_argument("grad_check: coordinate out of range");
    const double orig = x[idx];
    x[idx] = orig + step;
    const double fp = f(x);
    x[idx] = orig - step;
    const double fm = f(x);
    x[idx] = orig;
    const double numeric = (fp - fm) / (2.0 * step);
    const double err = relative_error(analytic[idx], numeric);
    if (report.n_checked == 0 || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = idx;
    }
    ++report.n_checked;
  }
  return report;
}

GradCheckReport grad_check(const ScalarFunction& f, std::span<const double> analytic,
                           std::span<const double> point, double step) {
  std::vector<std::size_t> all(point.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return grad_check(f, analytic, point, step, all);
}

}  // namespace hvic
