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

#include "hvic/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hvic/rng.hpp"

namespace hvic {

namespace {

void require_same_shape(ConstMatView a, ConstMatView b, const char* what) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + std::to_string(a.rows) + "x" +
                                std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                                std::to_string(b.cols));
}

std::vector<double> column_means(ConstMatView m) {
  std::vector<double> mean(m.cols, 0.0);
  add_column_sums(m, mean);
  for (double& x : mean) x /= static_cast<double>(m.rows);
  return mean;
}

Matrix centered(ConstMatView m) {
  const auto mean = column_means(m);
  Matrix c = to_matrix(m);
  for (std::size_t i = 0; i < c.rows(); ++i) {
    auto r = c.row(i);
    for (std::size_t j = 0; j < c.cols(); ++j) r[j] -= mean[j];
  }
  return c;
}

}  // namespace

void VicWeights::validate() const {
  if (lambda < 0 || mu < 0 || nu < 0 || gamma < 0 || alpha < 0)
    throw std::invalid_argument("VicWeights: weights must be nonnegative");
  if (!(epsilon > 0)) throw std::invalid_argument("VicWeights: epsilon must be positive");
  if (n_sample < 2) throw std::invalid_argument("VicWeights: n_sample must be >= 2");
}

TermGrad masked_prediction_loss(ConstMatView logits, std::span<const int> labels, const MaskSpec& mask) {
  if (mask.empty()) throw std::invalid_argument("masked_prediction_loss: empty mask");
  if (labels.size() != logits.rows) throw std::invalid_argument("masked_prediction_loss: label count mismatch");
  TermGrad out{0.0, Matrix(logits.rows, logits.cols)};
  const double inv = 1.0 / static_cast<double>(mask.size());
  for (std::size_t t : mask.frames) {
    if (t >= logits.rows) throw std::invalid_argument("masked_prediction_loss: mask index out of range");
    auto g = out.grad.row(t);
    out.value += softmax_xent_into(logits.row(t), static_cast<std::size_t>(labels[t]), g);
    for (double& x : g) x *= inv;
  }
  out.value *= inv;
  return out;
}

MaskedPredictionLoss masked_prediction_loss(std::span<const Matrix> logits, std::span<const std::vector<int>> labels,
                                            std::span<const MaskSpec> masks) {
  if (logits.size() != labels.size() || logits.size() != masks.size())
    throw std::invalid_argument("masked_prediction_loss: batch size mismatch");
  MaskedPredictionLoss out;
  for (const auto& m : masks) out.n_masked += m.size();
  if (out.n_masked == 0) throw std::invalid_argument("masked_prediction_loss: empty mask over the whole batch");
  const double inv = 1.0 / static_cast<double>(out.n_masked);
  double sum = 0.0;
  out.grad_logits.reserve(logits.size());
  for (std::size_t u = 0; u < logits.size(); ++u) {
    const Matrix& lg = logits[u];
    if (labels[u].size() != lg.rows()) throw std::invalid_argument("masked_prediction_loss: label count mismatch");
    Matrix g(lg.rows(), lg.cols());
    for (std::size_t t : masks[u].frames) {
      if (t >= lg.rows()) throw std::invalid_argument("masked_prediction_loss: mask index out of range");
      auto gr = g.row(t);
      sum += softmax_xent_into(lg.row(t), static_cast<std::size_t>(labels[u][t]), gr);
      for (double& x : gr) x *= inv;
    }
    out.grad_logits.push_back(std::move(g));
  }
  out.loss = sum * inv;
  return out;
}

SampledPair sample_frames(std::span<const Matrix> teacher_reps, std::span<const Matrix> student_reps,
                          std::size_t n, std::uint64_t seed, std::span<const MaskSpec> exclude) {
  if (teacher_reps.size() != student_reps.size())
    throw std::invalid_argument("sample_frames: teacher and student batches differ in size");
  if (!exclude.empty() && exclude.size() != student_reps.size())
    throw std::invalid_argument("sample_frames: exclusion list does not match batch");
  std::vector<FrameSource> pool;
  std::size_t d = 0;
  for (std::size_t u = 0; u < teacher_reps.size(); ++u) {
    require_same_shape(teacher_reps[u], student_reps[u], "sample_frames");
    if (u == 0) d = teacher_reps[u].cols();
    if (teacher_reps[u].cols() != d) throw std::invalid_argument("sample_frames: inconsistent widths");
    std::vector<bool> skip;
    if (!exclude.empty()) skip = exclude[u].as_flags();
    for (std::size_t t = 0; t < teacher_reps[u].rows(); ++t)
      if (skip.empty() || !skip[t]) pool.push_back({u, t});
  }
  if (pool.empty()) throw std::invalid_argument("sample_frames: empty frame pool");

  const std::size_t take = std::min(n, pool.size());
  Rng rng(seed);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.uniform_int(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);

  SampledPair pair{Matrix(take, d), Matrix(take, d), std::move(pool)};
  for (std::size_t i = 0; i < take; ++i) {
    const auto& src = pair.sources[i];
    const auto tr = teacher_reps[src.utterance].row(src.frame);
    const auto sr = student_reps[src.utterance].row(src.frame);
    std::copy(tr.begin(), tr.end(), pair.z.row(i).begin());
    std::copy(sr.begin(), sr.end(), pair.zp.row(i).begin());
  }
  return pair;
}

TermGrad invariance(ConstMatView z, ConstMatView zp) {
  require_same_shape(z, zp, "invariance");
  if (z.rows < 1) throw std::invalid_argument("invariance: need at least one row");
  const double n = static_cast<double>(z.rows);
  TermGrad out{0.0, Matrix(zp.rows, zp.cols)};
  auto g = out.grad.values();
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double diff = zp.data[i] - z.data[i];
    out.value += diff * diff;
    g[i] = 2.0 * diff / n;
  }
  out.value /= n;
  return out;
}

TermGrad variance(ConstMatView zp, double gamma, double epsilon) {
  if (zp.rows < 2) throw std::invalid_argument("variance: need at least two rows");
  const std::size_t n = zp.rows, d = zp.cols;
  const auto mean = column_means(zp);
  TermGrad out{0.0, Matrix(n, d)};
  const double dn1 = static_cast<double>(n - 1);
  for (std::size_t j = 0; j < d; ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = zp(i, j) - mean[j];
      ss += c * c;
    }
    const double stdv = std::sqrt(ss / dn1 + epsilon);
    if (stdv < gamma) {
      out.value += gamma - stdv;
      const double coef = -1.0 / (static_cast<double>(d) * dn1 * stdv);
      for (std::size_t i = 0; i < n; ++i) out.grad(i, j) = coef * (zp(i, j) - mean[j]);
    }
  }
  out.value /= static_cast<double>(d);
  return out;
}

Matrix covariance_matrix(ConstMatView zp) {
  if (zp.rows < 2) throw std::invalid_argument("covariance: need at least two rows");
  const Matrix zc = centered(zp);
  Matrix cov(zp.cols, zp.cols);
  gemm_tn(zc, zc, cov);
  const double inv = 1.0 / static_cast<double>(zp.rows - 1);
  for (double& x : cov.values()) x *= inv;
  return cov;
}

TermGrad covariance(ConstMatView zp) {
  if (zp.rows < 2) throw std::invalid_argument("covariance: need at least two rows");
  const std::size_t n = zp.rows, d = zp.cols;
  const Matrix zc = centered(zp);
  Matrix cov(d, d);
  gemm_tn(zc, zc, cov);
  const double inv_n1 = 1.0 / static_cast<double>(n - 1);
  for (double& x : cov.values()) x *= inv_n1;

  TermGrad out{0.0, Matrix(n, d)};
  // dc/dC_ij = 2 C_ij / d off the diagonal; C symmetric so dc/dZc = 2 Zc G / (n - 1).
  Matrix gmat(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (i != j) {
        out.value += cov(i, j) * cov(i, j);
        gmat(i, j) = 2.0 * cov(i, j) / static_cast<double>(d);
      }
  out.value /= static_cast<double>(d);

  gemm_nn(zc, gmat, out.grad);
  for (double& x : out.grad.values()) x *= 2.0 * inv_n1;
  // Back through the centering: subtract the column means of the gradient.
  const auto gmean = column_means(out.grad);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = out.grad.row(i);
    for (std::size_t j = 0; j < d; ++j) r[j] -= gmean[j];
  }
  return out;
}

double combine_vic(double s, double v, double c, const VicWeights& w) { return w.lambda * s + w.mu * v + w.nu * c; }

VicResult vic_loss(const SampledPair& pair, const VicWeights& w) {
  w.validate();
  const TermGrad s = invariance(pair.z, pair.zp);
  const TermGrad v = variance(pair.zp, w.gamma, w.epsilon);
  const TermGrad c = covariance(pair.zp);
  VicResult out;
  out.parts.s = s.value;
  out.parts.v = v.value;
  out.parts.c = c.value;
  out.parts.l_vic = combine_vic(s.value, v.value, c.value, w);
  out.grad_zp = Matrix(pair.zp.rows(), pair.zp.cols());
  auto g = out.grad_zp.values();
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = w.lambda * s.grad.values()[i] + w.mu * v.grad.values()[i] + w.nu * c.grad.values()[i];
  return out;
}

double total_loss(double l_m, double l_vic, double alpha) {
  if (!std::isfinite(l_m) || !std::isfinite(l_vic) || !std::isfinite(alpha))
    throw std::invalid_argument("total_loss: non-finite input");
  return l_m + alpha * l_vic;
}

double mean_channel_std(ConstMatView m) {
  if (m.rows < 2) throw std::invalid_argument("mean_channel_std: need at least two rows");
  const auto mean = column_means(m);
  double acc = 0.0;
  for (std::size_t j = 0; j < m.cols; ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) ss += (m(i, j) - mean[j]) * (m(i, j) - mean[j]);
    acc += std::sqrt(ss / static_cast<double>(m.rows - 1));
  }
  return acc / static_cast<double>(m.cols);
}

void scatter_grad(ConstMatView grad_zp, std::span<const FrameSource> sources, std::span<Matrix> grad_reps) {
  if (grad_zp.rows != sources.size()) throw std::invalid_argument("scatter_grad: row count mismatch");
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto& src = sources[i];
    if (src.utterance >= grad_reps.size()) throw std::invalid_argument("scatter_grad: utterance out of range");
    auto dst = grad_reps[src.utterance].row(src.frame);
    const auto g = grad_zp.row(i);
    for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g[j];
  }
}

}  // namespace hvic
