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

// Training objectives with analytic gradients:
//
//   masked prediction  L_m = (1/|M|) sum_{t in M} -log softmax(logits_t)[c_t]
//   invariance         s   = (1/n) sum_i ||z_i - z'_i||^2
//   variance           v   = (1/d) sum_j max(0, gamma - sqrt(Var(Z'_.j) + eps))
//   covariance         c   = (1/d) sum_{i != j} C(Z')_ij^2,
//                      C   = (1/(n-1)) sum_i (z'_i - mean)^T (z'_i - mean)
//   VIC                L_vic = lambda s + mu v + nu c
//   total              L_tot = L_m + alpha L_vic
//
// Var is the unbiased (1/(n-1)) estimator. Only the student branch Z'
// receives gradients; the teacher branch Z is treated as a constant.

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "hvic/model.hpp"
#include "hvic/numerics.hpp"

namespace hvic {

struct VicWeights {
  double lambda = 5.0;
  double mu = 1.0;
  double nu = 1.0;
  double gamma = 1.0;
  double epsilon = 1e-4;
  double alpha = 1.0;
  std::size_t n_sample = 256;

  void validate() const;
};

struct LossBreakdown {
  double l_m = 0.0;
  double s = 0.0;
  double v = 0.0;
  double c = 0.0;
  double l_vic = 0.0;
  double l_tot = 0.0;
};

struct FrameSource {
  std::size_t utterance = 0;
  std::size_t frame = 0;
  bool operator==(const FrameSource&) const = default;
};

struct SampledPair {
  Matrix z;   // teacher, n x d
  Matrix zp;  // student, n x d
  std::vector<FrameSource> sources;
};

struct TermGrad {
  double value = 0.0;
  Matrix grad;  // w.r.t. the student matrix
};

struct MaskedPredictionLoss {
  double loss = 0.0;
  std::vector<Matrix> grad_logits;  // one per utterance, zero at unmasked frames
  std::size_t n_masked = 0;
};

/// Mean cross-entropy over the masked frames of one utterance. Rejects an empty mask.
TermGrad masked_prediction_loss(ConstMatView logits, std::span<const int> labels, const MaskSpec& mask);

/// Batch form: the mean is taken over the pooled masked frames of every utterance.
MaskedPredictionLoss masked_prediction_loss(std::span<const Matrix> logits,
                                            std::span<const std::vector<int>> labels,
                                            std::span<const MaskSpec> masks);

/// Uniform sampling without replacement over pooled (utterance, frame)
/// coordinates; the same coordinates index the teacher and the student. If
/// the pool is smaller than n the whole pool is used. `exclude`, when given,
/// removes the listed frames of each utterance from the pool.
SampledPair sample_frames(std::span<const Matrix> teacher_reps, std::span<const Matrix> student_reps,
                          std::size_t n, std::uint64_t seed, std::span<const MaskSpec> exclude = {});

TermGrad invariance(ConstMatView z, ConstMatView zp);
TermGrad variance(ConstMatView zp, double gamma, double epsilon);
TermGrad covariance(ConstMatView zp);

/// Unbiased covariance matrix of the rows of zp (d x d).
Matrix covariance_matrix(ConstMatView zp);

struct VicResult {
  LossBreakdown parts;  // s, v, c, l_vic filled in
  Matrix grad_zp;
};

/// lambda * s + mu * v + nu * c.
double combine_vic(double s, double v, double c, const VicWeights& w);

/// Weighted combination; terms with zero weight are still evaluated for logging.
VicResult vic_loss(const SampledPair& pair, const VicWeights& w);

double total_loss(double l_m, double l_vic, double alpha);

/// Mean over channels of the per-channel sample std (1/(n-1)) of the rows.
double mean_channel_std(ConstMatView m);

/// Scatters d/dZ' of a sampled pair back onto per-utterance gradient matrices.
void scatter_grad(ConstMatView grad_zp, std::span<const FrameSource> sources, std::span<Matrix> grad_reps);

}  // namespace hvic
