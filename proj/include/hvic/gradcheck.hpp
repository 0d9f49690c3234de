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

#include <cstdint>
#include <string>
#include <vector>

#include "hvic/losses.hpp"
#include "hvic/model.hpp"
#include "hvic/numerics.hpp"

namespace hvic {

/// Central-difference checks of every analytic gradient in the library.
struct GradCheckSuiteConfig {
  std::size_t frames = 12;
  std::size_t feature_dim = 8;
  std::size_t model_dim = 16;
  std::size_t n_blocks = 2;
  std::size_t mlp_hidden = 24;
  std::size_t k_codewords = 8;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 7;
};

struct GradCheckEntry {
  std::string component;
  GradCheckReport report;
  bool passed = false;
};

std::vector<GradCheckEntry> run_gradcheck_suite(const GradCheckSuiteConfig& cfg = {});

/// A small two-utterance L_tot problem with frozen mask, labels, teacher
/// representations and frame-sample seed, so the loss is a deterministic
/// function of the student parameters alone.
struct TotalLossProblem {
  EncoderConfig encoder;
  VicWeights weights;
  std::vector<Matrix> features;
  std::vector<Matrix> teacher_reps;
  std::vector<std::vector<int>> labels;
  std::vector<MaskSpec> masks;
  std::uint64_t sample_seed = 0;

  static TotalLossProblem make(const GradCheckSuiteConfig& cfg);

  /// L_tot at the given parameters; fills `grad` when non-null.
  LossBreakdown evaluate(const EncoderState& state, std::vector<double>* grad) const;

  /// Variant that runs the two upstream paths separately and sums them.
  std::vector<double> split_path_gradient(const EncoderState& state) const;
};

}  // namespace hvic
