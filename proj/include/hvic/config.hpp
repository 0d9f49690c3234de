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


// Flat `key = value` lab configuration covering every corpus, feature,
// codebook, encoder, training, VIC and evaluation setting.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hvic/analysis.hpp"
#include "hvic/corpus.hpp"
#include "hvic/model.hpp"
#include "hvic/signal.hpp"
#include "hvic/trainer.hpp"

namespace hvic {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LabConfig {
  CorpusSpec corpus;               // train split size in n_utterances
  std::size_t n_eval = 50;
  FeatureConfig features;
  std::size_t kmeans_iters = 100;
  std::uint64_t kmeans_seed = 1;
  EncoderConfig encoder;           // feature_dim follows features.n_filters
  TrainConfig train;
  std::uint64_t noise_seed = 99;
  ProbeConfig probe;
  std::vector<double> eval_snrs = default_eval_snrs();
  std::uint64_t eval_seed = 7;
  std::vector<std::uint64_t> ablation_seeds = {1, 2, 3};
  std::size_t ablation_teacher_steps = 3000;
  std::size_t ablation_student_steps = 3000;
  std::size_t tail_window = 50;

  /// Applies one assignment; throws ConfigError naming the key.
  void set(std::string_view key, std::string_view value);
  /// Every key in a fixed order, one `key = value` line each.
  std::string dump() const;
  /// Cross-field checks (shape consistency, ranges).
  void validate() const;

  static std::vector<std::string> keys();
};

/// Parses `key = value` lines with `#` comments into `cfg`. Errors carry
/// "<source>:<line>:".
void parse_config(std::string_view text, LabConfig& cfg, const std::string& source = "config");
LabConfig load_config(const std::filesystem::path& path);

}  // namespace hvic
