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


// Representation statistics: channel variance versus SNR, correlation
// diagnostics, the frozen-encoder linear probe and the cumulative ablation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hvic/model.hpp"
#include "hvic/trainer.hpp"

namespace hvic {

struct EvalCondition {
  NoiseKind kind = NoiseKind::kBabble;
  double snr_db = kCleanSnr;

  bool is_clean() const { return snr_db == kCleanSnr; }
};

/// {0, 5, 10, 15, inf}
std::vector<double> default_eval_snrs();

/// Normalized eval features under every (kind, SNR) condition. Each
/// (kind, utterance) pair uses one fixed noise excerpt across all SNRs, so
/// conditions differ only in level. SNR = inf rows hold the clean features.
struct ConditionSet {
  std::vector<EvalCondition> conditions;
  std::vector<std::vector<Matrix>> features;  // [condition][utterance]
  std::vector<std::vector<int>> units;        // [utterance]
};

ConditionSet build_conditions(const TrainingCorpus& eval, const NoiseBank& bank, std::span<const NoiseKind> kinds,
                              std::span<const double> snrs, std::uint64_t seed);

/// Eval-mode representations of every sequence.
std::vector<Matrix> encode_all(const EncoderState& enc, std::span<const Matrix> feats);

/// Unbiased per-channel variance over the pooled rows of all matrices (two-pass).
std::vector<double> pooled_channel_variance(std::span<const Matrix> reps);

struct VarianceRow {
  std::string model_tag;
  NoiseKind kind = NoiseKind::kBabble;
  double snr_db = kCleanSnr;
  double mean_channel_variance = 0.0;
  std::vector<double> per_channel;
};

std::vector<VarianceRow> channel_variance_report(const EncoderState& enc, const ConditionSet& conds,
                                                 const std::string& model_tag);

struct OffDiagStat {
  double value = 0.0;               // mean |corr| over included off-diagonal pairs
  std::size_t excluded_channels = 0;  // zero-variance channels left out
};

/// Mean absolute off-diagonal entry of the correlation matrix of the rows.
OffDiagStat covariance_offdiag_stat(ConstMatView reps);

struct ProbeConfig {
  std::size_t epochs = 300;
  double learning_rate = 0.05;
};

/// Softmax regression from standardized representations to unit symbols.
struct LinearProbe {
  FeatureNormalizer standardizer;
  Matrix weight;  // d x vocab
  std::vector<double> bias;

  std::vector<int> predict(const Matrix& reps) const;
};

/// Fits on the clean representations of `train`; targets are its unit labels.
LinearProbe fit_probe(const EncoderState& enc, const TrainingCorpus& train, std::size_t vocab,
                      const ProbeConfig& cfg = {});

struct ProbeResult {
  NoiseKind kind = NoiseKind::kBabble;
  double snr_db = kCleanSnr;
  double frame_accuracy = 0.0;
  std::size_t n_frames = 0;
};

std::vector<ProbeResult> evaluate_probe(const LinearProbe& probe, const EncoderState& enc, const ConditionSet& conds);

/// Mean frame accuracy over the noisy (finite SNR) conditions: the N-accuracy.
double n_accuracy(std::span<const ProbeResult> results);
/// Mean frame accuracy over the clean (SNR = inf) rows.
double clean_accuracy(std::span<const ProbeResult> results);

/// Periodic evaluation for the training loop: fits a probe and reports clean
/// and noisy accuracy plus the mean channel std of clean eval representations.
EvalHook make_eval_hook(const TrainingCorpus& train, const ConditionSet& conds, std::size_t vocab,
                        const ProbeConfig& cfg = {});

/// Mean of each loss component over the last `window` logged steps.
LossBreakdown tail_mean(const TrainLog& log, std::size_t window);

/// The four cumulative configurations: L_m, +inv, +var, +cov.
std::vector<AblationFlags> ablation_ladder();

struct AblationSettings {
  EncoderConfig encoder;
  TrainConfig teacher;  // stage-0 settings; seed overridden per run
  TrainConfig student;  // stage-1 settings; seed and flags overridden per run
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  ProbeConfig probe;
  std::size_t vocab = 8;
  std::size_t tail_window = 50;
};

struct AblationConfigResult {
  AblationFlags flags;
  TrainLog log;
  std::vector<ProbeResult> probe;
  std::vector<VarianceRow> variance;
  double sampled_std = 0.0;  // tail mean of the sampled Z' channel std
  EncoderState state{EncoderConfig{}};
};

struct AblationSeedResult {
  std::uint64_t seed = 0;
  TrainLog teacher_log;
  std::vector<ProbeResult> teacher_probe;
  EncoderState teacher{EncoderConfig{}};
  std::vector<AblationConfigResult> configs;
};

struct AblationRow {
  std::string config_tag;
  double n_accuracy_mean = 0.0;
  double n_accuracy_std = 0.0;
  LossBreakdown final_losses;  // mean over seeds of the tail means
};

struct AblationResult {
  std::vector<AblationSeedResult> seeds;
  std::vector<AblationRow> rows;
};

using AblationProgress = std::function<void(const std::string& message)>;

/// Per seed: trains a teacher (rounded to checkpoint precision), then each
/// ladder configuration from it with the shared seed.
AblationResult ablation_run(const TrainingCorpus& train, const NoiseBank& train_noise, const ConditionSet& eval,
                            const AblationSettings& settings, const AblationProgress& progress = {});

/// Mean and sample std (n - 1; 0 for a single seed) of per-seed N-accuracy.
std::vector<AblationRow> summarize_ablation(std::span<const AblationSeedResult> seeds, std::size_t tail_window);

void write_variance_csv(const std::filesystem::path& path, std::span<const VarianceRow> rows);
/// One column per channel after the key columns.
void write_variance_wide_csv(const std::filesystem::path& path, std::span<const VarianceRow> rows);
void write_probe_csv(const std::filesystem::path& path, const std::string& model_tag,
                     std::span<const ProbeResult> results);
struct TaggedProbeResults {
  std::string model_tag;
  std::vector<ProbeResult> results;
};
/// Several models in one probe report.
void write_probe_csv(const std::filesystem::path& path, std::span<const TaggedProbeResults> models);

void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows);
/// Aligned plain-text rendering of the ablation table.
std::string format_ablation_table(std::span<const AblationRow> rows);

}  // namespace hvic
