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


// Adam and the two training stages: clean masked-prediction pre-training
// (the teacher) and noisy pre-training of a student against the frozen
// teacher with L_tot = L_m + alpha * L_vic.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hvic/codebook.hpp"
#include "hvic/losses.hpp"
#include "hvic/model.hpp"
#include "hvic/numerics.hpp"
#include "hvic/rng.hpp"
#include "hvic/signal.hpp"

namespace hvic {

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam. Throws DivergenceError on non-finite gradients and
/// std::invalid_argument on misaligned lengths.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st, const AdamConfig& cfg);

struct AblationFlags {
  bool use_inv = false;
  bool use_var = false;
  bool use_cov = false;

  bool any() const { return use_inv || use_var || use_cov; }
  /// "lm", "lm+inv", "lm+inv+var", ...
  std::string tag() const;
  bool operator==(const AblationFlags&) const = default;
};

struct TrainConfig {
  std::size_t steps = 3000;
  std::size_t batch_utterances = 8;
  AdamConfig adam;
  double snr_low_db = 5.0;
  double snr_high_db = 10.0;
  std::vector<NoiseKind> noise_kinds = all_noise_kinds();
  VicWeights vic;
  AblationFlags flags;
  /// Draw VIC frames only from unmasked student frames.
  bool vic_exclude_masked = false;
  std::uint64_t seed = 1;
  /// Evaluate every this many steps (0 disables).
  std::size_t eval_interval = 0;

  void validate() const;
  /// VIC weights with disabled terms forced to zero.
  VicWeights effective_weights() const;
};

/// Per-kind pool of pre-synthesized noise clips. A draw picks a kind, a clip
/// and an offset, so every step sees a fresh excerpt without re-synthesis.
class NoiseBank {
 public:
  NoiseBank(std::span<const NoiseKind> kinds, std::size_t clips_per_kind, std::size_t clip_samples,
            std::uint64_t seed, int sample_rate = 16000);

  std::span<const NoiseKind> kinds() const { return kinds_; }
  std::size_t clip_samples() const { return clip_samples_; }

  Waveform draw(NoiseKind kind, std::size_t n_samples, Rng& rng) const;
  /// Kind uniform over the bank's kinds.
  Waveform draw(std::size_t n_samples, Rng& rng, NoiseKind* kind_out = nullptr) const;

 private:
  std::vector<NoiseKind> kinds_;
  std::size_t clip_samples_;
  int sample_rate_;
  std::vector<std::vector<Waveform>> clips_;  // [kind index][clip]
};

/// Utterances with their normalized clean features, codeword targets and
/// ground-truth unit labels.
struct TrainingCorpus {
  std::vector<Utterance> utterances;
  std::vector<Matrix> clean;
  std::vector<std::vector<int>> codewords;
  std::vector<std::vector<int>> units;
  FeatureNormalizer normalizer;
  FeatureExtractor extractor;

  std::size_t size() const { return utterances.size(); }
  std::size_t max_samples() const;
  /// Normalized features of an arbitrary waveform aligned with utterance u.
  Matrix features_for(std::size_t u, const Waveform& wave) const;
};

/// Features are normalized with the codebook's normalizer and labeled by assign().
TrainingCorpus prepare_corpus(std::vector<Utterance> utterances, const Codebook& cb,
                              const FeatureExtractor& extractor = FeatureExtractor{});

/// Position `step * batch + i` of the infinite sequence of shuffled epochs.
std::vector<std::size_t> batch_indices(std::size_t n_utterances, std::size_t batch, std::size_t step,
                                       std::uint64_t seed);

/// Permutation of [0, n) for one epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::size_t epoch, std::uint64_t seed);

struct Batch {
  std::vector<std::size_t> utterances;
  std::vector<Matrix> clean;
  std::vector<Matrix> noisy;  // empty for clean training
  std::vector<NoiseKind> kinds;
  std::vector<double> snr_db;
  std::vector<std::vector<int>> codewords;
  std::vector<MaskSpec> masks;
};

/// Batch for `step`. With a noise bank, every utterance is mixed with a fresh
/// excerpt at an SNR uniform in the configured range.
Batch make_batch(const TrainingCorpus& corpus, const TrainConfig& cfg, const EncoderConfig& enc, std::size_t step,
                 const NoiseBank* noise);

struct EvalRow {
  std::size_t step = 0;
  double probe_acc_clean = 0.0;
  double probe_acc_noisy = 0.0;
  double mean_channel_std = 0.0;
};

struct TrainLog {
  std::vector<std::size_t> steps;
  std::vector<LossBreakdown> losses;
  /// Mean per-channel std of the sampled student frames; empty without the VIC path.
  std::vector<double> sampled_std;
  std::vector<EvalRow> evals;

  void write_csv(const std::filesystem::path& path) const;
  void write_eval_csv(const std::filesystem::path& path) const;
  /// Mean of sampled_std over the last `window` steps.
  double final_sampled_std(std::size_t window) const;
};

using EvalHook = std::function<EvalRow(const EncoderState&, std::size_t step)>;
using ProgressHook = std::function<void(std::size_t step, const LossBreakdown&)>;

struct TrainHooks {
  EvalHook eval;
  ProgressHook progress;
};

struct TrainResult {
  EncoderState state;
  TrainLog log;
};

/// Stage 0: L_m on clean masked features.
TrainResult pretrain_clean(const EncoderState& init, const TrainingCorpus& corpus, const TrainConfig& cfg,
                           const TrainHooks& hooks = {});

/// Stage 1: the student starts from the teacher and sees masked noisy
/// features; the frozen teacher sees clean unmasked ones. With
/// `compute_vic == false` the VIC path is skipped entirely (the L_m-only
/// noisy trainer); otherwise the terms are evaluated every step and weighted
/// by cfg.effective_weights().
TrainResult pretrain_noisy(const EncoderState& teacher, const TrainingCorpus& corpus, const NoiseBank& noise,
                           const TrainConfig& cfg, bool compute_vic = true, const TrainHooks& hooks = {});

/// Default training bank for a corpus: clip length covers the longest utterance.
NoiseBank make_train_noise_bank(const TrainingCorpus& corpus, std::span<const NoiseKind> kinds,
                                std::uint64_t noise_seed);
/// Evaluation bank; its seed range is disjoint from the training bank's.
NoiseBank make_eval_noise_bank(std::size_t min_samples, std::span<const NoiseKind> kinds, std::uint64_t noise_seed);

}  // namespace hvic
