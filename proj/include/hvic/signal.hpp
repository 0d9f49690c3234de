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

// Synthetic speech-like corpus, noise families, SNR mixing and log-mel
// filterbank features.

#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hvic/numerics.hpp"

namespace hvic {

/// SNR sentinel for clean (noise-free) input; serialized as "inf".
inline constexpr double kCleanSnr = std::numeric_limits<double>::infinity();

struct Waveform {
  int sample_rate = 16000;
  std::vector<double> samples;

  std::size_t size() const { return samples.size(); }
  bool operator==(const Waveform&) const = default;
};

/// One unit symbol covering samples [start, end).
struct Segment {
  int symbol = 0;
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const Segment&) const = default;
};

struct Utterance {
  std::string id;
  Waveform wave;
  std::vector<Segment> segments;
};

enum class NoiseKind { kBabble, kMusic, kNatural };

std::string_view to_string(NoiseKind kind);
/// Throws std::invalid_argument for unknown names.
NoiseKind parse_noise_kind(std::string_view name);
std::vector<NoiseKind> all_noise_kinds();

struct NoisySample {
  Waveform clean;
  NoiseKind noise_kind = NoiseKind::kBabble;
  double snr_db = kCleanSnr;
  double gain = 0.0;
  Waveform noise_component;  // gain * cropped noise
  Waveform mixed;
  bool peak_normalized = false;
};

/// T x F log filterbank frames plus optional per-frame unit labels.
struct FeatureSequence {
  Matrix frames;
  std::vector<int> frame_labels;
  std::string utterance_id;

  std::size_t num_frames() const { return frames.rows(); }
  std::size_t dim() const { return frames.cols(); }
};

struct FeatureConfig {
  std::size_t frame_len = 400;
  std::size_t hop = 160;
  std::size_t n_filters = 40;
};

/// Mean squared sample value.
double signal_power(std::span<const double> x);

/// Scales so that max |x| == peak (no-op for silence).
void peak_normalize(std::vector<double>& x, double peak = 0.9);

/// Formant-synthesized utterance: each symbol has a fixed pitch and formant
/// set, segments last 80-200 ms. Pure function of the arguments.
Utterance synth_utterance(std::uint64_t seed, std::size_t n_segments, std::size_t vocab_size,
                          int sample_rate = 16000);

Waveform synth_noise(NoiseKind kind, std::uint64_t seed, std::size_t n_samples,
                     int sample_rate = 16000);
/// Name-based overload; unknown kind is rejected.
Waveform synth_noise(std::string_view kind, std::uint64_t seed, std::size_t n_samples,
                     int sample_rate = 16000);

/// 10 log10(P_clean / P_noise). Rejects silent input or mismatched lengths.
double measure_snr(const Waveform& clean, const Waveform& noise_component);

/// Mixes `noise` (cropped to the clean length) at the requested SNR.
/// snr_db == kCleanSnr passes the clean signal through unchanged.
NoisySample mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db,
                       NoiseKind kind = NoiseKind::kBabble);

/// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& x);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Hann-windowed power spectrum -> triangular mel filterbank -> log(x + 1e-10).
/// Filter weights and window are precomputed once per instance.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const FeatureConfig& cfg = {}, int sample_rate = 16000);

  const FeatureConfig& config() const { return cfg_; }
  std::size_t num_frames(std::size_t n_samples) const;

  /// Rejects waveforms shorter than one frame or with a different sample rate.
  FeatureSequence compute(const Waveform& wave) const;
  /// Labels each frame with the symbol of the segment covering its center sample.
  FeatureSequence compute(const Utterance& utt) const;
  /// Same as compute(utt) but with an explicit waveform (e.g. a noisy mixture).
  FeatureSequence compute(const Waveform& wave, const Utterance& labels_from) const;

 private:
  struct Filter {
    std::size_t first_bin = 0;
    std::vector<double> weights;
  };

  FeatureConfig cfg_;
  int sample_rate_;
  std::size_t fft_size_;
  std::vector<double> window_;
  std::vector<Filter> filters_;
};

FeatureSequence extract_features(const Waveform& wave, std::size_t frame_len, std::size_t hop,
                                 std::size_t n_filters);

/// Frame label for every frame given segment boundaries.
std::vector<int> frame_labels_from_segments(std::span<const Segment> segments,
                                            std::size_t n_frames, const FeatureConfig& cfg);

}  // namespace hvic
