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

#include "hvic/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "hvic/rng.hpp"

namespace hvic {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kLogFloor = 1e-10;

double frac(double x) { return x - std::floor(x); }

// Fixed acoustic identity of a unit symbol. Independent of any seed so the
// same symbol sounds alike across utterances.
struct SymbolProfile {
  double f0;
  double formants[3];
  double breathiness;
};

SymbolProfile symbol_profile(int symbol) {
  const double s = static_cast<double>(symbol);
  SymbolProfile p{};
  p.f0 = 100.0 + 120.0 * frac(0.5 + s * 0.6180339887);
  p.formants[0] = 300.0 + 550.0 * frac(0.13 + s * 0.3819660113);
  p.formants[1] = 1000.0 + 1500.0 * frac(0.41 + s * 0.7548776662);
  p.formants[2] = 2400.0 + 900.0 * frac(0.70 + s * 0.5698402910);
  p.breathiness = 0.02 + 0.30 * frac(s * 0.2763932023);
  return p;
}

// Two-pole resonator with unit-ish peak gain.
class Resonator {
 public:
  Resonator(double freq, double bandwidth, int sample_rate) {
    const double r = std::exp(-std::numbers::pi * bandwidth / sample_rate);
    a1_ = 2.0 * r * std::cos(kTwoPi * freq / sample_rate);
    a2_ = -r * r;
    b0_ = 1.0 - r;
  }
  double operator()(double x) {
    const double y = b0_ * x + a1_ * y1_ + a2_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a1_ = 0.0, a2_ = 0.0, b0_ = 0.0, y1_ = 0.0, y2_ = 0.0;
};

std::vector<double> render_segment(const SymbolProfile& prof, double f0_scale, double formant_scale,
                                   std::size_t n, int sample_rate, Rng& rng) {
  static constexpr double kBandwidths[3] = {80.0, 120.0, 180.0};
  Resonator r1(prof.formants[0] * formant_scale, kBandwidths[0], sample_rate);
  Resonator r2(prof.formants[1] * formant_scale, kBandwidths[1], sample_rate);
  Resonator r3(prof.formants[2] * formant_scale, kBandwidths[2], sample_rate);

  std::vector<double> out(n);
  double phase = rng.uniform();
  const double glide = rng.uniform(-0.04, 0.04);
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = static_cast<double>(i) / static_cast<double>(n);
    const double f0 = prof.f0 * f0_scale * (1.0 + glide * (pos - 0.5));
    phase += f0 / sample_rate;
    double excitation = prof.breathiness * rng.normal();
    if (phase >= 1.0) {
      phase -= 1.0;
      excitation += 1.0;
    }
    const double y = r1(excitation);
    out[i] = 0.6 * r3(r2(y)) + 0.4 * y;
  }

  double rms = std::sqrt(signal_power(out));
  if (rms > 0.0)
    for (double& x : out) x /= rms;

  const std::size_t ramp = std::min<std::size_t>(static_cast<std::size_t>(0.008 * sample_rate), n / 2);
  for (std::size_t i = 0; i < ramp; ++i) {
    const double w = 0.5 - 0.5 * std::cos(std::numbers::pi * (i + 0.5) / ramp);
    out[i] *= w;
    out[n - 1 - i] *= w;
  }
  return out;
}

Waveform babble(std::uint64_t seed, std::size_t n_samples, int sample_rate) {
  Rng rng(seed);
  const std::size_t n_voices = 3 + rng.uniform_int(6);
  const double min_segment = 0.080 * sample_rate;
  const auto n_segments =
      static_cast<std::size_t>(std::ceil(static_cast<double>(n_samples) / min_segment)) + 1;
  Waveform w{sample_rate, std::vector<double>(n_samples, 0.0)};
  for (std::size_t v = 0; v < n_voices; ++v) {
    const double level = rng.uniform(0.5, 1.0);
    Utterance voice = synth_utterance(derive_seed(seed, stream::kNoise, v), n_segments, 16, sample_rate);
    for (std::size_t i = 0; i < n_samples; ++i) w.samples[i] += level * voice.wave.samples[i];
  }
  peak_normalize(w.samples);
  return w;
}

Waveform music(std::uint64_t seed, std::size_t n_samples, int sample_rate) {
  Rng rng(seed);
  Waveform w{sample_rate, std::vector<double>(n_samples, 0.0)};
  std::size_t start = 0;
  while (start < n_samples) {
    const auto len = static_cast<std::size_t>(rng.uniform(0.6, 1.5) * sample_rate);
    const int root = 45 + static_cast<int>(rng.uniform_int(20));
    const int third = rng.uniform() < 0.5 ? 3 : 4;
    std::vector<int> notes{root, root + third, root + 7};
    if (rng.uniform() < 0.5) notes.push_back(root + 12);
    const double decay = rng.uniform(0.8, 2.5) * sample_rate;
    const double lfo = rng.uniform(0.5, 3.0);
    std::vector<double> phases;
    for (std::size_t k = 0; k < notes.size() * 5; ++k) phases.push_back(rng.uniform(0.0, kTwoPi));

    const std::size_t end = std::min(n_samples, start + len);
    const double attack = 0.05 * sample_rate;
    for (std::size_t i = start; i < end; ++i) {
      const double local = static_cast<double>(i - start);
      const double t = static_cast<double>(i) / sample_rate;
      const double env = std::min(1.0, local / attack) * std::exp(-local / decay) *
                         (1.0 + 0.2 * std::sin(kTwoPi * lfo * t));
      double acc = 0.0;
      for (std::size_t nidx = 0; nidx < notes.size(); ++nidx) {
        const double f = 440.0 * std::pow(2.0, (notes[nidx] - 69) / 12.0);
        for (int h = 1; h <= 5; ++h)
          acc += std::sin(kTwoPi * f * h * t + phases[nidx * 5 + h - 1]) / h;
      }
      w.samples[i] = env * acc;
    }
    start = end;
  }
  peak_normalize(w.samples);
  return w;
}

Waveform natural(std::uint64_t seed, std::size_t n_samples, int sample_rate) {
  Rng rng(seed);
  Waveform w{sample_rate, std::vector<double>(n_samples, 0.0)};
  // Pink (1/f) filter on white noise.
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double white = rng.normal();
    b0 = 0.99886 * b0 + white * 0.0555179;
    b1 = 0.99332 * b1 + white * 0.0750759;
    b2 = 0.96900 * b2 + white * 0.1538520;
    b3 = 0.86650 * b3 + white * 0.3104856;
    b4 = 0.55000 * b4 + white * 0.5329522;
    b5 = -0.7616 * b5 - white * 0.0168980;
    w.samples[i] = b0 + b1 + b2 + b3 + b4 + b5 + b6 + white * 0.5362;
    b6 = white * 0.115926;
  }
  // Random bursts (rain drops, wind gusts) over a steady floor.
  std::vector<double> env(n_samples, 0.3);
  double t = -std::log(1.0 - rng.uniform()) / 2.0 * sample_rate;
  while (t < static_cast<double>(n_samples)) {
    const double amp = rng.uniform(0.5, 1.5);
    const double tau = rng.uniform(0.05, 0.3) * sample_rate;
    const auto t0 = static_cast<std::size_t>(t);
    const std::size_t t1 = std::min(n_samples, t0 + static_cast<std::size_t>(5.0 * tau));
    for (std::size_t i = t0; i < t1; ++i) env[i] += amp * std::exp(-static_cast<double>(i - t0) / tau);
    t += -std::log(1.0 - rng.uniform()) / 2.0 * sample_rate;
  }
  for (std::size_t i = 0; i < n_samples; ++i) w.samples[i] *= env[i];
  peak_normalize(w.samples);
  return w;
}

}  // namespace

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kBabble:
      return "babble";
    case NoiseKind::kMusic:
      return "music";
    case NoiseKind::kNatural:
      return "natural";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "babble") return NoiseKind::kBabble;
  if (name == "music") return NoiseKind::kMusic;
  if (name == "natural") return NoiseKind::kNatural;
  throw std::invalid_argument("unknown noise kind '" + std::string(name) + "'");
}

std::vector<NoiseKind> all_noise_kinds() {
  return {NoiseKind::kBabble, NoiseKind::kMusic, NoiseKind::kNatural};
}

double signal_power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

void peak_normalize(std::vector<double>& x, double peak) {
  double mx = 0.0;
  for (double v : x) mx = std::max(mx, std::abs(v));
  if (mx == 0.0) return;
  const double scale = peak / mx;
  for (double& v : x) v *= scale;
}

Utterance synth_utterance(std::uint64_t seed, std::size_t n_segments, std::size_t vocab_size,
                          int sample_rate) {
  if (vocab_size < 2) throw std::invalid_argument("synth_utterance: vocab_size must be >= 2");
  if (n_segments < 1) throw std::invalid_argument("synth_utterance: n_segments must be >= 1");
  if (sample_rate <= 0) throw std::invalid_argument("synth_utterance: sample_rate must be positive");
  Rng rng(seed);
  const double f0_scale = rng.uniform(0.94, 1.06);
  const double formant_scale = rng.uniform(0.97, 1.03);

  Utterance utt;
  utt.id = "utt_" + std::to_string(seed);
  utt.wave.sample_rate = sample_rate;
  for (std::size_t s = 0; s < n_segments; ++s) {
    const int symbol = static_cast<int>(rng.uniform_int(vocab_size));
    const double dur = rng.uniform(0.080, 0.200);
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(dur * sample_rate)));
    const double level = rng.uniform(0.7, 1.0);
    std::vector<double> seg =
        render_segment(symbol_profile(symbol), f0_scale, formant_scale, n, sample_rate, rng);
    const std::size_t start = utt.wave.samples.size();
    for (double v : seg) utt.wave.samples.push_back(level * v);
    utt.segments.push_back({symbol, start, start + n});
  }
  peak_normalize(utt.wave.samples);
  return utt;
}

Waveform synth_noise(NoiseKind kind, std::uint64_t seed, std::size_t n_samples, int sample_rate) {
  if (n_samples == 0) throw std::invalid_argument("synth_noise: n_samples must be positive");
  if (sample_rate <= 0) throw std::invalid_argument("synth_noise: sample_rate must be positive");
  switch (kind) {
    case NoiseKind::kBabble:
      return babble(seed, n_samples, sample_rate);
    case NoiseKind::kMusic:
      return music(seed, n_samples, sample_rate);
    case NoiseKind::kNatural:
      return natural(seed, n_samples, sample_rate);
  }
  throw std::invalid_argument("synth_noise: unknown kind");
}

Waveform synth_noise(std::string_view kind, std::uint64_t seed, std::size_t n_samples, int sample_rate) {
  return synth_noise(parse_noise_kind(kind), seed, n_samples, sample_rate);
}

double measure_snr(const Waveform& clean, const Waveform& noise_component) {
  if (clean.size() != noise_component.size())
    throw std::invalid_argument("measure_snr: length mismatch");
  const double pc = signal_power(clean.samples);
  const double pn = signal_power(noise_component.samples);
  if (pc == 0.0 || pn == 0.0) throw std::invalid_argument("measure_snr: silent input");
  return 10.0 * std::log10(pc / pn);
}

NoisySample mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db, NoiseKind kind) {
  if (clean.sample_rate != noise.sample_rate)
    throw std::invalid_argument("mix_at_snr: sample rates differ");
  if (noise.size() < clean.size())
    throw std::invalid_argument("mix_at_snr: noise shorter than clean signal");
  if (std::isnan(snr_db)) throw std::invalid_argument("mix_at_snr: SNR is NaN");
  const double pc = signal_power(clean.samples);
  if (pc == 0.0) throw std::invalid_argument("mix_at_snr: silent clean signal, SNR undefined");

  NoisySample out;
  out.clean = clean;
  out.noise_kind = kind;
  out.snr_db = snr_db;
  out.noise_component.sample_rate = clean.sample_rate;
  out.noise_component.samples.assign(clean.size(), 0.0);

  if (snr_db == kCleanSnr) {
    out.gain = 0.0;
    out.mixed = clean;
    return out;
  }

  const std::span<const double> cropped(noise.samples.data(), clean.size());
  const double pn = signal_power(cropped);
  if (pn == 0.0) throw std::invalid_argument("mix_at_snr: silent noise, SNR undefined");
  out.gain = std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));

  out.mixed = clean;
  double peak = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    out.noise_component.samples[i] = out.gain * cropped[i];
    out.mixed.samples[i] += out.noise_component.samples[i];
    peak = std::max(peak, std::abs(out.mixed.samples[i]));
  }
  if (peak > 1.0) {
    for (double& v : out.mixed.samples) v /= peak;
    out.peak_normalized = true;
  }
  return out;
}

void fft(std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  // exp(-2 pi i k / n), evaluated directly rather than by recurrence.
  thread_local std::vector<double> tw_re, tw_im;
  if (tw_re.size() != n / 2) {
    tw_re.resize(n / 2);
    tw_im.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double ang = -kTwoPi * static_cast<double>(k) / static_cast<double>(n);
      tw_re[k] = std::cos(ang);
      tw_im[k] = std::sin(ang);
    }
  }
  double* d = reinterpret_cast<double*>(x.data());
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2, stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const double wr = tw_re[k * stride], wi = tw_im[k * stride];
        double* u = d + 2 * (i + k);
        double* v = d + 2 * (i + k + half);
        const double vr = v[0] * wr - v[1] * wi;
        const double vi = v[0] * wi + v[1] * wr;
        v[0] = u[0] - vr;
        v[1] = u[1] - vi;
        u[0] += vr;
        u[1] += vi;
      }
    }
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

FeatureExtractor::FeatureExtractor(const FeatureConfig& cfg, int sample_rate)
    : cfg_(cfg), sample_rate_(sample_rate) {
  if (cfg.frame_len == 0 || cfg.hop == 0) throw std::invalid_argument("FeatureExtractor: zero frame or hop");
  if (cfg.n_filters < 1) throw std::invalid_argument("FeatureExtractor: n_filters must be >= 1");
  if (sample_rate <= 0) throw std::invalid_argument("FeatureExtractor: sample_rate must be positive");
  fft_size_ = 1;
  while (fft_size_ < cfg.frame_len) fft_size_ <<= 1;

  window_.resize(cfg.frame_len);
  for (std::size_t i = 0; i < cfg.frame_len; ++i)
    window_[i] = cfg.frame_len == 1
                     ? 1.0
                     : 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / (cfg.frame_len - 1));

  const std::size_t n_bins = fft_size_ / 2 + 1;
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  const double mel_step = mel_hi / static_cast<double>(cfg.n_filters + 1);
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(fft_size_);
  filters_.resize(cfg.n_filters);
  for (std::size_t m = 0; m < cfg.n_filters; ++m) {
    const double left = m * mel_step, center = (m + 1) * mel_step, right = (m + 2) * mel_step;
    std::vector<double> w(n_bins, 0.0);
    std::size_t first = n_bins, last = 0;
    for (std::size_t b = 0; b < n_bins; ++b) {
      const double mel = hz_to_mel(b * bin_hz);
      if (mel > left && mel < right) {
        w[b] = mel <= center ? (mel - left) / (center - left) : (right - mel) / (right - center);
        first = std::min(first, b);
        last = b;
      }
    }
    Filter& f = filters_[m];
    if (first == n_bins) {
      // Narrower than one bin: take the bin nearest the center frequency.
      const auto nearest = std::min<std::size_t>(
          n_bins - 1, static_cast<std::size_t>(std::lround(mel_to_hz(center) / bin_hz)));
      f.first_bin = nearest;
      f.weights = {1.0};
    } else {
      f.first_bin = first;
      f.weights.assign(w.begin() + static_cast<std::ptrdiff_t>(first),
                       w.begin() + static_cast<std::ptrdiff_t>(last + 1));
    }
  }
}

std::size_t FeatureExtractor::num_frames(std::size_t n_samples) const {
  if (n_samples < cfg_.frame_len) return 0;
  return 1 + (n_samples - cfg_.frame_len) / cfg_.hop;
}

FeatureSequence FeatureExtractor::compute(const Waveform& wave) const {
  if (wave.sample_rate != sample_rate_)
    throw std::invalid_argument("extract_features: sample rate " + std::to_string(wave.sample_rate) +
                                " does not match extractor rate " + std::to_string(sample_rate_));
  if (wave.size() < cfg_.frame_len)
    throw std::invalid_argument("extract_features: waveform shorter than one frame");
  const std::size_t n_frames = num_frames(wave.size());
  FeatureSequence out;
  out.frames.resize(n_frames, cfg_.n_filters);

  std::vector<std::complex<double>> buf(fft_size_);
  std::vector<double> power(fft_size_ / 2 + 1);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t offset = t * cfg_.hop;
    for (std::size_t i = 0; i < cfg_.frame_len; ++i) buf[i] = {wave.samples[offset + i] * window_[i], 0.0};
    std::fill(buf.begin() + static_cast<std::ptrdiff_t>(cfg_.frame_len), buf.end(), std::complex<double>{});
    fft(buf);
    for (std::size_t b = 0; b < power.size(); ++b) power[b] = std::norm(buf[b]);
    auto row = out.frames.row(t);
    for (std::size_t m = 0; m < filters_.size(); ++m) {
      const Filter& f = filters_[m];
      double e = 0.0;
      for (std::size_t j = 0; j < f.weights.size(); ++j) e += f.weights[j] * power[f.first_bin + j];
      row[m] = std::log(e + kLogFloor);
    }
  }
  return out;
}

FeatureSequence FeatureExtractor::compute(const Utterance& utt) const { return compute(utt.wave, utt); }

FeatureSequence FeatureExtractor::compute(const Waveform& wave, const Utterance& labels_from) const {
  FeatureSequence out = compute(wave);
  out.utterance_id = labels_from.id;
  out.frame_labels = frame_labels_from_segments(labels_from.segments, out.num_frames(), cfg_);
  return out;
}

std::vector<int> frame_labels_from_segments(std::span<const Segment> segments, std::size_t n_frames,
                                            const FeatureConfig& cfg) {
  std::vector<int> labels(n_frames, 0);
  std::size_t s = 0;
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t center = t * cfg.hop + cfg.frame_len / 2;
    while (s + 1 < segments.size() && center >= segments[s].end) ++s;
    if (!segments.empty()) labels[t] = segments[s].symbol;
  }
  return labels;
}

FeatureSequence extract_features(const Waveform& wave, std::size_t frame_len, std::size_t hop,
                                 std::size_t n_filters) {
  return FeatureExtractor({frame_len, hop, n_filters}, wave.sample_rate).compute(wave);
}

}  // namespace hvic
