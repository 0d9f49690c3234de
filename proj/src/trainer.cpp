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


#include "hvic/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hvic/csv.hpp"

namespace hvic {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st, const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: parameter/gradient length mismatch");
  if (st.m.empty()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
  }
  if (st.m.size() != params.size() || st.v.size() != params.size())
    throw std::invalid_argument("adam_step: state does not match parameter layout");
  if (!all_finite(grads)) throw DivergenceError("adam_step: non-finite gradient");

  ++st.step;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g;
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

std::string AblationFlags::tag() const {
  std::string t = "lm";
  if (use_inv) t += "+inv";
  if (use_var) t += "+var";
  if (use_cov) t += "+cov";
  return t;
}

void TrainConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (batch_utterances < 1) throw std::invalid_argument("batch_utterances must be >= 1");
  if (!(adam.learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1))
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  if (!(adam.eps > 0)) throw std::invalid_argument("adam_eps must be positive");
  if (!(snr_low_db <= snr_high_db)) throw std::invalid_argument("snr_low_db must not exceed snr_high_db");
  if (!std::isfinite(snr_low_db) || !std::isfinite(snr_high_db))
    throw std::invalid_argument("training SNR range must be finite");
  if (noise_kinds.empty()) throw std::invalid_argument("noise_kinds must not be empty");
  vic.validate();
}

VicWeights TrainConfig::effective_weights() const {
  VicWeights w = vic;
  if (!flags.use_inv) w.lambda = 0.0;
  if (!flags.use_var) w.mu = 0.0;
  if (!flags.use_cov) w.nu = 0.0;
  return w;
}

NoiseBank::NoiseBank(std::span<const NoiseKind> kinds, std::size_t clips_per_kind, std::size_t clip_samples,
                     std::uint64_t seed, int sample_rate)
    : kinds_(kinds.begin(), kinds.end()), clip_samples_(clip_samples), sample_rate_(sample_rate) {
  if (kinds_.empty()) throw std::invalid_argument("NoiseBank: no noise kinds");
  if (clips_per_kind < 1 || clip_samples < 1) throw std::invalid_argument("NoiseBank: empty bank");
  for (NoiseKind k : kinds_) {
    auto& clips = clips_.emplace_back();
    for (std::size_t c = 0; c < clips_per_kind; ++c)
      clips.push_back(synth_noise(k, derive_seed(seed, stream::kBank, static_cast<std::uint64_t>(k), c),
                                  clip_samples, sample_rate));
  }
}

Waveform NoiseBank::draw(NoiseKind kind, std::size_t n_samples, Rng& rng) const {
  const auto it = std::find(kinds_.begin(), kinds_.end(), kind);
  if (it == kinds_.end()) throw std::invalid_argument("NoiseBank: kind not in bank: " + std::string(to_string(kind)));
  if (n_samples > clip_samples_)
    throw std::invalid_argument("NoiseBank: request of " + std::to_string(n_samples) + " samples exceeds clip length " +
                                std::to_string(clip_samples_));
  const auto& clips = clips_[static_cast<std::size_t>(it - kinds_.begin())];
  const auto& clip = clips[rng.uniform_int(clips.size())];
  const std::size_t offset = rng.uniform_int(clip_samples_ - n_samples + 1);
  Waveform w{sample_rate_, {}};
  w.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                   clip.samples.begin() + static_cast<std::ptrdiff_t>(offset + n_samples));
  return w;
}

Waveform NoiseBank::draw(std::size_t n_samples, Rng& rng, NoiseKind* kind_out) const {
  const NoiseKind kind = kinds_[rng.uniform_int(kinds_.size())];
  if (kind_out) *kind_out = kind;
  return draw(kind, n_samples, rng);
}

std::size_t TrainingCorpus::max_samples() const {
  std::size_t m = 0;
  for (const auto& u : utterances) m = std::max(m, u.wave.size());
  return m;
}

Matrix TrainingCorpus::features_for(std::size_t u, const Waveform& wave) const {
  FeatureSequence fs = extractor.compute(wave, utterances.at(u));
  if (!normalizer.empty()) normalizer.apply(fs.frames);
  return std::move(fs.frames);
}

TrainingCorpus prepare_corpus(std::vector<Utterance> utterances, const Codebook& cb, const FeatureExtractor& extractor) {
  if (utterances.empty()) throw std::invalid_argument("prepare_corpus: empty corpus");
  TrainingCorpus c{std::move(utterances), {}, {}, {}, cb.normalizer, extractor};
  for (const auto& u : c.utterances) {
    FeatureSequence fs = extractor.compute(u);
    if (!c.normalizer.empty()) c.normalizer.apply(fs.frames);
    c.codewords.push_back(assign(cb, fs.frames));
    c.units.push_back(std::move(fs.frame_labels));
    c.clean.push_back(std::move(fs.frames));
  }
  return c;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::size_t epoch, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, stream::kEpoch, epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
  return order;
}

std::vector<std::size_t> batch_indices(std::size_t n_utterances, std::size_t batch, std::size_t step,
                                       std::uint64_t seed) {
  if (n_utterances == 0) throw std::invalid_argument("batch_indices: empty corpus");
  std::vector<std::size_t> out;
  std::size_t cached_epoch = static_cast<std::size_t>(-1);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t pos = step * batch + i;
    const std::size_t epoch = pos / n_utterances;
    if (epoch != cached_epoch) {
      order = epoch_order(n_utterances, epoch, seed);
      cached_epoch = epoch;
    }
    out.push_back(order[pos % n_utterances]);
  }
  return out;
}

Batch make_batch(const TrainingCorpus& corpus, const TrainConfig& cfg, const EncoderConfig& enc, std::size_t step,
                 const NoiseBank* noise) {
  Batch b;
  b.utterances = batch_indices(corpus.size(), cfg.batch_utterances, step, cfg.seed);
  const std::size_t n = b.utterances.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t u = b.utterances[i];
    b.clean.push_back(corpus.clean[u]);
    b.codewords.push_back(corpus.codewords[u]);
    if (noise) {
      Rng rng(derive_seed(cfg.seed, stream::kNoise, step, i));
      const Waveform& clean = corpus.utterances[u].wave;
      const NoiseKind kind = cfg.noise_kinds[rng.uniform_int(cfg.noise_kinds.size())];
      const Waveform excerpt = noise->draw(kind, clean.size(), rng);
      const double snr = rng.uniform(cfg.snr_low_db, cfg.snr_high_db);
      const NoisySample mix = mix_at_snr(clean, excerpt, snr, kind);
      b.noisy.push_back(corpus.features_for(u, mix.mixed));
      b.kinds.push_back(kind);
      b.snr_db.push_back(snr);
    }
  }
  // The batch loss needs at least one masked frame; redraw the whole batch's
  // masks with a new attempt index in the (rare) all-empty case.
  for (std::uint64_t attempt = 0;; ++attempt) {
    b.masks.clear();
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      b.masks.push_back(draw_mask(b.clean[i].rows(), enc, derive_seed(cfg.seed, stream::kMask, step, (attempt << 32) | i)));
      total += b.masks.back().size();
    }
    if (total > 0) break;
    if (enc.mask_start_prob == 0.0) throw std::invalid_argument("mask_start_prob is 0: masked prediction has no targets");
  }
  return b;
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  auto out = open_output(path);
  out << "step,l_m,s,v,c,l_vic,l_tot\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const auto& l = losses[i];
    out << steps[i] << ',' << format_double(l.l_m) << ',' << format_double(l.s) << ',' << format_double(l.v) << ','
        << format_double(l.c) << ',' << format_double(l.l_vic) << ',' << format_double(l.l_tot) << '\n';
  }
}

void TrainLog::write_eval_csv(const std::filesystem::path& path) const {
  auto out = open_output(path);
  out << "step,probe_acc_clean,probe_acc_noisy,mean_channel_std\n";
  for (const auto& e : evals)
    out << e.step << ',' << format_double(e.probe_acc_clean) << ',' << format_double(e.probe_acc_noisy) << ','
        << format_double(e.mean_channel_std) << '\n';
}

double TrainLog::final_sampled_std(std::size_t window) const {
  if (sampled_std.empty()) throw std::logic_error("final_sampled_std: log has no sampled frames");
  const std::size_t w = std::clamp<std::size_t>(window, 1, sampled_std.size());
  double acc = 0.0;
  for (std::size_t i = sampled_std.size() - w; i < sampled_std.size(); ++i) acc += sampled_std[i];
  return acc / static_cast<double>(w);
}

namespace {

// Shared loop. `teacher_reps` non-null selects the noisy stage.
TrainResult run_training(EncoderState state, const TrainingCorpus& corpus, const TrainConfig& cfg,
                         const NoiseBank* noise, const std::vector<Matrix>* teacher_reps, bool compute_vic,
                         const TrainHooks& hooks) {
  cfg.validate();
  const VicWeights w = cfg.effective_weights();
  TrainLog log;
  AdamState adam;
  std::vector<double> grad(state.num_params());

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    try {
      const Batch b = make_batch(corpus, cfg, state.config(), step, noise);
      const auto& inputs = noise ? b.noisy : b.clean;
      const std::size_t n = inputs.size();
      std::vector<ForwardCache> caches(n);
      std::vector<Matrix> reps, logits;
      reps.reserve(n);
      logits.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        reps.push_back(forward(state, inputs[i], &b.masks[i], &caches[i]));
        logits.push_back(predict_codewords(state, reps.back()));
      }
      const auto mp = masked_prediction_loss(logits, b.codewords, b.masks);

      LossBreakdown lb;
      lb.l_m = mp.loss;
      std::vector<Matrix> grad_reps;
      if (compute_vic) {
        std::vector<Matrix> tz;
        tz.reserve(n);
        for (std::size_t u : b.utterances) tz.push_back((*teacher_reps)[u]);
        const auto pair = sample_frames(tz, reps, w.n_sample, derive_seed(cfg.seed, stream::kSample, step),
                                        cfg.vic_exclude_masked ? std::span<const MaskSpec>(b.masks)
                                                               : std::span<const MaskSpec>());
        const auto vic = vic_loss(pair, w);
        lb.s = vic.parts.s;
        lb.v = vic.parts.v;
        lb.c = vic.parts.c;
        lb.l_vic = vic.parts.l_vic;
        Matrix scaled = vic.grad_zp;
        for (double& x : scaled.values()) x *= w.alpha;
        for (const auto& r : reps) grad_reps.emplace_back(r.rows(), r.cols());
        scatter_grad(scaled, pair.sources, grad_reps);
        log.sampled_std.push_back(mean_channel_std(pair.zp));
      }
      if (!std::isfinite(lb.l_m) || !std::isfinite(lb.l_vic)) throw DivergenceError("non-finite loss");
      lb.l_tot = total_loss(lb.l_m, lb.l_vic, w.alpha);

      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i)
        backward(state, caches[i], compute_vic ? ConstMatView(grad_reps[i]) : ConstMatView(), mp.grad_logits[i],
                 grad);
      adam_step(state.params(), grad, adam, cfg.adam);

      log.steps.push_back(step);
      log.losses.push_back(lb);
      if (hooks.progress) hooks.progress(step, lb);
    } catch (const DivergenceError& e) {
      throw DivergenceError("training diverged at step " + std::to_string(step) + ": " + e.what());
    }
    if (cfg.eval_interval > 0 && hooks.eval && ((step + 1) % cfg.eval_interval == 0 || step + 1 == cfg.steps))
      log.evals.push_back(hooks.eval(state, step + 1));
  }
  return {std::move(state), std::move(log)};
}

}  // namespace

TrainResult pretrain_clean(const EncoderState& init, const TrainingCorpus& corpus, const TrainConfig& cfg,
                           const TrainHooks& hooks) {
  if (init.config().feature_dim != corpus.clean.front().cols())
    throw std::invalid_argument("pretrain_clean: encoder feature_dim does not match the corpus features");
  return run_training(init, corpus, cfg, nullptr, nullptr, false, hooks);
}

TrainResult pretrain_noisy(const EncoderState& teacher, const TrainingCorpus& corpus, const NoiseBank& noise,
                           const TrainConfig& cfg, bool compute_vic, const TrainHooks& hooks) {
  if (teacher.config().feature_dim != corpus.clean.front().cols())
    throw std::invalid_argument("pretrain_noisy: encoder feature_dim does not match the corpus features");
  // The teacher is frozen and sees clean unmasked input, so its
  // representations are fixed for the whole run.
  std::vector<Matrix> teacher_reps;
  if (compute_vic) {
    teacher_reps.reserve(corpus.size());
    for (const auto& f : corpus.clean) teacher_reps.push_back(forward(teacher, f));
  }
  return run_training(teacher, corpus, cfg, &noise, &teacher_reps, compute_vic, hooks);
}

NoiseBank make_train_noise_bank(const TrainingCorpus& corpus, std::span<const NoiseKind> kinds,
                                std::uint64_t noise_seed) {
  return NoiseBank(kinds, 8, 2 * corpus.max_samples(), derive_seed(noise_seed, stream::kBank, 0));
}

NoiseBank make_eval_noise_bank(std::size_t min_samples, std::span<const NoiseKind> kinds, std::uint64_t noise_seed) {
  return NoiseBank(kinds, 4, 2 * min_samples, derive_seed(noise_seed, stream::kBank, 1));
}

}  // namespace hvic
