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


#include "hvic/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "hvic/csv.hpp"
#include "hvic/rng.hpp"

namespace hvic {

std::vector<double> default_eval_snrs() { return {0.0, 5.0, 10.0, 15.0, kCleanSnr}; }

ConditionSet build_conditions(const TrainingCorpus& eval, const NoiseBank& bank, std::span<const NoiseKind> kinds,
                              std::span<const double> snrs, std::uint64_t seed) {
  if (eval.size() == 0) throw std::invalid_argument("build_conditions: empty eval set");
  ConditionSet out;
  out.units = eval.units;
  for (NoiseKind kind : kinds) {
    std::vector<Waveform> excerpts;
    for (std::size_t u = 0; u < eval.size(); ++u) {
      Rng rng(derive_seed(seed, stream::kEval, static_cast<std::uint64_t>(kind), u));
      excerpts.push_back(bank.draw(kind, eval.utterances[u].wave.size(), rng));
    }
    for (double snr : snrs) {
      out.conditions.push_back({kind, snr});
      auto& feats = out.features.emplace_back();
      for (std::size_t u = 0; u < eval.size(); ++u) {
        if (snr == kCleanSnr) {
          feats.push_back(eval.clean[u]);
        } else {
          const NoisySample mix = mix_at_snr(eval.utterances[u].wave, excerpts[u], snr, kind);
          feats.push_back(eval.features_for(u, mix.mixed));
        }
      }
    }
  }
  return out;
}

std::vector<Matrix> encode_all(const EncoderState& enc, std::span<const Matrix> feats) {
  std::vector<Matrix> out;
  out.reserve(feats.size());
  for (const auto& f : feats) out.push_back(forward(enc, f));
  return out;
}

std::vector<double> pooled_channel_variance(std::span<const Matrix> reps) {
  std::size_t n = 0;
  for (const auto& r : reps) n += r.rows();
  if (reps.empty() || n < 2) throw std::invalid_argument("pooled_channel_variance: need at least two frames");
  const std::size_t d = reps.front().cols();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (const auto& r : reps) {
    if (r.cols() != d) throw std::invalid_argument("pooled_channel_variance: inconsistent widths");
    add_column_sums(r, mean);
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (const auto& r : reps)
    for (std::size_t i = 0; i < r.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double c = r(i, j) - mean[j];
        var[j] += c * c;
      }
  for (double& v : var) v /= static_cast<double>(n - 1);
  return var;
}

std::vector<VarianceRow> channel_variance_report(const EncoderState& enc, const ConditionSet& conds,
                                                 const std::string& model_tag) {
  if (conds.conditions.empty()) throw std::invalid_argument("channel_variance_report: no conditions");
  std::vector<VarianceRow> rows;
  for (std::size_t c = 0; c < conds.conditions.size(); ++c) {
    VarianceRow row{model_tag, conds.conditions[c].kind, conds.conditions[c].snr_db, 0.0, {}};
    row.per_channel = pooled_channel_variance(encode_all(enc, conds.features[c]));
    for (double v : row.per_channel) row.mean_channel_variance += v;
    row.mean_channel_variance /= static_cast<double>(row.per_channel.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

OffDiagStat covariance_offdiag_stat(ConstMatView reps) {
  if (reps.rows < 2) throw std::invalid_argument("covariance_offdiag_stat: need at least two rows");
  const Matrix cov = covariance_matrix(reps);
  std::vector<std::size_t> live;
  for (std::size_t j = 0; j < reps.cols; ++j)
    if (cov(j, j) > 0.0) live.push_back(j);
  OffDiagStat out;
  out.excluded_channels = reps.cols - live.size();
  std::size_t pairs = 0;
  for (std::size_t a : live)
    for (std::size_t b : live) {
      if (a == b) continue;
      out.value += std::abs(cov(a, b)) / std::sqrt(cov(a, a) * cov(b, b));
      ++pairs;
    }
  if (pairs > 0) out.value /= static_cast<double>(pairs);
  return out;
}

std::vector<int> LinearProbe::predict(const Matrix& reps) const {
  Matrix x = reps;
  standardizer.apply(x);
  Matrix logits(x.rows(), weight.cols());
  gemm_nn(x, weight, logits);
  std::vector<int> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = logits.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < r.size(); ++j)
      if (r[j] + bias[j] > r[best] + bias[best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

LinearProbe fit_probe(const EncoderState& enc, const TrainingCorpus& train, std::size_t vocab, const ProbeConfig& cfg) {
  if (vocab < 2) throw std::invalid_argument("fit_probe: vocab must be >= 2");
  const auto reps = encode_all(enc, train.clean);
  std::size_t n = 0;
  for (const auto& r : reps) n += r.rows();
  const std::size_t d = enc.config().model_dim;
  Matrix x(n, d);
  std::vector<std::size_t> y;
  y.reserve(n);
  std::size_t row = 0;
  for (std::size_t u = 0; u < reps.size(); ++u)
    for (std::size_t t = 0; t < reps[u].rows(); ++t, ++row) {
      std::copy(reps[u].row(t).begin(), reps[u].row(t).end(), x.row(row).begin());
      const int label = train.units[u][t];
      if (label < 0 || static_cast<std::size_t>(label) >= vocab)
        throw std::invalid_argument("fit_probe: unit label outside the vocabulary");
      y.push_back(static_cast<std::size_t>(label));
    }

  LinearProbe probe;
  std::vector<FeatureSequence> pooled(1);
  pooled[0].frames = x;
  probe.standardizer = FeatureNormalizer::fit(pooled);
  probe.standardizer.apply(x);

  // Packed parameters: weight (d x vocab) then bias.
  std::vector<double> params(d * vocab + vocab, 0.0), grad(params.size());
  AdamState adam;
  const AdamConfig adam_cfg{cfg.learning_rate, 0.9, 0.999, 1e-8};
  Matrix logits(n, vocab), g(n, vocab);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    gemm_nn(x, ConstMatView(params.data(), d, vocab), logits);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto lr = logits.row(i);
      for (std::size_t j = 0; j < vocab; ++j) lr[j] += params[d * vocab + j];
      auto gr = g.row(i);
      softmax_xent_into(lr, y[i], gr);
      for (double& v : gr) v *= inv_n;
    }
    gemm_tn(x, g, MatView{grad.data(), d, vocab});
    std::fill(grad.begin() + static_cast<std::ptrdiff_t>(d * vocab), grad.end(), 0.0);
    add_column_sums(g, std::span<double>(grad).subspan(d * vocab));
    try {
      adam_step(params, grad, adam, adam_cfg);
    } catch (const DivergenceError& e) {
      throw DivergenceError("probe diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
  }
  probe.weight = to_matrix(ConstMatView(params.data(), d, vocab));
  probe.bias.assign(params.begin() + static_cast<std::ptrdiff_t>(d * vocab), params.end());
  return probe;
}

std::vector<ProbeResult> evaluate_probe(const LinearProbe& probe, const EncoderState& enc, const ConditionSet& conds) {
  std::vector<ProbeResult> out;
  for (std::size_t c = 0; c < conds.conditions.size(); ++c) {
    ProbeResult r{conds.conditions[c].kind, conds.conditions[c].snr_db, 0.0, 0};
    std::size_t correct = 0;
    for (std::size_t u = 0; u < conds.features[c].size(); ++u) {
      const auto pred = probe.predict(forward(enc, conds.features[c][u]));
      for (std::size_t t = 0; t < pred.size(); ++t) correct += pred[t] == conds.units[u][t];
      r.n_frames += pred.size();
    }
    r.frame_accuracy = r.n_frames ? static_cast<double>(correct) / static_cast<double>(r.n_frames) : 0.0;
    out.push_back(r);
  }
  return out;
}

namespace {

double mean_accuracy(std::span<const ProbeResult> results, bool clean) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& r : results)
    if ((r.snr_db == kCleanSnr) == clean) {
      acc += r.frame_accuracy;
      ++n;
    }
  if (n == 0) throw std::invalid_argument(clean ? "no clean probe conditions" : "no noisy probe conditions");
  return acc / static_cast<double>(n);
}

}  // namespace

double n_accuracy(std::span<const ProbeResult> results) { return mean_accuracy(results, false); }
double clean_accuracy(std::span<const ProbeResult> results) { return mean_accuracy(results, true); }

EvalHook make_eval_hook(const TrainingCorpus& train, const ConditionSet& conds, std::size_t vocab,
                        const ProbeConfig& cfg) {
  return [&train, &conds, vocab, cfg](const EncoderState& enc, std::size_t step) {
    const auto probe = fit_probe(enc, train, vocab, cfg);
    const auto results = evaluate_probe(probe, enc, conds);
    EvalRow row;
    row.step = step;
    row.probe_acc_clean = clean_accuracy(results);
    row.probe_acc_noisy = n_accuracy(results);
    for (std::size_t c = 0; c < conds.conditions.size(); ++c) {
      if (!conds.conditions[c].is_clean()) continue;
      const auto reps = encode_all(enc, conds.features[c]);
      const auto var = pooled_channel_variance(reps);
      for (double v : var) row.mean_channel_std += std::sqrt(v);
      row.mean_channel_std /= static_cast<double>(var.size());
      break;
    }
    return row;
  };
}

LossBreakdown tail_mean(const TrainLog& log, std::size_t window) {
  if (log.losses.empty()) throw std::invalid_argument("tail_mean: empty log");
  const std::size_t w = std::clamp<std::size_t>(window, 1, log.losses.size());
  LossBreakdown m;
  for (std::size_t i = log.losses.size() - w; i < log.losses.size(); ++i) {
    const auto& l = log.losses[i];
    m.l_m += l.l_m;
    m.s += l.s;
    m.v += l.v;
    m.c += l.c;
    m.l_vic += l.l_vic;
    m.l_tot += l.l_tot;
  }
  const double inv = 1.0 / static_cast<double>(w);
  m.l_m *= inv;
  m.s *= inv;
  m.v *= inv;
  m.c *= inv;
  m.l_vic *= inv;
  m.l_tot *= inv;
  return m;
}

std::vector<AblationFlags> ablation_ladder() {
  return {{false, false, false}, {true, false, false}, {true, true, false}, {true, true, true}};
}

AblationResult ablation_run(const TrainingCorpus& train, const NoiseBank& train_noise, const ConditionSet& eval,
                            const AblationSettings& settings, const AblationProgress& progress) {
  if (settings.seeds.empty()) throw std::invalid_argument("ablation_run: need at least one seed");
  auto say = [&](const std::string& m) {
    if (progress) progress(m);
  };
  AblationResult out;
  for (std::uint64_t seed : settings.seeds) {
    AblationSeedResult sr;
    sr.seed = seed;
    TrainConfig tcfg = settings.teacher;
    tcfg.seed = seed;
    say("seed " + std::to_string(seed) + ": clean pre-training");
    auto teacher = pretrain_clean(init_encoder(settings.encoder, seed), train, tcfg);
    round_to_float32(teacher.state);
    sr.teacher = teacher.state;
    sr.teacher_log = std::move(teacher.log);
    sr.teacher_probe = evaluate_probe(fit_probe(sr.teacher, train, settings.vocab, settings.probe), sr.teacher, eval);

    for (const AblationFlags& flags : ablation_ladder()) {
      TrainConfig scfg = settings.student;
      scfg.seed = seed;
      scfg.flags = flags;
      say("seed " + std::to_string(seed) + ": noisy pre-training " + flags.tag());
      auto student = pretrain_noisy(sr.teacher, train, train_noise, scfg, true);
      AblationConfigResult cr;
      cr.flags = flags;
      cr.probe = evaluate_probe(fit_probe(student.state, train, settings.vocab, settings.probe), student.state, eval);
      cr.variance = channel_variance_report(student.state, eval, flags.tag());
      cr.sampled_std = student.log.final_sampled_std(settings.tail_window);
      cr.log = std::move(student.log);
      cr.state = std::move(student.state);
      sr.configs.push_back(std::move(cr));
    }
    out.seeds.push_back(std::move(sr));
  }
  out.rows = summarize_ablation(out.seeds, settings.tail_window);
  return out;
}

std::vector<AblationRow> summarize_ablation(std::span<const AblationSeedResult> seeds, std::size_t tail_window) {
  std::vector<AblationRow> rows;
  if (seeds.empty()) return rows;
  const std::size_t n_cfg = seeds.front().configs.size();
  const double n = static_cast<double>(seeds.size());
  for (std::size_t c = 0; c < n_cfg; ++c) {
    AblationRow row;
    row.config_tag = seeds.front().configs[c].flags.tag();
    std::vector<double> acc;
    for (const auto& s : seeds) {
      acc.push_back(n_accuracy(s.configs[c].probe));
      const LossBreakdown t = tail_mean(s.configs[c].log, tail_window);
      row.final_losses.l_m += t.l_m / n;
      row.final_losses.s += t.s / n;
      row.final_losses.v += t.v / n;
      row.final_losses.c += t.c / n;
      row.final_losses.l_vic += t.l_vic / n;
      row.final_losses.l_tot += t.l_tot / n;
    }
    for (double a : acc) row.n_accuracy_mean += a / n;
    if (acc.size() > 1) {
      double ss = 0.0;
      for (double a : acc) ss += (a - row.n_accuracy_mean) * (a - row.n_accuracy_mean);
      row.n_accuracy_std = std::sqrt(ss / (n - 1.0));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_variance_csv(const std::filesystem::path& path, std::span<const VarianceRow> rows) {
  auto out = open_output(path);
  out << "model_tag,noise_kind,snr_db,mean_channel_variance\n";
  for (const auto& r : rows)
    out << r.model_tag << ',' << to_string(r.kind) << ',' << format_double(r.snr_db) << ','
        << format_double(r.mean_channel_variance) << '\n';
}

void write_variance_wide_csv(const std::filesystem::path& path, std::span<const VarianceRow> rows) {
  auto out = open_output(path);
  out << "model_tag,noise_kind,snr_db";
  const std::size_t d = rows.empty() ? 0 : rows.front().per_channel.size();
  for (std::size_t j = 0; j < d; ++j) out << ",ch" << j;
  out << '\n';
  for (const auto& r : rows) {
    out << r.model_tag << ',' << to_string(r.kind) << ',' << format_double(r.snr_db);
    for (double v : r.per_channel) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_probe_csv(const std::filesystem::path& path, const std::string& model_tag,
                     std::span<const ProbeResult> results) {
  const TaggedProbeResults one{model_tag, {results.begin(), results.end()}};
  write_probe_csv(path, std::span(&one, 1));
}

void write_probe_csv(const std::filesystem::path& path, std::span<const TaggedProbeResults> models) {
  auto out = open_output(path);
  out << "model_tag,noise_kind,snr_db,frame_accuracy,n_frames\n";
  for (const auto& m : models)
    for (const auto& r : m.results)
      out << m.model_tag << ',' << to_string(r.kind) << ',' << format_double(r.snr_db) << ','
          << format_double(r.frame_accuracy) << ',' << r.n_frames << '\n';
}

void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows) {
  auto out = open_output(path);
  out << "config_tag,n_accuracy_mean,n_accuracy_std,l_m,s,v,c\n";
  for (const auto& r : rows)
    out << r.config_tag << ',' << format_double(r.n_accuracy_mean) << ',' << format_double(r.n_accuracy_std) << ','
        << format_double(r.final_losses.l_m) << ',' << format_double(r.final_losses.s) << ','
        << format_double(r.final_losses.v) << ',' << format_double(r.final_losses.c) << '\n';
}

std::string format_ablation_table(std::span<const AblationRow> rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s %18s %9s %9s %9s %9s\n", "config", "N-acc (mean+-std)", "l_m", "s", "v",
                "c");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-14s %9.4f+-%-7.4f %9.4f %9.4f %9.4f %9.4f\n", r.config_tag.c_str(),
                  r.n_accuracy_mean, r.n_accuracy_std, r.final_losses.l_m, r.final_losses.s, r.final_losses.v,
                  r.final_losses.c);
    out += buf;
  }
  return out;
}

}  // namespace hvic
