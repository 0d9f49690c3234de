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


#include "hvic/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <list>
#include <optional>
#include <string>
#include <vector>

#include "hvic/analysis.hpp"
#include "hvic/checkpoint.hpp"
#include "hvic/codebook.hpp"
#include "hvic/config.hpp"
#include "hvic/corpus.hpp"
#include "hvic/csv.hpp"
#include "hvic/gradcheck.hpp"
#include "hvic/trainer.hpp"

namespace hvic {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Options every subcommand accepts, applied in precedence order:
// defaults < --config file < --set key=value < dedicated flags.
struct CommonOptions {
  std::string config_path;
  std::vector<std::string> assignments;
  // A list keeps the bound addresses stable as options are added.
  std::list<std::pair<std::string, std::optional<std::string>>> flags;  // key, value

  void add_to(CLI::App* app) {
    app->add_option("--config", config_path, "Lab config file (key = value lines)");
    app->add_option("--set", assignments, "Override one config key, as key=value (repeatable)");
  }
  /// A dedicated flag that is sugar for one config key.
  void add_key_option(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    flags.emplace_back(key, std::nullopt);
    app->add_option(flag, flags.back().second, help);
  }

  LabConfig resolve() const {
    LabConfig cfg = config_path.empty() ? LabConfig{} : load_config(config_path);
    for (const auto& a : assignments) {
      const auto eq = a.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + a + "'");
      try {
        cfg.set(a.substr(0, eq), a.substr(eq + 1));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("--set: ") + e.what());
      }
    }
    for (const auto& [key, value] : flags)
      if (value) cfg.set(key, *value);
    return cfg;
  }
};

struct Paths {
  std::string corpus, eval_corpus, codebook, model, teacher, init, out, wide;
  std::string tag = "model";
};

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

void echo_config(const LabConfig& cfg, std::ostream& err) {
  err << "# resolved config\n" << cfg.dump() << "# end config\n";
}

void save_resolved(const LabConfig& cfg, const fs::path& dir) {
  auto out = open_output(dir / "config.txt");
  out << cfg.dump();
}

FeatureExtractor extractor(const LabConfig& cfg) { return FeatureExtractor(cfg.features, cfg.corpus.sample_rate); }

Codebook load_checked_codebook(const std::string& path, const LabConfig& cfg) {
  Codebook cb = load_codebook(path);
  if (cb.feature_dim() != cfg.features.n_filters)
    throw std::runtime_error(path + ": codebook has " + std::to_string(cb.feature_dim()) +
                             " feature channels but n_filters = " + std::to_string(cfg.features.n_filters));
  if (cb.k() != cfg.encoder.k_codewords)
    throw std::runtime_error(path + ": codebook has k = " + std::to_string(cb.k()) + " but the config says k = " +
                             std::to_string(cfg.encoder.k_codewords));
  return cb;
}

EncoderState load_checked_encoder(const std::string& path, const LabConfig& cfg) {
  EncoderState s = load_encoder(path, cfg.encoder);
  if (!s.config().same_architecture(cfg.encoder))
    throw std::runtime_error(path + ": encoder shape differs from the configured architecture");
  return s;
}

TrainingCorpus load_training(const std::string& dir, const Codebook& cb, const LabConfig& cfg) {
  return prepare_corpus(load_corpus(dir), cb, extractor(cfg));
}

ConditionSet make_conditions(const TrainingCorpus& eval, const LabConfig& cfg) {
  const auto kinds = all_noise_kinds();
  const NoiseBank bank = make_eval_noise_bank(eval.max_samples(), kinds, cfg.noise_seed);
  return build_conditions(eval, bank, kinds, cfg.eval_snrs, cfg.eval_seed);
}

ProgressHook progress_printer(const std::string& label, std::size_t steps, std::ostream& err) {
  return [label, steps, &err](std::size_t step, const LossBreakdown& l) {
    if ((step + 1) % 100 != 0 && step + 1 != steps) return;
    char buf[200];
    std::snprintf(buf, sizeof buf, "[%s] step %zu/%zu l_m=%.4f s=%.4f v=%.4f c=%.4f l_tot=%.4f\n", label.c_str(),
                  step + 1, steps, l.l_m, l.s, l.v, l.c, l.l_tot);
    err << buf << std::flush;
  };
}

void print_probe_summary(std::ostream& out, const std::string& tag, std::span<const ProbeResult> results) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s clean_accuracy=%.6f n_accuracy=%.6f\n", tag.c_str(), clean_accuracy(results),
                n_accuracy(results));
  out << buf;
}

// Subcommands ---------------------------------------------------------------

int cmd_synth(const LabConfig& cfg, const Paths& p, std::ostream& out) {
  require(p.out, "--out");
  CorpusSpec spec = cfg.corpus;
  spec.seed = train_split_seed(cfg.corpus.seed);
  save_corpus(fs::path(p.out) / "train", synth_corpus(spec, "train"));
  spec.n_utterances = cfg.n_eval;
  spec.seed = eval_split_seed(cfg.corpus.seed);
  save_corpus(fs::path(p.out) / "eval", synth_corpus(spec, "eval"));
  save_resolved(cfg, p.out);
  out << "wrote " << cfg.corpus.n_utterances << " train and " << cfg.n_eval << " eval utterances to " << p.out
      << "\n";
  return kExitOk;
}

int cmd_features(const LabConfig& cfg, const Paths& p, std::ostream& out) {
  require(p.corpus, "--corpus");
  require(p.out, "--out");
  const auto utts = load_corpus(p.corpus);
  const FeatureExtractor fx = extractor(cfg);
  std::optional<Codebook> cb;
  if (!p.codebook.empty()) cb = load_checked_codebook(p.codebook, cfg);
  for (const auto& u : utts) {
    FeatureSequence f = fx.compute(u);
    if (cb) cb->normalizer.apply(f.frames);
    Tensor frames{"frames", {static_cast<std::uint32_t>(f.num_frames()), static_cast<std::uint32_t>(f.dim())}, {}};
    for (double x : f.frames.values()) frames.data.push_back(static_cast<float>(x));
    Tensor labels{"frame_labels", {static_cast<std::uint32_t>(f.num_frames())}, {}};
    for (int l : f.frame_labels) labels.data.push_back(static_cast<float>(l));
    write_tensors(fs::path(p.out) / (u.id + ".feat"), std::vector<Tensor>{frames, labels});
  }
  out << "wrote " << utts.size() << " feature files to " << p.out << (cb ? " (normalized)" : "") << "\n";
  return kExitOk;
}

int cmd_kmeans(const LabConfig& cfg, const Paths& p, std::ostream& out) {
  require(p.corpus, "--corpus");
  require(p.out, "--out");
  const auto utts = load_corpus(p.corpus);
  const Codebook fitted = fit_codebook(utts, extractor(cfg), cfg.encoder.k_codewords, cfg.kmeans_iters, cfg.kmeans_seed);
  save_checkpoint(fitted, p.out);
  // Report quality on the reloaded (float32) codebook, the one training uses.
  const TrainingCorpus corpus = load_training(p.corpus, load_codebook(p.out), cfg);
  std::vector<int> codes, units;
  for (std::size_t u = 0; u < corpus.size(); ++u) {
    codes.insert(codes.end(), corpus.codewords[u].begin(), corpus.codewords[u].end());
    units.insert(units.end(), corpus.units[u].begin(), corpus.units[u].end());
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "k=%zu frames=%zu inertia=%.6f purity=%.4f\n", fitted.k(), codes.size(),
                fitted.inertia, cluster_purity(codes, units, fitted.k(), cfg.corpus.vocab_size));
  out << buf;
  return kExitOk;
}

TrainHooks make_hooks(const std::string& label, const LabConfig& cfg, const TrainingCorpus& train,
                      const std::optional<ConditionSet>& conds, std::ostream& err) {
  TrainHooks hooks;
  hooks.progress = progress_printer(label, cfg.train.steps, err);
  if (cfg.train.eval_interval > 0) {
    if (!conds) throw UsageError("eval_interval > 0 needs --eval-corpus");
    hooks.eval = make_eval_hook(train, *conds, cfg.corpus.vocab_size, cfg.probe);
  }
  return hooks;
}

void write_run(const TrainResult& res, const LabConfig& cfg, const fs::path& dir, std::ostream& out) {
  save_checkpoint(res.state, dir / "model.ckpt");
  res.log.write_csv(dir / "train_log.csv");
  if (!res.log.evals.empty()) res.log.write_eval_csv(dir / "eval_log.csv");
  save_resolved(cfg, dir);
  const auto& last = res.log.losses.back();
  char buf[200];
  std::snprintf(buf, sizeof buf, "final l_m=%.6f s=%.6f v=%.6f c=%.6f l_tot=%.6f\n", last.l_m, last.s, last.v,
                last.c, last.l_tot);
  out << buf << "wrote " << (dir / "model.ckpt").string() << "\n";
}

int cmd_pretrain(const LabConfig& cfg, const Paths& p, bool noisy, std::ostream& out, std::ostream& err) {
  require(p.corpus, "--corpus");
  require(p.codebook, "--codebook");
  require(p.out, "--out");
  if (noisy) require(p.init, "--init (with --noisy)");
  const Codebook cb = load_checked_codebook(p.codebook, cfg);
  const TrainingCorpus train = load_training(p.corpus, cb, cfg);
  std::optional<ConditionSet> conds;
  if (!p.eval_corpus.empty()) conds = make_conditions(load_training(p.eval_corpus, cb, cfg), cfg);
  const TrainHooks hooks = make_hooks(noisy ? "noisy-pretrain" : "pretrain", cfg, train, conds, err);
  TrainResult res{EncoderState(cfg.encoder), {}};
  if (noisy) {
    const EncoderState init = load_checked_encoder(p.init, cfg);
    save_checkpoint(init, fs::path(p.out) / "init.ckpt");
    const NoiseBank bank = make_train_noise_bank(train, cfg.train.noise_kinds, cfg.noise_seed);
    res = pretrain_noisy(init, train, bank, cfg.train, false, hooks);
  } else {
    res = pretrain_clean(init_encoder(cfg.encoder, cfg.train.seed), train, cfg.train, hooks);
  }
  write_run(res, cfg, p.out, out);
  return kExitOk;
}

int cmd_vic_pretrain(const LabConfig& cfg, const Paths& p, std::ostream& out, std::ostream& err) {
  require(p.corpus, "--corpus");
  require(p.codebook, "--codebook");
  require(p.teacher, "--teacher");
  require(p.out, "--out");
  if (!cfg.train.flags.any())
    err << "warning: no --inv/--var/--cov given; this run reduces to the noisy L_m-only baseline\n";
  const Codebook cb = load_checked_codebook(p.codebook, cfg);
  const TrainingCorpus train = load_training(p.corpus, cb, cfg);
  std::optional<ConditionSet> conds;
  if (!p.eval_corpus.empty()) conds = make_conditions(load_training(p.eval_corpus, cb, cfg), cfg);
  const TrainHooks hooks = make_hooks("vic-pretrain " + cfg.train.flags.tag(), cfg, train, conds, err);
  const EncoderState teacher = load_checked_encoder(p.teacher, cfg);
  // The student starts as an exact copy of the teacher.
  save_checkpoint(EncoderState(teacher), fs::path(p.out) / "init.ckpt");
  const NoiseBank bank = make_train_noise_bank(train, cfg.train.noise_kinds, cfg.noise_seed);
  const TrainResult res = pretrain_noisy(teacher, train, bank, cfg.train, true, hooks);
  write_run(res, cfg, p.out, out);
  return kExitOk;
}

int cmd_probe(const LabConfig& cfg, const Paths& p, std::ostream& out) {
  require(p.corpus, "--corpus");
  require(p.eval_corpus, "--eval-corpus");
  require(p.codebook, "--codebook");
  require(p.model, "--model");
  require(p.out, "--out");
  const Codebook cb = load_checked_codebook(p.codebook, cfg);
  const TrainingCorpus train = load_training(p.corpus, cb, cfg);
  const ConditionSet conds = make_conditions(load_training(p.eval_corpus, cb, cfg), cfg);
  const EncoderState enc = load_checked_encoder(p.model, cfg);
  const auto results = evaluate_probe(fit_probe(enc, train, cfg.corpus.vocab_size, cfg.probe), enc, conds);
  write_probe_csv(p.out, p.tag, results);
  print_probe_summary(out, p.tag, results);
  return kExitOk;
}

int cmd_analyze_variance(const LabConfig& cfg, const Paths& p, std::ostream& out) {
  require(p.eval_corpus, "--eval-corpus");
  require(p.codebook, "--codebook");
  require(p.model, "--model");
  require(p.out, "--out");
  const Codebook cb = load_checked_codebook(p.codebook, cfg);
  const TrainingCorpus eval = load_training(p.eval_corpus, cb, cfg);
  const ConditionSet conds = make_conditions(eval, cfg);
  const EncoderState enc = load_checked_encoder(p.model, cfg);
  const auto rows = channel_variance_report(enc, conds, p.tag);
  write_variance_csv(p.out, rows);
  if (!p.wide.empty()) write_variance_wide_csv(p.wide, rows);
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-8s snr=%-4s mean_channel_variance=%.6f\n", std::string(to_string(r.kind)).c_str(),
                  format_double(r.snr_db).c_str(), r.mean_channel_variance);
    out << buf;
  }
  // Correlation diagnostic on the pooled clean representations.
  const auto reps = encode_all(enc, eval.clean);
  std::size_t n = 0;
  for (const auto& r : reps) n += r.rows();
  Matrix pooled(n, enc.config().model_dim);
  std::size_t row = 0;
  for (const auto& r : reps)
    for (std::size_t t = 0; t < r.rows(); ++t, ++row) std::copy(r.row(t).begin(), r.row(t).end(), pooled.row(row).begin());
  const OffDiagStat od = covariance_offdiag_stat(pooled);
  std::snprintf(buf, sizeof buf, "clean mean |offdiag corr|=%.6f (excluded channels: %zu)\n", od.value,
                od.excluded_channels);
  out << buf;
  return kExitOk;
}

int cmd_ablate(const LabConfig& cfg, const Paths& p, std::ostream& out, std::ostream& err) {
  require(p.corpus, "--corpus");
  require(p.eval_corpus, "--eval-corpus");
  require(p.codebook, "--codebook");
  require(p.out, "--out");
  const Codebook cb = load_checked_codebook(p.codebook, cfg);
  const TrainingCorpus train = load_training(p.corpus, cb, cfg);
  const ConditionSet conds = make_conditions(load_training(p.eval_corpus, cb, cfg), cfg);
  const NoiseBank bank = make_train_noise_bank(train, cfg.train.noise_kinds, cfg.noise_seed);

  AblationSettings s;
  s.encoder = cfg.encoder;
  s.teacher = cfg.train;
  s.teacher.steps = cfg.ablation_teacher_steps;
  s.student = cfg.train;
  s.student.steps = cfg.ablation_student_steps;
  s.seeds = cfg.ablation_seeds;
  s.probe = cfg.probe;
  s.vocab = cfg.corpus.vocab_size;
  s.tail_window = cfg.tail_window;
  const AblationResult res = ablation_run(train, bank, conds, s, [&err](const std::string& m) { err << m << "\n"; });

  const fs::path dir = p.out;
  std::vector<TaggedProbeResults> probes;
  std::vector<VarianceRow> variance;
  auto sampled = open_output(dir / "sampled_std.csv");
  sampled << "seed,config_tag,sampled_std\n";
  for (const auto& sr : res.seeds) {
    const std::string prefix = "seed" + std::to_string(sr.seed);
    save_checkpoint(sr.teacher, dir / prefix / "teacher.ckpt");
    sr.teacher_log.write_csv(dir / prefix / "teacher_log.csv");
    probes.push_back({prefix + "/teacher", sr.teacher_probe});
    for (const auto& c : sr.configs) {
      const std::string tag = c.flags.tag();
      save_checkpoint(c.state, dir / prefix / (tag + ".ckpt"));
      c.log.write_csv(dir / prefix / (tag + "_log.csv"));
      probes.push_back({prefix + "/" + tag, c.probe});
      for (VarianceRow v : c.variance) {
        v.model_tag = prefix + "/" + tag;
        variance.push_back(std::move(v));
      }
      sampled << sr.seed << ',' << tag << ',' << format_double(c.sampled_std) << '\n';
    }
  }
  write_probe_csv(dir / "probe.csv", probes);
  write_variance_csv(dir / "variance.csv", variance);
  write_variance_wide_csv(dir / "variance_wide.csv", variance);
  write_ablation_csv(dir / "ablation.csv", res.rows);
  const std::string table = format_ablation_table(res.rows);
  open_output(dir / "ablation.txt") << table;
  save_resolved(cfg, dir);
  out << table;
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::ostream& out) {
  GradCheckSuiteConfig gc;
  gc.seed = seed;
  constexpr double kLimit = 1e-4;
  bool ok = true;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-20s %14s %10s  %s\n", "component", "max_rel_error", "checked", "status");
  out << buf;
  for (const auto& e : run_gradcheck_suite(gc)) {
    const bool pass = e.report.max_rel_error <= kLimit;
    ok = ok && pass;
    std::snprintf(buf, sizeof buf, "%-20s %14.3e %10zu  %s\n", e.component.c_str(), e.report.max_rel_error,
                  e.report.n_checked, pass ? "ok" : "FAIL");
    out << buf;
  }
  out << (ok ? "all gradients within 1e-4\n" : "gradient check FAILED\n");
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"hvic: desk-scale masked-prediction + VIC regularization lab", "hvic"};
  app.require_subcommand(1);
  app.fallthrough(false);

  CommonOptions common;
  Paths paths;
  bool noisy = false, use_inv = false, use_var = false, use_cov = false;
  std::uint64_t gradcheck_seed = 7;
  std::function<int(const LabConfig&)> action;

  auto with_common = [&](CLI::App* sub) {
    common.add_to(sub);
    common.add_key_option(sub, "--seed", "seed", "Training seed");
    return sub;
  };
  auto corpus_opt = [&](CLI::App* sub) { sub->add_option("--corpus", paths.corpus, "Corpus directory (train split)"); };
  auto eval_opt = [&](CLI::App* sub) { sub->add_option("--eval-corpus", paths.eval_corpus, "Evaluation corpus directory"); };
  auto codebook_opt = [&](CLI::App* sub) { sub->add_option("--codebook", paths.codebook, "Codebook checkpoint"); };

  auto* synth = with_common(app.add_subcommand("synth", "Generate the synthetic train/eval corpora"));
  synth->add_option("--out", paths.out, "Output directory");
  synth->callback([&] { action = [&](const LabConfig& c) { return cmd_synth(c, paths, out); }; });

  auto* features = with_common(app.add_subcommand("features", "Dump log-mel feature files"));
  corpus_opt(features);
  codebook_opt(features);
  features->add_option("--out", paths.out, "Output directory");
  features->callback([&] { action = [&](const LabConfig& c) { return cmd_features(c, paths, out); }; });

  auto* kmeans = with_common(app.add_subcommand("kmeans", "Fit the k-means codebook"));
  corpus_opt(kmeans);
  kmeans->add_option("--out", paths.out, "Codebook checkpoint to write");
  kmeans->callback([&] { action = [&](const LabConfig& c) { return cmd_kmeans(c, paths, out); }; });

  auto* pretrain = with_common(app.add_subcommand("pretrain", "Masked-prediction pre-training (L_m only)"));
  corpus_opt(pretrain);
  eval_opt(pretrain);
  codebook_opt(pretrain);
  pretrain->add_option("--out", paths.out, "Run directory");
  pretrain->add_flag("--noisy", noisy, "Train on noisy input, starting from --init");
  pretrain->add_option("--init", paths.init, "Initial encoder checkpoint (with --noisy)");
  common.add_key_option(pretrain, "--steps", "steps", "Training steps");
  pretrain->callback([&] { action = [&](const LabConfig& c) { return cmd_pretrain(c, paths, noisy, out, err); }; });

  auto* vic = with_common(app.add_subcommand("vic-pretrain", "Noisy student training with VIC regularization"));
  corpus_opt(vic);
  eval_opt(vic);
  codebook_opt(vic);
  vic->add_option("--teacher", paths.teacher, "Frozen clean teacher checkpoint");
  vic->add_option("--out", paths.out, "Run directory");
  vic->add_flag("--inv", use_inv, "Enable the invariance term");
  vic->add_flag("--var", use_var, "Enable the variance term");
  vic->add_flag("--cov", use_cov, "Enable the covariance term");
  common.add_key_option(vic, "--steps", "steps", "Training steps");
  common.add_key_option(vic, "--lambda", "lambda", "Invariance weight");
  common.add_key_option(vic, "--mu", "mu", "Variance weight");
  common.add_key_option(vic, "--nu", "nu", "Covariance weight");
  common.add_key_option(vic, "--alpha", "alpha", "Weight of L_vic in L_tot");
  common.add_key_option(vic, "--gamma", "gamma", "Variance hinge target");
  common.add_key_option(vic, "--epsilon", "epsilon", "Variance stabilizer");
  common.add_key_option(vic, "--n-sample", "n_sample", "Frames sampled per step for L_vic");
  vic->callback([&] { action = [&](const LabConfig& c) { return cmd_vic_pretrain(c, paths, out, err); }; });

  auto* probe = with_common(app.add_subcommand("probe", "Linear probe accuracy under clean and noisy conditions"));
  corpus_opt(probe);
  eval_opt(probe);
  codebook_opt(probe);
  probe->add_option("--model", paths.model, "Encoder checkpoint");
  probe->add_option("--tag", paths.tag, "Model tag written to the report");
  probe->add_option("--out", paths.out, "Probe CSV to write");
  probe->callback([&] { action = [&](const LabConfig& c) { return cmd_probe(c, paths, out); }; });

  auto* variance = with_common(app.add_subcommand("analyze-variance", "Channel variance of representations versus SNR"));
  eval_opt(variance);
  codebook_opt(variance);
  variance->add_option("--model", paths.model, "Encoder checkpoint");
  variance->add_option("--tag", paths.tag, "Model tag written to the report");
  variance->add_option("--out", paths.out, "Variance CSV to write");
  variance->add_option("--wide", paths.wide, "Optional per-channel CSV");
  variance->callback([&] { action = [&](const LabConfig& c) { return cmd_analyze_variance(c, paths, out); }; });

  auto* ablate = with_common(app.add_subcommand("ablate", "Cumulative VIC ablation over seeds"));
  corpus_opt(ablate);
  eval_opt(ablate);
  codebook_opt(ablate);
  ablate->add_option("--out", paths.out, "Output directory");
  ablate->callback([&] { action = [&](const LabConfig& c) { return cmd_ablate(c, paths, out, err); }; });

  auto* gradcheck = app.add_subcommand("gradcheck", "Central-difference check of every analytic gradient");
  gradcheck->add_option("--seed", gradcheck_seed, "Seed of the random check instances");
  gradcheck->callback([&] { action = [&](const LabConfig&) { return cmd_gradcheck(gradcheck_seed, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (gradcheck->parsed()) return action(LabConfig{});
    LabConfig cfg = common.resolve();
    if (use_inv) cfg.train.flags.use_inv = true;
    if (use_var) cfg.train.flags.use_var = true;
    if (use_cov) cfg.train.flags.use_cov = true;
    cfg.validate();
    echo_config(cfg, err);
    return action(cfg);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace hvic
