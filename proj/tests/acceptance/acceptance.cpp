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


// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits 1 if any criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hvic/cli.hpp"
#include "hvic/config.hpp"
#include "hvic/gradcheck.hpp"
#include "hvic/losses.hpp"
#include "hvic/rng.hpp"
#include "hvic/signal.hpp"

namespace fs = std::filesystem;
using namespace hvic;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs one hvic subcommand in-process; stderr goes to the shared log.
class Cli {
 public:
  explicit Cli(const fs::path& log) : log_(log, std::ios::app) {}

  int operator()(std::vector<std::string> args) {
    std::string line = "hvic";
    for (const auto& a : args) line += " " + a;
    std::cout << "  $ " << line << std::endl;
    log_ << "$ " << line << "\n";
    args.insert(args.begin(), "hvic");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, log_);
    log_ << out.str() << std::flush;
    last_out_ = out.str();
    return code;
  }
  const std::string& last_out() const { return last_out_; }

 private:
  std::ofstream log_;
  std::string last_out_;
};

using Table = std::vector<std::map<std::string, std::string>>;

Table read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    return cells;
  };
  std::string line;
  std::getline(in, line);
  const auto header = split(line);
  Table rows;
  while (std::getline(in, line)) {
    const auto cells = split(line);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Relative paths of every regular file under dir, sorted.
std::vector<fs::path> tree(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), dir));
  std::sort(out.begin(), out.end());
  return out;
}

// Criteria 1-4: library properties ------------------------------------------

Outcome gradients(Cli& cli) {
  const auto t0 = std::chrono::steady_clock::now();
  const int code = cli({"gradcheck"});
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& e : run_gradcheck_suite())
    if (e.report.max_rel_error >= worst) {
      worst = e.report.max_rel_error;
      worst_name = e.component;
    }
  const bool ok = code == 0 && worst <= 1e-4 && secs < 60.0;
  return {ok, fmt("worst rel error %.2e (%s) <= 1e-4, gradcheck exit %d in %.1f s < 60 s", worst, worst_name.c_str(),
                  code, secs)};
}

Outcome closed_forms() {
  const double s = invariance(Matrix{{0, 0}, {1, 1}}, Matrix{{3, 4}, {1, 1}}).value;
  const double v = variance(Matrix{{2.0}, {2.0}, {2.0}}, 1.0, 1e-4).value;
  const double c = covariance(Matrix{{1, 2}, {-1, -2}}).value;
  const double l = combine_vic(2.0, 0.5, 0.25, VicWeights{});
  const double err = std::max({std::abs(s - 12.5), std::abs(v - 0.99), std::abs(c - 16.0), std::abs(l - 10.75)});
  return {err <= 1e-12, fmt("s=%.15g v=%.15g c=%.15g l_vic=%.15g, max error %.1e <= 1e-12", s, v, c, l, err)};
}

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& x : m.values()) x = scale * rng.normal();
  return m;
}

template <typename Term>
Matrix descend(Matrix zp, Term term, double lr, int steps) {
  for (int i = 0; i < steps; ++i) {
    const auto g = term(zp).grad;
    for (std::size_t k = 0; k < zp.size(); ++k) zp.values()[k] -= lr * g.values()[k];
  }
  return zp;
}

Outcome fixed_points() {
  const Matrix z = random_matrix(64, 8, 1);
  const Matrix inv = descend(random_matrix(64, 8, 2), [&](const Matrix& m) { return invariance(z, m); }, 5.0, 5000);
  const double s = invariance(z, inv).value;

  const Matrix var =
      descend(random_matrix(64, 8, 3, 0.05), [](const Matrix& m) { return variance(m, 1.0, 1e-4); }, 20.0, 5000);
  double min_std = 1e300;
  const Matrix vc = covariance_matrix(var);
  for (std::size_t j = 0; j < 8; ++j) min_std = std::min(min_std, std::sqrt(vc(j, j)));

  Matrix start = random_matrix(64, 8, 4);
  for (std::size_t i = 0; i < 64; ++i) start(i, 1) += start(i, 0);
  const Matrix cov = covariance_matrix(descend(start, [](const Matrix& m) { return covariance(m); }, 0.5, 5000));
  double off = 0.0;
  for (std::size_t a = 0; a < 8; ++a)
    for (std::size_t b = 0; b < 8; ++b)
      if (a != b) off = std::max(off, std::abs(cov(a, b)));

  const bool ok = s < 1e-8 && min_std >= 1.0 - 1e-3 && off < 1e-4;
  return {ok, fmt("s=%.2e < 1e-8, min column std %.6f >= 0.999, max |offdiag cov| %.2e < 1e-4", s, min_std, off)};
}

Outcome snr_exactness() {
  Rng rng(derive_seed(2024, 1));
  const auto kinds = all_noise_kinds();
  double worst = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    const Utterance u = synth_utterance(derive_seed(2024, 2, i), 4, 8);
    const Waveform noise = synth_noise(kinds[i % kinds.size()], derive_seed(2024, 3, i), u.wave.size() + 321);
    const double target = 15.0 * rng.uniform();
    const NoisySample mix = mix_at_snr(u.wave, noise, target, kinds[i % kinds.size()]);
    worst = std::max(worst, std::abs(measure_snr(u.wave, mix.noise_component) - target));
  }
  return {worst <= 1e-6, fmt("100 triples, worst |measured - target| = %.2e dB <= 1e-6", worst)};
}

// Criteria 5-9: pipelines ----------------------------------------------------

struct Pipeline {
  fs::path dir;
  double seconds = 0.0;
  bool ok = false;
};

// synth -> kmeans -> pretrain -> vic-pretrain -> probe, default settings.
Pipeline run_pipeline(Cli& cli, const fs::path& dir) {
  Pipeline p{dir};
  const auto t0 = std::chrono::steady_clock::now();
  const std::string d = dir.string(), corpus = d + "/corpus", cb = d + "/codebook.ckpt";
  p.ok = cli({"synth", "--out", corpus}) == 0 &&
         cli({"kmeans", "--corpus", corpus + "/train", "--out", cb}) == 0 &&
         cli({"pretrain", "--corpus", corpus + "/train", "--codebook", cb, "--out", d + "/teacher"}) == 0 &&
         cli({"vic-pretrain", "--inv", "--var", "--cov", "--corpus", corpus + "/train", "--codebook", cb, "--teacher",
              d + "/teacher/model.ckpt", "--out", d + "/student"}) == 0 &&
         cli({"probe", "--corpus", corpus + "/train", "--eval-corpus", corpus + "/eval", "--codebook", cb, "--model",
              d + "/student/model.ckpt", "--tag", "vic", "--out", d + "/probe_vic.csv"}) == 0;
  p.seconds = seconds_since(t0);
  return p;
}

Outcome reduction(Cli& cli, const Pipeline& a, const fs::path& ablate_dir, const LabConfig& ablate_cfg,
                  const std::string& ablate_config_path, const fs::path& work) {
  const std::string d = a.dir.string(), corpus = d + "/corpus/train", cb = d + "/codebook.ckpt";
  const std::string teacher = d + "/teacher/model.ckpt", steps = "300";
  const fs::path r = work / "reduction";
  if (cli({"vic-pretrain", "--steps", steps, "--corpus", corpus, "--codebook", cb, "--teacher", teacher, "--out",
           (r / "vic_off").string()}) != 0 ||
      cli({"pretrain", "--noisy", "--steps", steps, "--init", teacher, "--corpus", corpus, "--codebook", cb, "--out",
           (r / "lm_only").string()}) != 0)
    return {false, "a reduction run failed, see log"};
  const Table x = read_csv(r / "vic_off" / "train_log.csv"), y = read_csv(r / "lm_only" / "train_log.csv");
  bool stepwise = x.size() == y.size() && !x.empty();
  for (std::size_t i = 0; stepwise && i < x.size(); ++i)
    stepwise = x[i].at("l_m") == y[i].at("l_m") && x[i].at("l_tot") == y[i].at("l_tot");
  const bool same_ckpt = file_bytes(r / "vic_off" / "model.ckpt") == file_bytes(r / "lm_only" / "model.ckpt");

  // The ablation's first row must match an independent L_m-only run from the same teacher.
  const std::string seed = std::to_string(ablate_cfg.ablation_seeds.front());
  const fs::path seed_dir = ablate_dir / ("seed" + seed);
  bool row1 = cli({"pretrain", "--noisy", "--config", ablate_config_path, "--seed", seed, "--steps",
                   std::to_string(ablate_cfg.ablation_student_steps), "--init", (seed_dir / "teacher.ckpt").string(),
                   "--corpus", corpus, "--codebook", cb, "--out", (r / "row1").string()}) == 0;
  row1 = row1 && file_bytes(r / "row1" / "model.ckpt") == file_bytes(seed_dir / "lm.ckpt");

  const Table abl = read_csv(ablate_dir / "ablation.csv");
  std::vector<std::string> tags;
  for (const auto& row : abl) tags.push_back(row.at("config_tag"));
  const bool ladder = tags == std::vector<std::string>{"lm", "lm+inv", "lm+inv+var", "lm+inv+var+cov"};
  return {stepwise && same_ckpt && row1 && ladder,
          fmt("%zu steps step-wise identical: %s, checkpoints identical: %s; ablate rows in order: %s; "
              "row 1 equals independent run: %s",
              x.size(), stepwise ? "yes" : "no", same_ckpt ? "yes" : "no", ladder ? "yes" : "no", row1 ? "yes" : "no")};
}

Outcome anti_collapse(const fs::path& ablate_dir, const std::vector<std::uint64_t>& seeds) {
  std::map<std::string, double> sstd;
  for (const auto& row : read_csv(ablate_dir / "sampled_std.csv"))
    sstd[row.at("seed") + "/" + row.at("config_tag")] = std::stod(row.at("sampled_std"));
  bool ok = true;
  std::string detail;
  for (auto seed : seeds) {
    const std::string s = std::to_string(seed);
    const double with_var = sstd.at(s + "/lm+inv+var"), inv_only = sstd.at(s + "/lm+inv");
    const bool pass = with_var > inv_only;
    ok = ok && pass;
    detail += fmt("seed %s: %.5f %s %.5f; ", s.c_str(), with_var, pass ? ">" : "<=", inv_only);
  }
  return {ok, "sampled Z' mean channel std, +var vs inv-only: " + detail};
}

Outcome variance_trend(const fs::path& ablate_dir, const std::vector<std::uint64_t>& seeds) {
  std::map<std::string, double> var;
  for (const auto& row : read_csv(ablate_dir / "variance.csv"))
    var[row.at("model_tag") + "|" + row.at("noise_kind") + "|" + row.at("snr_db")] =
        std::stod(row.at("mean_channel_variance"));
  bool ok = true;
  std::string detail;
  for (auto seed : seeds)
    for (const char* kind : {"babble", "music"}) {
      const std::string tag = "seed" + std::to_string(seed) + "/lm+inv+var+cov|" + kind;
      const double hi = var.at(tag + "|15"), lo = var.at(tag + "|0");
      ok = ok && hi > lo;
      detail += fmt("seed %llu %s %.4f %s %.4f; ", static_cast<unsigned long long>(seed), kind, hi,
                    hi > lo ? ">" : "<=", lo);
    }
  return {ok, "full VIC student variance at 15 dB vs 0 dB: " + detail + "report " +
                  (ablate_dir / "variance.csv").string()};
}

Outcome probe_ordering(const fs::path& ablate_dir, const std::vector<std::uint64_t>& seeds, const Pipeline& a) {
  // Mean over seeds of the per-model clean and N-accuracy.
  std::map<std::string, std::pair<double, double>> sums;  // config -> (noisy, clean)
  std::map<std::string, std::map<std::string, std::pair<double, int>>> per;  // model -> {noisy, clean} -> (sum, n)
  for (const auto& row : read_csv(ablate_dir / "probe.csv")) {
    auto& cell = per[row.at("model_tag")][row.at("snr_db") == "inf" ? "clean" : "noisy"];
    cell.first += std::stod(row.at("frame_accuracy"));
    cell.second += 1;
  }
  auto mean_over_seeds = [&](const std::string& config, const char* which) {
    double acc = 0.0;
    for (auto seed : seeds) {
      const auto& cell = per.at("seed" + std::to_string(seed) + "/" + config).at(which);
      acc += cell.first / cell.second;
    }
    return acc / static_cast<double>(seeds.size());
  };
  const double vic_n = mean_over_seeds("lm+inv+var+cov", "noisy"), base_n = mean_over_seeds("lm", "noisy");
  const double vic_c = mean_over_seeds("lm+inv+var+cov", "clean"), teacher_c = mean_over_seeds("teacher", "clean");
  const bool fast = a.ok && a.seconds < 1800.0;
  const bool ok = vic_n >= base_n && vic_c >= 0.98 * teacher_c && fast;
  return {ok, fmt("N-acc VIC %.4f %s baseline %.4f; clean VIC %.4f %s 0.98 x teacher %.4f; pipeline %.0f s %s 1800 s",
                  vic_n, vic_n >= base_n ? ">=" : "<", base_n, vic_c, vic_c >= 0.98 * teacher_c ? ">=" : "<",
                  0.98 * teacher_c, a.seconds, fast ? "<" : ">=")};
}

Outcome determinism(const Pipeline& a, const Pipeline& b) {
  if (!a.ok || !b.ok) return {false, "a pipeline run failed, see log"};
  const auto ta = tree(a.dir), tb = tree(b.dir);
  if (ta != tb) return {false, "the two runs produced different file sets"};
  std::size_t compared = 0;
  for (const auto& rel : ta) {
    const auto ext = rel.extension().string();
    if (ext != ".ckpt" && ext != ".csv" && ext != ".wav" && ext != ".tsv" && ext != ".txt") continue;
    ++compared;
    if (file_bytes(a.dir / rel) != file_bytes(b.dir / rel)) return {false, "differs: " + rel.string()};
  }
  return {true, fmt("%zu files (checkpoints, CSVs, WAVs, manifests) byte-identical", compared)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hvic acceptance run"};
  std::string workdir = (fs::temp_directory_path() / "hvic_acceptance").string();
  std::string ablate_config = HVIC_ACCEPTANCE_CONFIG;
  bool keep = false;
  app.add_option("--workdir", workdir, "Scratch directory (wiped at start)");
  app.add_option("--ablate-config", ablate_config, "Config for the multi-seed ablation");
  app.add_flag("--keep", keep, "Keep the scratch directory");
  CLI11_PARSE(app, argc, argv);

  const fs::path work = workdir;
  fs::remove_all(work);
  fs::create_directories(work);
  Cli cli(work / "hvic.log");
  std::vector<std::pair<int, Outcome>> results;
  auto record = [&](int id, const char* name, const std::function<Outcome()>& f) {
    std::cout << "criterion " << id << " (" << name << ") running" << std::endl;
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << id << " (" << name << ") " << (o.pass ? "PASS" : "FAIL") << ": " << o.detail
              << std::endl;
    results.emplace_back(id, o);
  };

  record(1, "gradient correctness", [&] { return gradients(cli); });
  record(2, "closed-form values", [] { return closed_forms(); });
  record(3, "fixed points", [] { return fixed_points(); });
  record(4, "SNR exactness", [] { return snr_exactness(); });

  const Pipeline a = run_pipeline(cli, work / "run_a");
  const Pipeline b = run_pipeline(cli, work / "run_b");
  std::cout << fmt("pipeline A %.0f s, B %.0f s", a.seconds, b.seconds) << std::endl;

  const LabConfig abl_cfg = load_config(ablate_config);
  const fs::path abl_dir = work / "ablate";
  const std::string corpus = (work / "run_a" / "corpus").string(), cb = (work / "run_a" / "codebook.ckpt").string();
  const auto t0 = std::chrono::steady_clock::now();
  const bool abl_ok = cli({"ablate", "--config", ablate_config, "--corpus", corpus + "/train", "--eval-corpus",
                           corpus + "/eval", "--codebook", cb, "--out", abl_dir.string()}) == 0;
  std::cout << fmt("ablation (%zu seeds) %.0f s", abl_cfg.ablation_seeds.size(), seconds_since(t0)) << "\n"
            << cli.last_out() << std::flush;
  auto need_ablation = [&](auto f) {
    return [&, f]() -> Outcome { return abl_ok ? f() : Outcome{false, "ablate command failed, see log"}; };
  };

  record(5, "reduction and ablation integrity",
         need_ablation([&] { return reduction(cli, a, abl_dir, abl_cfg, ablate_config, work); }));
  record(6, "anti-collapse trend", need_ablation([&] { return anti_collapse(abl_dir, abl_cfg.ablation_seeds); }));
  record(7, "variance vs SNR trend", need_ablation([&] { return variance_trend(abl_dir, abl_cfg.ablation_seeds); }));
  record(8, "probe ordering and runtime",
         need_ablation([&] { return probe_ordering(abl_dir, abl_cfg.ablation_seeds, a); }));
  record(9, "determinism", [&] { return determinism(a, b); });

  std::cout << "\nsummary\n";
  bool all = true;
  for (const auto& [id, o] : results) {
    std::cout << "  criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "\n";
    all = all && o.pass;
  }
  if (!keep) fs::remove_all(work);
  std::cout << (all ? "all criteria passed" : "some criteria FAILED") << std::endl;
  return all ? 0 : 1;
}
