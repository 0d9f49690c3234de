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


#include "hvic/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "hvic/csv.hpp"

namespace hvic {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) + ": expected " + expected);
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  if (v == "inf") return kCleanSnr;
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty() || std::isnan(out)) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(trim(v.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs, const std::function<std::string(const T&)>& fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + fmt(xs[i]);
  return out;
}

struct Key {
  const char* name;
  std::function<void(LabConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const LabConfig&)> get;
};

template <typename Field>
Key size_key(const char* name, Field field) {
  return {name, [field](LabConfig& c, auto k, auto v) { field(c) = static_cast<std::size_t>(parse_u64(k, v)); },
          [field](const LabConfig& c) { return std::to_string(field(const_cast<LabConfig&>(c))); }};
}

template <typename Field>
Key u64_key(const char* name, Field field) {
  return {name, [field](LabConfig& c, auto k, auto v) { field(c) = parse_u64(k, v); },
          [field](const LabConfig& c) { return std::to_string(field(const_cast<LabConfig&>(c))); }};
}

template <typename Field>
Key double_key(const char* name, Field field) {
  return {name, [field](LabConfig& c, auto k, auto v) { field(c) = parse_double(k, v); },
          [field](const LabConfig& c) { return format_double(field(const_cast<LabConfig&>(c))); }};
}

template <typename Field>
Key bool_key(const char* name, Field field) {
  return {name, [field](LabConfig& c, auto k, auto v) { field(c) = parse_bool(k, v); },
          [field](const LabConfig& c) { return std::string(field(const_cast<LabConfig&>(c)) ? "true" : "false"); }};
}

#define HVIC_FIELD(expr) [](LabConfig& c) -> auto& { return expr; }

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = {
      u64_key("corpus_seed", HVIC_FIELD(c.corpus.seed)),
      size_key("n_train", HVIC_FIELD(c.corpus.n_utterances)),
      size_key("n_eval", HVIC_FIELD(c.n_eval)),
      size_key("n_segments", HVIC_FIELD(c.corpus.n_segments)),
      size_key("vocab_size", HVIC_FIELD(c.corpus.vocab_size)),
      {"sample_rate",
       [](LabConfig& c, auto k, auto v) {
         const auto sr = parse_u64(k, v);
         if (sr == 0 || sr > 192000) bad_value(k, v, "a sample rate in (0, 192000]");
         c.corpus.sample_rate = static_cast<int>(sr);
       },
       [](const LabConfig& c) { return std::to_string(c.corpus.sample_rate); }},
      size_key("frame_len", HVIC_FIELD(c.features.frame_len)),
      size_key("hop", HVIC_FIELD(c.features.hop)),
      size_key("n_filters", HVIC_FIELD(c.features.n_filters)),
      size_key("k", HVIC_FIELD(c.encoder.k_codewords)),
      size_key("kmeans_iters", HVIC_FIELD(c.kmeans_iters)),
      u64_key("kmeans_seed", HVIC_FIELD(c.kmeans_seed)),
      size_key("model_dim", HVIC_FIELD(c.encoder.model_dim)),
      size_key("n_blocks", HVIC_FIELD(c.encoder.n_blocks)),
      size_key("mlp_hidden", HVIC_FIELD(c.encoder.mlp_hidden)),
      double_key("mask_prob", HVIC_FIELD(c.encoder.mask_start_prob)),
      size_key("mask_span", HVIC_FIELD(c.encoder.mask_span)),
      size_key("steps", HVIC_FIELD(c.train.steps)),
      size_key("batch_utterances", HVIC_FIELD(c.train.batch_utterances)),
      double_key("learning_rate", HVIC_FIELD(c.train.adam.learning_rate)),
      double_key("adam_beta1", HVIC_FIELD(c.train.adam.beta1)),
      double_key("adam_beta2", HVIC_FIELD(c.train.adam.beta2)),
      double_key("adam_eps", HVIC_FIELD(c.train.adam.eps)),
      double_key("snr_low_db", HVIC_FIELD(c.train.snr_low_db)),
      double_key("snr_high_db", HVIC_FIELD(c.train.snr_high_db)),
      {"noise_kinds",
       [](LabConfig& c, auto k, auto v) {
         std::vector<NoiseKind> kinds;
         for (auto item : split_list(v)) {
           try {
             kinds.push_back(parse_noise_kind(item));
           } catch (const std::invalid_argument&) {
             bad_value(k, v, "a comma list of babble, music, natural");
           }
         }
         if (kinds.empty()) bad_value(k, v, "at least one noise kind");
         c.train.noise_kinds = std::move(kinds);
       },
       [](const LabConfig& c) {
         return join<NoiseKind>(c.train.noise_kinds, [](const NoiseKind& n) { return std::string(to_string(n)); });
       }},
      u64_key("seed", HVIC_FIELD(c.train.seed)),
      u64_key("noise_seed", HVIC_FIELD(c.noise_seed)),
      size_key("eval_interval", HVIC_FIELD(c.train.eval_interval)),
      bool_key("vic_exclude_masked", HVIC_FIELD(c.train.vic_exclude_masked)),
      double_key("lambda", HVIC_FIELD(c.train.vic.lambda)),
      double_key("mu", HVIC_FIELD(c.train.vic.mu)),
      double_key("nu", HVIC_FIELD(c.train.vic.nu)),
      double_key("gamma", HVIC_FIELD(c.train.vic.gamma)),
      double_key("epsilon", HVIC_FIELD(c.train.vic.epsilon)),
      double_key("alpha", HVIC_FIELD(c.train.vic.alpha)),
      size_key("n_sample", HVIC_FIELD(c.train.vic.n_sample)),
      bool_key("use_inv", HVIC_FIELD(c.train.flags.use_inv)),
      bool_key("use_var", HVIC_FIELD(c.train.flags.use_var)),
      bool_key("use_cov", HVIC_FIELD(c.train.flags.use_cov)),
      size_key("probe_epochs", HVIC_FIELD(c.probe.epochs)),
      double_key("probe_lr", HVIC_FIELD(c.probe.learning_rate)),
      {"eval_snrs",
       [](LabConfig& c, auto k, auto v) {
         std::vector<double> snrs;
         for (auto item : split_list(v)) snrs.push_back(parse_double(k, item));
         if (snrs.empty()) bad_value(k, v, "a comma list of SNRs in dB or inf");
         c.eval_snrs = std::move(snrs);
       },
       [](const LabConfig& c) { return join<double>(c.eval_snrs, [](const double& x) { return format_double(x); }); }},
      u64_key("eval_seed", HVIC_FIELD(c.eval_seed)),
      {"ablation_seeds",
       [](LabConfig& c, auto k, auto v) {
         std::vector<std::uint64_t> seeds;
         for (auto item : split_list(v)) seeds.push_back(parse_u64(k, item));
         if (seeds.empty()) bad_value(k, v, "a comma list of seeds");
         c.ablation_seeds = std::move(seeds);
       },
       [](const LabConfig& c) {
         return join<std::uint64_t>(c.ablation_seeds, [](const std::uint64_t& s) { return std::to_string(s); });
       }},
      size_key("ablation_teacher_steps", HVIC_FIELD(c.ablation_teacher_steps)),
      size_key("ablation_student_steps", HVIC_FIELD(c.ablation_student_steps)),
      size_key("tail_window", HVIC_FIELD(c.tail_window)),
  };
  return keys;
}

#undef HVIC_FIELD

}  // namespace

void LabConfig::set(std::string_view key, std::string_view value) {
  for (const auto& k : registry())
    if (key == k.name) {
      k.set(*this, key, trim(value));
      encoder.feature_dim = features.n_filters;
      return;
    }
  throw ConfigError("unknown key '" + std::string(key) + "'");
}

std::string LabConfig::dump() const {
  std::string out;
  for (const auto& k : registry()) out += std::string(k.name) + " = " + k.get(*this) + "\n";
  return out;
}

std::vector<std::string> LabConfig::keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.emplace_back(k.name);
  return out;
}

void LabConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  check(corpus.n_utterances >= 1, "n_train must be >= 1");
  check(n_eval >= 1, "n_eval must be >= 1");
  check(corpus.n_segments >= 1, "n_segments must be >= 1");
  check(corpus.vocab_size >= 2, "vocab_size must be >= 2");
  check(features.frame_len >= 2 && features.hop >= 1, "frame_len must be >= 2 and hop >= 1");
  check(features.n_filters >= 1, "n_filters must be >= 1");
  check(kmeans_iters >= 1, "kmeans_iters must be >= 1");
  check(encoder.feature_dim == features.n_filters, "encoder feature_dim must equal n_filters");
  check(!ablation_seeds.empty(), "ablation_seeds must not be empty");
  check(ablation_teacher_steps >= 1 && ablation_student_steps >= 1, "ablation step counts must be >= 1");
  check(probe.epochs >= 1 && probe.learning_rate > 0, "probe_epochs must be >= 1 and probe_lr positive");
  check(tail_window >= 1, "tail_window must be >= 1");
  try {
    encoder.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void parse_config(std::string_view text, LabConfig& cfg, const std::string& source) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

LabConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  LabConfig cfg;
  parse_config(ss.str(), cfg, path.string());
  return cfg;
}

}  // namespace hvic
