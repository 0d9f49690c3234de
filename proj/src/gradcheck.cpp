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

#include "hvic/gradcheck.hpp"

#include <algorithm>

#include "hvic/rng.hpp"

namespace hvic {

namespace {

Matrix random_normal(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& x : m.values()) x = scale * rng.normal();
  return m;
}

GradCheckEntry entry(std::string name, GradCheckReport rep, double tol) {
  const bool ok = rep.max_rel_error <= tol;
  return {std::move(name), rep, ok};
}

}  // namespace

TotalLossProblem TotalLossProblem::make(const GradCheckSuiteConfig& cfg) {
  TotalLossProblem p;
  p.encoder.feature_dim = cfg.feature_dim;
  p.encoder.model_dim = cfg.model_dim;
  p.encoder.n_blocks = cfg.n_blocks;
  p.encoder.mlp_hidden = cfg.mlp_hidden;
  p.encoder.k_codewords = cfg.k_codewords;
  p.encoder.mask_start_prob = 0.25;
  p.encoder.mask_span = 3;
  p.weights.n_sample = cfg.frames + cfg.frames / 3;

  Rng rng(derive_seed(cfg.seed, 1));
  const EncoderState teacher = init_encoder(p.encoder, derive_seed(cfg.seed, 2));
  const std::size_t lengths[2] = {cfg.frames, std::max<std::size_t>(2, cfg.frames * 3 / 4)};
  for (std::size_t u = 0; u < 2; ++u) {
    const std::size_t T = lengths[u];
    const Matrix clean = random_normal(T, cfg.feature_dim, rng);
    Matrix noisy = clean;
    for (double& x : noisy.values()) x += 0.3 * rng.normal();
    p.teacher_reps.push_back(forward(teacher, clean));
    p.features.push_back(std::move(noisy));
    std::vector<int> labels(T);
    for (int& l : labels) l = static_cast<int>(rng.uniform_int(cfg.k_codewords));
    p.labels.push_back(std::move(labels));
    MaskSpec m;
    for (std::uint64_t s = 0; m.empty(); ++s) m = draw_mask(T, p.encoder, derive_seed(cfg.seed, 3, u, s));
    p.masks.push_back(std::move(m));
  }
  p.sample_seed = derive_seed(cfg.seed, 4);
  return p;
}

LossBreakdown TotalLossProblem::evaluate(const EncoderState& state, std::vector<double>* grad) const {
  const std::size_t n = features.size();
  std::vector<ForwardCache> caches(grad ? n : 0);
  std::vector<Matrix> reps, logits;
  for (std::size_t u = 0; u < n; ++u) {
    reps.push_back(forward(state, features[u], &masks[u], grad ? &caches[u] : nullptr));
    logits.push_back(predict_codewords(state, reps.back()));
  }
  const auto mp = masked_prediction_loss(logits, labels, masks);
  const auto pair = sample_frames(teacher_reps, reps, weights.n_sample, sample_seed);
  const auto vic = vic_loss(pair, weights);

  LossBreakdown out = vic.parts;
  out.l_m = mp.loss;
  out.l_tot = total_loss(out.l_m, out.l_vic, weights.alpha);
  if (grad) {
    grad->assign(state.num_params(), 0.0);
    std::vector<Matrix> grad_reps;
    for (const auto& r : reps) grad_reps.emplace_back(r.rows(), r.cols());
    Matrix scaled = vic.grad_zp;
    for (double& x : scaled.values()) x *= weights.alpha;
    scatter_grad(scaled, pair.sources, grad_reps);
    for (std::size_t u = 0; u < n; ++u) backward(state, caches[u], grad_reps[u], mp.grad_logits[u], *grad);
  }
  return out;
}

std::vector<double> TotalLossProblem::split_path_gradient(const EncoderState& state) const {
  const std::size_t n = features.size();
  std::vector<ForwardCache> caches(n);
  std::vector<Matrix> reps, logits;
  for (std::size_t u = 0; u < n; ++u) {
    reps.push_back(forward(state, features[u], &masks[u], &caches[u]));
    logits.push_back(predict_codewords(state, reps.back()));
  }
  const auto mp = masked_prediction_loss(logits, labels, masks);
  const auto pair = sample_frames(teacher_reps, reps, weights.n_sample, sample_seed);
  const auto vic = vic_loss(pair, weights);
  std::vector<Matrix> grad_reps;
  for (const auto& r : reps) grad_reps.emplace_back(r.rows(), r.cols());
  Matrix scaled = vic.grad_zp;
  for (double& x : scaled.values()) x *= weights.alpha;
  scatter_grad(scaled, pair.sources, grad_reps);

  std::vector<double> via_reps(state.num_params(), 0.0), via_logits(state.num_params(), 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    backward(state, caches[u], grad_reps[u], Matrix{}, via_reps);
    backward(state, caches[u], Matrix{}, mp.grad_logits[u], via_logits);
  }
  for (std::size_t i = 0; i < via_reps.size(); ++i) via_reps[i] += via_logits[i];
  return via_reps;
}

std::vector<GradCheckEntry> run_gradcheck_suite(const GradCheckSuiteConfig& cfg) {
  std::vector<GradCheckEntry> out;
  Rng rng(derive_seed(cfg.seed, 10));
  const double h = cfg.step, tol = cfg.tolerance;

  {
    std::vector<double> logits(cfg.k_codewords);
    for (double& x : logits) x = rng.normal();
    const auto r = softmax_xent(logits, 1);
    auto f = [&](std::span<const double> p) { return softmax_xent(p, 1).loss; };
    out.push_back(entry("softmax_xent", grad_check(f, r.grad_logits, logits, h), tol));
  }
  {
    const std::size_t T = cfg.frames, k = cfg.k_codewords;
    const Matrix logits = random_normal(T, k, rng);
    std::vector<int> labels(T);
    for (int& l : labels) l = static_cast<int>(rng.uniform_int(k));
    MaskSpec mask{T, {1, 2, 3, 7, 8}};
    const auto r = masked_prediction_loss(logits, labels, mask);
    auto f = [&](std::span<const double> p) {
      return masked_prediction_loss(ConstMatView(p.data(), T, k), labels, mask).value;
    };
    out.push_back(entry("masked_prediction", grad_check(f, r.grad.values(), logits.values(), h), tol));
  }
  {
    // Central differences are exact on a quadratic, so a wide step only trims roundoff.
    const Matrix z = random_normal(16, cfg.model_dim, rng);
    const Matrix zp = random_normal(16, cfg.model_dim, rng);
    const auto r = invariance(z, zp);
    auto f = [&](std::span<const double> p) { return invariance(z, ConstMatView(p.data(), zp.rows(), zp.cols())).value; };
    out.push_back(entry("invariance", grad_check(f, r.grad.values(), zp.values(), 1e-2), std::min(tol, 1e-8)));
  }
  {
    // Column scales straddle gamma so both hinge branches are exercised.
    Matrix zp = random_normal(16, 6, rng);
    const double scales[6] = {0.2, 0.5, 0.8, 1.6, 2.2, 3.0};
    for (std::size_t i = 0; i < zp.rows(); ++i)
      for (std::size_t j = 0; j < 6; ++j) zp(i, j) *= scales[j];
    const auto r = variance(zp, 1.0, 1e-4);
    auto f = [&](std::span<const double> p) { return variance(ConstMatView(p.data(), 16, 6), 1.0, 1e-4).value; };
    out.push_back(entry("variance", grad_check(f, r.grad.values(), zp.values(), h), std::min(tol, 1e-6)));
  }
  {
    const Matrix zp = random_normal(8, 5, rng);
    const auto r = covariance(zp);
    auto f = [&](std::span<const double> p) { return covariance(ConstMatView(p.data(), 8, 5)).value; };
    out.push_back(entry("covariance", grad_check(f, r.grad.values(), zp.values(), h), std::min(tol, 1e-6)));
  }
  {
    SampledPair pair{random_normal(16, 6, rng), random_normal(16, 6, rng, 0.7), {}};
    VicWeights w;
    const auto r = vic_loss(pair, w);
    auto f = [&](std::span<const double> p) {
      SampledPair q{pair.z, to_matrix(ConstMatView(p.data(), 16, 6)), {}};
      return vic_loss(q, w).parts.l_vic;
    };
    out.push_back(entry("vic_loss", grad_check(f, r.grad_zp.values(), pair.zp.values(), h), tol));
  }
  {
    const TotalLossProblem prob = TotalLossProblem::make(cfg);
    const EncoderState state = init_encoder(prob.encoder, derive_seed(cfg.seed, 2));
    EncoderState student = state;
    // Move off the teacher point so the invariance gradient is not degenerate.
    Rng jitter(derive_seed(cfg.seed, 11));
    for (double& p : student.params()) p += 0.02 * jitter.normal();

    std::vector<double> grad;
    prob.evaluate(student, &grad);
    EncoderState probe = student;
    auto f = [&](std::span<const double> p) {
      std::copy(p.begin(), p.end(), probe.params().begin());
      return prob.evaluate(probe, nullptr).l_tot;
    };

    auto coords_where = [&](auto pred) {
      std::vector<std::size_t> idx;
      for (const auto& s : student.layout())
        if (pred(s.name))
          for (std::size_t i = 0; i < s.size(); ++i) idx.push_back(s.offset + i);
      return idx;
    };
    const std::vector<double> point(student.params().begin(), student.params().end());
    const auto head = coords_where([](const std::string& n) { return n.starts_with("head."); });
    const auto blocks = coords_where([](const std::string& n) { return n.starts_with("block"); });
    const auto input = coords_where([](const std::string& n) {
      return n.starts_with("input.") || n == "mask_embedding";
    });
    out.push_back(entry("encoder.head", grad_check(f, grad, point, h, head), tol));
    out.push_back(entry("encoder.blocks", grad_check(f, grad, point, h, blocks), tol));
    out.push_back(entry("encoder.input", grad_check(f, grad, point, h, input), tol));
  }
  return out;
}

}  // namespace hvic
