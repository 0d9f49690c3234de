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

#include "hvic/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hvic/rng.hpp"

namespace hvic {

namespace {

constexpr double kLayerNormEps = 1e-5;

void add_row_bias(MatView m, std::span<const double> bias) {
  for (std::size_t t = 0; t < m.rows; ++t) {
    double* r = m.data + t * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) r[j] += bias[j];
  }
}

std::span<const double> flat(ConstMatView v) { return {v.data, v.size()}; }
std::span<double> flat(MatView v) { return {v.data, v.size()}; }

void layer_norm(ConstMatView x, std::span<const double> gain, std::span<const double> bias, Matrix& y,
                LayerNormCache& cache) {
  const std::size_t n = x.rows, d = x.cols;
  y.resize(n, d);
  cache.xhat.resize(n, d);
  cache.rstd.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const auto r = x.row(t);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.rstd[t] = rstd;
    auto xh = cache.xhat.row(t);
    auto yr = y.row(t);
    for (std::size_t j = 0; j < d; ++j) {
      xh[j] = (r[j] - mean) * rstd;
      yr[j] = gain[j] * xh[j] + bias[j];
    }
  }
}

// dx += LN^T dy; dgain += sum dy * xhat; dbias += sum dy.
void layer_norm_backward(ConstMatView dy, const LayerNormCache& cache, std::span<const double> gain, MatView dx,
                         std::span<double> dgain, std::span<double> dbias) {
  const std::size_t n = dy.rows, d = dy.cols;
  std::vector<double> dxhat(d);
  for (std::size_t t = 0; t < n; ++t) {
    const auto g = dy.row(t);
    const auto xh = cache.xhat.row(t);
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dxhat[j] = g[j] * gain[j];
      m1 += dxhat[j];
      m2 += dxhat[j] * xh[j];
      dgain[j] += g[j] * xh[j];
      dbias[j] += g[j];
    }
    m1 /= static_cast<double>(d);
    m2 /= static_cast<double>(d);
    auto out = dx.row(t);
    const double rstd = cache.rstd[t];
    for (std::size_t j = 0; j < d; ++j) out[j] += rstd * (dxhat[j] - m1 - xh[j] * m2);
  }
}

MatView grad_view(std::span<double> grad, const TensorSlot& s) { return {grad.data() + s.offset, s.rows, s.cols}; }

}  // namespace

void EncoderConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("EncoderConfig: " + what); };
  if (feature_dim < 1) fail("feature_dim must be >= 1");
  if (model_dim < 2) fail("model_dim must be >= 2");
  if (n_blocks < 1) fail("n_blocks must be >= 1");
  if (mlp_hidden < 1) fail("mlp_hidden must be >= 1");
  if (k_codewords < 2) fail("k_codewords must be >= 2");
  if (mask_span < 1) fail("mask_span must be >= 1");
  if (!(mask_start_prob >= 0.0 && mask_start_prob <= 1.0)) fail("mask_start_prob must be in [0, 1]");
}

bool EncoderConfig::same_architecture(const EncoderConfig& o) const {
  return feature_dim == o.feature_dim && model_dim == o.model_dim && n_blocks == o.n_blocks &&
         mlp_hidden == o.mlp_hidden && k_codewords == o.k_codewords;
}

EncoderState::EncoderState(const EncoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t F = cfg.feature_dim, d = cfg.model_dim, h = cfg.mlp_hidden, k = cfg.k_codewords;
  input_w_ = add_slot("input.weight", F, d);
  input_b_ = add_slot("input.bias", 1, d);
  mask_emb_ = add_slot("mask_embedding", 1, F);
  for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    BlockSlots s{};
    s.ln1_gain = add_slot(p + "ln1.gain", 1, d);
    s.ln1_bias = add_slot(p + "ln1.bias", 1, d);
    s.wq = add_slot(p + "attn.q.weight", d, d);
    s.bq = add_slot(p + "attn.q.bias", 1, d);
    s.wk = add_slot(p + "attn.k.weight", d, d);
    s.wv = add_slot(p + "attn.v.weight", d, d);
    s.bv = add_slot(p + "attn.v.bias", 1, d);
    s.wo = add_slot(p + "attn.o.weight", d, d);
    s.bo = add_slot(p + "attn.o.bias", 1, d);
    s.ln2_gain = add_slot(p + "ln2.gain", 1, d);
    s.ln2_bias = add_slot(p + "ln2.bias", 1, d);
    s.w1 = add_slot(p + "mlp.fc1.weight", d, h);
    s.b1 = add_slot(p + "mlp.fc1.bias", 1, h);
    s.w2 = add_slot(p + "mlp.fc2.weight", h, d);
    s.b2 = add_slot(p + "mlp.fc2.bias", 1, d);
    blocks_.push_back(s);
  }
  head_w_ = add_slot("head.weight", d, k);
  head_b_ = add_slot("head.bias", 1, k);
  params_.assign(layout_.empty() ? 0 : layout_.back().offset + layout_.back().size(), 0.0);
}

std::size_t EncoderState::add_slot(std::string name, std::size_t rows, std::size_t cols) {
  const std::size_t offset = layout_.empty() ? 0 : layout_.back().offset + layout_.back().size();
  layout_.push_back({std::move(name), offset, rows, cols});
  return layout_.size() - 1;
}

const TensorSlot& EncoderState::slot(std::string_view name) const {
  for (const auto& s : layout_)
    if (s.name == name) return s;
  throw std::invalid_argument("EncoderState: no tensor named '" + std::string(name) + "'");
}

MatView EncoderState::tensor(std::string_view name) { return view_of(slot(name)); }
ConstMatView EncoderState::tensor(std::string_view name) const { return view_of(slot(name)); }

bool EncoderState::operator==(const EncoderState& other) const {
  return cfg_.same_architecture(other.cfg_) && params_ == other.params_;
}

EncoderState init_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
  EncoderState state(cfg);
  Rng rng(derive_seed(seed, stream::kInit));
  for (std::size_t i = 0; i < state.layout().size(); ++i) {
    const TensorSlot& s = state.layout()[i];
    MatView v = state.tensor(i);
    const bool is_gain = s.name.ends_with(".gain");
    const bool is_ln_bias = s.name.ends_with("ln1.bias") || s.name.ends_with("ln2.bias");
    if (is_gain || is_ln_bias) {
      std::fill(v.data, v.data + v.size(), is_gain ? 1.0 : 0.0);
      continue;
    }
    std::size_t fan_in = s.rows;
    if (s.rows == 1) {
      // Biases share the fan-in of the weight stored just before them.
      fan_in = (i > 0 && state.layout()[i - 1].rows > 1) ? state.layout()[i - 1].rows : s.cols;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t j = 0; j < v.size(); ++j) v.data[j] = rng.uniform(-bound, bound);
  }
  return state;
}

void round_to_float32(EncoderState& state) {
  for (double& p : state.params()) p = static_cast<double>(static_cast<float>(p));
}

std::vector<bool> MaskSpec::as_flags() const {
  std::vector<bool> f(num_frames, false);
  for (std::size_t t : frames) f[t] = true;
  return f;
}

MaskSpec draw_mask(std::size_t num_frames, const EncoderConfig& cfg, std::uint64_t seed) {
  MaskSpec m;
  m.num_frames = num_frames;
  Rng rng(seed);
  std::vector<bool> flags(num_frames, false);
  for (std::size_t t = 0; t < num_frames; ++t) {
    if (rng.uniform() < cfg.mask_start_prob) {
      const std::size_t end = std::min(num_frames, t + cfg.mask_span);
      for (std::size_t u = t; u < end; ++u) flags[u] = true;
    }
  }
  for (std::size_t t = 0; t < num_frames; ++t)
    if (flags[t]) m.frames.push_back(t);
  return m;
}

MaskedFeatures apply_mask(const EncoderState& state, const FeatureSequence& feats, std::uint64_t seed) {
  if (feats.num_frames() < 1) throw std::invalid_argument("apply_mask: empty sequence");
  if (feats.dim() != state.config().feature_dim) throw std::invalid_argument("apply_mask: feature_dim mismatch");
  MaskedFeatures out{feats, draw_mask(feats.num_frames(), state.config(), seed)};
  const ConstMatView emb = state.tensor(state.mask_embedding_slot());
  for (std::size_t t : out.mask.frames) std::copy(emb.data, emb.data + emb.cols, out.feats.frames.row(t).begin());
  return out;
}

Matrix positional_encoding(std::size_t num_frames, std::size_t dim) {
  Matrix pe(num_frames, dim);
  for (std::size_t t = 0; t < num_frames; ++t) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double pair = static_cast<double>(j / 2 * 2);
      const double angle = static_cast<double>(t) / std::pow(10000.0, pair / static_cast<double>(dim));
      pe(t, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

Matrix forward(const EncoderState& state, ConstMatView feats, const MaskSpec* mask, ForwardCache* cache) {
  const EncoderConfig& cfg = state.config();
  if (feats.cols != cfg.feature_dim)
    throw std::invalid_argument("forward: feature_dim " + std::to_string(feats.cols) + " does not match encoder " +
                                std::to_string(cfg.feature_dim));
  if (feats.rows == 0) throw std::invalid_argument("forward: empty sequence");
  const std::size_t T = feats.rows, d = cfg.model_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.num_params = state.num_params();
  c.input = to_matrix(feats);
  c.mask = mask ? *mask : MaskSpec{T, {}};
  if (mask) {
    if (mask->num_frames != T) throw std::invalid_argument("forward: mask length does not match sequence");
    const ConstMatView emb = state.tensor(state.mask_embedding_slot());
    for (std::size_t t : mask->frames) {
      if (t >= T) throw std::invalid_argument("forward: mask index out of range");
      std::copy(emb.data, emb.data + emb.cols, c.input.row(t).begin());
    }
  }

  Matrix h = positional_encoding(T, d);
  gemm_nn(c.input, state.tensor(state.input_weight_slot()), h, true);
  add_row_bias(h, flat(state.tensor(state.input_bias_slot())));

  c.blocks.resize(cfg.n_blocks);
  for (std::size_t bi = 0; bi < cfg.n_blocks; ++bi) {
    const auto& s = state.block_slots(bi);
    BlockCache& bc = c.blocks[bi];
    bc.h_in = std::move(h);
    layer_norm(bc.h_in, flat(state.tensor(s.ln1_gain)), flat(state.tensor(s.ln1_bias)), bc.a, bc.ln1);

    bc.q.resize(T, d);
    bc.k.resize(T, d);
    bc.v.resize(T, d);
    gemm_nn(bc.a, state.tensor(s.wq), bc.q);
    add_row_bias(bc.q, flat(state.tensor(s.bq)));
    gemm_nn(bc.a, state.tensor(s.wk), bc.k);
    gemm_nn(bc.a, state.tensor(s.wv), bc.v);
    add_row_bias(bc.v, flat(state.tensor(s.bv)));

    bc.p.resize(T, T);
    gemm_nt(bc.q, bc.k, bc.p);
    for (std::size_t t = 0; t < T; ++t) {
      auto r = bc.p.row(t);
      for (double& x : r) x *= scale;
      softmax_inplace(r);
    }
    bc.o.resize(T, d);
    gemm_nn(bc.p, bc.v, bc.o);

    bc.h_mid = bc.h_in;
    gemm_nn(bc.o, state.tensor(s.wo), bc.h_mid, true);
    add_row_bias(bc.h_mid, flat(state.tensor(s.bo)));

    layer_norm(bc.h_mid, flat(state.tensor(s.ln2_gain)), flat(state.tensor(s.ln2_bias)), bc.b, bc.ln2);
    bc.u.resize(T, cfg.mlp_hidden);
    gemm_nn(bc.b, state.tensor(s.w1), bc.u);
    add_row_bias(bc.u, flat(state.tensor(s.b1)));
    for (double& x : bc.u.values()) x = std::tanh(x);

    h = bc.h_mid;
    gemm_nn(bc.u, state.tensor(s.w2), h, true);
    add_row_bias(h, flat(state.tensor(s.b2)));
  }

  if (!all_finite(h.values())) throw DivergenceError("forward: non-finite activations in encoder output");
  if (cache) c.reps = h;
  return h;
}

Matrix forward(const EncoderState& state, const FeatureSequence& feats, const MaskSpec* mask, ForwardCache* cache) {
  return forward(state, feats.frames.view(), mask, cache);
}

Matrix predict_codewords(const EncoderState& state, ConstMatView reps) {
  const ConstMatView w = state.tensor(state.head_weight_slot());
  if (reps.cols != w.rows) throw std::invalid_argument("predict_codewords: representation width mismatch");
  Matrix logits(reps.rows, w.cols);
  gemm_nn(reps, w, logits);
  add_row_bias(logits, flat(state.tensor(state.head_bias_slot())));
  return logits;
}

void backward(const EncoderState& state, const ForwardCache& cache, ConstMatView grad_reps,
              ConstMatView grad_logits, std::span<double> param_grad) {
  const EncoderConfig& cfg = state.config();
  const std::size_t T = cache.reps.rows(), d = cfg.model_dim;
  if (cache.num_params != state.num_params() || cache.blocks.size() != cfg.n_blocks || cache.reps.cols() != d)
    throw std::invalid_argument("backward: cache does not match encoder state");
  if (param_grad.size() != state.num_params()) throw std::invalid_argument("backward: gradient size mismatch");
  const bool has_reps = grad_reps.size() > 0;
  const bool has_logits = grad_logits.size() > 0;
  if (has_reps && (grad_reps.rows != T || grad_reps.cols != d))
    throw std::invalid_argument("backward: grad_reps shape mismatch");
  if (has_logits && (grad_logits.rows != T || grad_logits.cols != cfg.k_codewords))
    throw std::invalid_argument("backward: grad_logits shape mismatch");
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const auto& layout = state.layout();
  auto g = [&](std::size_t slot) { return grad_view(param_grad, layout[slot]); };

  Matrix dh(T, d);
  if (has_reps) std::copy(grad_reps.data, grad_reps.data + grad_reps.size(), dh.values().begin());
  if (has_logits) {
    gemm_tn(cache.reps, grad_logits, g(state.head_weight_slot()), true);
    add_column_sums(grad_logits, flat(g(state.head_bias_slot())));
    gemm_nt(grad_logits, state.tensor(state.head_weight_slot()), dh, true);
  }

  Matrix du, db, dhmid, dout, dp, dv, dq, dk, da;
  for (std::size_t bi = cfg.n_blocks; bi-- > 0;) {
    const auto& s = state.block_slots(bi);
    const BlockCache& bc = cache.blocks[bi];

    // MLP residual branch.
    gemm_tn(bc.u, dh, g(s.w2), true);
    add_column_sums(dh, flat(g(s.b2)));
    du.resize(T, cfg.mlp_hidden);
    gemm_nt(dh, state.tensor(s.w2), du);
    for (std::size_t i = 0; i < du.size(); ++i) {
      const double u = bc.u.values()[i];
      du.values()[i] *= (1.0 - u * u);
    }
    gemm_tn(bc.b, du, g(s.w1), true);
    add_column_sums(du, flat(g(s.b1)));
    db.resize(T, d);
    gemm_nt(du, state.tensor(s.w1), db);
    dhmid = dh;
    layer_norm_backward(db, bc.ln2, flat(state.tensor(s.ln2_gain)), dhmid, flat(g(s.ln2_gain)),
                        flat(g(s.ln2_bias)));

    // Attention residual branch.
    gemm_tn(bc.o, dhmid, g(s.wo), true);
    add_column_sums(dhmid, flat(g(s.bo)));
    dout.resize(T, d);
    gemm_nt(dhmid, state.tensor(s.wo), dout);
    dp.resize(T, T);
    gemm_nt(dout, bc.v, dp);
    dv.resize(T, d);
    gemm_tn(bc.p, dout, dv);
    for (std::size_t t = 0; t < T; ++t) {
      const auto pr = bc.p.row(t);
      auto dr = dp.row(t);
      double dot = 0.0;
      for (std::size_t j = 0; j < T; ++j) dot += pr[j] * dr[j];
      for (std::size_t j = 0; j < T; ++j) dr[j] = pr[j] * (dr[j] - dot) * scale;
    }
    dq.resize(T, d);
    gemm_nn(dp, bc.k, dq);
    dk.resize(T, d);
    gemm_tn(dp, bc.q, dk);

    gemm_tn(bc.a, dq, g(s.wq), true);
    add_column_sums(dq, flat(g(s.bq)));
    gemm_tn(bc.a, dk, g(s.wk), true);
    gemm_tn(bc.a, dv, g(s.wv), true);
    add_column_sums(dv, flat(g(s.bv)));

    da.resize(T, d);
    gemm_nt(dq, state.tensor(s.wq), da);
    gemm_nt(dk, state.tensor(s.wk), da, true);
    gemm_nt(dv, state.tensor(s.wv), da, true);
    dh = dhmid;
    layer_norm_backward(da, bc.ln1, flat(state.tensor(s.ln1_gain)), dh, flat(g(s.ln1_gain)), flat(g(s.ln1_bias)));
  }

  gemm_tn(cache.input, dh, g(state.input_weight_slot()), true);
  add_column_sums(dh, flat(g(state.input_bias_slot())));
  if (!cache.mask.empty()) {
    const ConstMatView w_in = state.tensor(state.input_weight_slot());
    auto demb = flat(g(state.mask_embedding_slot()));
    for (std::size_t t : cache.mask.frames) {
      const auto row = dh.row(t);
      for (std::size_t f = 0; f < cfg.feature_dim; ++f) {
        const auto wf = w_in.row(f);
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += row[j] * wf[j];
        demb[f] += acc;
      }
    }
  }
}

}  // namespace hvic
