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

// Tiny pre-norm Transformer encoder with a codeword prediction head and a
// hand-derived backward pass.
//
// Per block (single head, no dropout):
//   A  = LN1(H)
//   H' = H + softmax(Q K^T / sqrt(d)) V Wo + bo,   Q = A Wq + bq, K = A Wk, V = A Wv + bv
//   H''= H' + tanh(LN2(H') W1 + b1) W2 + b2
// The key projection carries no bias: it would only shift every score in a
// row by the same amount and so receive an identically zero gradient.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hvic/numerics.hpp"
#include "hvic/signal.hpp"

namespace hvic {

struct EncoderConfig {
  std::size_t feature_dim = 40;
  std::size_t model_dim = 64;
  std::size_t n_blocks = 2;
  std::size_t mlp_hidden = 128;
  std::size_t k_codewords = 16;
  double mask_start_prob = 0.08;
  std::size_t mask_span = 10;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  /// Equality of every shape-determining field.
  bool same_architecture(const EncoderConfig& other) const;
};

/// Named slice of the flat parameter vector.
struct TensorSlot {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
};

/// All trainable parameters in one flat vector with a fixed named layout:
///   input.weight, input.bias, mask_embedding,
///   block<i>.{ln1.gain, ln1.bias, attn.q.weight, attn.q.bias, attn.k.weight,
///             attn.v.weight, attn.v.bias, attn.o.weight, attn.o.bias,
///             ln2.gain, ln2.bias, mlp.fc1.weight, mlp.fc1.bias,
///             mlp.fc2.weight, mlp.fc2.bias},
///   head.weight, head.bias
/// Weights are stored (fan_in x fan_out) so a layer is X W + b.
class EncoderState {
 public:
  explicit EncoderState(const EncoderConfig& cfg);

  const EncoderConfig& config() const { return cfg_; }
  EncoderConfig& mutable_config() { return cfg_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t num_params() const { return params_.size(); }

  const std::vector<TensorSlot>& layout() const { return layout_; }
  const TensorSlot& slot(std::string_view name) const;

  MatView tensor(std::string_view name);
  ConstMatView tensor(std::string_view name) const;
  MatView tensor(std::size_t slot_index) { return view_of(layout_[slot_index]); }
  ConstMatView tensor(std::size_t slot_index) const { return view_of(layout_[slot_index]); }

  struct BlockSlots {
    std::size_t ln1_gain, ln1_bias, wq, bq, wk, wv, bv, wo, bo, ln2_gain, ln2_bias, w1, b1, w2, b2;
  };
  std::size_t input_weight_slot() const { return input_w_; }
  std::size_t input_bias_slot() const { return input_b_; }
  std::size_t mask_embedding_slot() const { return mask_emb_; }
  std::size_t head_weight_slot() const { return head_w_; }
  std::size_t head_bias_slot() const { return head_b_; }
  const BlockSlots& block_slots(std::size_t b) const { return blocks_[b]; }

  bool operator==(const EncoderState& other) const;

 private:
  MatView view_of(const TensorSlot& s) { return {params_.data() + s.offset, s.rows, s.cols}; }
  ConstMatView view_of(const TensorSlot& s) const { return {params_.data() + s.offset, s.rows, s.cols}; }
  std::size_t add_slot(std::string name, std::size_t rows, std::size_t cols);

  EncoderConfig cfg_;
  std::vector<double> params_;
  std::vector<TensorSlot> layout_;
  std::vector<BlockSlots> blocks_;
  std::size_t input_w_ = 0, input_b_ = 0, mask_emb_ = 0, head_w_ = 0, head_b_ = 0;
};

/// Scaled-uniform init, bound 1/sqrt(fan_in); layer-norm gains 1, biases 0.
EncoderState init_encoder(const EncoderConfig& cfg, std::uint64_t seed);

/// Rounds every parameter through float32 (the checkpoint precision).
void round_to_float32(EncoderState& state);

struct MaskSpec {
  std::size_t num_frames = 0;
  std::vector<std::size_t> frames;  // sorted, unique

  bool empty() const { return frames.empty(); }
  std::size_t size() const { return frames.size(); }
  std::vector<bool> as_flags() const;
};

/// Span masking: each frame starts a span with mask_start_prob; spans of
/// mask_span frames (truncated at the end) are unioned.
MaskSpec draw_mask(std::size_t num_frames, const EncoderConfig& cfg, std::uint64_t seed);

struct MaskedFeatures {
  FeatureSequence feats;
  MaskSpec mask;
};

/// Draws a mask and replaces the masked rows by the learned mask embedding.
MaskedFeatures apply_mask(const EncoderState& state, const FeatureSequence& feats, std::uint64_t seed);

/// Sinusoidal position table (T x d).
Matrix positional_encoding(std::size_t num_frames, std::size_t dim);

struct LayerNormCache {
  Matrix xhat;
  std::vector<double> rstd;
};

struct BlockCache {
  Matrix h_in;
  LayerNormCache ln1;
  Matrix a, q, k, v;
  Matrix p;  // attention probabilities, T x T
  Matrix o;
  Matrix h_mid;
  LayerNormCache ln2;
  Matrix b;
  Matrix u;  // tanh activations, T x mlp_hidden
};

struct ForwardCache {
  Matrix input;  // features after mask substitution
  MaskSpec mask;
  std::vector<BlockCache> blocks;
  Matrix reps;
  std::size_t num_params = 0;
};

/// Encoder forward. With `mask` the listed rows are replaced by the mask
/// embedding first (student training); without it the pass is the
/// deterministic teacher/eval mode. Throws DivergenceError on non-finite output.
Matrix forward(const EncoderState& state, ConstMatView feats, const MaskSpec* mask = nullptr,
               ForwardCache* cache = nullptr);
Matrix forward(const EncoderState& state, const FeatureSequence& feats, const MaskSpec* mask = nullptr,
               ForwardCache* cache = nullptr);

/// Affine prediction head d -> k per frame.
Matrix predict_codewords(const EncoderState& state, ConstMatView reps);

/// Accumulates d(loss)/d(params) into `param_grad` given upstream gradients on
/// the representations (VIC path) and on the logits (masked prediction path).
/// Either upstream may be an empty matrix.
void backward(const EncoderState& state, const ForwardCache& cache, ConstMatView grad_reps,
              ConstMatView grad_logits, std::span<double> param_grad);

}  // namespace hvic
