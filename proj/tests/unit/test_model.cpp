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


#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "hvic/gradcheck.hpp"
#include "hvic/losses.hpp"
#include "hvic/model.hpp"
#include "test_util.hpp"

namespace hvic {
namespace {

using testing::random_matrix;

EncoderConfig small_config() {
  EncoderConfig c;
  c.feature_dim = 8;
  c.model_dim = 16;
  c.n_blocks = 2;
  c.mlp_hidden = 24;
  c.k_codewords = 8;
  return c;
}

FeatureSequence random_sequence(std::size_t T, std::size_t F, std::uint64_t seed) {
  FeatureSequence fs;
  fs.frames = random_matrix(T, F, seed);
  return fs;
}

TEST(Encoder, SameSeedSameParameters) {
  const auto a = init_encoder(small_config(), 11);
  const auto b = init_encoder(small_config(), 11);
  const auto c = init_encoder(small_config(), 12);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
}

TEST(Encoder, LayerNormGainsStartAtOne) {
  const auto s = init_encoder(small_config(), 3);
  for (std::size_t b = 0; b < s.config().n_blocks; ++b) {
    for (std::size_t slot : {s.block_slots(b).ln1_gain, s.block_slots(b).ln2_gain}) {
      const auto g = s.tensor(slot);
      for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.data[i], 1.0);
    }
    for (std::size_t slot : {s.block_slots(b).ln1_bias, s.block_slots(b).ln2_bias}) {
      const auto g = s.tensor(slot);
      for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.data[i], 0.0);
    }
  }
}

TEST(Encoder, LayoutIsContiguousAndNamed) {
  const auto s = init_encoder(EncoderConfig{}, 1);
  std::size_t offset = 0;
  for (const auto& slot : s.layout()) {
    EXPECT_EQ(slot.offset, offset) << slot.name;
    offset += slot.size();
  }
  EXPECT_EQ(offset, s.num_params());
  EXPECT_EQ(s.layout().front().name, "input.weight");
  EXPECT_EQ(s.layout().back().name, "head.bias");
  EXPECT_EQ(s.slot("block1.mlp.fc1.weight").rows, 64u);
  EXPECT_EQ(s.slot("block1.mlp.fc1.weight").cols, 128u);
  EXPECT_THROW(s.slot("block9.nope"), std::invalid_argument);
}

TEST(Encoder, InitialMaskedLossIsNearLogK) {
  for (std::size_t k : {8u, 16u, 32u}) {
    EncoderConfig cfg;
    cfg.k_codewords = k;
    const auto s = init_encoder(cfg, 5);
    const auto fs = random_sequence(100, cfg.feature_dim, 9);
    const auto logits = predict_codewords(s, forward(s, fs));
    std::vector<int> labels(100);
    Rng rng(4);
    for (int& l : labels) l = static_cast<int>(rng.uniform_int(k));
    MaskSpec all{100, {}};
    all.frames.resize(100);
    std::iota(all.frames.begin(), all.frames.end(), 0);
    const double loss = masked_prediction_loss(logits, labels, all).value;
    EXPECT_NEAR(loss / std::log(static_cast<double>(k)), 1.0, 0.10) << "k=" << k;
  }
}

TEST(Mask, ZeroProbabilityLeavesFeaturesUnchanged) {
  EncoderConfig cfg = small_config();
  cfg.mask_start_prob = 0.0;
  const auto s = init_encoder(cfg, 1);
  const auto fs = random_sequence(30, cfg.feature_dim, 2);
  const auto m = apply_mask(s, fs, 77);
  EXPECT_TRUE(m.mask.empty());
  EXPECT_EQ(m.feats.frames, fs.frames);
}

TEST(Mask, SaturatedSpanMasksEverything) {
  EncoderConfig cfg = small_config();
  cfg.mask_start_prob = 1.0;
  cfg.mask_span = 30;
  const auto s = init_encoder(cfg, 1);
  const auto fs = random_sequence(30, cfg.feature_dim, 2);
  const auto m = apply_mask(s, fs, 77);
  ASSERT_EQ(m.mask.size(), 30u);
  const auto emb = s.tensor(s.mask_embedding_slot());
  for (std::size_t t = 0; t < 30; ++t)
    for (std::size_t j = 0; j < cfg.feature_dim; ++j) EXPECT_EQ(m.feats.frames(t, j), emb.data[j]);
}

TEST(Mask, SpanUnionCoverageOnDefaults) {
  EncoderConfig cfg;
  double total = 0.0;
  const int trials = 2000;
  for (int i = 0; i < trials; ++i) total += static_cast<double>(draw_mask(100, cfg, 1000 + i).size()) / 100.0;
  const double mean = total / trials;
  EXPECT_GE(mean, 0.4);
  EXPECT_LE(mean, 0.75);
}

TEST(Mask, SpansAreSortedUniqueAndInRange) {
  EncoderConfig cfg;
  cfg.mask_start_prob = 0.2;
  cfg.mask_span = 4;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto m = draw_mask(23, cfg, seed);
    for (std::size_t i = 0; i < m.size(); ++i) {
      EXPECT_LT(m.frames[i], 23u);
      if (i > 0) {
        EXPECT_LT(m.frames[i - 1], m.frames[i]);
      }
    }
  }
}

TEST(Forward, ShapeAndDeterminism) {
  const auto s = init_encoder(small_config(), 2);
  for (std::size_t T : {1u, 5u, 37u}) {
    const auto fs = random_sequence(T, 8, T);
    const Matrix a = forward(s, fs);
    EXPECT_EQ(a.rows(), T);
    EXPECT_EQ(a.cols(), 16u);
    EXPECT_EQ(a, forward(s, fs));
    const Matrix logits = predict_codewords(s, a);
    EXPECT_EQ(logits.rows(), T);
    EXPECT_EQ(logits.cols(), 8u);
  }
}

TEST(Forward, RejectsWrongFeatureDim) {
  const auto s = init_encoder(small_config(), 2);
  EXPECT_THROW(forward(s, random_sequence(4, 7, 1)), std::invalid_argument);
}

TEST(Forward, AttentionRowsSumToOne) {
  const auto s = init_encoder(small_config(), 2);
  ForwardCache cache;
  forward(s, random_sequence(17, 8, 3), nullptr, &cache);
  for (const auto& b : cache.blocks)
    for (std::size_t i = 0; i < b.p.rows(); ++i) {
      const auto r = b.p.row(i);
      EXPECT_NEAR(std::accumulate(r.begin(), r.end(), 0.0), 1.0, 1e-12);
    }
}

TEST(Forward, MaskedForwardMatchesExplicitSubstitution) {
  EncoderConfig cfg = small_config();
  cfg.mask_start_prob = 0.3;
  cfg.mask_span = 2;
  const auto s = init_encoder(cfg, 2);
  const auto fs = random_sequence(20, 8, 4);
  const auto masked = apply_mask(s, fs, 5);
  ASSERT_FALSE(masked.mask.empty());
  EXPECT_EQ(forward(s, fs, &masked.mask), forward(s, masked.feats));
}

TEST(Head, ZeroRepsAndZeroBiasGiveZeroLogits) {
  auto s = init_encoder(small_config(), 2);
  auto b = s.tensor(s.head_bias_slot());
  std::fill(b.data, b.data + b.size(), 0.0);
  const Matrix logits = predict_codewords(s, Matrix(6, 16));
  for (double x : logits.values()) EXPECT_EQ(x, 0.0);
}

TEST(Backward, NullUpstreamGivesZeroGradient) {
  const auto s = init_encoder(small_config(), 2);
  ForwardCache cache;
  const Matrix reps = forward(s, random_sequence(9, 8, 3), nullptr, &cache);
  std::vector<double> g(s.num_params(), 0.0);
  backward(s, cache, Matrix(9, 16), Matrix(9, 8), g);
  for (double x : g) EXPECT_EQ(x, 0.0);
}

TEST(Backward, RejectsMismatchedUpstream) {
  const auto s = init_encoder(small_config(), 2);
  ForwardCache cache;
  forward(s, random_sequence(9, 8, 3), nullptr, &cache);
  std::vector<double> g(s.num_params(), 0.0);
  EXPECT_THROW(backward(s, cache, Matrix(8, 16), Matrix{}, g), std::invalid_argument);
  EXPECT_THROW(backward(s, cache, Matrix{}, Matrix(9, 7), g), std::invalid_argument);
  std::vector<double> short_grad(3, 0.0);
  EXPECT_THROW(backward(s, cache, Matrix(9, 16), Matrix{}, short_grad), std::invalid_argument);
}

TEST(Backward, HeadGradientMatchesFiniteDifferences) {
  const auto s = init_encoder(small_config(), 2);
  const auto fs = random_sequence(12, 8, 3);
  std::vector<int> labels(12);
  for (std::size_t t = 0; t < 12; ++t) labels[t] = static_cast<int>(t % 8);
  const MaskSpec mask{12, {0, 3, 4, 5, 9}};

  ForwardCache cache;
  const Matrix reps = forward(s, fs, &mask, &cache);
  const auto loss = masked_prediction_loss(predict_codewords(s, reps), labels, mask);
  std::vector<double> grad(s.num_params(), 0.0);
  backward(s, cache, Matrix{}, loss.grad, grad);

  std::vector<std::size_t> coords;
  for (std::size_t slot : {s.head_weight_slot(), s.head_bias_slot()}) {
    const auto& ts = s.layout()[slot];
    for (std::size_t i = 0; i < ts.size(); ++i) coords.push_back(ts.offset + i);
  }
  EncoderState probe = s;
  auto f = [&](std::span<const double> p) {
    std::copy(p.begin(), p.end(), probe.params().begin());
    return masked_prediction_loss(predict_codewords(probe, reps), labels, mask).value;
  };
  const auto rep = grad_check(f, grad, s.params(), 1e-5, coords);
  EXPECT_EQ(rep.n_checked, coords.size());
  EXPECT_LE(rep.max_rel_error, 1e-4);
}

TEST(Backward, FullTotalLossGradientMatchesFiniteDifferences) {
  GradCheckSuiteConfig cfg;
  const auto prob = TotalLossProblem::make(cfg);
  ASSERT_EQ(prob.features[0].rows(), 12u);
  EncoderState s = init_encoder(prob.encoder, 99);
  std::vector<double> grad;
  const auto parts = prob.evaluate(s, &grad);
  EXPECT_GT(parts.s, 0.0);
  EncoderState probe = s;
  auto f = [&](std::span<const double> p) {
    std::copy(p.begin(), p.end(), probe.params().begin());
    return prob.evaluate(probe, nullptr).l_tot;
  };
  const auto rep = grad_check(f, grad, s.params(), 1e-5);
  EXPECT_GE(rep.n_checked, 200u);
  EXPECT_LE(rep.max_rel_error, 1e-4) << "worst " << s.layout().size() << " slot index " << rep.worst_index;
}

TEST(Backward, UpstreamPathsAreAdditive) {
  const auto prob = TotalLossProblem::make({});
  const EncoderState s = init_encoder(prob.encoder, 99);
  std::vector<double> joint;
  prob.evaluate(s, &joint);
  const auto split = prob.split_path_gradient(s);
  ASSERT_EQ(split.size(), joint.size());
  for (std::size_t i = 0; i < joint.size(); ++i)
    EXPECT_NEAR(split[i], joint[i], 1e-12 * std::max(1.0, std::abs(joint[i])));
}

TEST(GradCheckSuite, EveryComponentPasses) {
  for (const auto& e : run_gradcheck_suite()) {
    EXPECT_TRUE(e.passed) << e.component << " max_rel_error=" << e.report.max_rel_error;
    EXPECT_GT(e.report.n_checked, 0u) << e.component;
  }
}

TEST(Encoder, Float32RoundingIsIdempotent) {
  auto s = init_encoder(small_config(), 4);
  round_to_float32(s);
  const auto once = s;
  round_to_float32(s);
  EXPECT_TRUE(s == once);
  for (double x : s.params()) EXPECT_EQ(x, static_cast<double>(static_cast<float>(x)));
}

}  // namespace
}  // namespace hvic
