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

#include "hvic/losses.hpp"
#include "hvic/numerics.hpp"
#include "test_util.hpp"

namespace hvic {
namespace {

using testing::naive_matmul;
using testing::random_matrix;

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Matrix eye{{1, 0}, {0, 1}};
  const Matrix m{{1, 2}, {3, 4}};
  EXPECT_EQ(matmul(eye, m), m);
}

TEST(Matmul, RowTimesColumn) {
  const Matrix a{{1, 2}};
  const Matrix b{{3}, {4}};
  const Matrix c = matmul(a, b);
  ASSERT_EQ(c.rows(), 1u);
  ASSERT_EQ(c.cols(), 1u);
  EXPECT_EQ(c(0, 0), 11.0);
}

TEST(Matmul, MatchesTripleLoop) {
  const Matrix a = random_matrix(5, 7, 1);
  const Matrix b = random_matrix(7, 3, 2);
  const Matrix c = matmul(a, b);
  const Matrix ref = naive_matmul(a, b);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c.values()[i], ref.values()[i], 1e-12);
}

TEST(Matmul, BitIdenticalToTripleLoopUpTo16) {
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    Rng rng(trial);
    const std::size_t m = 1 + rng.uniform_int(16), k = 1 + rng.uniform_int(16), p = 1 + rng.uniform_int(16);
    const Matrix a = random_matrix(m, k, 100 + trial);
    const Matrix b = random_matrix(k, p, 200 + trial);
    EXPECT_EQ(matmul(a, b), naive_matmul(a, b)) << "trial " << trial;
  }
}

TEST(Matmul, TransposedVariantsAgree) {
  const Matrix a = random_matrix(6, 4, 3);
  const Matrix b = random_matrix(6, 5, 4);
  const Matrix c = random_matrix(5, 4, 5);
  Matrix tn(4, 5), nt(6, 5);
  gemm_tn(a, b, tn);
  gemm_nt(a, c, nt);
  const Matrix tn_ref = naive_matmul(transpose(a), b);
  const Matrix nt_ref = naive_matmul(a, transpose(c));
  for (std::size_t i = 0; i < tn.size(); ++i) EXPECT_NEAR(tn.values()[i], tn_ref.values()[i], 1e-12);
  for (std::size_t i = 0; i < nt.size(); ++i) EXPECT_NEAR(nt.values()[i], nt_ref.values()[i], 1e-12);
}

TEST(Matmul, RejectsMismatchedInnerDimensions) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), std::invalid_argument);
}

TEST(SoftmaxXent, UniformLogits) {
  const std::vector<double> logits(4, 0.7);
  EXPECT_NEAR(softmax_xent(logits, 2).loss, std::log(4.0), 1e-15);
}

TEST(SoftmaxXent, SaturatedLogitsDoNotOverflow) {
  const std::vector<double> logits{1000.0, 0.0};
  const auto r = softmax_xent(logits, 0);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, 0.0, 1e-300);
  EXPECT_TRUE(all_finite(r.grad_logits));
}

TEST(SoftmaxXent, MatchesDirectFormula) {
  const std::vector<double> logits{0.2, -0.1, 0.5};
  const double direct = -std::log(std::exp(-0.1) / (std::exp(0.2) + std::exp(-0.1) + std::exp(0.5)));
  EXPECT_NEAR(softmax_xent(logits, 1).loss, direct, 1e-15);
}

TEST(SoftmaxXent, GradientSumsToZero) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> logits(2 + rng.uniform_int(10));
    for (double& x : logits) x = 3.0 * rng.normal();
    const auto r = softmax_xent(logits, rng.uniform_int(logits.size()));
    EXPECT_NEAR(std::accumulate(r.grad_logits.begin(), r.grad_logits.end(), 0.0), 0.0, 1e-14);
  }
}

TEST(SoftmaxXent, RejectsBadInput) {
  EXPECT_THROW(softmax_xent(std::vector<double>{1.0}, 0), std::invalid_argument);
  EXPECT_THROW(softmax_xent(std::vector<double>{1.0, 2.0}, 2), std::invalid_argument);
  EXPECT_THROW(softmax_xent(std::vector<double>{1.0, NAN}, 0), std::invalid_argument);
}

TEST(GradCheck, QuadraticIsExact) {
  const std::vector<double> x{3.0}, g{6.0};
  const auto rep = grad_check([](std::span<const double> p) { return p[0] * p[0]; }, g, x, 1e-5);
  EXPECT_LT(rep.max_rel_error, 1e-8);
  EXPECT_EQ(rep.step, 1e-5);
}

TEST(GradCheck, InvarianceTermGradient) {
  const Matrix z = random_matrix(8, 4, 11);
  const Matrix zp = random_matrix(8, 4, 12);
  const auto term = invariance(z, zp);
  auto f = [&](std::span<const double> p) {
    return invariance(z, ConstMatView(p.data(), 8, 4)).value;
  };
  const auto rep = grad_check(f, term.grad.values(), zp.values(), 1e-5);
  EXPECT_LE(rep.max_rel_error, 1e-6);
}

TEST(GradCheck, DetectsScaledGradient) {
  const std::vector<double> x{1.5, -0.5, 2.0};
  std::vector<double> g;
  for (double v : x) g.push_back(2.0 * 2.0 * v);  // correct is 2x, report 4x
  auto f = [](std::span<const double> p) { return p[0] * p[0] + p[1] * p[1] + p[2] * p[2]; };
  const auto rep = grad_check(f, g, x, 1e-5);
  EXPECT_NEAR(rep.max_rel_error, 0.5, 1e-6);
}

TEST(GradCheck, FloorsDenominatorAtExactZero) {
  const std::vector<double> x{0.0}, g{0.0};
  const auto rep = grad_check([](std::span<const double>) { return 1.0; }, g, x, 1e-5);
  EXPECT_EQ(rep.max_rel_error, 0.0);
}

}  // namespace
}  // namespace hvic
