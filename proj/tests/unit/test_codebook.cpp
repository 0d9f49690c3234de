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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>

#include "hvic/codebook.hpp"
#include "hvic/corpus.hpp"
#include "test_util.hpp"

namespace hvic {
namespace {

using testing::random_matrix;

Matrix column(std::initializer_list<double> xs) {
  Matrix m(xs.size(), 1);
  std::size_t i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

TEST(KMeans, TwoClustersOnALine) {
  const auto cb = fit_kmeans(column({0, 1, 10, 11}), 2, 50, 1);
  std::vector<double> c = {cb.centroids(0, 0), cb.centroids(1, 0)};
  std::sort(c.begin(), c.end());
  EXPECT_DOUBLE_EQ(c[0], 0.5);
  EXPECT_DOUBLE_EQ(c[1], 10.5);
  EXPECT_DOUBLE_EQ(cb.inertia, 1.0);
}

TEST(KMeans, LineOptimumMatchesBruteForcePartition) {
  // Every 2-partition of the points; the best one has inertia 1.
  const std::vector<double> pts = {0, 1, 10, 11};
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < 15; ++mask) {
    double s[2] = {0, 0}, n[2] = {0, 0};
    for (int i = 0; i < 4; ++i) s[(mask >> i) & 1] += pts[i], n[(mask >> i) & 1] += 1;
    double in = 0.0;
    for (int i = 0; i < 4; ++i) {
      const int g = (mask >> i) & 1;
      in += std::pow(pts[i] - s[g] / n[g], 2);
    }
    best = std::min(best, in);
  }
  EXPECT_DOUBLE_EQ(fit_kmeans(column({0, 1, 10, 11}), 2, 50, 3).inertia, best);
}

TEST(KMeans, KEqualsNReproducesThePoints) {
  const Matrix x = random_matrix(6, 3, 4);
  const auto cb = fit_kmeans(x, 6, 20, 2);
  EXPECT_EQ(cb.inertia, 0.0);
  std::vector<bool> used(6, false);
  for (std::size_t c = 0; c < 6; ++c)
    for (std::size_t i = 0; i < 6; ++i)
      if (std::equal(x.row(i).begin(), x.row(i).end(), cb.centroids.row(c).begin())) used[i] = true;
  EXPECT_EQ(std::count(used.begin(), used.end(), true), 6);
}

TEST(KMeans, InertiaIsNonIncreasing) {
  const Matrix x = random_matrix(300, 4, 8);
  std::vector<double> trace;
  fit_kmeans(x, 7, 100, 5, &trace);
  ASSERT_GE(trace.size(), 2u);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1] + 1e-9);
}

TEST(KMeans, RefitIsBitIdentical) {
  const Matrix x = random_matrix(200, 5, 1);
  const auto a = fit_kmeans(x, 6, 40, 9);
  const auto b = fit_kmeans(x, 6, 40, 9);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.inertia, b.inertia);
}

TEST(KMeans, DistinctRowsGiveZeroInertia) {
  Matrix x(30, 2);
  for (std::size_t i = 0; i < 30; ++i) {
    x(i, 0) = static_cast<double>(i % 5);
    x(i, 1) = static_cast<double>((i % 5) * (i % 5));
  }
  const auto cb = fit_kmeans(x, 5, 100, 3);
  EXPECT_EQ(cb.inertia, 0.0);
  EXPECT_EQ(inertia(cb, x), 0.0);
}

TEST(KMeans, RejectsTooFewPoints) {
  EXPECT_THROW(fit_kmeans(random_matrix(3, 2, 1), 4, 10, 1), std::invalid_argument);
  EXPECT_THROW(fit_kmeans(column({1, 1, 1, 1}), 2, 10, 1), std::invalid_argument);
}

TEST(KMeans, CentroidsAreDistinct) {
  const auto cb = fit_kmeans(random_matrix(100, 3, 2), 10, 50, 4);
  for (std::size_t a = 0; a < cb.k(); ++a)
    for (std::size_t b = a + 1; b < cb.k(); ++b) EXPECT_NE(cb.centroids.row(a)[0], cb.centroids.row(b)[0]);
}

TEST(Assign, ExactMatchAndTieBreak) {
  Codebook cb;
  cb.centroids = Matrix{{0, 0}, {1, 0}, {5, 5}, {7, 7}, {3, 0}};
  EXPECT_EQ(assign(cb, Matrix{{7, 7}}), (std::vector<int>{3}));
  // (2, 0) is equidistant from centroids 1 and 4.
  EXPECT_EQ(assign(cb, Matrix{{2, 0}}), (std::vector<int>{1}));
  EXPECT_THROW(assign(cb, Matrix{{1, 2, 3}}), std::invalid_argument);
}

TEST(Assign, MatchesLinearScanOracle) {
  Codebook cb;
  cb.centroids = random_matrix(9, 4, 3);
  const Matrix x = random_matrix(500, 4, 4);
  const auto labels = assign(cb, x);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < 9; ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < 4; ++j) d += std::pow(x(i, j) - cb.centroids(c, j), 2);
      if (d < bd) bd = d, best = static_cast<int>(c);
    }
    EXPECT_EQ(labels[i], best);
  }
}

TEST(Purity, MatchedAccuracyHandlesPermutations) {
  const std::vector<int> units = {0, 0, 1, 1, 2, 2};
  const std::vector<int> codes = {2, 2, 0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(matched_accuracy(codes, units, 3, 3), 1.0);
  EXPECT_DOUBLE_EQ(cluster_purity(codes, units, 3, 3), 1.0);
  const std::vector<int> merged = {0, 0, 0, 0, 1, 1};
  EXPECT_NEAR(matched_accuracy(merged, units, 3, 3), 4.0 / 6.0, 1e-12);
  EXPECT_NEAR(cluster_purity(merged, units, 3, 3), 4.0 / 6.0, 1e-12);
}

TEST(Normalizer, StandardizesPooledFrames) {
  FeatureSequence a{random_matrix(50, 3, 1, 4.0), {}, "a"};
  FeatureSequence b{random_matrix(30, 3, 2, 4.0), {}, "b"};
  for (double& x : b.frames.values()) x += 10.0;
  const std::vector<FeatureSequence> v = {a, b};
  const auto norm = FeatureNormalizer::fit(v);
  Matrix pooled(80, 3);
  std::copy(a.frames.values().begin(), a.frames.values().end(), pooled.values().begin());
  std::copy(b.frames.values().begin(), b.frames.values().end(), pooled.values().begin() + 150);
  norm.apply(pooled);
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < 80; ++i) s += pooled(i, j), ss += pooled(i, j) * pooled(i, j);
    EXPECT_NEAR(s / 80.0, 0.0, 1e-12);
    EXPECT_NEAR(ss / 80.0, 1.0, 1e-12);
  }
}

TEST(Codebook, RecoversUnitsOnSyntheticCorpusAboveChance) {
  CorpusSpec spec;
  spec.n_utterances = 24;
  const auto corpus = synth_corpus(spec);
  FeatureExtractor fx;
  std::vector<FeatureSequence> feats;
  for (const auto& u : corpus) feats.push_back(fx.compute(u));
  const auto norm = FeatureNormalizer::fit(feats);
  std::size_t total = 0;
  for (const auto& f : feats) total += f.num_frames();
  Matrix pooled(total, 40);
  std::vector<int> units;
  std::size_t r = 0;
  for (const auto& f : feats) {
    const auto nf = norm.apply(f);
    for (std::size_t t = 0; t < nf.num_frames(); ++t, ++r)
      std::copy(nf.frames.row(t).begin(), nf.frames.row(t).end(), pooled.row(r).begin());
    units.insert(units.end(), f.frame_labels.begin(), f.frame_labels.end());
  }
  const auto cb = fit_kmeans(pooled, 8, 100, 1);
  const double acc = matched_accuracy(assign(cb, pooled), units, 8, 8);
  EXPECT_GT(acc, 2.0 / 8.0);
}

class CorpusFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("hvic_corpus_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(CorpusFiles, WavRoundTripEqualsQuantization) {
  Waveform w{16000, {0.0, 0.5, -0.5, 1.0, -1.0, 0.123456, 2.0}};
  write_wav(dir_ / "a.wav", w);
  const auto back = read_wav(dir_ / "a.wav");
  EXPECT_EQ(back, quantize_pcm16(w));
  EXPECT_EQ(back.samples[6], 1.0);
  EXPECT_EQ(back.samples[1], std::round(0.5 * 32767) / 32767);
  EXPECT_EQ(std::filesystem::file_size(dir_ / "a.wav"), 44u + 2u * 7u);
}

TEST_F(CorpusFiles, ReadWavRejectsGarbage) {
  std::ofstream(dir_ / "bad.wav") << "not a wav file at all, definitely not";
  EXPECT_THROW(read_wav(dir_ / "bad.wav"), std::runtime_error);
  EXPECT_THROW(read_wav(dir_ / "missing.wav"), std::runtime_error);
}

TEST_F(CorpusFiles, SavedCorpusLoadsBackIdentically) {
  CorpusSpec spec;
  spec.n_utterances = 3;
  spec.n_segments = 4;
  const auto corpus = synth_corpus(spec);
  save_corpus(dir_, corpus);
  const auto manifest = read_manifest(dir_ / "manifest.tsv");
  ASSERT_EQ(manifest.size(), 3u);
  EXPECT_EQ(manifest[1].n_samples, corpus[1].wave.size());
  const auto back = load_corpus(dir_);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].id, corpus[i].id);
    EXPECT_EQ(back[i].wave, corpus[i].wave);
    EXPECT_EQ(back[i].segments, corpus[i].segments);
  }
  EXPECT_EQ(load_corpus(dir_ / "manifest.tsv").size(), 3u);
}

TEST_F(CorpusFiles, MissingWavIsReportedByPath) {
  CorpusSpec spec;
  spec.n_utterances = 2;
  spec.n_segments = 2;
  save_corpus(dir_, synth_corpus(spec));
  const auto manifest = read_manifest(dir_ / "manifest.tsv");
  std::filesystem::remove(dir_ / manifest[1].wav_relpath);
  try {
    load_corpus(dir_);
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(manifest[1].wav_relpath), std::string::npos) << e.what();
  }
}

TEST(Corpus, UtteranceSeedIsCorpusSeedXorIndex) {
  CorpusSpec spec;
  spec.seed = 77;
  spec.n_utterances = 4;
  spec.n_segments = 3;
  const auto corpus = synth_corpus(spec);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_EQ(corpus[i].wave, quantize_pcm16(synth_utterance(77 ^ i, 3, spec.vocab_size).wave));
  EXPECT_NE(train_split_seed(77), eval_split_seed(77));
}

}  // namespace
}  // namespace hvic
