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

// k-means pseudo-labeler: the codeword targets for masked prediction.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hvic/numerics.hpp"
#include "hvic/signal.hpp"

namespace hvic {

/// Per-channel mean/std standardization estimated on clean features.
struct FeatureNormalizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool empty() const { return mean.empty(); }
  void apply(Matrix& frames) const;
  FeatureSequence apply(FeatureSequence feats) const;

  /// Stats pooled over every frame; channels with zero spread get std 1.
  static FeatureNormalizer fit(std::span<const FeatureSequence> feats);
};

struct Codebook {
  Matrix centroids;  // k x F
  double inertia = 0.0;
  /// Input standardization the centroids live under; empty means identity.
  FeatureNormalizer normalizer;

  std::size_t k() const { return centroids.rows(); }
  std::size_t feature_dim() const { return centroids.cols(); }
};

/// Lloyd iterations from a k-means++ start. Stops after `max_iters` or when
/// no assignment changes. An emptied cluster is re-seeded with the point
/// farthest from its current centroid. `inertia_trace`, when given, receives
/// the inertia after every iteration.
Codebook fit_kmeans(ConstMatView frames, std::size_t k, std::size_t max_iters, std::uint64_t seed,
                    std::vector<double>* inertia_trace = nullptr);

/// Fits the normalizer on the corpus' clean features, then k-means on the
/// normalized frames; the normalizer is stored in the returned codebook.
Codebook fit_codebook(std::span<const Utterance> utts, const FeatureExtractor& fx, std::size_t k,
                      std::size_t max_iters, std::uint64_t seed);

/// Nearest centroid (squared Euclidean) per row, ties to the lowest index.
std::vector<int> assign(const Codebook& cb, ConstMatView frames);
std::vector<int> assign(const Codebook& cb, const FeatureSequence& feats);

/// Sum of squared distances to the assigned centroids.
double inertia(const Codebook& cb, ConstMatView frames);

/// Fraction of frames whose codeword maps to the right unit under the best
/// many-to-one (majority-vote) mapping from codewords to units.
double cluster_purity(std::span<const int> codewords, std::span<const int> units, std::size_t k,
                      std::size_t vocab);

/// Best one-to-one matching accuracy between codewords and units (k == vocab
/// case); exhaustive over permutations for small k, greedy otherwise.
double matched_accuracy(std::span<const int> codewords, std::span<const int> units, std::size_t k,
                        std::size_t vocab);

}  // namespace hvic
