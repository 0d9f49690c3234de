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

#include "hvic/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hvic/rng.hpp"

namespace hvic {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

std::size_t nearest(ConstMatView centroids, std::span<const double> x, double* dist_out = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    const double d = sq_dist(centroids.row(c), x);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist_out) *dist_out = best_d;
  return best;
}

Matrix kmeanspp_init(ConstMatView frames, std::size_t k, Rng& rng) {
  const std::size_t n = frames.rows;
  Matrix centroids(k, frames.cols);
  const std::size_t first = rng.uniform_int(n);
  std::copy(frames.row(first).begin(), frames.row(first).end(), centroids.row(0).begin());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(frames.row(i), centroids.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    if (total <= 0.0)
      throw std::invalid_argument("fit_kmeans: fewer than k distinct points (k=" + std::to_string(k) + ")");
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      pick = i;
      if (acc > target) break;
    }
    std::copy(frames.row(pick).begin(), frames.row(pick).end(), centroids.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(frames.row(i), centroids.row(c)));
  }
  return centroids;
}

}  // namespace

void FeatureNormalizer::apply(Matrix& frames) const {
  if (empty()) return;
  if (frames.cols() != mean.size()) throw std::invalid_argument("FeatureNormalizer: dimension mismatch");
  for (std::size_t t = 0; t < frames.rows(); ++t) {
    auto r = frames.row(t);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - mean[j]) / stddev[j];
  }
}

FeatureSequence FeatureNormalizer::apply(FeatureSequence feats) const {
  apply(feats.frames);
  return feats;
}

FeatureNormalizer FeatureNormalizer::fit(std::span<const FeatureSequence> feats) {
  if (feats.empty()) throw std::invalid_argument("FeatureNormalizer::fit: no features");
  const std::size_t dim = feats.front().dim();
  FeatureNormalizer out;
  out.mean.assign(dim, 0.0);
  out.stddev.assign(dim, 0.0);
  std::size_t count = 0;
  for (const auto& f : feats) {
    if (f.dim() != dim) throw std::invalid_argument("FeatureNormalizer::fit: dimension mismatch");
    for (std::size_t t = 0; t < f.num_frames(); ++t)
      for (std::size_t j = 0; j < dim; ++j) out.mean[j] += f.frames(t, j);
    count += f.num_frames();
  }
  if (count == 0) throw std::invalid_argument("FeatureNormalizer::fit: no frames");
  for (double& m : out.mean) m /= static_cast<double>(count);
  for (const auto& f : feats)
    for (std::size_t t = 0; t < f.num_frames(); ++t)
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = f.frames(t, j) - out.mean[j];
        out.stddev[j] += d * d;
      }
  for (double& s : out.stddev) {
    s = std::sqrt(s / static_cast<double>(count));
    if (!(s > 0.0)) s = 1.0;
  }
  return out;
}

Codebook fit_kmeans(ConstMatView frames, std::size_t k, std::size_t max_iters, std::uint64_t seed,
                    std::vector<double>* inertia_trace) {
  const std::size_t n = frames.rows;
  if (k < 2) throw std::invalid_argument("fit_kmeans: k must be >= 2");
  if (n < k)
    throw std::invalid_argument("fit_kmeans: need at least k points (N=" + std::to_string(n) +
                                ", k=" + std::to_string(k) + ")");
  if (!all_finite({frames.data, frames.size()})) throw std::invalid_argument("fit_kmeans: non-finite frames");

  Rng rng(seed);
  Codebook cb;
  cb.centroids = kmeanspp_init(frames, k, rng);
  const std::size_t dim = frames.cols;

  std::vector<std::size_t> labels(n);
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = nearest(cb.centroids, frames.row(i), &dist[i]);

  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  for (std::size_t it = 0; it < max_iters; ++it) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = frames.row(i);
      double* s = sums.data() + labels[i] * dim;
      for (std::size_t j = 0; j < dim; ++j) s[j] += r[j];
      ++counts[labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      auto row = cb.centroids.row(c);
      for (std::size_t j = 0; j < dim; ++j) row[j] = sums[c * dim + j] / static_cast<double>(counts[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = sq_dist(frames.row(i), cb.centroids.row(labels[i]));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      std::copy(frames.row(far).begin(), frames.row(far).end(), cb.centroids.row(c).begin());
      --counts[labels[far]];
      labels[far] = c;
      ++counts[c];
    }

    bool changed = false;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0.0;
      const std::size_t l = nearest(cb.centroids, frames.row(i), &d);
      if (l != labels[i]) {
        changed = true;
        labels[i] = l;
      }
      total += d;
    }
    if (inertia_trace) inertia_trace->push_back(total);
    if (!changed) break;
  }
  cb.inertia = inertia(cb, frames);
  return cb;
}

std::vector<int> assign(const Codebook& cb, ConstMatView frames) {
  if (frames.cols != cb.feature_dim())
    throw std::invalid_argument("assign: feature dimension " + std::to_string(frames.cols) +
                                " does not match codebook dimension " + std::to_string(cb.feature_dim()));
  std::vector<int> out(frames.rows);
  for (std::size_t i = 0; i < frames.rows; ++i) out[i] = static_cast<int>(nearest(cb.centroids, frames.row(i)));
  return out;
}

std::vector<int> assign(const Codebook& cb, const FeatureSequence& feats) { return assign(cb, feats.frames); }

double inertia(const Codebook& cb, ConstMatView frames) {
  double total = 0.0;
  for (std::size_t i = 0; i < frames.rows; ++i) {
    double d = 0.0;
    nearest(cb.centroids, frames.row(i), &d);
    total += d;
  }
  return total;
}

namespace {

std::vector<std::size_t> confusion(std::span<const int> codewords, std::span<const int> units, std::size_t k,
                                   std::size_t vocab) {
  if (codewords.size() != units.size()) throw std::invalid_argument("confusion: length mismatch");
  std::vector<std::size_t> conf(k * vocab, 0);
  for (std::size_t i = 0; i < codewords.size(); ++i) {
    const auto c = static_cast<std::size_t>(codewords[i]);
    const auto u = static_cast<std::size_t>(units[i]);
    if (c >= k || u >= vocab) throw std::invalid_argument("confusion: label out of range");
    ++conf[c * vocab + u];
  }
  return conf;
}

}  // namespace

double cluster_purity(std::span<const int> codewords, std::span<const int> units, std::size_t k,
                      std::size_t vocab) {
  const auto conf = confusion(codewords, units, k, vocab);
  std::size_t hit = 0;
  for (std::size_t c = 0; c < k; ++c)
    hit += *std::max_element(conf.begin() + static_cast<std::ptrdiff_t>(c * vocab),
                             conf.begin() + static_cast<std::ptrdiff_t>((c + 1) * vocab));
  return codewords.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(codewords.size());
}

double matched_accuracy(std::span<const int> codewords, std::span<const int> units, std::size_t k,
                        std::size_t vocab) {
  const auto conf = confusion(codewords, units, k, vocab);
  if (codewords.empty()) return 0.0;
  const std::size_t m = std::min(k, vocab);
  std::size_t best = 0;
  if (k == vocab && k <= 9) {
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      std::size_t hit = 0;
      for (std::size_t c = 0; c < k; ++c) hit += conf[c * vocab + perm[c]];
      best = std::max(best, hit);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    std::vector<bool> used_c(k, false), used_u(vocab, false);
    for (std::size_t step = 0; step < m; ++step) {
      std::size_t bc = 0, bu = 0, bv = 0;
      bool found = false;
      for (std::size_t c = 0; c < k; ++c)
        for (std::size_t u = 0; u < vocab; ++u)
          if (!used_c[c] && !used_u[u] && (!found || conf[c * vocab + u] > bv)) {
            bc = c;
            bu = u;
            bv = conf[c * vocab + u];
            found = true;
          }
      used_c[bc] = used_u[bu] = true;
      best += bv;
    }
  }
  return static_cast<double>(best) / static_cast<double>(codewords.size());
}

Codebook fit_codebook(std::span<const Utterance> utts, const FeatureExtractor& fx, std::size_t k,
                      std::size_t max_iters, std::uint64_t seed) {
  if (utts.empty()) throw std::invalid_argument("fit_codebook: empty corpus");
  std::vector<FeatureSequence> feats;
  std::size_t n = 0;
  for (const auto& u : utts) {
    feats.push_back(fx.compute(u.wave));
    n += feats.back().num_frames();
  }
  const FeatureNormalizer norm = FeatureNormalizer::fit(feats);
  Matrix pooled(n, feats.front().dim());
  std::size_t r = 0;
  for (auto& f : feats) {
    norm.apply(f.frames);
    for (std::size_t t = 0; t < f.num_frames(); ++t, ++r)
      std::copy(f.frames.row(t).begin(), f.frames.row(t).end(), pooled.row(r).begin());
  }
  Codebook cb = fit_kmeans(pooled, k, max_iters, seed);
  cb.normalizer = norm;
  return cb;
}

}  // namespace hvic
