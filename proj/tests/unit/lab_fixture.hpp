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


// Small in-memory lab shared by the trainer and analysis tests.

#pragma once

#include <vector>

#include "hvic/codebook.hpp"
#include "hvic/corpus.hpp"
#include "hvic/model.hpp"
#include "hvic/trainer.hpp"

namespace hvic::testing {

struct TinyLab {
  TrainingCorpus train;
  TrainingCorpus eval;
  Codebook codebook;
  EncoderConfig encoder;
};

inline Matrix stack_frames(const std::vector<Utterance>& utts, const FeatureExtractor& fx) {
  std::vector<FeatureSequence> feats;
  for (const auto& u : utts) feats.push_back(fx.compute(u));
  const FeatureNormalizer norm = FeatureNormalizer::fit(feats);
  std::size_t n = 0;
  for (const auto& f : feats) n += f.num_frames();
  Matrix all(n, feats.front().dim());
  std::size_t r = 0;
  for (auto& f : feats) {
    norm.apply(f.frames);
    for (std::size_t t = 0; t < f.num_frames(); ++t, ++r)
      std::copy(f.frames.row(t).begin(), f.frames.row(t).end(), all.row(r).begin());
  }
  return all;
}

inline TinyLab make_tiny_lab(std::size_t n_train = 12, std::size_t n_eval = 4) {
  TinyLab lab;
  const FeatureExtractor fx;
  CorpusSpec spec;
  spec.n_segments = 4;
  spec.n_utterances = n_train;
  spec.seed = train_split_seed(7);
  auto train_utts = synth_corpus(spec, "train");
  spec.n_utterances = n_eval;
  spec.seed = eval_split_seed(7);
  auto eval_utts = synth_corpus(spec, "eval");

  std::vector<FeatureSequence> feats;
  for (const auto& u : train_utts) feats.push_back(fx.compute(u));
  const FeatureNormalizer norm = FeatureNormalizer::fit(feats);
  lab.codebook = fit_kmeans(stack_frames(train_utts, fx), 8, 30, 3);
  lab.codebook.normalizer = norm;

  lab.encoder.model_dim = 16;
  lab.encoder.n_blocks = 1;
  lab.encoder.mlp_hidden = 32;
  lab.encoder.k_codewords = 8;
  lab.train = prepare_corpus(std::move(train_utts), lab.codebook, fx);
  lab.eval = prepare_corpus(std::move(eval_utts), lab.codebook, fx);
  return lab;
}

inline TrainConfig tiny_train_config(std::size_t steps) {
  TrainConfig cfg;
  cfg.steps = steps;
  cfg.batch_utterances = 4;
  cfg.adam.learning_rate = 2e-3;
  cfg.vic.n_sample = 64;
  return cfg;
}

}  // namespace hvic::testing
