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

// On-disk corpus: 16-bit PCM WAV files, a TSV manifest and per-utterance
// segment label files.
//
//   manifest.tsv   utterance_id <TAB> wav_relpath <TAB> n_samples <TAB> labels_relpath
//   labels file    one line per segment: symbol_id start_sample end_sample

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hvic/signal.hpp"

namespace hvic {

/// Mono 16-bit little-endian PCM. Samples are clamped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& wave);
Waveform read_wav(const std::filesystem::path& path);

/// Rounds samples through 16-bit PCM, exactly as a write_wav/read_wav round trip.
Waveform quantize_pcm16(const Waveform& wave);

struct ManifestEntry {
  std::string utterance_id;
  std::string wav_relpath;
  std::size_t n_samples = 0;
  std::string labels_relpath;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const std::filesystem::path& manifest_path, const std::vector<ManifestEntry>& entries);

std::vector<Segment> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<Segment>& segments);

struct CorpusSpec {
  std::uint64_t seed = 1234;
  std::size_t n_utterances = 200;
  std::size_t n_segments = 8;
  std::size_t vocab_size = 8;
  int sample_rate = 16000;
};

/// Utterance i uses seed (spec.seed XOR i). Samples are PCM16-quantized so
/// in-memory and on-disk corpora are identical.
std::vector<Utterance> synth_corpus(const CorpusSpec& spec, const std::string& id_prefix = "utt");

/// Writes wav/, labels/ and manifest.tsv under `dir`.
void save_corpus(const std::filesystem::path& dir, const std::vector<Utterance>& utts);

/// Loads `dir`/manifest.tsv (or a manifest path directly). Missing files
/// raise std::runtime_error naming the path.
std::vector<Utterance> load_corpus(const std::filesystem::path& dir_or_manifest);

/// Seed bases for the train and eval splits; the eval range never overlaps
/// the train range for corpora below 2^40 utterances.
std::uint64_t train_split_seed(std::uint64_t corpus_seed);
std::uint64_t eval_split_seed(std::uint64_t corpus_seed);

}  // namespace hvic
