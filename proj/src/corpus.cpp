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

#include "hvic/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "hvic/rng.hpp"

namespace hvic {

namespace fs = std::filesystem;

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b.data(), 4);
}

void put_u16(std::ostream& os, std::uint16_t v) {
  const std::array<char, 2> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF)};
  os.write(b.data(), 2);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::int16_t to_pcm(double x) {
  const double c = std::clamp(x, -1.0, 1.0);
  return static_cast<std::int16_t>(std::lround(c * 32767.0));
}

double from_pcm(std::int16_t v) { return static_cast<double>(v) / 32767.0; }

[[noreturn]] void io_error(const std::string& what, const fs::path& path) {
  throw std::runtime_error(what + ": " + path.string());
}

}  // namespace

void write_wav(const fs::path& path, const Waveform& wave) {
  if (wave.sample_rate <= 0) throw std::invalid_argument("write_wav: invalid sample rate");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) io_error("cannot open for writing", path);
  const auto data_bytes = static_cast<std::uint32_t>(wave.size() * 2);
  os.write("RIFF", 4);
  put_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(os, 16);
  put_u16(os, 1);  // PCM
  put_u16(os, 1);  // mono
  put_u32(os, static_cast<std::uint32_t>(wave.sample_rate));
  put_u32(os, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  put_u16(os, 2);
  put_u16(os, 16);
  os.write("data", 4);
  put_u32(os, data_bytes);
  for (double x : wave.samples) put_u16(os, static_cast<std::uint16_t>(to_pcm(x)));
  if (!os) io_error("write failed", path);
}

Waveform read_wav(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) io_error("cannot open WAV file", path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    io_error("not a RIFF/WAVE file", path);

  Waveform wave;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) io_error("truncated WAV chunk", path);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) io_error("malformed fmt chunk", path);
      const std::uint16_t format = get_u16(bytes.data() + body);
      const std::uint16_t channels = get_u16(bytes.data() + body + 2);
      const std::uint16_t bits = get_u16(bytes.data() + body + 14);
      if (format != 1 || channels != 1 || bits != 16) io_error("expected mono 16-bit PCM", path);
      wave.sample_rate = static_cast<int>(get_u32(bytes.data() + body + 4));
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) io_error("data chunk before fmt chunk", path);
      const std::size_t n = size / 2;
      wave.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        wave.samples[i] = from_pcm(static_cast<std::int16_t>(get_u16(bytes.data() + body + 2 * i)));
      return wave;
    }
    pos = body + size + (size & 1);
  }
  io_error("no data chunk", path);
}

Waveform quantize_pcm16(const Waveform& wave) {
  Waveform out = wave;
  for (double& x : out.samples) x = from_pcm(to_pcm(x));
  return out;
}

std::vector<ManifestEntry> read_manifest(const fs::path& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) io_error("cannot open manifest", manifest_path);
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 4)
      throw std::runtime_error(manifest_path.string() + ":" + std::to_string(lineno) +
                               ": expected 4 tab-separated fields");
    ManifestEntry e;
    e.utterance_id = fields[0];
    e.wav_relpath = fields[1];
    try {
      e.n_samples = std::stoull(fields[2]);
    } catch (const std::exception&) {
      throw std::runtime_error(manifest_path.string() + ":" + std::to_string(lineno) + ": bad n_samples");
    }
    e.labels_relpath = fields[3];
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const fs::path& manifest_path, const std::vector<ManifestEntry>& entries) {
  if (manifest_path.has_parent_path()) fs::create_directories(manifest_path.parent_path());
  std::ofstream os(manifest_path);
  if (!os) io_error("cannot open for writing", manifest_path);
  for (const auto& e : entries)
    os << e.utterance_id << '\t' << e.wav_relpath << '\t' << e.n_samples << '\t' << e.labels_relpath << '\n';
}

std::vector<Segment> read_labels(const fs::path& path) {
  std::ifstream is(path);
  if (!is) io_error("cannot open label file", path);
  std::vector<Segment> segs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Segment s;
    if (!(ss >> s.symbol >> s.start >> s.end) || s.end <= s.start)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": malformed segment");
    segs.push_back(s);
  }
  return segs;
}

void write_labels(const fs::path& path, const std::vector<Segment>& segments) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) io_error("cannot open for writing", path);
  for (const auto& s : segments) os << s.symbol << ' ' << s.start << ' ' << s.end << '\n';
}

std::vector<Utterance> synth_corpus(const CorpusSpec& spec, const std::string& id_prefix) {
  std::vector<Utterance> utts;
  utts.reserve(spec.n_utterances);
  for (std::size_t i = 0; i < spec.n_utterances; ++i) {
    Utterance u = synth_utterance(spec.seed ^ static_cast<std::uint64_t>(i), spec.n_segments,
                                  spec.vocab_size, spec.sample_rate);
    std::ostringstream id;
    id << id_prefix << '_' << std::setw(5) << std::setfill('0') << i;
    u.id = id.str();
    u.wave = quantize_pcm16(u.wave);
    utts.push_back(std::move(u));
  }
  return utts;
}

void save_corpus(const fs::path& dir, const std::vector<Utterance>& utts) {
  std::vector<ManifestEntry> entries;
  for (const auto& u : utts) {
    ManifestEntry e{u.id, "wav/" + u.id + ".wav", u.wave.size(), "labels/" + u.id + ".txt"};
    write_wav(dir / e.wav_relpath, u.wave);
    write_labels(dir / e.labels_relpath, u.segments);
    entries.push_back(std::move(e));
  }
  write_manifest(dir / "manifest.tsv", entries);
}

std::vector<Utterance> load_corpus(const fs::path& dir_or_manifest) {
  const fs::path manifest =
      fs::is_directory(dir_or_manifest) ? dir_or_manifest / "manifest.tsv" : dir_or_manifest;
  const fs::path root = manifest.parent_path();
  const auto entries = read_manifest(manifest);
  if (entries.empty()) throw std::runtime_error("empty manifest: " + manifest.string());
  std::vector<Utterance> utts;
  utts.reserve(entries.size());
  for (const auto& e : entries) {
    Utterance u;
    u.id = e.utterance_id;
    u.wave = read_wav(root / e.wav_relpath);
    if (u.wave.size() != e.n_samples)
      throw std::runtime_error("sample count mismatch for " + (root / e.wav_relpath).string());
    u.segments = read_labels(root / e.labels_relpath);
    utts.push_back(std::move(u));
  }
  return utts;
}

std::uint64_t train_split_seed(std::uint64_t corpus_seed) { return corpus_seed; }
std::uint64_t eval_split_seed(std::uint64_t corpus_seed) { return corpus_seed ^ (1ULL << 40); }

}  // namespace hvic
