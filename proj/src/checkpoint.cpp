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


#include "hvic/checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "hvic/csv.hpp"

namespace hvic {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'H', 'V', 'I', 'C'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) throw CheckpointError(source_ + ": truncated while reading " + what);
  }

  std::span<const std::uint8_t> bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

Tensor vector_tensor(std::string name, std::span<const double> v) {
  Tensor t{std::move(name), {static_cast<std::uint32_t>(v.size())}, {}};
  for (double x : v) t.data.push_back(static_cast<float>(x));
  return t;
}

const Tensor& find(std::span<const Tensor> tensors, const std::string& name) {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw CheckpointError("missing tensor '" + name + "'");
}

void expect_numel(const Tensor& t, std::size_t n) {
  if (t.numel() != n)
    throw CheckpointError("tensor '" + t.name + "' has " + std::to_string(t.numel()) + " values, expected " +
                          std::to_string(n));
}

}  // namespace

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<std::uint8_t> encode_tensors(std::span<const Tensor> tensors) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.numel() != t.data.size()) throw std::invalid_argument("tensor '" + t.name + "' dims do not match data");
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put_u32(out, d);
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.data.data());
    out.insert(out.end(), p, p + t.data.size() * sizeof(float));
  }
  put_u32(out, crc_of(out));
  return out;
}

std::vector<Tensor> decode_tensors(std::span<const std::uint8_t> bytes, const std::string& source) {
  if (bytes.size() < 16) throw CheckpointError(source + ": truncated (" + std::to_string(bytes.size()) + " bytes)");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw CheckpointError(source + ": bad magic, not an HVIC file");
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4), source);
  if (tail.u32("crc") != crc_of(body)) throw CheckpointError(source + ": CRC mismatch (corrupt or truncated file)");

  Reader r(body, source);
  r.take(4, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw CheckpointError(source + ": unsupported version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  const std::uint32_t count = r.u32("tensor count");
  std::vector<Tensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t;
    const auto name = r.take(r.u32("name length"), "name");
    t.name.assign(name.begin(), name.end());
    const std::uint32_t rank = r.u32("rank");
    for (std::uint32_t k = 0; k < rank; ++k) t.dims.push_back(r.u32("dims"));
    const std::size_t n = t.numel();
    if (n > r.remaining() / sizeof(float)) throw CheckpointError(source + ": truncated payload of '" + t.name + "'");
    const auto payload = r.take(n * sizeof(float), "payload");
    t.data.resize(n);
    std::memcpy(t.data.data(), payload.data(), payload.size());
    out.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw CheckpointError(source + ": trailing bytes after the last tensor");
  return out;
}

void write_tensors(const std::filesystem::path& path, std::span<const Tensor> tensors) {
  const auto bytes = encode_tensors(tensors);
  auto out = open_output(path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<Tensor> read_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensors(bytes, path.string());
}

std::vector<Tensor> encoder_tensors(const EncoderState& state) {
  const auto& c = state.config();
  std::vector<Tensor> out;
  out.push_back(Tensor{"meta.arch",
                       {5},
                       {static_cast<float>(c.feature_dim), static_cast<float>(c.model_dim),
                        static_cast<float>(c.n_blocks), static_cast<float>(c.mlp_hidden),
                        static_cast<float>(c.k_codewords)}});
  for (std::size_t i = 0; i < state.layout().size(); ++i) {
    const auto& s = state.layout()[i];
    const auto v = state.tensor(i);
    Tensor t{s.name, {}, {}};
    if (s.rows == 1)
      t.dims = {static_cast<std::uint32_t>(s.cols)};
    else
      t.dims = {static_cast<std::uint32_t>(s.rows), static_cast<std::uint32_t>(s.cols)};
    for (std::size_t r = 0; r < v.rows; ++r)
      for (std::size_t j = 0; j < v.cols; ++j) t.data.push_back(static_cast<float>(v(r, j)));
    out.push_back(std::move(t));
  }
  return out;
}

EncoderState encoder_from_tensors(std::span<const Tensor> tensors, const EncoderConfig& base) {
  const Tensor& arch = find(tensors, "meta.arch");
  expect_numel(arch, 5);
  EncoderConfig cfg = base;
  cfg.feature_dim = static_cast<std::size_t>(arch.data[0]);
  cfg.model_dim = static_cast<std::size_t>(arch.data[1]);
  cfg.n_blocks = static_cast<std::size_t>(arch.data[2]);
  cfg.mlp_hidden = static_cast<std::size_t>(arch.data[3]);
  cfg.k_codewords = static_cast<std::size_t>(arch.data[4]);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("meta.arch: ") + e.what());
  }
  EncoderState state(cfg);
  if (tensors.size() != state.layout().size() + 1)
    throw CheckpointError("expected " + std::to_string(state.layout().size() + 1) + " tensors, found " +
                          std::to_string(tensors.size()));
  for (std::size_t i = 0; i < state.layout().size(); ++i) {
    const auto& s = state.layout()[i];
    const Tensor& t = find(tensors, s.name);
    expect_numel(t, s.size());
    auto dst = state.params().subspan(s.offset, s.size());
    std::copy(t.data.begin(), t.data.end(), dst.begin());
  }
  return state;
}

void save_checkpoint(const EncoderState& state, const std::filesystem::path& path) {
  write_tensors(path, encoder_tensors(state));
}

EncoderState load_encoder(const std::filesystem::path& path, const EncoderConfig& base) {
  const auto tensors = read_tensors(path);
  try {
    return encoder_from_tensors(tensors, base);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

void save_checkpoint(const Codebook& cb, const std::filesystem::path& path) {
  if (cb.normalizer.empty()) throw std::invalid_argument("codebook has no feature normalizer");
  Tensor c{"codebook.centroids",
           {static_cast<std::uint32_t>(cb.k()), static_cast<std::uint32_t>(cb.feature_dim())},
           {}};
  for (double x : cb.centroids.values()) c.data.push_back(static_cast<float>(x));
  const std::vector<Tensor> tensors = {std::move(c), vector_tensor("codebook.norm_mean", cb.normalizer.mean),
                                       vector_tensor("codebook.norm_std", cb.normalizer.stddev)};
  write_tensors(path, tensors);
}

Codebook load_codebook(const std::filesystem::path& path) {
  const auto tensors = read_tensors(path);
  try {
    const Tensor& c = find(tensors, "codebook.centroids");
    if (c.dims.size() != 2 || c.dims[0] == 0 || c.dims[1] == 0)
      throw CheckpointError("codebook.centroids must be a non-empty k x F matrix");
    const std::size_t k = c.dims[0], f = c.dims[1];
    const Tensor& mean = find(tensors, "codebook.norm_mean");
    const Tensor& sd = find(tensors, "codebook.norm_std");
    expect_numel(mean, f);
    expect_numel(sd, f);
    Codebook cb;
    cb.centroids = Matrix(k, f);
    std::copy(c.data.begin(), c.data.end(), cb.centroids.values().begin());
    cb.normalizer.mean.assign(mean.data.begin(), mean.data.end());
    cb.normalizer.stddev.assign(sd.data.begin(), sd.data.end());
    return cb;
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

void round_to_float32(Codebook& cb) {
  auto round = [](double& x) { x = static_cast<double>(static_cast<float>(x)); };
  std::for_each(cb.centroids.values().begin(), cb.centroids.values().end(), round);
  std::for_each(cb.normalizer.mean.begin(), cb.normalizer.mean.end(), round);
  std::for_each(cb.normalizer.stddev.begin(), cb.normalizer.stddev.end(), round);
}

}  // namespace hvic
