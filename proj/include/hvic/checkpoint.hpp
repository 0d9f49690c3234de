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


// Binary tensor container for encoder and codebook checkpoints.
//
//   "HVIC"  u32 version  u32 tensor_count
//   per tensor: u32 name_len, name (UTF-8), u32 rank, u32 dims[rank],
//               float32 payload (little-endian, row-major)
//   u32 CRC-32 (zlib polynomial) of every preceding byte
//
// All integers are little-endian.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvic/codebook.hpp"
#include "hvic/model.hpp"

namespace hvic {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t numel() const;
};

std::vector<std::uint8_t> encode_tensors(std::span<const Tensor> tensors);
/// Validates magic, CRC, version and every length; `source` names the input in errors.
std::vector<Tensor> decode_tensors(std::span<const std::uint8_t> bytes, const std::string& source = "checkpoint");

void write_tensors(const std::filesystem::path& path, std::span<const Tensor> tensors);
std::vector<Tensor> read_tensors(const std::filesystem::path& path);

/// Parameters in layout order plus a "meta.arch" tensor holding
/// {feature_dim, model_dim, n_blocks, mlp_hidden, k_codewords}.
std::vector<Tensor> encoder_tensors(const EncoderState& state);
/// Shapes come from meta.arch; masking settings are taken from `base`.
EncoderState encoder_from_tensors(std::span<const Tensor> tensors, const EncoderConfig& base = {});

void save_checkpoint(const EncoderState& state, const std::filesystem::path& path);
EncoderState load_encoder(const std::filesystem::path& path, const EncoderConfig& base = {});

/// "codebook.centroids" (k x F), "codebook.norm_mean" and "codebook.norm_std" (F).
void save_checkpoint(const Codebook& cb, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

/// Rounds centroids and normalizer through float32, as a save/load would.
void round_to_float32(Codebook& cb);

}  // namespace hvic
