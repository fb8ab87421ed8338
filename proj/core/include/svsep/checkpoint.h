// svsep/checkpoint.h

// Copyright 2026  The svsep Authors

// See LICENSE for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svsep/config.h"
#include "svsep/loss.h"
#include "svsep/separator.h"
#include "svsep/vad.h"

namespace svsep {

// File layout: the 8 bytes "SVSEPCKP", a little-endian u32 format version,
// a little-endian u64 header length, the UTF-8 JSON header, then every
// tensor as little-endian float32 in header order. Each header tensor entry
// is {name, shape, offset} with the offset counted in floats.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

struct CheckpointFile {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

// Writes through a temporary file and renames it into place, so an
// interrupted write leaves any previous file intact.
void write_checkpoint_file(const std::filesystem::path& path, const CheckpointFile& file);
CheckpointFile read_checkpoint_file(const std::filesystem::path& path);

// Optimiser state stored next to the weights for resumption.
struct TrainState {
  TrainConfig config;
  std::int64_t iteration = 0;
  std::string rng_state;  // operator<< text of the sampling engine
  Adam optimizer;
};

void save_separator(const std::filesystem::path& path, const Separator& model,
                    const TrainState* state = nullptr);

struct LoadedSeparator {
  Separator model;
  std::optional<TrainState> state;
};

// Rebuilds the architecture from the stored config and checks every stored
// tensor's name and shape against it.
LoadedSeparator load_separator(const std::filesystem::path& path);

void save_vad(const std::filesystem::path& path, const Vad& vad);
Vad load_vad(const std::filesystem::path& path);

}  // namespace svsep
