// svsep/config.h

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
#include <string>

#include <nlohmann/json.hpp>

#include "svsep/augment.h"
#include "svsep/corpus.h"
#include "svsep/loss.h"
#include "svsep/separator.h"
#include "svsep/vad.h"

namespace svsep {

inline constexpr int kConfigVersion = 1;

struct TrainConfig {
  SeparatorConfig model = separator_preset("medium");
  std::int64_t iterations = 2000;
  int batch = 1;
  AugmentConfig augment;
  LossWeights loss;
  LrSchedule lr;
  std::uint64_t seed = 0;
  int log_every = 50;
  int checkpoint_every = 500;

  static TrainConfig with_preset(const std::string& preset);
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 0;
  bool deterministic = true;
  std::filesystem::path manifest;
  std::filesystem::path run_dir = "runs/default";
  SynthSpec synth;
  TrainConfig teacher = TrainConfig::with_preset("medium");
  TrainConfig student = TrainConfig::with_preset("large");
  double selflabeled_weight = 1.0;
  VadConfig vad;
  VadTrainConfig vad_train;
  double tau = 0.25;
  double top_fraction = 0.25;
  int max_iterations = 1;
  double min_gain_db = 0.1;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// JSON round trip. Parsing rejects unknown keys and a version other than
// kConfigVersion; absent keys keep their defaults. A "preset" key inside a
// model object starts from that preset before applying explicit fields.
nlohmann::json to_json(const SeparatorConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const VadConfig& c);
nlohmann::json to_json(const RunConfig& c);
SeparatorConfig separator_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);
VadConfig vad_config_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);

// Throws ConfigError naming the path when it cannot be read or parsed.
// Relative manifest and run_dir paths resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& config);

}  // namespace svsep
