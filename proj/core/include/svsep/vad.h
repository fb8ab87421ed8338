// svsep/vad.h

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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "svsep/augment.h"
#include "svsep/ops.h"
#include "svsep/stft.h"

namespace svsep {

enum class SourceTag { vocal, accompaniment };

std::string to_string(SourceTag tag);
SourceTag source_tag_from_string(const std::string& s);

struct VadConfig {
  std::vector<int> conv_channels{16, 32, 64};
  int freq_pool = 4;
  int hidden = 64;
  StftConfig stft;

  void validate() const;
  bool operator==(const VadConfig&) const = default;
};

// Frame-level source-to-mixture energy ratio with the framing of `stft`.
// Each frame's energy is the sum of squared windowed samples. Frames where
// both the source and the remainder (mixture - source) have a
// window-normalised RMS below 1e-4 are 0; other ratios are clipped to
// [0, 1].
std::vector<float> vad_target(const AudioClip& source, const AudioClip& mixture,
                              const StftConfig& stft = {});

inline constexpr double kSilenceRms = 1e-4;

// Convolutional-recurrent detector: three conv blocks with frequency
// pooling, a bidirectional GRU over time and a per-frame linear head.
class Vad {
 public:
  using Param = std::pair<std::string, nn::Var<float>>;
  using Buffer = std::pair<std::string, std::vector<float>*>;

  Vad() = default;
  Vad(VadConfig config, SourceTag target, std::uint64_t seed);

  const VadConfig& config() const { return config_; }
  SourceTag target() const { return target_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  std::vector<Buffer> buffers();
  std::vector<std::pair<std::string, const std::vector<float>*>> buffers() const;

  // log(1 + |STFT|) as [1, 1, frames, bins].
  Tensor<float> features(std::span<const float> signal) const;
  // Per-frame logits [n, 1, frames, 1].
  nn::Var<float> forward(const nn::Var<float>& features, bool training);
  // Evaluation-mode ratios in [0, 1], one per STFT frame.
  std::vector<float> predict(const AudioClip& clip) const;

 private:
  VadConfig config_;
  SourceTag target_ = SourceTag::vocal;
  std::vector<Param> params_;
  std::vector<nn::BatchNormState<float>> norms_;
};

struct VadTrainConfig {
  std::int64_t iterations = 1500;
  int batch = 4;
  double lr = 1e-3;
  double window_seconds = 2.0;
  double p_mix = 0.5;
  Interval gain_db{-20.0, 6.0};
  double p_drop = 0.15;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const VadTrainConfig&) const = default;
};

// Trains a detector for `target` with binary cross-entropy against
// vad_target on randomly windowed, remixed and rescaled labeled songs.
// Throws TrainingError on a non-finite loss.
Vad train_vad(std::span<const SourcePair> labeled, SourceTag target,
              const VadConfig& config, const VadTrainConfig& train);

struct QualityReport {
  std::string song_id;
  int n_frames = 0;
  int poor_frames = 0;
  double poor_fraction = 0.0;
  bool operator==(const QualityReport&) const = default;
};

// The vocal track goes to the accompaniment detector and the accompaniment
// track to the vocal detector; a frame is poor when either predicted
// leakage ratio exceeds tau.
QualityReport count_poor_frames(const AudioClip& vocal_track, const AudioClip& acc_track,
                                const Vad& vad_vocal, const Vad& vad_acc, double tau,
                                const std::string& song_id = {});

// Same decision from precomputed leakage ratios.
QualityReport count_poor_frames(std::span<const float> acc_in_vocal,
                                std::span<const float> vocal_in_acc, double tau,
                                const std::string& song_id = {});

// Song ids of the ceil(top_fraction * N) reports with the lowest
// poor_fraction; ties are broken by song id.
std::vector<std::string> rank_and_filter(std::span<const QualityReport> reports,
                                         double top_fraction);

struct QualityHistogram {
  std::string dataset;
  std::vector<int> counts;  // over poor_fraction bins of width 1/bins
  double mean_poor_fraction = 0.0;
};

std::vector<QualityHistogram> quality_histogram(
    const std::vector<std::pair<std::string, std::vector<QualityReport>>>& datasets,
    int bins = 10);

void write_reports(const std::filesystem::path& path,
                   std::span<const QualityReport> reports);
std::vector<QualityReport> read_reports(const std::filesystem::path& path);

}  // namespace svsep
