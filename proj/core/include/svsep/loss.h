// svsep/loss.h

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
#include <span>
#include <vector>

#include "svsep/audio.h"
#include "svsep/separator.h"
#include "svsep/stft.h"

namespace svsep {

struct LossWeights {
  double audio = 1.0;
  double spec = 1.0;
  double vocal = 1.0;
  double accompaniment = 1.0;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

// Piecewise-constant halving. The rate halves every `halve_every`
// iterations but stops at the last value that is still >= floor.
struct LrSchedule {
  double initial = 1e-4;
  std::int64_t halve_every = 100000;
  double floor = 1e-6;

  void validate() const;
  bool operator==(const LrSchedule&) const = default;
};

double lr_at(const LrSchedule& schedule, std::int64_t iteration);

// lambda_audio * mean|y - y_ref| + lambda_spec * mean||Y| - |Y_ref||, with
// Y = STFT(y). Throws ShapeError on a length mismatch.
double source_loss(std::span<const float> y, std::span<const float> y_ref,
                   const LossWeights& weights, const StftConfig& stft = {});

// lambda_vocal * source_loss(vocal) + lambda_acc * source_loss(acc).
double total_loss(const SourcePair& estimate, const SourcePair& reference,
                  const LossWeights& weights, const StftConfig& stft = {});

// One supervised example prepared for the masked loss: mixture spectrogram,
// target waveforms, and target STFT magnitudes (frames x bins).
template <typename T>
struct BasicTrainItem {
  BasicSpectrogram<T> mixture;
  std::vector<T> vocal, accompaniment;
  std::vector<T> vocal_mag, accompaniment_mag;

  std::size_t samples() const { return vocal.size(); }
};

using TrainItem = BasicTrainItem<float>;

// The mixture is vocal + accompaniment of `target`.
template <typename T>
BasicTrainItem<T> make_train_item(const SourcePair& target, const StftConfig& stft);

// Mean over the batch of the two-source loss for masks produced by the
// separator. raw_masks: [n, 4, frames, bins]. The waveform term uses
// istft(mask * mixture); the spectral term uses |mask * mixture|.
template <typename T>
nn::Var<T> separation_loss(const nn::Var<T>& raw_masks,
                           std::span<const BasicTrainItem<T>> batch,
                           const LossWeights& weights, const StftConfig& stft);

// Training-mode forward, loss and backward. Gradients accumulate into the
// separator's parameter grad buffers, which are cleared first.
template <typename T>
double loss_and_gradient(BasicSeparator<T>& model,
                         std::span<const BasicTrainItem<T>> batch,
                         const LossWeights& weights);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over an ordered list of float tensors. The moment buffers follow the
// parameter order; `step` counts applied updates.
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig config) : config_(config) {}

  // Applies one update from each parameter's grad buffer. Parameters with
  // no gradient are treated as having a zero gradient.
  void step(std::span<nn::Var<float>> params, double lr);
  template <typename Named>
  void step_named(std::vector<Named>& named, double lr) {
    std::vector<nn::Var<float>> v;
    v.reserve(named.size());
    for (auto& p : named) v.push_back(p.second);
    step(v, lr);
  }

  std::int64_t steps() const { return steps_; }
  std::vector<std::vector<float>>& first_moment() { return m_; }
  std::vector<std::vector<float>>& second_moment() { return v_; }
  const std::vector<std::vector<float>>& first_moment() const { return m_; }
  const std::vector<std::vector<float>>& second_moment() const { return v_; }
  void set_steps(std::int64_t s) { steps_ = s; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<std::vector<float>> m_, v_;
  std::int64_t steps_ = 0;
};

// Full update: loss_and_gradient, finiteness check, Adam step at
// lr_at(schedule, iteration). On a non-finite loss or gradient throws
// TrainingError; parameters, moments and running statistics are left as
// they were before the call.
double train_step(Separator& model, Adam& optimizer,
                  std::span<const TrainItem> batch, const LossWeights& weights,
                  const LrSchedule& schedule, std::int64_t iteration);

}  // namespace svsep
