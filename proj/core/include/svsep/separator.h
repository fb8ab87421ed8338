// svsep/separator.h

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
#include <string>
#include <utility>
#include <vector>

#include "svsep/ops.h"
#include "svsep/stft.h"

namespace svsep {

struct SeparatorConfig {
  // Channels per U-Net level, finest first; its length is the depth.
  std::vector<int> channels{32, 64, 128, 256};
  int dense_layers = 3;
  int attn_channels = 5;
  int attn_key_dim = 20;
  // Frequency bins per attention band at the level the block runs on.
  int attn_band = 16;
  int pos_k = 10;
  StftConfig stft;

  int levels() const { return int(channels.size()); }
  int input_channels() const { return 2 + pos_k; }
  // Throws ConfigError on an empty or decreasing schedule or a
  // non-positive size.
  void validate() const;
  bool operator==(const SeparatorConfig&) const = default;
};

// Named presets: "toy", "small", "medium", "large". "toy_student" adds a
// level to "toy" the way "large" adds one to "medium".
SeparatorConfig separator_preset(const std::string& name);

// Frequency-positional embedding, f_bins x k, row-major. Entry (f, j) is
// cos(2^j * pi * f / (f_bins - 1)) for j = 0..k-1. The embedding does not
// depend on time, so the frame count only validates the request.
std::vector<double> positional_embedding(int t_frames, int f_bins, int k);

// Complex masks for the two sources.
template <typename T>
struct MaskPair {
  BasicMask<T> vocal;
  BasicMask<T> accompaniment;
};

// U-Net mask estimator. Parameters are held as autograd leaves so the same
// object serves inference and training.
template <typename T>
class BasicSeparator {
 public:
  using Param = std::pair<std::string, nn::Var<T>>;
  using Buffer = std::pair<std::string, std::vector<T>*>;

  BasicSeparator() = default;
  // Deterministic in (config, seed).
  BasicSeparator(SeparatorConfig config, std::uint64_t seed);

  const SeparatorConfig& config() const { return config_; }

  // Trainable tensors in a fixed order.
  const std::vector<Param>& params() const { return params_; }
  std::vector<Param>& params() { return params_; }
  // Batch-norm running statistics (not trainable).
  std::vector<Buffer> buffers();
  std::vector<std::pair<std::string, const std::vector<T>*>> buffers() const;

  std::size_t count_params() const;

  // Network input [n, 2 + k, frames, bins] for a batch of equal-shape
  // mixtures: real part, imaginary part, positional embedding.
  Tensor<T> make_input(const std::vector<const BasicSpectrogram<T>*>& mixtures) const;

  // Raw mask tensor [n, 4, frames, bins], channels (Re, Im) of the vocal
  // mask then (Re, Im) of the accompaniment mask. Training mode uses batch
  // statistics and updates the running statistics.
  nn::Var<T> forward(const nn::Var<T>& input, bool training);

  // Evaluation-mode inference on one mixture without recording a graph.
  MaskPair<T> separate(const BasicSpectrogram<T>& mixture) const;

  template <typename U>
  BasicSeparator<U> cast() const;

  void set_requires_grad(bool on);

 private:
  template <typename U>
  friend class BasicSeparator;

  struct Conv {
    int weight = -1, bias = -1;
  };
  struct Norm {
    int gamma = -1, beta = -1, state = -1;
  };
  struct ConvBn {
    Conv conv;
    Norm norm;
  };
  struct Dense {
    std::vector<ConvBn> layers;
    Conv transition;
  };
  struct Attention {
    Conv q, k, v, out;
  };
  struct Up {
    ConvBn conv;
    Dense dense;
  };

  Conv add_conv(const std::string& name, int c_in, int c_out, int k, bool bias);
  Norm add_norm(const std::string& name, int c);
  Dense add_dense(const std::string& name, int c_in, int c_out);
  Attention add_attention(const std::string& name, int c);

  nn::Var<T> run_conv(const Conv& c, const nn::Var<T>& x, nn::Padding2d pad) const;
  nn::Var<T> run_conv_bn(const ConvBn& c, const nn::Var<T>& x, bool training);
  nn::Var<T> run_dense(const Dense& d, const nn::Var<T>& x, bool training);
  nn::Var<T> run_attention(const Attention& a, const nn::Var<T>& x) const;

  SeparatorConfig config_;
  std::vector<Param> params_;
  std::vector<nn::BatchNormState<T>> norms_;
  std::vector<std::string> norm_names_;
  std::uint64_t init_state_ = 0;

  std::vector<Dense> encoder_;
  std::vector<Up> decoder_;  // decoder_[l] produces level l
  Attention bottleneck_attn_, final_attn_;
  bool has_final_attn_ = false;
  Conv head_;
};

using Separator = BasicSeparator<float>;

// Splits a [1, 4, frames, bins] mask tensor into two masks.
template <typename T>
MaskPair<T> split_masks(const Tensor<T>& raw, int sample = 0);

}  // namespace svsep
