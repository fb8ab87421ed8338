// svsep/ops.h

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

#include <span>
#include <vector>

#include "svsep/autograd.h"

// Differentiable operations on NCHW tensors. Every op is instantiated for
// float (training, inference) and double (gradient verification).
namespace svsep::nn {

// Zero padding per side; `top` pads the past edge of the time axis.
struct Padding2d {
  int top = 0, bottom = 0, left = 0, right = 0;
};

// Running statistics used by batch normalisation in evaluation mode.
template <typename T>
struct BatchNormState {
  std::vector<T> running_mean;
  std::vector<T> running_var;
};

// weight: [c_out, c_in, kh, kw]; bias: [1, c_out, 1, 1] or undefined.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              Padding2d pad);

// gamma, beta: [1, c, 1, 1]. Training mode normalises with batch statistics
// over (n, h, w) and updates `state`; evaluation mode uses `state`.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  BatchNormState<T>& state, bool training,
                  double momentum = 0.1, double eps = 1e-5);

template <typename T>
Var<T> relu(const Var<T>& x);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> xs);

// 2x2 average pooling. Pooled frame t' averages input frames 2t'-1 and 2t',
// so nothing after frame 2t' contributes. Output is ceil(h/2) x ceil(w/2);
// out-of-range cells are excluded from the average.
template <typename T>
Var<T> causal_pool2(const Var<T>& x);

// Nearest-neighbour 2x upsampling cropped to h x w: y[t][f] = x[t/2][f/2].
template <typename T>
Var<T> upsample2(const Var<T>& x, int h, int w);

// Average pooling of `factor` adjacent frequency bins (ceil output width).
template <typename T>
Var<T> freq_pool(const Var<T>& x, int factor);

// Masked self-attention along time, computed independently per frequency
// band of `band` bins. q, k: [n, ck, t, f]; v: [n, cv, t, f]. Frame t
// attends to frames <= t only; the score of frames t and s is the dot
// product of q and k flattened over (channel, band bin), scaled by
// 1/sqrt(ck * band_width).
template <typename T>
Var<T> causal_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                        int band);

// [n, c, t, f] -> [n, 1, t, c*f] (per-frame feature vectors).
template <typename T>
Var<T> frames_to_features(const Var<T>& x);

// Per-frame affine map over the last axis. x: [n, 1, t, d];
// weight: [o, d, 1, 1]; bias: [1, o, 1, 1]. Result: [n, 1, t, o].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

// Concatenation along the last axis of [n, 1, t, d] tensors.
template <typename T>
Var<T> concat_features(const Var<T>& a, const Var<T>& b);

template <typename T>
struct GruWeights {
  Var<T> w_ih;  // [3h, d, 1, 1], gate order r, z, n
  Var<T> w_hh;  // [3h, h, 1, 1]
  Var<T> b_ih;  // [1, 3h, 1, 1]
  Var<T> b_hh;  // [1, 3h, 1, 1]
};

// Single-layer GRU over the time axis of x: [n, 1, t, d] -> [n, 1, t, h].
// With `reverse` the sequence is processed from the last frame backwards.
template <typename T>
Var<T> gru(const Var<T>& x, const GruWeights<T>& w, bool reverse);

template <typename T>
Var<T> sigmoid(const Var<T>& x);

// Mean binary cross-entropy between sigmoid(logits) and targets in [0, 1].
template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, const Tensor<T>& targets);

}  // namespace svsep::nn
