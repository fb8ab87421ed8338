// svsep/stft.h

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

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "svsep/audio.h"

namespace svsep {

// Analysis parameters. The default is the 1024-point / hop-256 transform used
// for all full-size models; reduced configs exist for fast toy experiments.
struct StftConfig {
  int fft_size = 1024;
  int hop = 256;

  int bins() const { return fft_size / 2 + 1; }
  // Reflective padding before the first sample.
  int left_pad() const { return (fft_size - hop) / 2; }
  // Frames for a signal of `n` samples: ceil(n / hop).
  int frames_for(std::size_t n) const {
    return int((n + std::size_t(hop) - 1) / std::size_t(hop));
  }
  void validate() const;
  bool operator==(const StftConfig&) const = default;
};

// Row-major frames x bins complex array. The tag distinguishes spectrograms
// from masks, which share the layout but not the meaning.
template <typename T, typename Tag>
struct ComplexGrid {
  int frames = 0;
  int bins = 0;
  std::vector<std::complex<T>> values;

  ComplexGrid() = default;
  ComplexGrid(int t, int f)
      : frames(t), bins(f), values(std::size_t(t) * std::size_t(f)) {}

  std::complex<T>& at(int t, int f) {
    return values[std::size_t(t) * std::size_t(bins) + std::size_t(f)];
  }
  const std::complex<T>& at(int t, int f) const {
    return values[std::size_t(t) * std::size_t(bins) + std::size_t(f)];
  }
  std::span<std::complex<T>> frame(int t) {
    return {values.data() + std::size_t(t) * std::size_t(bins),
            std::size_t(bins)};
  }
  std::span<const std::complex<T>> frame(int t) const {
    return {values.data() + std::size_t(t) * std::size_t(bins),
            std::size_t(bins)};
  }
  bool same_shape(int t, int f) const { return frames == t && bins == f; }
};

struct SpectrogramTag {};
struct MaskTag {};

template <typename T>
using BasicSpectrogram = ComplexGrid<T, SpectrogramTag>;
template <typename T>
using BasicMask = ComplexGrid<T, MaskTag>;

using Spectrogram = BasicSpectrogram<float>;
using ComplexMask = BasicMask<float>;

// Periodic square-root Hann window of length n.
template <typename T>
std::vector<T> sqrt_hann(int n);

// Short-time Fourier transform with reflective center padding; frame t
// starts at sample t * hop - left_pad. Throws ShapeError for empty input.
template <typename T>
BasicSpectrogram<T> stft(std::span<const T> x, const StftConfig& cfg = {});

// Weighted overlap-add inverse, normalised by the squared-window envelope so
// that istft(stft(x), len(x)) == x. `out_len` must satisfy
// ceil(out_len / hop) == spec.frames.
template <typename T>
std::vector<T> istft(const BasicSpectrogram<T>& spec, std::size_t out_len,
                     const StftConfig& cfg = {});

// Adjoint of istft: maps a gradient with respect to the output waveform to a
// gradient with respect to the spectrogram, using the convention
// dL/dRe + i dL/dIm for every bin.
template <typename T>
BasicSpectrogram<T> istft_adjoint(std::span<const T> grad_wave, int frames,
                                  const StftConfig& cfg = {});

Spectrogram stft(const AudioClip& clip, const StftConfig& cfg = {});
AudioClip istft(const Spectrogram& spec, std::size_t out_len,
                const StftConfig& cfg = {});

// Elementwise complex product mask * mixture.
template <typename T>
BasicSpectrogram<T> apply_mask(const BasicSpectrogram<T>& mixture,
                               const BasicMask<T>& mask);

}  // namespace svsep
