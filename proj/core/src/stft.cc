// stft.cc

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

#include "svsep/stft.h"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <numbers>
#include <string>

#include "svsep/error.h"

namespace svsep {

void StftConfig::validate() const {
  if (fft_size < 4 || (fft_size & (fft_size - 1)) != 0)
    throw ConfigError("fft_size must be a power of two >= 4, got " +
                      std::to_string(fft_size));
  if (hop <= 0 || hop > fft_size / 2 || (fft_size - hop) % 2 != 0)
    throw ConfigError("hop must be in (0, fft_size/2] with even overlap");
}

template <typename T>
std::vector<T> sqrt_hann(int n) {
  std::vector<T> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    w[std::size_t(i)] = T(std::sqrt(
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i) / double(n))));
  return w;
}

namespace {

// Index into a signal of length n with repeated reflection ("reflect" mode,
// edge sample not duplicated).
long reflect_index(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

template <typename T>
BasicSpectrogram<T> stft(std::span<const T> x, const StftConfig& cfg) {
  cfg.validate();
  if (x.empty()) throw ShapeError("stft of an empty signal");
  const int n_fft = cfg.fft_size;
  const int frames = cfg.frames_for(x.size());
  const long left = cfg.left_pad();
  const long n = long(x.size());
  const auto window = sqrt_hann<T>(n_fft);

  BasicSpectrogram<T> spec(frames, cfg.bins());
  Eigen::FFT<T> fft;
  fft.SetFlag(Eigen::FFT<T>::HalfSpectrum);
  std::vector<T> buf(static_cast<std::size_t>(n_fft));
  std::vector<std::complex<T>> out;
  for (int t = 0; t < frames; ++t) {
    const long start = long(t) * cfg.hop - left;
    for (int m = 0; m < n_fft; ++m)
      buf[std::size_t(m)] =
          window[std::size_t(m)] * x[std::size_t(reflect_index(start + m, n))];
    fft.fwd(out, buf);
    std::copy(out.begin(), out.begin() + cfg.bins(), spec.frame(t).begin());
  }
  return spec;
}

namespace {

template <typename T>
std::vector<T> window_envelope(int frames, const StftConfig& cfg,
                               const std::vector<T>& window) {
  const std::size_t padded =
      std::size_t(frames - 1) * std::size_t(cfg.hop) + std::size_t(cfg.fft_size);
  std::vector<T> env(padded, T(0));
  for (int t = 0; t < frames; ++t)
    for (int m = 0; m < cfg.fft_size; ++m)
      env[std::size_t(t) * std::size_t(cfg.hop) + std::size_t(m)] +=
          window[std::size_t(m)] * window[std::size_t(m)];
  return env;
}

void check_out_len(int frames, std::size_t out_len, const StftConfig& cfg) {
  if (out_len == 0 || cfg.frames_for(out_len) != frames)
    throw ShapeError("istft: output length " + std::to_string(out_len) +
                     " inconsistent with " + std::to_string(frames) +
                     " frames at hop " + std::to_string(cfg.hop));
}

}  // namespace

template <typename T>
std::vector<T> istft(const BasicSpectrogram<T>& spec, std::size_t out_len,
                     const StftConfig& cfg) {
  cfg.validate();
  if (spec.bins != cfg.bins())
    throw ShapeError("istft: spectrogram has " + std::to_string(spec.bins) +
                     " bins, config expects " + std::to_string(cfg.bins()));
  check_out_len(spec.frames, out_len, cfg);
  const int n_fft = cfg.fft_size;
  const auto window = sqrt_hann<T>(n_fft);
  const auto env = window_envelope(spec.frames, cfg, window);
  std::vector<T> ola(env.size(), T(0));

  Eigen::FFT<T> fft;
  fft.SetFlag(Eigen::FFT<T>::HalfSpectrum);
  std::vector<std::complex<T>> half(std::size_t(cfg.bins()));
  std::vector<T> frame;
  for (int t = 0; t < spec.frames; ++t) {
    auto src = spec.frame(t);
    std::copy(src.begin(), src.end(), half.begin());
    half.front().imag(T(0));
    half.back().imag(T(0));
    fft.inv(frame, half, n_fft);
    const std::size_t start = std::size_t(t) * std::size_t(cfg.hop);
    for (int m = 0; m < n_fft; ++m)
      ola[start + std::size_t(m)] += window[std::size_t(m)] * frame[std::size_t(m)];
  }
  std::vector<T> y(out_len);
  const std::size_t left = std::size_t(cfg.left_pad());
  for (std::size_t i = 0; i < out_len; ++i) y[i] = ola[i + left] / env[i + left];
  return y;
}

template <typename T>
BasicSpectrogram<T> istft_adjoint(std::span<const T> grad_wave, int frames,
                                  const StftConfig& cfg) {
  cfg.validate();
  check_out_len(frames, grad_wave.size(), cfg);
  const int n_fft = cfg.fft_size;
  const auto window = sqrt_hann<T>(n_fft);
  const auto env = window_envelope(frames, cfg, window);
  std::vector<T> scaled(env.size(), T(0));
  const std::size_t left = std::size_t(cfg.left_pad());
  for (std::size_t i = 0; i < grad_wave.size(); ++i)
    scaled[i + left] = grad_wave[i] / env[i + left];

  BasicSpectrogram<T> grad(frames, cfg.bins());
  Eigen::FFT<T> fft;
  fft.SetFlag(Eigen::FFT<T>::HalfSpectrum);
  std::vector<T> buf(static_cast<std::size_t>(n_fft));
  std::vector<std::complex<T>> out;
  const T edge = T(1) / T(n_fft);
  const T inner = T(2) / T(n_fft);
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = std::size_t(t) * std::size_t(cfg.hop);
    for (int m = 0; m < n_fft; ++m)
      buf[std::size_t(m)] = window[std::size_t(m)] * scaled[start + std::size_t(m)];
    fft.fwd(out, buf);
    auto dst = grad.frame(t);
    const int last = cfg.bins() - 1;
    for (int k = 0; k <= last; ++k) {
      const bool is_edge = k == 0 || k == last;
      std::complex<T> g = out[std::size_t(k)] * (is_edge ? edge : inner);
      if (is_edge) g.imag(T(0));
      dst[std::size_t(k)] = g;
    }
  }
  return grad;
}

Spectrogram stft(const AudioClip& clip, const StftConfig& cfg) {
  return stft<float>(std::span<const float>(clip.samples), cfg);
}

AudioClip istft(const Spectrogram& spec, std::size_t out_len,
                const StftConfig& cfg) {
  AudioClip clip;
  clip.samples = istft<float>(spec, out_len, cfg);
  return clip;
}

template <typename T>
BasicSpectrogram<T> apply_mask(const BasicSpectrogram<T>& mixture,
                               const BasicMask<T>& mask) {
  if (!mask.same_shape(mixture.frames, mixture.bins))
    throw ShapeError("apply_mask: mask " + std::to_string(mask.frames) + "x" +
                     std::to_string(mask.bins) + " vs spectrogram " +
                     std::to_string(mixture.frames) + "x" +
                     std::to_string(mixture.bins));
  BasicSpectrogram<T> out(mixture.frames, mixture.bins);
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = mask.values[i] * mixture.values[i];
  return out;
}

#define SVSEP_INSTANTIATE_STFT(T)                                              \
  template std::vector<T> sqrt_hann<T>(int);                                   \
  template BasicSpectrogram<T> stft<T>(std::span<const T>, const StftConfig&); \
  template std::vector<T> istft<T>(const BasicSpectrogram<T>&, std::size_t,    \
                                   const StftConfig&);                         \
  template BasicSpectrogram<T> istft_adjoint<T>(std::span<const T>, int,       \
                                                const StftConfig&);            \
  template BasicSpectrogram<T> apply_mask<T>(const BasicSpectrogram<T>&,       \
                                             const BasicMask<T>&);

SVSEP_INSTANTIATE_STFT(float)
SVSEP_INSTANTIATE_STFT(double)

}  // namespace svsep
