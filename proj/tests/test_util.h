// tests/test_util.h

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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "svsep/audio.h"

namespace svsep::testing {

inline AudioClip sine(double hz, std::size_t n, double amp = 0.5, double phase = 0.0) {
  AudioClip c;
  c.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    c.samples[i] = float(amp * std::sin(2.0 * std::numbers::pi * hz * double(i) / kSampleRate +
                                        phase));
  return c;
}

inline AudioClip noise(std::size_t n, std::uint64_t seed, double amp = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  AudioClip c;
  c.samples.resize(n);
  for (auto& v : c.samples) v = float(u(rng));
  return c;
}

inline double energy(const std::vector<float>& x, std::size_t lo = 0, std::size_t hi = 0) {
  if (hi == 0) hi = x.size();
  double e = 0.0;
  for (std::size_t i = lo; i < hi; ++i) e += double(x[i]) * double(x[i]);
  return e;
}

// Dominant frequency from a zero-padded direct DFT scan between lo and hi Hz.
inline double peak_frequency(const std::vector<float>& x, double lo, double hi,
                             double step = 1.0) {
  double best_f = lo, best = -1.0;
  for (double f = lo; f <= hi; f += step) {
    double re = 0.0, im = 0.0;
    const double w = 2.0 * std::numbers::pi * f / kSampleRate;
    for (std::size_t i = 0; i < x.size(); ++i) {
      re += x[i] * std::cos(w * double(i));
      im -= x[i] * std::sin(w * double(i));
    }
    const double p = re * re + im * im;
    if (p > best) {
      best = p;
      best_f = f;
    }
  }
  return best_f;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("svsep_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace svsep::testing
