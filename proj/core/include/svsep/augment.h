// svsep/augment.h

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

#include <random>
#include <span>

#include "svsep/audio.h"

namespace svsep {

using Rng = std::mt19937_64;

// Closed interval; lo == hi pins the value.
struct Interval {
  double lo = 0.0, hi = 0.0;
  double sample(Rng& rng) const;
  bool operator==(const Interval&) const = default;
};

struct AugmentConfig {
  double window_seconds = 2.5;
  double p_mix = 1.0;
  Interval gain_db{-6.0, 6.0};
  Interval pitch_semitones{-2.0, 2.0};
  Interval lowpass_hz{2000.0, 7999.0};
  Interval eq_center_hz{100.0, 6000.0};
  Interval eq_gain_db{-9.0, 9.0};
  Interval eq_q{0.5, 2.0};
  double p_pitch = 0.5;
  double p_lowpass = 0.5;
  double p_eq = 0.5;

  // Disables everything except windowing.
  static AugmentConfig none(double window_seconds);
  void validate() const;
  bool operator==(const AugmentConfig&) const = default;
};

// Cuts both tracks at the same uniformly drawn offset. The window length is
// round(seconds * 16000). Throws ShapeError if the pair is shorter.
SourcePair random_window(const SourcePair& pair, double seconds, Rng& rng);

// With probability p returns (vocal of a, accompaniment of b), else a.
SourcePair random_mix(const SourcePair& a, const SourcePair& b, double p, Rng& rng);

SourcePair scale_sources(const SourcePair& pair, double gain_vocal_db,
                         double gain_acc_db);

// Duration-preserving pitch shift by 2^(semitones/12): phase-vocoder time
// stretch followed by band-limited resampling.
AudioClip pitch_shift(const AudioClip& clip, double semitones);

// Zero-phase order-8 Butterworth lowpass. Requires 0 < cutoff < 8000.
AudioClip lowpass(const AudioClip& clip, double cutoff_hz);

// Peaking-EQ biquad (audio-cookbook coefficients), applied causally once.
AudioClip eq_filter(const AudioClip& clip, double center_hz, double gain_db, double q);

struct TrainingExample {
  AudioClip mixture;
  SourcePair target;
};

// Draws a song, windows it, optionally swaps in the accompaniment of a
// different song, then augments each source independently. The mixture is
// the sum of the returned target tracks. Songs are drawn with probability
// proportional to `weights` (one per song) or uniformly when it is empty;
// the remix partner is drawn the same way from the other songs.
TrainingExample sample_training_example(std::span<const SourcePair> dataset,
                                        const AugmentConfig& config, Rng& rng,
                                        std::span<const double> weights = {});

}  // namespace svsep
