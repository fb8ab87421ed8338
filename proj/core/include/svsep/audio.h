// svsep/audio.h

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

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace svsep {

inline constexpr int kSampleRate = 16000;

// Mono waveform at kSampleRate. Samples are nominally in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
  double seconds() const { return double(samples.size()) / sample_rate; }
};

// Time-aligned vocal and accompaniment tracks of one song. The mixture is
// always the plain elementwise sum.
struct SourcePair {
  AudioClip vocal;
  AudioClip accompaniment;
  std::string song_id;

  std::size_t size() const { return vocal.size(); }
  AudioClip mixture() const;
};

// Throws ShapeError unless both tracks share length and sample rate, and
// every sample is finite.
void validate(const SourcePair& pair);
void validate(const AudioClip& clip);

// Reads a PCM WAV file (16/24/32-bit integer or 32-bit float, any rate and
// channel count), averages channels to mono and resamples to 16 kHz.
AudioClip load_audio(const std::filesystem::path& path);

// Writes 16-bit PCM mono at the clip's sample rate. Values are clipped to
// the representable range.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

// Windowed-sinc resampling (Kaiser, beta 8.6, 64 taps at unit cutoff).
// Output length is round(n * out_rate / in_rate).
std::vector<float> resample(std::span<const float> x, int in_rate,
                            int out_rate);

// Evaluates the band-limited interpolant of `x` at positions i * step for
// i in [0, out_len). The anti-aliasing cutoff is min(1, 1/step).
std::vector<float> resample_to_length(std::span<const float> x,
                                      std::size_t out_len, double step);

// Splits into consecutive non-overlapping segments of seg_seconds. The last
// segment is zero-padded to full length; an empty pair yields one silent
// segment. Segment ids are "<song_id>/<index>".
std::vector<SourcePair> segment_pair(const SourcePair& pair,
                                     double seg_seconds = 30.0);

}  // namespace svsep
