// tests/dsp_test.cc

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

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>

#include "svsep/audio.h"
#include "svsep/error.h"
#include "svsep/stft.h"
#include "test_util.h"

namespace svsep {
namespace {

using testing::noise;
using testing::sine;

// Direct DFT of one reflect-padded, sqrt-Hann-windowed frame.
std::vector<std::complex<double>> naive_frame(const std::vector<float>& x, int t,
                                              const StftConfig& cfg) {
  const long n = long(x.size());
  auto reflect = [n](long i) {
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  const int N = cfg.fft_size;
  const long start = long(t) * cfg.hop - (N - cfg.hop) / 2;
  std::vector<std::complex<double>> out(std::size_t(cfg.bins()));
  for (int k = 0; k < cfg.bins(); ++k) {
    std::complex<double> acc;
    for (int m = 0; m < N; ++m) {
      const double w = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * m / N));
      const double phase = -2.0 * std::numbers::pi * double(k) * m / N;
      acc += w * double(x[std::size_t(reflect(start + m))]) * std::polar(1.0, phase);
    }
    out[std::size_t(k)] = acc;
  }
  return out;
}

TEST(Stft, ShapeFollowsHopArithmetic) {
  const auto spec = stft(noise(16000, 1));
  EXPECT_EQ(spec.frames, 63);
  EXPECT_EQ(spec.bins, 513);
  EXPECT_EQ(stft(noise(16001, 1)).frames, 63);
  EXPECT_EQ(stft(noise(16129, 1)).frames, 64);
}

TEST(Stft, MatchesDirectDft) {
  const StftConfig cfg{256, 64};
  const auto x = noise(1000, 7);
  const auto spec = stft(x, cfg);
  for (int t : {0, 1, 7, spec.frames - 1}) {
    const auto ref = naive_frame(x.samples, t, cfg);
    for (int k = 0; k < cfg.bins(); ++k)
      EXPECT_LT(std::abs(std::complex<double>(spec.at(t, k)) - ref[std::size_t(k)]), 1e-4)
          << "frame " << t << " bin " << k;
  }
}

TEST(Stft, ZerosGiveZeros) {
  AudioClip z;
  z.samples.assign(4000, 0.0f);
  for (const auto& v : stft(z).values) EXPECT_EQ(std::abs(v), 0.0f);
}

TEST(Stft, SineEnergyAtExpectedBin) {
  const auto spec = stft(sine(1000.0, 16000));
  std::vector<double> mag(513);
  for (int t = 0; t < spec.frames; ++t)
    for (int k = 0; k < 513; ++k) mag[std::size_t(k)] += std::abs(spec.at(t, k));
  EXPECT_EQ(std::max_element(mag.begin(), mag.end()) - mag.begin(), 64);
}

TEST(Stft, EmptyInputThrows) {
  EXPECT_THROW(stft(AudioClip{}), ShapeError);
}

TEST(Stft, RoundTripIsExact) {
  for (const StftConfig cfg : {StftConfig{}, StftConfig{256, 128}, StftConfig{256, 64}}) {
    for (std::size_t n : {1u, 100u, 1023u, 16000u, 16001u}) {
      const auto x = noise(n, n);
      const auto y = istft(stft(x, cfg), n, cfg);
      ASSERT_EQ(y.size(), n);
      for (std::size_t i = 0; i < n; ++i) ASSERT_NEAR(y.samples[i], x.samples[i], 1e-6);
    }
  }
}

TEST(Stft, InconsistentLengthThrows) {
  const auto spec = stft(noise(1000, 1));
  EXPECT_THROW(istft(spec, 5000), ShapeError);
  EXPECT_THROW(istft(spec, 0), ShapeError);
}

TEST(Stft, AdjointSatisfiesInnerProductIdentity) {
  // <istft(S), g> == Re <S, istft_adjoint(g)> for the dL/dRe + i dL/dIm
  // convention.
  const StftConfig cfg{256, 64};
  const std::size_t n = 2000;
  const auto g = noise(n, 3).samples;
  const int frames = cfg.frames_for(n);
  Spectrogram s(frames, cfg.bins());
  std::mt19937_64 rng(9);
  std::normal_distribution<float> d;
  for (auto& v : s.values) v = {d(rng), d(rng)};
  const auto y = istft<float>(s, n, cfg);
  const auto adj = istft_adjoint<float>(g, frames, cfg);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < n; ++i) lhs += double(y[i]) * g[i];
  for (std::size_t i = 0; i < s.values.size(); ++i)
    rhs += double(s.values[i].real()) * adj.values[i].real() +
           double(s.values[i].imag()) * adj.values[i].imag();
  EXPECT_NEAR(lhs, rhs, 1e-3 * std::abs(lhs) + 1e-6);
}

TEST(ApplyMask, IsElementwiseProduct) {
  Spectrogram x(2, 3);
  ComplexMask m(2, 3);
  for (std::size_t i = 0; i < 6; ++i) {
    x.values[i] = {float(i), 1.0f};
    m.values[i] = {0.5f, float(i)};
  }
  const auto y = apply_mask(x, m);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(y.values[i], x.values[i] * m.values[i]);
  EXPECT_THROW(apply_mask(x, ComplexMask(3, 3)), ShapeError);
}

TEST(Audio, WavRoundTripAt16k) {
  const auto dir = testing::temp_dir("wav");
  AudioClip c;
  for (int i = -5; i <= 5; ++i) c.samples.push_back(float(i) / 8.0f);
  write_wav(dir / "a.wav", c);
  const auto back = load_audio(dir / "a.wav");
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(back.samples[i], c.samples[i], 1.0 / 32768);
}

// Minimal WAV writer for formats the library does not emit.
void write_pcm16(const std::filesystem::path& p, int rate, int channels,
                 const std::vector<std::int16_t>& interleaved) {
  std::ofstream out(p, std::ios::binary);
  auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
  const std::uint32_t bytes = std::uint32_t(interleaved.size() * 2);
  out.write("RIFF", 4);
  u32(36 + bytes);
  out.write("WAVEfmt ", 8);
  u32(16);
  u16(1);
  u16(std::uint16_t(channels));
  u32(std::uint32_t(rate));
  u32(std::uint32_t(rate * channels * 2));
  u16(std::uint16_t(channels * 2));
  u16(16);
  out.write("data", 4);
  u32(bytes);
  out.write(reinterpret_cast<const char*>(interleaved.data()), bytes);
}

TEST(Audio, StereoIsAveragedAndResampled) {
  const auto dir = testing::temp_dir("wav_stereo");
  const int n = 4410;
  std::vector<std::int16_t> pcm(2 * n);
  for (int i = 0; i < n; ++i) {
    pcm[2 * i] = 1000;
    pcm[2 * i + 1] = 3000;
  }
  write_pcm16(dir / "s.wav", 44100, 2, pcm);
  const auto c = load_audio(dir / "s.wav");
  EXPECT_EQ(c.size(), std::size_t(std::lround(n * 16000.0 / 44100.0)));
  EXPECT_NEAR(c.samples[c.size() / 2], 2000.0 / 32768.0, 1e-3);
}

TEST(Audio, SixteenKhzMonoIsBitIdentical) {
  const auto dir = testing::temp_dir("wav_mono");
  std::vector<std::int16_t> pcm{0, 1, -1, 32767, -32768, 1234};
  write_pcm16(dir / "m.wav", 16000, 1, pcm);
  const auto c = load_audio(dir / "m.wav");
  ASSERT_EQ(c.size(), pcm.size());
  for (std::size_t i = 0; i < pcm.size(); ++i) EXPECT_EQ(c.samples[i], float(pcm[i]) / 32768.0f);
}

TEST(Audio, EmptyOrMissingFileIsIngestionError) {
  const auto dir = testing::temp_dir("wav_empty");
  write_pcm16(dir / "e.wav", 16000, 1, {});
  EXPECT_THROW(load_audio(dir / "e.wav"), IngestionError);
  try {
    load_audio(dir / "missing.wav");
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.wav"), std::string::npos);
  }
}

TEST(Audio, SegmentPairPadsTheTail) {
  SourcePair p;
  p.song_id = "s";
  p.vocal = noise(75 * 16000, 1);
  p.accompaniment = noise(75 * 16000, 2);
  const auto segs = segment_pair(p);
  ASSERT_EQ(segs.size(), 3u);
  EXPECT_EQ(segs[2].song_id, "s/2");
  for (const auto& s : segs) EXPECT_EQ(s.size(), 30u * 16000u);
  EXPECT_EQ(segs[2].vocal.samples[15 * 16000], 0.0f);
  EXPECT_EQ(segs[2].vocal.samples[15 * 16000 - 1], p.vocal.samples[75 * 16000 - 1]);

  p.vocal = noise(60 * 16000, 1);
  p.accompaniment = noise(60 * 16000, 2);
  EXPECT_EQ(segment_pair(p).size(), 2u);
  p.vocal = noise(16000, 1);
  p.accompaniment = noise(16000, 2);
  EXPECT_EQ(segment_pair(p).size(), 1u);

  SourcePair empty;
  const auto e = segment_pair(empty);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(testing::energy(e[0].vocal.samples), 0.0);
}

TEST(Audio, ResampleLengthAndTone) {
  const auto x = sine(440.0, 44100, 0.5);
  const auto y = resample(x.samples, 16000, 44100);
  EXPECT_EQ(y.size(), 121551u);  // round(44100 * 44100 / 16000)
  EXPECT_EQ(resample(x.samples, 16000, 16000), x.samples);
}

}  // namespace
}  // namespace svsep
