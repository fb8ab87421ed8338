// tests/vad_test.cc

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

#include <algorithm>
#include <random>

#include "svsep/error.h"
#include "svsep/vad.h"
#include "test_util.h"

namespace svsep {
namespace {

using testing::noise;

TEST(VadTarget, SourceEqualToMixtureIsOne) {
  const auto x = noise(8000, 1);
  for (float v : vad_target(x, x)) EXPECT_EQ(v, 1.0f);
}

TEST(VadTarget, JointlySilentFramesAreZero) {
  AudioClip z;
  z.samples.assign(8000, 0.0f);
  for (float v : vad_target(z, z)) EXPECT_EQ(v, 0.0f);
  AudioClip tiny = z;
  for (auto& v : tiny.samples) v = 1e-6f;
  for (float v : vad_target(tiny, tiny)) EXPECT_EQ(v, 0.0f);
}

TEST(VadTarget, SilentSourceInLoudMixtureIsZero) {
  AudioClip z;
  z.samples.assign(8000, 0.0f);
  for (float v : vad_target(z, noise(8000, 2))) EXPECT_EQ(v, 0.0f);
}

TEST(VadTarget, RatioOfIndependentHalves) {
  // Equal-power independent noise: ratio near one half in every frame.
  const auto s = noise(32000, 3), r = noise(32000, 4);
  AudioClip m;
  for (std::size_t i = 0; i < s.size(); ++i) m.samples.push_back(s.samples[i] + r.samples[i]);
  const auto t = vad_target(s, m);
  EXPECT_EQ(t.size(), std::size_t(StftConfig{}.frames_for(32000)));
  double mean = 0.0;
  for (float v : t) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
    mean += v;
  }
  EXPECT_NEAR(mean / double(t.size()), 0.5, 0.05);
  EXPECT_THROW(vad_target(s, noise(10, 1)), ShapeError);
}

TEST(CountPoorFrames, MonotoneInThreshold) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> a(40), b(40);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    int prev = 41;
    for (double tau = 0.0; tau <= 1.0; tau += 0.05) {
      const auto r = count_poor_frames(a, b, tau);
      EXPECT_LE(r.poor_frames, prev);
      prev = r.poor_frames;
      int oracle = 0;
      for (std::size_t t = 0; t < 40; ++t) oracle += (a[t] > tau || b[t] > tau) ? 1 : 0;
      EXPECT_EQ(r.poor_frames, oracle);
      EXPECT_DOUBLE_EQ(r.poor_fraction, oracle / 40.0);
    }
  }
  EXPECT_EQ(count_poor_frames(std::vector<float>{}, std::vector<float>{}, 0.5).poor_fraction,
            0.0);
}

std::vector<QualityReport> reports(std::initializer_list<std::pair<const char*, double>> xs) {
  std::vector<QualityReport> out;
  for (const auto& [id, f] : xs) out.push_back({id, 100, int(f * 100), f});
  return out;
}

TEST(RankAndFilter, KeepsLowestFractionsWithIdTieBreak) {
  const auto r = reports({{"d", 0.4}, {"a", 0.1}, {"c", 0.1}, {"b", 0.9}, {"e", 0.0}});
  EXPECT_EQ(rank_and_filter(r, 0.25), (std::vector<std::string>{"e", "a"}));
  EXPECT_EQ(rank_and_filter(r, 0.6), (std::vector<std::string>{"e", "a", "c"}));
  EXPECT_EQ(rank_and_filter(r, 1.0).size(), 5u);
  EXPECT_EQ(rank_and_filter(r, 0.01).size(), 1u);
  EXPECT_THROW(rank_and_filter(r, 0.0), ConfigError);
  EXPECT_THROW(rank_and_filter({}, 0.5), ShapeError);
}

TEST(RankAndFilter, PermutationInvariant) {
  auto r = reports({{"s1", 0.3}, {"s2", 0.3}, {"s3", 0.1}, {"s4", 0.7}, {"s5", 0.2},
                    {"s6", 0.2}, {"s7", 0.5}, {"s8", 0.0}});
  const auto ref = rank_and_filter(r, 0.5);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    std::shuffle(r.begin(), r.end(), rng);
    EXPECT_EQ(rank_and_filter(r, 0.5), ref);
  }
}

TEST(QualityHistogram, CountsAndMeans) {
  const auto h = quality_histogram(
      {{"clean", reports({{"a", 0.0}, {"b", 0.05}})},
       {"noisy", reports({{"c", 1.0}, {"d", 0.55}, {"e", 0.5}})},
       {"empty", {}}},
      10);
  ASSERT_EQ(h.size(), 3u);
  EXPECT_EQ(h[0].counts[0], 2);
  EXPECT_DOUBLE_EQ(h[0].mean_poor_fraction, 0.025);
  EXPECT_EQ(h[1].counts[9], 1);
  EXPECT_EQ(h[1].counts[5], 2);
  EXPECT_EQ(h[2].mean_poor_fraction, 0.0);
  EXPECT_EQ(std::count(h[2].counts.begin(), h[2].counts.end(), 0), 10);
}

TEST(QualityReports, JsonlRoundTrip) {
  const auto dir = testing::temp_dir("reports");
  const auto r = reports({{"x", 0.125}, {"y", 0.5}});
  write_reports(dir / "q.jsonl", r);
  EXPECT_EQ(read_reports(dir / "q.jsonl"), r);
  EXPECT_THROW(read_reports(dir / "none.jsonl"), IngestionError);
}

TEST(Vad, PredictsOneRatioPerFrame) {
  VadConfig cfg;
  cfg.conv_channels = {4, 8};
  cfg.hidden = 8;
  cfg.stft = {256, 128};
  const Vad v(cfg, SourceTag::vocal, 1);
  const auto p = v.predict(noise(4000, 1));
  EXPECT_EQ(p.size(), std::size_t(cfg.stft.frames_for(4000)));
  for (float x : p) {
    EXPECT_GE(x, 0.0f);
    EXPECT_LE(x, 1.0f);
  }
}

TEST(Vad, ShortTrainingLearnsSilenceFromSignal) {
  VadConfig cfg;
  cfg.conv_channels = {4, 8};
  cfg.hidden = 8;
  cfg.stft = {256, 128};
  std::vector<SourcePair> songs;
  for (int i = 0; i < 4; ++i) {
    SourcePair p;
    p.song_id = "s" + std::to_string(i);
    p.vocal = testing::sine(300.0 + 50 * i, 32000, 0.2);
    for (std::size_t k = 0; k < 16000; ++k) p.vocal.samples[k] = 0.0f;  // silent first half
    p.accompaniment = noise(32000, std::uint64_t(i), 0.05);
    songs.push_back(p);
  }
  VadTrainConfig tc;
  tc.iterations = 150;
  tc.batch = 2;
  tc.window_seconds = 1.0;
  tc.p_drop = 0.0;
  tc.gain_db = {0.0, 0.0};
  tc.p_mix = 0.0;
  const Vad v = train_vad(songs, SourceTag::vocal, cfg, tc);
  const auto p = v.predict(songs[0].mixture());
  const auto t = vad_target(songs[0].vocal, songs[0].mixture(), cfg.stft);
  double err = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) err += std::abs(p[i] - t[i]);
  EXPECT_LT(err / double(p.size()), 0.2);
}

}  // namespace
}  // namespace svsep
