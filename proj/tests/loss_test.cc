// tests/loss_test.cc

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
#include <limits>

#include "svsep/error.h"
#include "svsep/loss.h"
#include "test_util.h"

namespace svsep {
namespace {

using testing::noise;

SourcePair noise_pair(std::size_t n, std::uint64_t seed) {
  SourcePair p;
  p.song_id = "p";
  p.vocal = noise(n, seed);
  p.accompaniment = noise(n, seed + 1000, 0.2);
  return p;
}

TEST(SourceLoss, IdentityIsZero) {
  const auto x = noise(4000, 1);
  EXPECT_EQ(source_loss(x.samples, x.samples, {}), 0.0);
  const auto p = noise_pair(4000, 2);
  EXPECT_EQ(total_loss(p, p, {}), 0.0);
}

TEST(SourceLoss, NonNegativeAndLinearInWeights) {
  const auto a = noise(3000, 3), b = noise(3000, 4);
  const double audio = source_loss(a.samples, b.samples, {1.0, 0.0, 1.0, 1.0});
  const double spec = source_loss(a.samples, b.samples, {0.0, 1.0, 1.0, 1.0});
  EXPECT_GT(audio, 0.0);
  EXPECT_GT(spec, 0.0);
  EXPECT_NEAR(source_loss(a.samples, b.samples, {2.0, 3.0, 1.0, 1.0}), 2 * audio + 3 * spec,
              1e-9 * (audio + spec));
  double mean_abs = 0.0;
  for (std::size_t i = 0; i < 3000; ++i) mean_abs += std::abs(double(a.samples[i]) - b.samples[i]);
  EXPECT_NEAR(audio, mean_abs / 3000, 1e-12);

  const auto p = noise_pair(3000, 5), q = noise_pair(3000, 6);
  const LossWeights w{1.0, 1.0, 0.7, 0.2};
  EXPECT_NEAR(total_loss(p, q, w),
              0.7 * source_loss(p.vocal.samples, q.vocal.samples, w) +
                  0.2 * source_loss(p.accompaniment.samples, q.accompaniment.samples, w),
              1e-12);
  EXPECT_THROW(source_loss(a.samples, noise(10, 1).samples, {}), ShapeError);
}

TEST(LrSchedule, HalvingWithFloor) {
  const LrSchedule s;
  EXPECT_EQ(lr_at(s, 0), 1e-4);
  EXPECT_EQ(lr_at(s, 99999), 1e-4);
  EXPECT_EQ(lr_at(s, 100000), 5e-5);
  EXPECT_EQ(lr_at(s, 250000), 2.5e-5);
  // 1e-4 / 2^6 = 1.5625e-6 is the last value above the floor.
  EXPECT_EQ(lr_at(s, 100000LL * 6), 1e-4 / 64);
  EXPECT_EQ(lr_at(s, 100000LL * 50), 1e-4 / 64);
  double prev = lr_at(s, 0);
  for (std::int64_t it = 0; it < 2'000'000; it += 37'000) {
    const double lr = lr_at(s, it);
    EXPECT_LE(lr, prev);
    EXPECT_GE(lr, s.floor);
    prev = lr;
  }
  EXPECT_EQ(lr_at({1e-6, 10, 1e-6}, 1000), 1e-6);
}

TEST(SeparationLoss, IdealMasksGiveZeroLoss) {
  const StftConfig cfg{256, 128};
  const auto item = make_train_item<double>(noise_pair(2000, 7), cfg);
  const int T = item.mixture.frames, F = item.mixture.bins;
  // Complex ratio S/X for both sources in the raw [1, 4, T, F] layout.
  const auto sv = stft<double>(item.vocal, cfg), sa = stft<double>(item.accompaniment, cfg);
  Tensor<double> raw(Shape{1, 4, T, F});
  for (int t = 0; t < T; ++t)
    for (int f = 0; f < F; ++f) {
      const auto x = item.mixture.at(t, f);
      const auto mv = sv.at(t, f) / x, ma = sa.at(t, f) / x;
      raw.at(0, 0, t, f) = mv.real();
      raw.at(0, 1, t, f) = mv.imag();
      raw.at(0, 2, t, f) = ma.real();
      raw.at(0, 3, t, f) = ma.imag();
    }
  nn::NoGradGuard ng;
  std::vector<BasicTrainItem<double>> batch{item};
  const auto loss = separation_loss<double>(nn::Var<double>(raw), batch, {}, cfg);
  EXPECT_LT(loss.value().data()[0], 1e-9);
}

std::vector<TrainItem> overfit_batch() {
  const StftConfig cfg{256, 128};
  std::vector<TrainItem> batch;
  auto p = noise_pair(4000, 8);
  p.vocal = testing::sine(600.0, 4000, 0.3);
  batch.push_back(make_train_item<float>(p, cfg));
  return batch;
}

SeparatorConfig toy_256() {
  auto cfg = separator_preset("toy");
  cfg.stft = {256, 128};
  return cfg;
}

TEST(TrainStep, OverfitsOneShortWindow) {
  Separator model(toy_256(), 1);
  Adam opt;
  const auto batch = overfit_batch();
  const LrSchedule lr{1e-3, 100000, 1e-6};
  const double first = train_step(model, opt, batch, {}, lr, 0);
  double last = first;
  for (int it = 1; it < 500; ++it) last = train_step(model, opt, batch, {}, lr, it);
  EXPECT_LT(last, 0.5 * first) << "first " << first << " last " << last;
  EXPECT_EQ(opt.steps(), 500);
}

TEST(TrainStep, NonFiniteLossLeavesStateUntouched) {
  Separator model(toy_256(), 2);
  Adam opt;
  auto batch = overfit_batch();
  const LrSchedule lr{1e-3, 100000, 1e-6};
  train_step(model, opt, batch, {}, lr, 0);
  std::vector<std::vector<float>> before, buffers_before;
  for (const auto& p : model.params()) before.push_back(p.second.value().vec());
  for (const auto& b : model.buffers()) buffers_before.push_back(*b.second);
  const auto m_before = opt.first_moment();

  batch[0].vocal[10] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(train_step(model, opt, batch, {}, lr, 1), TrainingError);
  for (std::size_t i = 0; i < before.size(); ++i)
    EXPECT_EQ(model.params()[i].second.value().vec(), before[i]);
  for (std::size_t i = 0; i < buffers_before.size(); ++i)
    EXPECT_EQ(*model.buffers()[i].second, buffers_before[i]);
  EXPECT_EQ(opt.first_moment(), m_before);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(TrainStep, Deterministic) {
  const auto batch = overfit_batch();
  const LrSchedule lr{1e-3, 100000, 1e-6};
  std::vector<double> losses[2];
  std::vector<float> final_param[2];
  for (int r = 0; r < 2; ++r) {
    Separator model(toy_256(), 5);
    Adam opt;
    for (int it = 0; it < 5; ++it) losses[r].push_back(train_step(model, opt, batch, {}, lr, it));
    final_param[r] = model.params()[0].second.value().vec();
  }
  EXPECT_EQ(losses[0], losses[1]);
  EXPECT_EQ(final_param[0], final_param[1]);
}

}  // namespace
}  // namespace svsep
