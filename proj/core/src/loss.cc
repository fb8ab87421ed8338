// loss.cc

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

#include "svsep/loss.h"

#include <cmath>
#include <string>

#include "svsep/error.h"

namespace svsep {

void LossWeights::validate() const {
  for (double v : {audio, spec, vocal, accompaniment})
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ConfigError("loss weights must be finite and >= 0");
}

void LrSchedule::validate() const {
  if (!(initial > 0.0) || !(floor > 0.0) || floor > initial || halve_every < 1)
    throw ConfigError("learning-rate schedule needs 0 < floor <= initial and halve_every >= 1");
}

double lr_at(const LrSchedule& schedule, std::int64_t iteration) {
  schedule.validate();
  if (iteration < 0) iteration = 0;
  double lr = schedule.initial;
  for (std::int64_t k = iteration / schedule.halve_every; k > 0; --k) {
    if (lr * 0.5 < schedule.floor) break;
    lr *= 0.5;
  }
  return lr;
}

namespace {

template <typename T>
std::vector<T> magnitudes(const BasicSpectrogram<T>& s) {
  std::vector<T> m(s.values.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::abs(s.values[i]);
  return m;
}

template <typename T>
T sign(T v) {
  return T((v > T(0)) - (v < T(0)));
}

}  // namespace

double source_loss(std::span<const float> y, std::span<const float> y_ref,
                   const LossWeights& weights, const StftConfig& stft_cfg) {
  if (y.size() != y_ref.size() || y.empty())
    throw ShapeError("source_loss: lengths " + std::to_string(y.size()) + " and " +
                     std::to_string(y_ref.size()));
  double audio = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) audio += std::abs(double(y[i]) - y_ref[i]);
  audio /= double(y.size());
  double spec = 0.0;
  if (weights.spec != 0.0) {
    const auto a = stft<float>(y, stft_cfg);
    const auto b = stft<float>(y_ref, stft_cfg);
    for (std::size_t i = 0; i < a.values.size(); ++i)
      spec += std::abs(double(std::abs(a.values[i])) - std::abs(b.values[i]));
    spec /= double(a.values.size());
  }
  return weights.audio * audio + weights.spec * spec;
}

double total_loss(const SourcePair& estimate, const SourcePair& reference,
                  const LossWeights& weights, const StftConfig& stft_cfg) {
  return weights.vocal * source_loss(estimate.vocal.samples, reference.vocal.samples,
                                     weights, stft_cfg) +
         weights.accompaniment * source_loss(estimate.accompaniment.samples,
                                             reference.accompaniment.samples,
                                             weights, stft_cfg);
}

template <typename T>
BasicTrainItem<T> make_train_item(const SourcePair& target, const StftConfig& stft_cfg) {
  validate(target);
  if (target.size() == 0) throw ShapeError("training item needs at least one sample");
  BasicTrainItem<T> item;
  item.vocal.assign(target.vocal.samples.begin(), target.vocal.samples.end());
  item.accompaniment.assign(target.accompaniment.samples.begin(),
                            target.accompaniment.samples.end());
  std::vector<T> mix(item.vocal.size());
  // Summed in float so that the mixture matches SourcePair::mixture().
  for (std::size_t i = 0; i < mix.size(); ++i)
    mix[i] = T(target.vocal.samples[i] + target.accompaniment.samples[i]);
  item.mixture = stft<T>(std::span<const T>(mix), stft_cfg);
  item.vocal_mag = magnitudes(stft<T>(std::span<const T>(item.vocal), stft_cfg));
  item.accompaniment_mag =
      magnitudes(stft<T>(std::span<const T>(item.accompaniment), stft_cfg));
  return item;
}

template <typename T>
nn::Var<T> separation_loss(const nn::Var<T>& raw_masks,
                           std::span<const BasicTrainItem<T>> batch,
                           const LossWeights& weights, const StftConfig& stft_cfg) {
  const Shape s = raw_masks.shape();
  if (batch.empty() || s.n != int(batch.size()) || s.c != 4)
    throw ShapeError("separation_loss: masks " + s.str() + " for batch of " +
                     std::to_string(batch.size()));
  const double lam_src[2] = {weights.vocal, weights.accompaniment};
  const double inv_batch = 1.0 / double(batch.size());

  // Gradient with respect to the raw mask channels, filled during the
  // forward pass since every term is elementwise or linear.
  Tensor<T> dmask(s);
  double total = 0.0;
  for (int n = 0; n < s.n; ++n) {
    const auto& item = batch[std::size_t(n)];
    const auto& X = item.mixture;
    if (!X.same_shape(s.h, s.w))
      throw ShapeError("separation_loss: mixture shape differs from masks");
    const std::size_t cells = X.values.size();
    const std::size_t len = item.samples();
    for (int src = 0; src < 2; ++src) {
      const T* mr = raw_masks.value().plane(n, 2 * src);
      const T* mi = raw_masks.value().plane(n, 2 * src + 1);
      const auto& ref = src == 0 ? item.vocal : item.accompaniment;
      const auto& ref_mag = src == 0 ? item.vocal_mag : item.accompaniment_mag;
      BasicSpectrogram<T> est(X.frames, X.bins);
      for (std::size_t i = 0; i < cells; ++i)
        est.values[i] = std::complex<T>(mr[i], mi[i]) * X.values[i];
      const auto wave = istft<T>(est, len, stft_cfg);

      const double scale = lam_src[src] * inv_batch;
      double audio = 0.0, spec = 0.0;
      std::vector<T> gwave(len);
      const T ga = T(scale * weights.audio / double(len));
      for (std::size_t i = 0; i < len; ++i) {
        const T d = wave[i] - ref[i];
        audio += std::abs(double(d));
        gwave[i] = ga * sign(d);
      }
      auto gspec = istft_adjoint<T>(std::span<const T>(gwave), X.frames, stft_cfg);
      const T gs = T(scale * weights.spec / double(cells));
      for (std::size_t i = 0; i < cells; ++i) {
        const T mag = std::abs(est.values[i]);
        const T d = mag - ref_mag[i];
        spec += std::abs(double(d));
        if (mag > T(0)) gspec.values[i] += gs * sign(d) * est.values[i] / mag;
      }
      total += scale * (weights.audio * audio / double(len) +
                        weights.spec * spec / double(cells));
      T* dr = dmask.plane(n, 2 * src);
      T* di = dmask.plane(n, 2 * src + 1);
      for (std::size_t i = 0; i < cells; ++i) {
        const std::complex<T> g = gspec.values[i] * std::conj(X.values[i]);
        dr[i] = g.real();
        di[i] = g.imag();
      }
    }
  }
  Tensor<T> out(Shape{1, 1, 1, 1}, T(total));
  return nn::make_result<T>(
      std::move(out), {raw_masks}, [dmask = std::move(dmask)](nn::Node<T>& node) {
        const T g = node.grad.data()[0];
        Tensor<T>& d = node.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] += g * dmask.data()[i];
      });
}

template <typename T>
double loss_and_gradient(BasicSeparator<T>& model,
                         std::span<const BasicTrainItem<T>> batch,
                         const LossWeights& weights) {
  if (batch.empty()) throw ShapeError("loss_and_gradient: empty batch");
  std::vector<const BasicSpectrogram<T>*> mixtures;
  for (const auto& item : batch) mixtures.push_back(&item.mixture);
  for (auto& p : model.params()) p.second.zero_grad();
  nn::Var<T> input(model.make_input(mixtures));
  const auto masks = model.forward(input, true);
  const auto loss = separation_loss<T>(masks, batch, weights, model.config().stft);
  nn::backward(loss);
  return double(loss.value().data()[0]);
}

void Adam::step(std::span<nn::Var<float>> params, double lr) {
  if (m_.size() != params.size()) {
    m_.assign(params.size(), {});
    v_.assign(params.size(), {});
  }
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, double(steps_));
  const double c2 = 1.0 - std::pow(b2, double(steps_));
  const double step = lr / c1;
  const double sqrt_c2 = std::sqrt(c2);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor<float>& w = params[p].mutable_value();
    auto& m = m_[p];
    auto& v = v_[p];
    if (m.size() != w.size()) {
      m.assign(w.size(), 0.0f);
      v.assign(w.size(), 0.0f);
    }
    const Tensor<float>& g = params[p].grad();
    const bool has_grad = !g.empty();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = has_grad ? double(g.data()[i]) : 0.0;
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = float(mi);
      v[i] = float(vi);
      w.data()[i] -= float(step * mi / (std::sqrt(vi) / sqrt_c2 + config_.eps));
    }
  }
}

double train_step(Separator& model, Adam& optimizer, std::span<const TrainItem> batch,
                  const LossWeights& weights, const LrSchedule& schedule,
                  std::int64_t iteration) {
  std::vector<std::vector<float>> saved;
  for (const auto& b : model.buffers()) saved.push_back(*b.second);
  auto restore = [&] {
    auto bufs = model.buffers();
    for (std::size_t i = 0; i < bufs.size(); ++i) *bufs[i].second = saved[i];
  };
  const double loss = loss_and_gradient<float>(model, batch, weights);
  if (!std::isfinite(loss)) {
    restore();
    throw TrainingError(iteration, "non-finite loss");
  }
  for (const auto& [name, p] : model.params()) {
    if (!p.grad().all_finite()) {
      restore();
      throw TrainingError(iteration, "non-finite gradient in " + name);
    }
  }
  optimizer.step_named(model.params(), lr_at(schedule, iteration));
  return loss;
}

template BasicTrainItem<float> make_train_item<float>(const SourcePair&, const StftConfig&);
template BasicTrainItem<double> make_train_item<double>(const SourcePair&, const StftConfig&);
template nn::Var<float> separation_loss<float>(const nn::Var<float>&,
                                               std::span<const BasicTrainItem<float>>,
                                               const LossWeights&, const StftConfig&);
template nn::Var<double> separation_loss<double>(const nn::Var<double>&,
                                                 std::span<const BasicTrainItem<double>>,
                                                 const LossWeights&, const StftConfig&);
template double loss_and_gradient<float>(BasicSeparator<float>&,
                                         std::span<const BasicTrainItem<float>>,
                                         const LossWeights&);
template double loss_and_gradient<double>(BasicSeparator<double>&,
                                          std::span<const BasicTrainItem<double>>,
                                          const LossWeights&);

}  // namespace svsep
