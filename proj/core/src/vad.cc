// vad.cc

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

#include "svsep/vad.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "svsep/error.h"
#include "svsep/loss.h"

namespace svsep {

std::string to_string(SourceTag tag) {
  return tag == SourceTag::vocal ? "vocal" : "accompaniment";
}

SourceTag source_tag_from_string(const std::string& s) {
  if (s == "vocal") return SourceTag::vocal;
  if (s == "accompaniment") return SourceTag::accompaniment;
  throw ConfigError("unknown source tag '" + s + "'");
}

void VadConfig::validate() const {
  if (conv_channels.empty()) throw ConfigError("VAD needs at least one conv block");
  for (int c : conv_channels)
    if (c < 1) throw ConfigError("VAD channel counts must be >= 1");
  if (freq_pool < 1 || hidden < 1) throw ConfigError("VAD sizes must be >= 1");
  stft.validate();
}

void VadTrainConfig::validate() const {
  if (iterations < 0 || batch < 1 || !(lr > 0) || !(window_seconds > 0) ||
      !(p_mix >= 0 && p_mix <= 1) || !(p_drop >= 0 && p_drop < 0.5) ||
      !(gain_db.lo <= gain_db.hi))
    throw ConfigError("invalid VAD training configuration");
}

namespace {

// Squared-window-weighted frame energies with the STFT framing.
std::vector<double> frame_energy(std::span<const double> x, const StftConfig& cfg) {
  const auto w = sqrt_hann<double>(cfg.fft_size);
  const int frames = cfg.frames_for(x.size());
  const long n = long(x.size()), left = cfg.left_pad();
  std::vector<double> e(std::size_t(frames), 0.0);
  for (int t = 0; t < frames; ++t) {
    const long start = long(t) * cfg.hop - left;
    double acc = 0.0;
    for (int m = 0; m < cfg.fft_size; ++m) {
      long i = start + m;
      // Reflective extension, matching stft().
      if (n == 1) {
        i = 0;
      } else {
        const long period = 2 * (n - 1);
        i %= period;
        if (i < 0) i += period;
        if (i >= n) i = period - i;
      }
      const double v = w[std::size_t(m)] * x[std::size_t(i)];
      acc += v * v;
    }
    e[std::size_t(t)] = acc;
  }
  return e;
}

}  // namespace

std::vector<float> vad_target(const AudioClip& source, const AudioClip& mixture,
                              const StftConfig& cfg) {
  if (source.size() != mixture.size() || source.size() == 0)
    throw ShapeError("vad_target: source has " + std::to_string(source.size()) +
                     " samples, mixture " + std::to_string(mixture.size()));
  const std::size_t n = source.size();
  std::vector<double> s(n), m(n), r(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = source.samples[i];
    m[i] = mixture.samples[i];
    r[i] = m[i] - s[i];
  }
  const auto es = frame_energy(s, cfg), em = frame_energy(m, cfg), er = frame_energy(r, cfg);
  const auto w = sqrt_hann<double>(cfg.fft_size);
  const double wsum = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
  const double silent = kSilenceRms * kSilenceRms * wsum;
  std::vector<float> out(es.size());
  for (std::size_t t = 0; t < es.size(); ++t) {
    if (es[t] < silent && er[t] < silent) {
      out[t] = 0.0f;
    } else if (em[t] <= 0.0) {
      out[t] = 1.0f;
    } else {
      out[t] = float(std::clamp(es[t] / em[t], 0.0, 1.0));
    }
  }
  return out;
}

Vad::Vad(VadConfig config, SourceTag target, std::uint64_t seed)
    : config_(std::move(config)), target_(target) {
  config_.validate();
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + 7);
  auto uniform = [&](Shape s, double bound) {
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor<float> t(s);
    for (auto& v : t.vec()) v = float(u(rng));
    return nn::Var<float>(std::move(t), true);
  };
  int c_in = 1, width = config_.stft.bins();
  for (std::size_t i = 0; i < config_.conv_channels.size(); ++i) {
    const int c = config_.conv_channels[i];
    const std::string name = "conv" + std::to_string(i);
    params_.emplace_back(name + ".weight",
                         uniform({c, c_in, 3, 3}, std::sqrt(6.0 / (9.0 * c_in))));
    params_.emplace_back(name + ".bn.gamma",
                         nn::Var<float>(Tensor<float>({1, c, 1, 1}, 1.0f), true));
    params_.emplace_back(name + ".bn.beta",
                         nn::Var<float>(Tensor<float>({1, c, 1, 1}), true));
    norms_.push_back({std::vector<float>(std::size_t(c), 0.0f),
                      std::vector<float>(std::size_t(c), 1.0f)});
    c_in = c;
    width = (width + config_.freq_pool - 1) / config_.freq_pool;
  }
  const int d = c_in * width, h = config_.hidden;
  const double gb = 1.0 / std::sqrt(double(h));
  for (const char* dir : {"fwd", "bwd"}) {
    const std::string name = std::string("gru.") + dir;
    params_.emplace_back(name + ".w_ih", uniform({3 * h, d, 1, 1}, gb));
    params_.emplace_back(name + ".w_hh", uniform({3 * h, h, 1, 1}, gb));
    params_.emplace_back(name + ".b_ih", uniform({1, 3 * h, 1, 1}, gb));
    params_.emplace_back(name + ".b_hh", uniform({1, 3 * h, 1, 1}, gb));
  }
  const double lb = 1.0 / std::sqrt(double(2 * h));
  params_.emplace_back("head.weight", uniform({1, 2 * h, 1, 1}, lb));
  params_.emplace_back("head.bias", uniform({1, 1, 1, 1}, lb));
}

std::vector<Vad::Buffer> Vad::buffers() {
  std::vector<Buffer> out;
  for (std::size_t i = 0; i < norms_.size(); ++i) {
    const std::string name = "conv" + std::to_string(i) + ".bn";
    out.emplace_back(name + ".running_mean", &norms_[i].running_mean);
    out.emplace_back(name + ".running_var", &norms_[i].running_var);
  }
  return out;
}

std::vector<std::pair<std::string, const std::vector<float>*>> Vad::buffers() const {
  std::vector<std::pair<std::string, const std::vector<float>*>> out;
  for (std::size_t i = 0; i < norms_.size(); ++i) {
    const std::string name = "conv" + std::to_string(i) + ".bn";
    out.emplace_back(name + ".running_mean", &norms_[i].running_mean);
    out.emplace_back(name + ".running_var", &norms_[i].running_var);
  }
  return out;
}

Tensor<float> Vad::features(std::span<const float> signal) const {
  const auto spec = stft<float>(signal, config_.stft);
  Tensor<float> x(Shape{1, 1, spec.frames, spec.bins});
  for (std::size_t i = 0; i < spec.values.size(); ++i)
    x.data()[i] = std::log1p(std::abs(spec.values[i]));
  return x;
}

nn::Var<float> Vad::forward(const nn::Var<float>& x, bool training) {
  const Shape s = x.shape();
  if (s.c != 1 || s.w != config_.stft.bins())
    throw ShapeError("VAD: input " + s.str() + " does not match config");
  nn::Var<float> h = x;
  std::size_t p = 0;
  const nn::Var<float> none;
  for (std::size_t i = 0; i < config_.conv_channels.size(); ++i) {
    h = nn::conv2d(h, params_[p].second, none, {1, 1, 1, 1});
    h = nn::batch_norm(h, params_[p + 1].second, params_[p + 2].second, norms_[i], training);
    h = nn::freq_pool(nn::relu(h), config_.freq_pool);
    p += 3;
  }
  const auto feats = nn::frames_to_features(h);
  const nn::GruWeights<float> fw{params_[p].second, params_[p + 1].second,
                                 params_[p + 2].second, params_[p + 3].second};
  const nn::GruWeights<float> bw{params_[p + 4].second, params_[p + 5].second,
                                 params_[p + 6].second, params_[p + 7].second};
  const auto both = nn::concat_features(nn::gru(feats, fw, false), nn::gru(feats, bw, true));
  return nn::linear(both, params_[p + 8].second, params_[p + 9].second);
}

std::vector<float> Vad::predict(const AudioClip& clip) const {
  nn::NoGradGuard guard;
  nn::Var<float> x(features(clip.samples));
  // Evaluation mode reads the running statistics without writing them.
  const auto logits = const_cast<Vad&>(*this).forward(x, false);
  std::vector<float> out(logits.value().size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = float(1.0 / (1.0 + std::exp(-double(logits.value().data()[i]))));
  return out;
}

Vad train_vad(std::span<const SourcePair> labeled, SourceTag target,
              const VadConfig& config, const VadTrainConfig& train) {
  if (labeled.empty()) throw ShapeError("train_vad: no labeled songs");
  train.validate();
  Vad vad(config, target, train.seed);
  Rng rng(train.seed ^ (target == SourceTag::vocal ? 0x5641440ull : 0x4143430ull));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  AugmentConfig window = AugmentConfig::none(train.window_seconds);
  window.p_mix = train.p_mix;
  Adam adam;
  for (std::int64_t it = 0; it < train.iterations; ++it) {
    Tensor<float> x, y;
    for (int b = 0; b < train.batch; ++b) {
      const auto ex = sample_training_example(labeled, window, rng);
      SourcePair p = scale_sources(ex.target, train.gain_db.sample(rng),
                                   train.gain_db.sample(rng));
      if (coin(rng) < train.p_drop) std::fill(p.vocal.samples.begin(), p.vocal.samples.end(), 0.0f);
      else if (coin(rng) < train.p_drop / (1.0 - train.p_drop))
        std::fill(p.accompaniment.samples.begin(), p.accompaniment.samples.end(), 0.0f);
      const AudioClip mix = p.mixture();
      const auto f = vad.features(mix.samples);
      const auto t = vad_target(target == SourceTag::vocal ? p.vocal : p.accompaniment,
                                mix, config.stft);
      if (b == 0) {
        x = Tensor<float>(Shape{train.batch, 1, f.shape().h, f.shape().w});
        y = Tensor<float>(Shape{train.batch, 1, f.shape().h, 1});
      }
      std::copy(f.vec().begin(), f.vec().end(), x.plane(b, 0));
      std::copy(t.begin(), t.end(), y.plane(b, 0));
    }
    for (auto& p : vad.params()) p.second.zero_grad();
    const auto loss = nn::bce_with_logits(vad.forward(nn::Var<float>(std::move(x)), true), y);
    if (!std::isfinite(loss.value().data()[0]))
      throw TrainingError(it, "non-finite VAD loss");
    nn::backward(loss);
    adam.step_named(vad.params(), train.lr);
  }
  return vad;
}

QualityReport count_poor_frames(std::span<const float> acc_in_vocal,
                                std::span<const float> vocal_in_acc, double tau,
                                const std::string& song_id) {
  if (acc_in_vocal.size() != vocal_in_acc.size())
    throw ShapeError("count_poor_frames: frame counts differ");
  QualityReport r;
  r.song_id = song_id;
  r.n_frames = int(acc_in_vocal.size());
  for (std::size_t t = 0; t < acc_in_vocal.size(); ++t)
    if (acc_in_vocal[t] > tau || vocal_in_acc[t] > tau) ++r.poor_frames;
  r.poor_fraction = r.n_frames > 0 ? double(r.poor_frames) / r.n_frames : 0.0;
  return r;
}

QualityReport count_poor_frames(const AudioClip& vocal_track, const AudioClip& acc_track,
                                const Vad& vad_vocal, const Vad& vad_acc, double tau,
                                const std::string& song_id) {
  if (vad_vocal.target() != SourceTag::vocal || vad_acc.target() != SourceTag::accompaniment)
    throw ConfigError("count_poor_frames: detectors passed in the wrong order");
  if (vocal_track.size() != acc_track.size())
    throw ShapeError("count_poor_frames: track lengths differ for '" + song_id + "'");
  const auto acc_in_vocal = vad_acc.predict(vocal_track);
  const auto vocal_in_acc = vad_vocal.predict(acc_track);
  return count_poor_frames(acc_in_vocal, vocal_in_acc, tau, song_id);
}

std::vector<std::string> rank_and_filter(std::span<const QualityReport> reports,
                                         double top_fraction) {
  if (!(top_fraction > 0.0 && top_fraction <= 1.0))
    throw ConfigError("top_fraction must lie in (0, 1]");
  if (reports.empty()) throw ShapeError("rank_and_filter: no reports");
  std::vector<const QualityReport*> order;
  for (const auto& r : reports) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const QualityReport* a, const QualityReport* b) {
    if (a->poor_fraction != b->poor_fraction) return a->poor_fraction < b->poor_fraction;
    return a->song_id < b->song_id;
  });
  const auto keep = std::size_t(std::ceil(top_fraction * double(reports.size()) - 1e-9));
  std::vector<std::string> out;
  for (std::size_t i = 0; i < keep; ++i) out.push_back(order[i]->song_id);
  return out;
}

std::vector<QualityHistogram> quality_histogram(
    const std::vector<std::pair<std::string, std::vector<QualityReport>>>& datasets,
    int bins) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  std::vector<QualityHistogram> out;
  for (const auto& [name, reports] : datasets) {
    QualityHistogram h;
    h.dataset = name;
    h.counts.assign(std::size_t(bins), 0);
    double sum = 0.0;
    for (const auto& r : reports) {
      const int b = std::min(bins - 1, int(r.poor_fraction * bins));
      ++h.counts[std::size_t(b)];
      sum += r.poor_fraction;
    }
    h.mean_poor_fraction = reports.empty() ? 0.0 : sum / double(reports.size());
    out.push_back(std::move(h));
  }
  return out;
}

void write_reports(const std::filesystem::path& path,
                   std::span<const QualityReport> reports) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IngestionError(path.string(), "cannot open for writing");
  for (const auto& r : reports)
    out << nlohmann::json{{"song_id", r.song_id},
                          {"n_frames", r.n_frames},
                          {"poor_frames", r.poor_frames},
                          {"poor_fraction", r.poor_fraction}}
               .dump()
        << '\n';
}

std::vector<QualityReport> read_reports(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError(path.string(), "cannot open quality reports");
  std::vector<QualityReport> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    out.push_back({j.at("song_id").get<std::string>(), j.at("n_frames").get<int>(),
                   j.at("poor_frames").get<int>(), j.at("poor_fraction").get<double>()});
  }
  return out;
}

}  // namespace svsep
