// augment.cc

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

#include "svsep/augment.h"

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "svsep/error.h"
#include "svsep/stft.h"

namespace svsep {

double Interval::sample(Rng& rng) const {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

AugmentConfig AugmentConfig::none(double window_seconds) {
  AugmentConfig c;
  c.window_seconds = window_seconds;
  c.p_mix = 0.0;
  c.gain_db = {0.0, 0.0};
  c.p_pitch = c.p_lowpass = c.p_eq = 0.0;
  return c;
}

void AugmentConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ConfigError(std::string(name) + " must be a probability");
  };
  prob(p_mix, "p_mix");
  prob(p_pitch, "p_pitch");
  prob(p_lowpass, "p_lowpass");
  prob(p_eq, "p_eq");
  if (!(window_seconds > 0.0)) throw ConfigError("window_seconds must be > 0");
  for (const Interval* i : {&gain_db, &pitch_semitones, &lowpass_hz, &eq_center_hz,
                            &eq_gain_db, &eq_q})
    if (!(i->lo <= i->hi)) throw ConfigError("augmentation interval with lo > hi");
  if (std::abs(pitch_semitones.lo) > 12 || std::abs(pitch_semitones.hi) > 12)
    throw ConfigError("pitch range must lie within +-12 semitones");
  if (p_lowpass > 0 && (lowpass_hz.lo <= 0 || lowpass_hz.hi >= kSampleRate / 2.0))
    throw ConfigError("lowpass cutoffs must lie in (0, 8000) Hz");
  if (p_eq > 0 && (eq_center_hz.lo <= 0 || eq_center_hz.hi >= kSampleRate / 2.0 ||
                   eq_q.lo <= 0))
    throw ConfigError("EQ centre must lie in (0, 8000) Hz and Q > 0");
}

SourcePair random_window(const SourcePair& pair, double seconds, Rng& rng) {
  validate(pair);
  const auto len = std::size_t(std::llround(seconds * kSampleRate));
  if (len == 0 || len > pair.size())
    throw ShapeError("random_window: " + std::to_string(seconds) + " s window exceeds " +
                     std::to_string(pair.vocal.seconds()) + " s of '" + pair.song_id + "'");
  const std::size_t offset =
      std::uniform_int_distribution<std::size_t>(0, pair.size() - len)(rng);
  SourcePair out;
  out.song_id = pair.song_id;
  out.vocal.samples.assign(pair.vocal.samples.begin() + long(offset),
                           pair.vocal.samples.begin() + long(offset + len));
  out.accompaniment.samples.assign(pair.accompaniment.samples.begin() + long(offset),
                                   pair.accompaniment.samples.begin() + long(offset + len));
  return out;
}

SourcePair random_mix(const SourcePair& a, const SourcePair& b, double p, Rng& rng) {
  if (a.size() != b.size())
    throw ShapeError("random_mix: durations differ (" + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()) + " samples)");
  if (!(std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p)) return a;
  SourcePair out;
  out.vocal = a.vocal;
  out.accompaniment = b.accompaniment;
  out.song_id = a.song_id + "+" + b.song_id;
  return out;
}

SourcePair scale_sources(const SourcePair& pair, double gain_vocal_db,
                         double gain_acc_db) {
  SourcePair out = pair;
  const float gv = float(std::pow(10.0, gain_vocal_db / 20.0));
  const float ga = float(std::pow(10.0, gain_acc_db / 20.0));
  for (auto& v : out.vocal.samples) v *= gv;
  for (auto& v : out.accompaniment.samples) v *= ga;
  return out;
}

namespace {

// Phase-vocoder time stretch by `rate` (> 1 shortens). Returns a signal of
// frames_out * hop samples.
std::vector<float> time_stretch(std::span<const float> x, double rate) {
  const StftConfig cfg{1024, 256};
  const auto spec = stft<float>(x, cfg);
  const int bins = spec.bins, frames = spec.frames;
  const int out_frames = int(std::ceil(double(frames) / rate));
  Spectrogram out(out_frames, bins);
  std::vector<double> phase(static_cast<std::size_t>(bins));
  std::vector<double> advance(static_cast<std::size_t>(bins));
  for (int k = 0; k < bins; ++k) {
    advance[std::size_t(k)] = 2.0 * std::numbers::pi * cfg.hop * k / cfg.fft_size;
    phase[std::size_t(k)] = std::arg(spec.at(0, k));
  }
  auto col = [&](int t, int k) {
    return t < frames ? std::complex<double>(spec.at(t, k)) : std::complex<double>();
  };
  for (int i = 0; i < out_frames; ++i) {
    const double pos = i * rate;
    const int t = int(pos);
    const double alpha = pos - t;
    for (int k = 0; k < bins; ++k) {
      const auto c0 = col(t, k), c1 = col(t + 1, k);
      const double mag = (1.0 - alpha) * std::abs(c0) + alpha * std::abs(c1);
      out.at(i, k) = std::complex<float>(std::polar(mag, phase[std::size_t(k)]));
      double dphi = std::arg(c1) - std::arg(c0) - advance[std::size_t(k)];
      dphi -= 2.0 * std::numbers::pi * std::round(dphi / (2.0 * std::numbers::pi));
      phase[std::size_t(k)] += advance[std::size_t(k)] + dphi;
    }
  }
  return istft<float>(out, std::size_t(out_frames) * std::size_t(cfg.hop), cfg);
}

struct Biquad {
  double b0, b1, b2, a1, a2;
};

// Direct form II transposed with state (z1, z2).
void run_biquad(const Biquad& s, std::vector<double>& x, double z1, double z2) {
  for (double& v : x) {
    const double y = s.b0 * v + z1;
    z1 = s.b1 * v - s.a1 * y + z2;
    z2 = s.b2 * v - s.a2 * y;
    v = y;
  }
}

// Order-8 Butterworth lowpass as four unity-DC-gain sections.
std::array<Biquad, 4> butterworth8(double cutoff_hz) {
  constexpr int order = 8;
  const double fs = kSampleRate;
  const double warped = 2.0 * fs * std::tan(std::numbers::pi * cutoff_hz / fs);
  std::array<Biquad, 4> sos{};
  for (int k = 0; k < order / 2; ++k) {
    const double theta = std::numbers::pi * double(2 * k + 1 + order) / (2.0 * order);
    const std::complex<double> s = warped * std::polar(1.0, theta);
    const std::complex<double> z = (2.0 * fs + s) / (2.0 * fs - s);
    const double a1 = -2.0 * z.real(), a2 = std::norm(z);
    const double g = (1.0 + a1 + a2) / 4.0;
    sos[std::size_t(k)] = {g, 2.0 * g, g, a1, a2};
  }
  return sos;
}

// Forward-backward filtering with odd extension and steady-state initial
// conditions at both ends.
std::vector<double> filtfilt(std::span<const Biquad> sos, std::vector<double> x) {
  const std::size_t n = x.size();
  std::size_t pad = std::min<std::size_t>(3 * (2 * sos.size() + 1), n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);
  auto pass = [&](std::vector<double>& v) {
    double level = v.front();
    for (const auto& s : sos) {
      const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
      const double y = gain * level;
      run_biquad(s, v, y - s.b0 * level, s.b2 * level - s.a2 * y);
      level = y;
    }
  };
  pass(ext);
  std::reverse(ext.begin(), ext.end());
  pass(ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + long(pad), ext.begin() + long(pad + n)};
}

}  // namespace

AudioClip pitch_shift(const AudioClip& clip, double semitones) {
  if (std::abs(semitones) > 12.0) throw ConfigError("pitch_shift: |semitones| must be <= 12");
  if (semitones == 0.0 || clip.samples.empty()) return clip;
  const double rate = std::pow(2.0, semitones / 12.0);
  const auto stretched = time_stretch(clip.samples, 1.0 / rate);
  AudioClip out;
  out.samples = resample_to_length(stretched, clip.size(), rate);
  return out;
}

AudioClip lowpass(const AudioClip& clip, double cutoff_hz) {
  if (!(cutoff_hz > 0.0 && cutoff_hz < kSampleRate / 2.0))
    throw ConfigError("lowpass: cutoff " + std::to_string(cutoff_hz) +
                      " Hz outside (0, 8000)");
  if (clip.samples.size() < 2) return clip;
  const auto sos = butterworth8(cutoff_hz);
  const auto y = filtfilt(sos, {clip.samples.begin(), clip.samples.end()});
  AudioClip out;
  out.samples.assign(y.begin(), y.end());
  return out;
}

AudioClip eq_filter(const AudioClip& clip, double center_hz, double gain_db, double q) {
  if (!(center_hz > 0.0 && center_hz < kSampleRate / 2.0) || !(q > 0.0))
    throw ConfigError("eq_filter: centre must lie in (0, 8000) Hz and Q > 0");
  const double a = std::pow(10.0, gain_db / 40.0);
  const double w0 = 2.0 * std::numbers::pi * center_hz / kSampleRate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha / a;
  const Biquad s{(1.0 + alpha * a) / a0, -2.0 * std::cos(w0) / a0,
                 (1.0 - alpha * a) / a0, -2.0 * std::cos(w0) / a0,
                 (1.0 - alpha / a) / a0};
  std::vector<double> x(clip.samples.begin(), clip.samples.end());
  run_biquad(s, x, 0.0, 0.0);
  AudioClip out;
  out.samples.assign(x.begin(), x.end());
  return out;
}

namespace {

AudioClip augment_source(const AudioClip& clip, const AugmentConfig& c, Rng& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  AudioClip out = clip;
  const double gain = c.gain_db.sample(rng);
  if (gain != 0.0) {
    const float g = float(std::pow(10.0, gain / 20.0));
    for (auto& v : out.samples) v *= g;
  }
  if (coin(rng) < c.p_pitch) out = pitch_shift(out, c.pitch_semitones.sample(rng));
  if (coin(rng) < c.p_lowpass) out = lowpass(out, c.lowpass_hz.sample(rng));
  if (coin(rng) < c.p_eq) {
    const double f = c.eq_center_hz.sample(rng);
    const double g = c.eq_gain_db.sample(rng);
    out = eq_filter(out, f, g, c.eq_q.sample(rng));
  }
  return out;
}

}  // namespace

TrainingExample sample_training_example(std::span<const SourcePair> dataset,
                                        const AugmentConfig& config, Rng& rng,
                                        std::span<const double> weights) {
  if (dataset.empty()) throw ShapeError("sample_training_example: empty dataset");
  if (!weights.empty() && weights.size() != dataset.size())
    throw ShapeError("sample_training_example: one weight per song is required");
  config.validate();
  const std::size_t n = dataset.size();
  std::size_t ia;
  if (weights.empty()) {
    ia = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  } else {
    ia = std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng);
  }
  SourcePair pair = random_window(dataset[ia], config.window_seconds, rng);
  if (config.p_mix > 0.0) {
    std::size_t ib = ia;
    if (n >= 2 && weights.empty()) {
      ib = std::uniform_int_distribution<std::size_t>(0, n - 2)(rng);
      if (ib >= ia) ++ib;
    } else if (n >= 2) {
      std::vector<double> w(weights.begin(), weights.end());
      w[ia] = 0.0;
      if (std::any_of(w.begin(), w.end(), [](double x) { return x > 0.0; }))
        ib = std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng);
    }
    const SourcePair partner = random_window(dataset[ib], config.window_seconds, rng);
    pair = random_mix(pair, partner, config.p_mix, rng);
  }
  TrainingExample ex;
  ex.target.song_id = pair.song_id;
  ex.target.vocal = augment_source(pair.vocal, config, rng);
  ex.target.accompaniment = augment_source(pair.accompaniment, config, rng);
  ex.mixture = ex.target.mixture();
  return ex;
}

}  // namespace svsep
