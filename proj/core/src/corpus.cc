// corpus.cc

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

#include "svsep/corpus.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "svsep/error.h"
#include "svsep/parallel.h"

namespace svsep {

namespace fs = std::filesystem;

std::string to_string(Split split) {
  switch (split) {
    case Split::labeled: return "labeled";
    case Split::unlabeled: return "unlabeled";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "labeled";
}

Split split_from_string(const std::string& s) {
  if (s == "labeled") return Split::labeled;
  if (s == "unlabeled") return Split::unlabeled;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "'");
}

std::vector<ManifestEntry> CorpusManifest::split(Split s) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(e);
  return out;
}

void CorpusManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (e.song_id.empty()) throw ConfigError("manifest entry without song_id");
    if (!seen.insert(e.song_id).second)
      throw ConfigError("duplicate song_id '" + e.song_id + "' in manifest");
  }
}

CorpusManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError(path.string(), "cannot open manifest");
  const fs::path base = path.parent_path();
  CorpusManifest m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.song_id = j.at("song_id").get<std::string>();
      e.split = split_from_string(j.at("split").get<std::string>());
      e.vocal_path = j.at("vocal_path").get<std::string>();
      e.acc_path = j.at("acc_path").get<std::string>();
      if (e.vocal_path.is_relative()) e.vocal_path = base / e.vocal_path;
      if (e.acc_path.is_relative()) e.acc_path = base / e.acc_path;
      m.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw IngestionError(path.string(),
                           "line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  m.validate();
  return m;
}

void write_manifest(const fs::path& path, const CorpusManifest& manifest) {
  manifest.validate();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IngestionError(path.string(), "cannot open for writing");
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) {
    const auto r = p.lexically_relative(base);
    return (r.empty() || *r.begin() == "..") ? p.string() : r.string();
  };
  for (const auto& e : manifest.entries)
    out << nlohmann::json{{"song_id", e.song_id},
                          {"split", to_string(e.split)},
                          {"vocal_path", rel(e.vocal_path)},
                          {"acc_path", rel(e.acc_path)}}
               .dump()
        << '\n';
}

std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

CorpusManifest with_validation_split(CorpusManifest manifest, double fraction) {
  if (!manifest.split(Split::validation).empty()) return manifest;
  std::vector<ManifestEntry*> labeled;
  for (auto& e : manifest.entries)
    if (e.split == Split::labeled) labeled.push_back(&e);
  if (labeled.size() < 2) return manifest;
  std::sort(labeled.begin(), labeled.end(), [](auto* a, auto* b) {
    const auto ha = stable_hash(a->song_id), hb = stable_hash(b->song_id);
    return ha != hb ? ha < hb : a->song_id < b->song_id;
  });
  const auto n = std::max<std::size_t>(1, std::size_t(std::llround(fraction * labeled.size())));
  for (std::size_t i = 0; i < n; ++i) labeled[i]->split = Split::validation;
  return manifest;
}

std::vector<SourcePair> load_pairs(const std::vector<ManifestEntry>& entries) {
  std::vector<SourcePair> out(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    SourcePair p;
    p.song_id = entries[i].song_id;
    p.vocal = load_audio(entries[i].vocal_path);
    p.accompaniment = load_audio(entries[i].acc_path);
    const std::size_t n = std::min(p.vocal.size(), p.accompaniment.size());
    p.vocal.samples.resize(n);
    p.accompaniment.samples.resize(n);
    out[i] = std::move(p);
  });
  return out;
}

void SynthSpec::validate() const {
  if (n_labeled_songs < 0 || n_unlabeled_songs < 0 || n_validation_songs < 0 ||
      n_test_songs < 0)
    throw ConfigError("song counts must be >= 0");
  if (!(song_seconds > 0)) throw ConfigError("song_seconds must be > 0");
  if (!(leakage_range.lo >= 0 && leakage_range.lo <= leakage_range.hi))
    throw ConfigError("leakage_range must satisfy 0 <= lo <= hi");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double midi_hz(double m) { return 440.0 * std::pow(2.0, (m - 69.0) / 12.0); }

// Adds sum_k amp(k) * sin(k * phase) for harmonics below the Nyquist guard,
// using the Chebyshev recurrence on sin(k * phase).
template <typename AmpFn>
void add_harmonics(double phase, double f0, double gain, AmpFn amp, float& out) {
  const int k_max = std::min(40, int(7600.0 / std::max(f0, 1.0)));
  if (k_max < 1) return;
  const double c2 = 2.0 * std::cos(phase);
  double s_prev = 0.0, s = std::sin(phase), acc = 0.0;
  for (int k = 1; k <= k_max; ++k) {
    acc += amp(k, k * f0) * s;
    const double next = c2 * s - s_prev;
    s_prev = s;
    s = next;
  }
  out += float(gain * acc);
}

struct Vowel {
  double f1, f2, f3;
};
constexpr Vowel kVowels[] = {{800, 1200, 2500}, {400, 2000, 2600}, {300, 2300, 3000},
                             {450, 800, 2500},  {325, 700, 2500},  {600, 1700, 2600}};

double formant_gain(const Vowel& v, double f) {
  auto peak = [f](double c, double bw) { return std::exp(-0.5 * std::pow((f - c) / bw, 2)); };
  return 0.08 + peak(v.f1, 120) + 0.7 * peak(v.f2, 180) + 0.4 * peak(v.f3, 250);
}

double rms(const std::vector<float>& x) {
  double s = 0;
  for (float v : x) s += double(v) * v;
  return x.empty() ? 0.0 : std::sqrt(s / double(x.size()));
}

void normalize_rms(std::vector<float>& x, double target) {
  const double r = rms(x);
  if (r <= 0) return;
  const float g = float(target / r);
  for (auto& v : x) v *= g;
}

}  // namespace

SourcePair synth_song(std::uint64_t seed, const std::string& song_id, double seconds) {
  Rng rng(stable_hash(song_id) ^ (seed * 0x9E3779B97F4A7C15ull));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * u(rng); };
  const std::size_t n = std::size_t(std::llround(seconds * kSampleRate));
  const double sr = kSampleRate;

  const double bpm = uni(85, 135), beat = 60.0 / bpm;
  const int root = int(uni(0, 12));
  const bool minor = u(rng) < 0.5;
  const int major_scale[] = {0, 2, 4, 5, 7, 9, 11};
  const int minor_scale[] = {0, 2, 3, 5, 7, 8, 10};
  const int* scale = minor ? minor_scale : major_scale;
  const int degrees[] = {0, 3, 4, 5, 1, 2};
  std::vector<int> progression;
  for (int i = 0; i < 4; ++i) progression.push_back(degrees[int(uni(0, i == 0 ? 1 : 6))]);
  const double bar = 4 * beat;
  // Chord tones (pitch classes relative to C) of the chord sounding at time t.
  auto chord_at = [&](double t) {
    const int deg = progression[std::size_t(int(t / bar)) % progression.size()];
    std::array<int, 3> tones{};
    for (int j = 0; j < 3; ++j) {
      const int d = deg + 2 * j;
      tones[std::size_t(j)] = root + scale[d % 7] + 12 * (d / 7);
    }
    return tones;
  };

  SourcePair song;
  song.song_id = song_id;
  auto& acc = song.accompaniment.samples;
  auto& voc = song.vocal.samples;
  acc.assign(n, 0.0f);
  voc.assign(n, 0.0f);

  // Pads and bass: one voice per chord tone, re-articulated each bar.
  const double pad_tilt = uni(1.0, 1.8);
  const double bright = uni(800, 2500);
  for (std::size_t b = 0; double(b) * bar < seconds; ++b) {
    const double t0 = double(b) * bar;
    const auto tones = chord_at(t0);
    const std::size_t i0 = std::size_t(t0 * sr);
    const std::size_t i1 = std::min(n, std::size_t((t0 + bar) * sr));
    for (int j = 0; j < 4; ++j) {
      const double midi = j < 3 ? 48 + tones[std::size_t(j)] : 36 + tones[0];
      const double f0 = midi_hz(midi) * (1.0 + uni(-0.002, 0.002));
      const double level = j < 3 ? 0.25 : 0.4;
      const double phase0 = uni(0, kTwoPi);
      for (std::size_t i = i0; i < i1; ++i) {
        const double t = double(i - i0) / sr;
        const double env = std::min(1.0, t / 0.08) * std::min(1.0, (bar - t) / 0.1) *
                           (0.7 + 0.3 * std::exp(-t / 0.6));
        add_harmonics(phase0 + kTwoPi * f0 * t, f0, level * env,
                      [&](int k, double f) {
                        return std::pow(k, -pad_tilt) / (1.0 + f / bright);
                      },
                      acc[i]);
      }
    }
  }
  // Percussion: kick on beats, noise hats on off-beats.
  const double hat_level = uni(0.1, 0.4);
  for (std::size_t b = 0; double(b) * beat < seconds; ++b) {
    const double t0 = double(b) * beat;
    const std::size_t i0 = std::size_t(t0 * sr);
    for (std::size_t i = i0; i < std::min(n, i0 + std::size_t(0.12 * sr)); ++i) {
      const double t = double(i - i0) / sr;
      const double f = 45.0 + 80.0 * std::exp(-t / 0.02);
      acc[i] += float(0.9 * std::exp(-t / 0.04) * std::sin(kTwoPi * f * t));
    }
    const std::size_t h0 = std::size_t((t0 + beat / 2) * sr);
    double prev = 0.0;
    for (std::size_t i = h0; i < std::min(n, h0 + std::size_t(0.05 * sr)); ++i) {
      const double t = double(i - h0) / sr;
      const double w = uni(-1, 1);
      acc[i] += float(hat_level * std::exp(-t / 0.012) * (w - prev));
      prev = w;
    }
  }
  // Low-passed noise bed.
  {
    const double level = uni(0.02, 0.08), pole = uni(0.85, 0.97);
    double state = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      state = pole * state + (1.0 - pole) * uni(-1, 1);
      acc[i] += float(level * state * 8.0);
    }
  }

  // Vocal: phrases of sung notes on chord tones, separated by rests.
  const double vib_rate = uni(4.5, 6.5), vib_depth = uni(0.15, 0.4);
  const double breath = uni(0.005, 0.02);
  double t = uni(0.0, 0.8);
  double phase = 0.0;
  while (t < seconds) {
    const double phrase_end = std::min(seconds, t + uni(1.5, 3.5));
    double prev_midi = -1;
    while (t < phrase_end) {
      const double dur = std::min(uni(0.15, 0.6), phrase_end - t);
      if (dur < 0.08) break;
      const auto tones = chord_at(t);
      double midi = 60 + tones[std::size_t(int(uni(0, 3)))];
      if (midi < 57) midi += 12;
      if (midi > 76) midi -= 12;
      const Vowel vowel = kVowels[int(uni(0, 6))];
      const double loud = uni(0.6, 1.0);
      const double start_midi = prev_midi < 0 ? midi : prev_midi;
      const std::size_t i0 = std::size_t(t * sr);
      const std::size_t i1 = std::min(n, std::size_t((t + dur) * sr));
      for (std::size_t i = i0; i < i1; ++i) {
        const double tt = double(i - i0) / sr;
        const double glide = std::min(1.0, tt / 0.03);
        const double vib = vib_depth * std::min(1.0, tt / 0.15) *
                           std::sin(kTwoPi * vib_rate * (double(i) / sr));
        const double f0 = midi_hz(start_midi + (midi - start_midi) * glide + vib);
        phase += kTwoPi * f0 / sr;
        if (phase > kTwoPi * 1e6) phase = std::fmod(phase, kTwoPi);
        const double env = loud * std::min(1.0, tt / 0.03) * std::min(1.0, (dur - tt) / 0.06);
        add_harmonics(phase, f0, 0.3 * env,
                      [&](int k, double f) { return formant_gain(vowel, f) / std::sqrt(k); },
                      voc[i]);
        voc[i] += float(breath * env * uni(-1, 1));
      }
      prev_midi = midi;
      t += dur;
    }
    t = phrase_end + uni(0.3, 1.2);
  }

  normalize_rms(voc, 0.05 * std::pow(10.0, uni(-3.0, 3.0) / 20.0));
  normalize_rms(acc, 0.05);
  return song;
}

SourcePair add_leakage(const SourcePair& clean, double leakage) {
  validate(clean);
  SourcePair out = clean;
  const float g = float(leakage);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    out.vocal.samples[i] = clean.vocal.samples[i] + g * clean.accompaniment.samples[i];
    out.accompaniment.samples[i] = clean.accompaniment.samples[i] + g * clean.vocal.samples[i];
  }
  return out;
}

CorpusManifest synth_corpus(const SynthSpec& spec, const fs::path& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IngestionError(out_dir.string(), "cannot create output directory: " + ec.message());

  struct Job {
    std::string id;
    Split split;
    double leakage;
  };
  std::vector<Job> jobs;
  Rng leak_rng(spec.seed ^ 0x4C45414Bull);
  auto add = [&](Split s, int count, const char* prefix) {
    for (int i = 0; i < count; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "%s%04d", prefix, i);
      const double leak = s == Split::unlabeled ? spec.leakage_range.sample(leak_rng) : 0.0;
      jobs.push_back({id, s, leak});
    }
  };
  add(Split::labeled, spec.n_labeled_songs, "lab");
  add(Split::unlabeled, spec.n_unlabeled_songs, "unl");
  add(Split::validation, spec.n_validation_songs, "val");
  add(Split::test, spec.n_test_songs, "tst");

  CorpusManifest manifest;
  manifest.entries.resize(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto& job = jobs[i];
    SourcePair song = synth_song(spec.seed, job.id, spec.song_seconds);
    if (job.split == Split::unlabeled) song = add_leakage(song, job.leakage);
    float peak = 0.0f;
    for (std::size_t k = 0; k < song.size(); ++k)
      peak = std::max({peak, std::abs(song.vocal.samples[k]),
                       std::abs(song.accompaniment.samples[k]),
                       std::abs(song.vocal.samples[k] + song.accompaniment.samples[k])});
    if (peak > 0.95f) {
      const float g = 0.95f / peak;
      for (auto& v : song.vocal.samples) v *= g;
      for (auto& v : song.accompaniment.samples) v *= g;
    }
    const fs::path dir = out_dir / to_string(job.split);
    ManifestEntry e{job.id, job.split, dir / (job.id + "_vocal.wav"),
                    dir / (job.id + "_acc.wav")};
    write_wav(e.vocal_path, song.vocal);
    write_wav(e.acc_path, song.accompaniment);
    manifest.entries[i] = std::move(e);
  });
  write_manifest(out_dir / "manifest.jsonl", manifest);
  std::ofstream leak(out_dir / "leakage.jsonl");
  for (const auto& job : jobs)
    if (job.split == Split::unlabeled)
      leak << nlohmann::json{{"song_id", job.id}, {"leakage", job.leakage}}.dump() << '\n';
  return read_manifest(out_dir / "manifest.jsonl");
}

}  // namespace svsep
