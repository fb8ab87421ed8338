// eval.cc

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

#include "svsep/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "svsep/error.h"
#include "svsep/parallel.h"

namespace svsep {

std::optional<double> sdr(std::span<const float> reference,
                          std::span<const float> estimate) {
  if (reference.size() != estimate.size())
    throw ShapeError("sdr: reference has " + std::to_string(reference.size()) +
                     " samples, estimate " + std::to_string(estimate.size()));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double s = reference[i], d = s - double(estimate[i]);
    num += s * s;
    den += d * d;
  }
  if (num == 0.0) return std::nullopt;
  if (den == 0.0) return kSdrCap;
  return std::min(kSdrCap, 10.0 * std::log10(num / den));
}

std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::optional<double> segment_median_sdr(std::span<const float> reference,
                                         std::span<const float> estimate) {
  if (reference.size() != estimate.size())
    throw ShapeError("segment_median_sdr: length mismatch");
  const std::size_t seg = kSampleRate;
  std::vector<double> scores;
  for (std::size_t start = 0; start + seg <= reference.size(); start += seg)
    if (auto v = sdr(reference.subspan(start, seg), estimate.subspan(start, seg)))
      scores.push_back(*v);
  return median(std::move(scores));
}

SourcePair separate(const Separator& model, const AudioClip& mixture) {
  const auto& cfg = model.config().stft;
  const auto spec = stft(mixture, cfg);
  const auto masks = model.separate(spec);
  SourcePair out;
  out.vocal = istft(apply_mask(spec, masks.vocal), mixture.size(), cfg);
  out.accompaniment = istft(apply_mask(spec, masks.accompaniment), mixture.size(), cfg);
  return out;
}

SongScore evaluate_song(const Separator& model, const AudioClip& mixture,
                        const SourcePair& refs) {
  validate(refs);
  if (mixture.size() != refs.size())
    throw ShapeError("evaluate_song: mixture and references differ in length for '" +
                     refs.song_id + "'");
  const auto est = separate(model, mixture);
  SongScore s;
  s.song_id = refs.song_id;
  s.vocal = segment_median_sdr(refs.vocal.samples, est.vocal.samples);
  s.accompaniment = segment_median_sdr(refs.accompaniment.samples, est.accompaniment.samples);
  return s;
}

EvalSummary summarize(std::span<const SongScore> songs) {
  std::vector<double> v, a;
  for (const auto& s : songs) {
    if (s.vocal) v.push_back(*s.vocal);
    if (s.accompaniment) a.push_back(*s.accompaniment);
  }
  EvalSummary out;
  out.vocal = median(std::move(v));
  out.accompaniment = median(std::move(a));
  if (out.vocal && out.accompaniment) out.mean = 0.5 * (*out.vocal + *out.accompaniment);
  return out;
}

EvalResult evaluate_testset(const Separator& model, std::span<const SourcePair> songs) {
  if (songs.empty()) throw ShapeError("evaluate_testset: no songs");
  EvalResult r;
  r.per_song.resize(songs.size());
  parallel_for(songs.size(), [&](std::size_t i) {
    r.per_song[i] = evaluate_song(model, songs[i].mixture(), songs[i]);
  });
  r.summary = summarize(r.per_song);
  return r;
}

namespace {

std::string cell(const std::optional<double>& v) {
  if (!v) return "       -";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%8.2f", *v);
  return buf;
}

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::string format_table(const EvalResult& result, bool per_song) {
  std::string out;
  std::size_t width = 7;
  if (per_song)
    for (const auto& s : result.per_song) width = std::max(width, s.song_id.size());
  auto row = [&](const std::string& name, const std::optional<double>& v,
                 const std::optional<double>& a, const std::optional<double>& m) {
    out += name + std::string(width - std::min(width, name.size()), ' ') + "  " +
           cell(v) + "  " + cell(a) + "  " + cell(m) + "\n";
  };
  out += std::string(width, ' ') + "    SDR(V)    SDR(A)      Mean\n";
  if (per_song)
    for (const auto& s : result.per_song) {
      std::optional<double> m;
      if (s.vocal && s.accompaniment) m = 0.5 * (*s.vocal + *s.accompaniment);
      row(s.song_id, s.vocal, s.accompaniment, m);
    }
  row("median", result.summary.vocal, result.summary.accompaniment, result.summary.mean);
  return out;
}

nlohmann::json to_json(const EvalResult& result) {
  nlohmann::json songs = nlohmann::json::array();
  for (const auto& s : result.per_song)
    songs.push_back({{"song_id", s.song_id},
                     {"sdr_vocal", opt_json(s.vocal)},
                     {"sdr_accompaniment", opt_json(s.accompaniment)}});
  return {{"per_song", songs},
          {"summary",
           {{"SDR(V)", opt_json(result.summary.vocal)},
            {"SDR(A)", opt_json(result.summary.accompaniment)},
            {"Mean", opt_json(result.summary.mean)}}}};
}

}  // namespace svsep
