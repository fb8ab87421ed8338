// svsep/eval.h

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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svsep/audio.h"
#include "svsep/separator.h"

namespace svsep {

inline constexpr double kSdrCap = 100.0;

// 10 log10(|s|^2 / |s - s_hat|^2), capped at kSdrCap. nullopt when the
// reference is all zeros. Throws ShapeError on a length mismatch.
std::optional<double> sdr(std::span<const float> reference,
                          std::span<const float> estimate);

// Median; the mean of the two central values for an even count. nullopt
// for an empty input.
std::optional<double> median(std::vector<double> values);

struct SongScore {
  std::string song_id;
  std::optional<double> vocal, accompaniment;
  bool operator==(const SongScore&) const = default;
};

// Median SDR over non-overlapping one-second segments. The trailing partial
// segment is dropped and segments with a silent reference are skipped.
std::optional<double> segment_median_sdr(std::span<const float> reference,
                                         std::span<const float> estimate);

// Separates a full mixture once: masks from the model, then istft.
SourcePair separate(const Separator& model, const AudioClip& mixture);

SongScore evaluate_song(const Separator& model, const AudioClip& mixture,
                        const SourcePair& refs);

struct EvalSummary {
  std::optional<double> vocal, accompaniment, mean;
  bool operator==(const EvalSummary&) const = default;
};

struct EvalResult {
  std::vector<SongScore> per_song;
  EvalSummary summary;
  bool operator==(const EvalResult&) const = default;
};

// Median across songs per source (songs without a value are left out);
// mean is the average of the two medians.
EvalSummary summarize(std::span<const SongScore> songs);

// Songs are scored in parallel (SVSEP_WORKERS) and reported in input order.
EvalResult evaluate_testset(const Separator& model, std::span<const SourcePair> songs);

// Fixed-width table with columns SDR(V), SDR(A), Mean.
std::string format_table(const EvalResult& result, bool per_song = false);
nlohmann::json to_json(const EvalResult& result);

}  // namespace svsep
