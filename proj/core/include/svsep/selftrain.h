// svsep/selftrain.h

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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svsep/audio.h"
#include "svsep/checkpoint.h"
#include "svsep/config.h"
#include "svsep/separator.h"
#include "svsep/vad.h"

namespace svsep {

struct TrainOptions {
  // JSONL with {iteration, lr, loss, wall_seconds} every log_every steps.
  std::filesystem::path log_path;
  // Written every checkpoint_every steps and at the end, with optimiser and
  // sampler state.
  std::filesystem::path checkpoint_path;
  // Continue from checkpoint_path when it holds the state of a run with the
  // same TrainConfig.
  bool resume = false;
  // JSONL with {iteration, song_id, vocal_source, accompaniment_source} for
  // every drawn example.
  std::filesystem::path provenance_path;
  // Per-song source label written to the provenance log; defaults to
  // "labeled" for every song.
  std::vector<std::string> sources;
  // Per-song sampling weights; uniform when empty.
  std::vector<double> weights;
  std::function<void(std::int64_t iteration, double loss)> on_step;
};

struct TrainResult {
  Separator model;
  std::vector<double> losses;  // one per iteration of this invocation
};

// Trains a freshly initialised separator (seed config.seed) on augmented
// windows of `data`. A TrainingError propagates with the last periodic
// checkpoint left on disk.
TrainResult train_separator(std::span<const SourcePair> data, const TrainConfig& config,
                            const TrainOptions& options = {});

// Runs the teacher on each noisy track separately: the vocal-track output is
// the new vocal and the accompaniment-track output the new accompaniment.
// Tracks of unequal length are trimmed to the shorter. When out_dir is set,
// WAVs and a manifest.jsonl (split "unlabeled") are written there.
std::vector<SourcePair> pseudo_label(const Separator& teacher,
                                     std::span<const SourcePair> unlabeled,
                                     const std::filesystem::path& out_dir = {});

struct FilterResult {
  std::vector<QualityReport> reports;  // input order
  std::vector<std::string> kept;       // best first
};

FilterResult filter_selflabeled(std::span<const SourcePair> pseudo, const Vad& vad_vocal,
                                const Vad& vad_acc, double tau, double top_fraction);

// The selected subset of `pseudo`, in rank order.
std::vector<SourcePair> select_songs(std::span<const SourcePair> pseudo,
                                     std::span<const std::string> ids);

// Student trained from scratch on labeled plus self-labeled songs. Each
// self-labeled song is drawn with selflabeled_weight times the probability
// of a labeled song (1 gives uniform sampling over the union).
TrainResult train_student(std::span<const SourcePair> labeled,
                          std::span<const SourcePair> selflabeled, const TrainConfig& config,
                          TrainOptions options = {}, double selflabeled_weight = 1.0);

struct LoopData {
  std::vector<SourcePair> labeled, unlabeled, validation;
};

struct GenerationRecord {
  int generation = 0;
  std::optional<double> validation_mean;
  std::filesystem::path checkpoint;
  int n_selflabeled = 0;
  bool operator==(const GenerationRecord&) const = default;
};

struct LoopResult {
  int best_generation = 0;
  std::vector<GenerationRecord> trace;
  Separator best;
};

// Teacher, detectors, then up to max_iterations generations of pseudo-label,
// filter, student and validation. Stops early once a generation improves the
// validation mean SDR by less than min_gain_db over its predecessor. Every
// phase records completion in run_dir/loop_state.json and is skipped on a
// rerun; interrupted training resumes from its checkpoint. An error inside a
// generation ends the loop (recorded in loop_state.json) and the best
// earlier generation is returned.
LoopResult self_training_loop(const RunConfig& config, const LoopData& data);

}  // namespace svsep
