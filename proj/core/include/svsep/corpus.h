// svsep/corpus.h

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
#include <string>
#include <vector>

#include "svsep/audio.h"
#include "svsep/augment.h"

namespace svsep {

enum class Split { labeled, unlabeled, validation, test };

std::string to_string(Split split);
Split split_from_string(const std::string& s);

struct ManifestEntry {
  std::string song_id;
  Split split = Split::labeled;
  std::filesystem::path vocal_path, acc_path;
  bool operator==(const ManifestEntry&) const = default;
};

// Line-delimited JSON records {song_id, split, vocal_path, acc_path}.
// Relative paths resolve against the manifest's directory.
struct CorpusManifest {
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> split(Split s) const;
  // Throws ConfigError on duplicate song ids (ids must be unique across all
  // splits, which also keeps validation and test disjoint from training).
  void validate() const;
};

CorpusManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const CorpusManifest& manifest);

// Holds out 10% (at least one when there are >= 2) of the labeled songs as
// validation, chosen by a stable hash of the song id. Manifests that
// already have validation entries are returned unchanged.
CorpusManifest with_validation_split(CorpusManifest manifest, double fraction = 0.1);

// Loads both tracks of each entry; mismatched lengths are trimmed to the
// shorter track.
std::vector<SourcePair> load_pairs(const std::vector<ManifestEntry>& entries);

// Stable 64-bit FNV-1a hash.
std::uint64_t stable_hash(const std::string& s);

struct SynthSpec {
  int n_labeled_songs = 100;
  int n_unlabeled_songs = 100;
  int n_validation_songs = 10;
  int n_test_songs = 20;
  double song_seconds = 10.0;
  Interval leakage_range{0.0, 0.5};
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SynthSpec&) const = default;
};

// Clean vocal and accompaniment of one synthetic song; a pure function of
// (seed, song_id, seconds).
SourcePair synth_song(std::uint64_t seed, const std::string& song_id, double seconds);

// Adds `leakage` times each clean source to the other track.
SourcePair add_leakage(const SourcePair& clean, double leakage);

// Writes WAVs under out_dir/<split>/ and out_dir/manifest.jsonl. Unlabeled
// songs carry cross-source leakage at a gain drawn per song from
// leakage_range, also recorded in out_dir/leakage.jsonl.
CorpusManifest synth_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace svsep
