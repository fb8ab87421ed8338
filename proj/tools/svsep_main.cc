// tools/svsep_main.cc

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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "svsep/augment.h"
#include "svsep/checkpoint.h"
#include "svsep/config.h"
#include "svsep/corpus.h"
#include "svsep/error.h"
#include "svsep/eval.h"
#include "svsep/selftrain.h"
#include "svsep/vad.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace svsep;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string manifest;
  std::string run_dir;

  RunConfig load() const {
    RunConfig c;
    if (!config.empty()) c = load_run_config(config);
    if (seed) c.seed = *seed;
    if (deterministic) c.deterministic = true;
    if (!manifest.empty()) c.manifest = manifest;
    if (!run_dir.empty()) c.run_dir = run_dir;
    return c;
  }
};

void add_common(CLI::App* cmd, Common& c, bool manifest = true) {
  cmd->add_option("--config", c.config, "RunConfig JSON file");
  cmd->add_option("--seed", c.seed, "Override the run seed");
  cmd->add_flag("--deterministic", c.deterministic, "Force deterministic mode");
  cmd->add_option("--run-dir", c.run_dir, "Directory for logs, checkpoints and snapshots");
  if (manifest) cmd->add_option("--manifest", c.manifest, "Corpus manifest (JSONL)");
}

CorpusManifest need_manifest(const RunConfig& c) {
  if (c.manifest.empty()) throw ConfigError("no manifest given (--manifest or paths.manifest)");
  return with_validation_split(read_manifest(c.manifest));
}

std::vector<SourcePair> load_split(const CorpusManifest& m, Split s) {
  auto entries = m.split(s);
  if (entries.empty()) throw ConfigError("manifest has no '" + to_string(s) + "' songs");
  return load_pairs(entries);
}

void snapshot(const RunConfig& c) {
  fs::create_directories(c.run_dir);
  save_run_config(c.run_dir / "config.json", c);
}

int cmd_synth(const Common& common, const std::string& out) {
  RunConfig c = common.load();
  const fs::path dir = out.empty() ? c.run_dir / "corpus" : fs::path(out);
  const auto m = synth_corpus(c.synth, dir);
  std::printf("wrote %zu songs to %s\n", m.entries.size(), (dir / "manifest.jsonl").c_str());
  return 0;
}

int cmd_train_teacher(const Common& common, std::optional<std::int64_t> iterations,
                      const std::string& out, bool resume) {
  RunConfig c = common.load();
  if (iterations) c.teacher.iterations = *iterations;
  c.teacher.seed ^= c.seed;
  const auto labeled = load_split(need_manifest(c), Split::labeled);
  snapshot(c);
  TrainOptions opt;
  opt.checkpoint_path = out.empty() ? c.run_dir / "teacher.ckpt" : fs::path(out);
  opt.log_path = c.run_dir / "teacher_log.jsonl";
  opt.provenance_path = c.run_dir / "teacher_provenance.jsonl";
  opt.resume = resume;
  const auto r = train_separator(labeled, c.teacher, opt);
  std::printf("final loss %.6f, checkpoint %s\n", r.losses.empty() ? 0.0 : r.losses.back(),
              opt.checkpoint_path.c_str());
  return 0;
}

int cmd_train_student(const Common& common, const std::string& selflabeled,
                      const std::string& kept_path, std::optional<std::int64_t> iterations,
                      const std::string& out, bool resume) {
  RunConfig c = common.load();
  if (iterations) c.student.iterations = *iterations;
  c.student.seed ^= c.seed;
  const auto labeled = load_split(need_manifest(c), Split::labeled);
  auto pseudo = load_pairs(read_manifest(selflabeled).entries);
  if (!kept_path.empty()) {
    std::ifstream in(kept_path);
    if (!in) throw ConfigError("cannot read kept list '" + kept_path + "'");
    const auto ids = json::parse(in).get<std::vector<std::string>>();
    pseudo = select_songs(pseudo, ids);
  }
  snapshot(c);
  TrainOptions opt;
  opt.checkpoint_path = out.empty() ? c.run_dir / "student.ckpt" : fs::path(out);
  opt.log_path = c.run_dir / "student_log.jsonl";
  opt.provenance_path = c.run_dir / "student_provenance.jsonl";
  opt.resume = resume;
  const auto r = train_student(labeled, pseudo, c.student, opt);
  std::printf("trained on %zu labeled + %zu self-labeled songs, final loss %.6f\n",
              labeled.size(), pseudo.size(), r.losses.empty() ? 0.0 : r.losses.back());
  return 0;
}

int cmd_train_vad(const Common& common, const std::string& target, const std::string& out) {
  RunConfig c = common.load();
  const SourceTag tag = source_tag_from_string(target);
  const auto labeled = load_split(need_manifest(c), Split::labeled);
  VadTrainConfig t = c.vad_train;
  t.seed ^= c.seed;
  const auto vad = train_vad(labeled, tag, c.vad, t);
  const fs::path path = out.empty() ? c.run_dir / ("vad_" + target + ".ckpt") : fs::path(out);
  save_vad(path, vad);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_pseudo_label(const Common& common, const std::string& checkpoint, const std::string& out) {
  RunConfig c = common.load();
  const auto model = load_separator(checkpoint).model;
  const auto unlabeled = load_split(need_manifest(c), Split::unlabeled);
  const fs::path dir = out.empty() ? c.run_dir / "pseudo" : fs::path(out);
  pseudo_label(model, unlabeled, dir);
  std::printf("labelled %zu songs into %s\n", unlabeled.size(), dir.c_str());
  return 0;
}

int cmd_filter(const Common& common, const std::string& pseudo, const std::string& vad_v,
               const std::string& vad_a, std::optional<double> tau,
               std::optional<double> top, const std::string& out) {
  RunConfig c = common.load();
  if (tau) c.tau = *tau;
  if (top) c.top_fraction = *top;
  c.validate();
  const auto songs = load_pairs(read_manifest(pseudo).entries);
  const auto f = filter_selflabeled(songs, load_vad(vad_v), load_vad(vad_a), c.tau,
                                    c.top_fraction);
  const fs::path dir = out.empty() ? c.run_dir : fs::path(out);
  fs::create_directories(dir);
  write_reports(dir / "quality.jsonl", f.reports);
  std::ofstream(dir / "kept.json") << json(f.kept).dump(2) << '\n';
  std::printf("kept %zu of %zu songs (tau %.3f, top %.3f); reports in %s\n", f.kept.size(),
              f.reports.size(), c.tau, c.top_fraction, (dir / "quality.jsonl").c_str());
  return 0;
}

int cmd_loop(const Common& common, std::optional<int> max_iterations) {
  RunConfig c = common.load();
  if (max_iterations) c.max_iterations = *max_iterations;
  c.validate();
  const auto m = need_manifest(c);
  LoopData data;
  data.labeled = load_split(m, Split::labeled);
  data.unlabeled = load_split(m, Split::unlabeled);
  data.validation = load_split(m, Split::validation);
  const auto r = self_training_loop(c, data);
  for (const auto& g : r.trace)
    std::printf("generation %d: validation mean SDR %s dB, %d self-labeled songs\n",
                g.generation,
                g.validation_mean ? std::to_string(*g.validation_mean).c_str() : "n/a",
                g.n_selflabeled);
  std::printf("best generation %d: %s\n", r.best_generation,
              r.trace[std::size_t(r.best_generation)].checkpoint.c_str());
  return 0;
}

int cmd_evaluate(const Common& common, const std::string& checkpoint, const std::string& split,
                 bool per_song, const std::string& json_out) {
  RunConfig c = common.load();
  const auto model = load_separator(checkpoint).model;
  const auto songs = load_split(need_manifest(c), split_from_string(split));
  const auto r = evaluate_testset(model, songs);
  std::fputs(format_table(r, per_song).c_str(), stdout);
  if (!json_out.empty()) std::ofstream(json_out) << to_json(r).dump(2) << '\n';
  return 0;
}

int cmd_quality_hist(const Common& common, const std::string& pseudo, const std::string& vad_v,
                     const std::string& vad_a, std::optional<double> tau, int bins,
                     const std::string& out) {
  RunConfig c = common.load();
  if (tau) c.tau = *tau;
  c.validate();
  const auto m = need_manifest(c);
  const auto vv = load_vad(vad_v), va = load_vad(vad_a);
  auto reports = [&](const std::vector<SourcePair>& songs) {
    return filter_selflabeled(songs, vv, va, c.tau, 1.0).reports;
  };
  std::vector<std::pair<std::string, std::vector<QualityReport>>> sets;
  sets.emplace_back("clean", reports(load_split(m, Split::labeled)));
  sets.emplace_back("noisy", reports(load_split(m, Split::unlabeled)));
  if (!pseudo.empty())
    sets.emplace_back("self-labeled", reports(load_pairs(read_manifest(pseudo).entries)));
  const auto hist = quality_histogram(sets, bins);
  json j = json::array();
  std::printf("%-14s %10s  counts per poor-fraction bin\n", "dataset", "mean");
  for (const auto& h : hist) {
    std::printf("%-14s %10.4f ", h.dataset.c_str(), h.mean_poor_fraction);
    for (int n : h.counts) std::printf(" %d", n);
    std::printf("\n");
    j.push_back({{"dataset", h.dataset}, {"counts", h.counts},
                 {"mean_poor_fraction", h.mean_poor_fraction}});
  }
  if (!out.empty()) std::ofstream(out) << j.dump(2) << '\n';
  return 0;
}

int cmd_augment_preview(const Common& common, int count, const std::string& out) {
  RunConfig c = common.load();
  const auto labeled = load_split(need_manifest(c), Split::labeled);
  const fs::path dir = out.empty() ? c.run_dir / "augment_preview" : fs::path(out);
  fs::create_directories(dir);
  Rng rng(c.seed);
  for (int i = 0; i < count; ++i) {
    const auto ex = sample_training_example(labeled, c.teacher.augment, rng);
    const std::string stem = "example" + std::to_string(i);
    write_wav(dir / (stem + "_mixture.wav"), ex.mixture);
    write_wav(dir / (stem + "_vocal.wav"), ex.target.vocal);
    write_wav(dir / (stem + "_accompaniment.wav"), ex.target.accompaniment);
    std::printf("%s: %s\n", stem.c_str(), ex.target.song_id.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Singing voice separation with noisy self-training"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth-corpus", "Write a synthetic corpus and manifest");
  add_common(synth, common, false);
  std::string out;
  synth->add_option("--out", out, "Output directory");

  std::optional<std::int64_t> iterations;
  bool resume = false;
  auto* teacher = app.add_subcommand("train-teacher", "Train a separator on the labeled split");
  add_common(teacher, common);
  teacher->add_option("--iterations", iterations);
  teacher->add_option("--out", out, "Checkpoint path");
  teacher->add_flag("--resume", resume, "Continue from the checkpoint if it matches");

  std::string target = "vocal";
  auto* vad = app.add_subcommand("train-vad", "Train a leakage detector");
  add_common(vad, common);
  vad->add_option("--target", target)->check(CLI::IsMember({"vocal", "accompaniment"}));
  vad->add_option("--out", out, "Checkpoint path");

  std::string checkpoint;
  auto* pseudo = app.add_subcommand("pseudo-label", "Separate the unlabeled split");
  add_common(pseudo, common);
  pseudo->add_option("--checkpoint", checkpoint)->required();
  pseudo->add_option("--out", out, "Output directory");

  std::string pseudo_manifest, vad_v, vad_a;
  std::optional<double> tau, top;
  auto* filter = app.add_subcommand("filter", "Rank self-labeled songs by detector quality");
  add_common(filter, common, false);
  filter->add_option("--pseudo", pseudo_manifest, "Self-labeled manifest")->required();
  filter->add_option("--vad-vocal", vad_v)->required();
  filter->add_option("--vad-accompaniment", vad_a)->required();
  filter->add_option("--tau", tau);
  filter->add_option("--top-fraction", top);
  filter->add_option("--out", out, "Output directory");

  std::string kept;
  auto* student = app.add_subcommand("train-student", "Train on labeled plus self-labeled songs");
  add_common(student, common);
  student->add_option("--selflabeled", pseudo_manifest)->required();
  student->add_option("--kept", kept, "JSON list of song ids to keep");
  student->add_option("--iterations", iterations);
  student->add_option("--out", out, "Checkpoint path");
  student->add_flag("--resume", resume, "Continue from the checkpoint if it matches");

  std::optional<int> max_iterations;
  auto* loop = app.add_subcommand("loop", "Run the full self-training loop");
  add_common(loop, common);
  loop->add_option("--max-iterations", max_iterations);

  std::string split = "test", json_out;
  bool per_song = false;
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a split");
  add_common(evaluate, common);
  evaluate->add_option("--checkpoint", checkpoint)->required();
  evaluate->add_option("--split", split)
      ->check(CLI::IsMember({"labeled", "unlabeled", "validation", "test"}));
  evaluate->add_flag("--per-song", per_song);
  evaluate->add_option("--json", json_out, "Also write the result as JSON");

  int bins = 10;
  auto* hist = app.add_subcommand("quality-hist", "Poor-frame fraction histograms per dataset");
  add_common(hist, common);
  hist->add_option("--pseudo", pseudo_manifest, "Self-labeled manifest");
  hist->add_option("--vad-vocal", vad_v)->required();
  hist->add_option("--vad-accompaniment", vad_a)->required();
  hist->add_option("--tau", tau);
  hist->add_option("--bins", bins)->check(CLI::PositiveNumber);
  hist->add_option("--out", out, "Write histogram data as JSON");

  int count = 8;
  auto* preview = app.add_subcommand("augment-preview", "Write augmented training examples");
  add_common(preview, common);
  preview->add_option("--count", count)->check(CLI::PositiveNumber);
  preview->add_option("--out", out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(common, out);
    if (*teacher) return cmd_train_teacher(common, iterations, out, resume);
    if (*vad) return cmd_train_vad(common, target, out);
    if (*pseudo) return cmd_pseudo_label(common, checkpoint, out);
    if (*filter) return cmd_filter(common, pseudo_manifest, vad_v, vad_a, tau, top, out);
    if (*student)
      return cmd_train_student(common, pseudo_manifest, kept, iterations, out, resume);
    if (*loop) return cmd_loop(common, max_iterations);
    if (*evaluate) return cmd_evaluate(common, checkpoint, split, per_song, json_out);
    if (*hist) return cmd_quality_hist(common, pseudo_manifest, vad_v, vad_a, tau, bins, out);
    if (*preview) return cmd_augment_preview(common, count, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "svsep: %s\n", e.what());
    return 1;
  }
  return 2;
}
