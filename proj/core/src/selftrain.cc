// selftrain.cc

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

#include "svsep/selftrain.h"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

#include "svsep/augment.h"
#include "svsep/corpus.h"
#include "svsep/error.h"
#include "svsep/eval.h"
#include "svsep/parallel.h"

namespace svsep {

using json = nlohmann::json;

namespace {

std::ofstream open_log(const std::filesystem::path& path, bool append) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw ConfigError("cannot write log '" + path.string() + "'");
  return out;
}

// Source label of each component of a (possibly remixed) song id.
std::pair<std::string, std::string> provenance_of(
    const std::string& id, const std::map<std::string, std::string>& sources) {
  if (auto it = sources.find(id); it != sources.end()) return {it->second, it->second};
  for (std::size_t p = id.find('+'); p != std::string::npos; p = id.find('+', p + 1)) {
    auto a = sources.find(id.substr(0, p)), b = sources.find(id.substr(p + 1));
    if (a != sources.end() && b != sources.end()) return {a->second, b->second};
  }
  return {"unknown", "unknown"};
}

}  // namespace

TrainResult train_separator(std::span<const SourcePair> data, const TrainConfig& config,
                            const TrainOptions& options) {
  config.validate();
  if (data.empty()) throw ShapeError("train_separator: no training songs");
  if (!options.sources.empty() && options.sources.size() != data.size())
    throw ShapeError("train_separator: one source label per song is required");
  if (!options.weights.empty() && options.weights.size() != data.size())
    throw ShapeError("train_separator: one sampling weight per song is required");

  TrainResult result;
  result.model = Separator(config.model, config.seed);
  Adam adam;
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::int64_t start = 0;
  if (options.resume && !options.checkpoint_path.empty() &&
      std::filesystem::exists(options.checkpoint_path)) {
    auto loaded = load_separator(options.checkpoint_path);
    if (loaded.state && loaded.state->config == config) {
      result.model = std::move(loaded.model);
      adam = std::move(loaded.state->optimizer);
      std::istringstream(loaded.state->rng_state) >> rng;
      start = loaded.state->iteration;
    }
  }
  const bool append = start > 0;

  std::map<std::string, std::string> sources;
  for (std::size_t i = 0; i < data.size(); ++i)
    sources[data[i].song_id] = options.sources.empty() ? "labeled" : options.sources[i];

  std::ofstream log, provenance;
  if (!options.log_path.empty()) log = open_log(options.log_path, append);
  if (!options.provenance_path.empty()) provenance = open_log(options.provenance_path, append);

  auto save = [&](std::int64_t iteration) {
    if (options.checkpoint_path.empty()) return;
    TrainState state{config, iteration, {}, adam};
    std::ostringstream rs;
    rs << rng;
    state.rng_state = rs.str();
    save_separator(options.checkpoint_path, result.model, &state);
  };

  const auto t0 = std::chrono::steady_clock::now();
  double window_loss = 0.0;
  int window_count = 0;
  std::vector<TrainItem> batch(std::size_t(config.batch));
  for (std::int64_t it = start; it < config.iterations; ++it) {
    for (auto& item : batch) {
      const auto ex = sample_training_example(data, config.augment, rng, options.weights);
      item = make_train_item<float>(ex.target, config.model.stft);
      if (provenance.is_open()) {
        const auto [v, a] = provenance_of(ex.target.song_id, sources);
        provenance << json{{"iteration", it}, {"song_id", ex.target.song_id},
                           {"vocal_source", v}, {"accompaniment_source", a}}.dump()
                   << '\n';
      }
    }
    const double loss = train_step(result.model, adam, batch, config.loss, config.lr, it);
    result.losses.push_back(loss);
    window_loss += loss;
    ++window_count;
    if (options.on_step) options.on_step(it, loss);

    const bool last = it + 1 == config.iterations;
    if (log.is_open() && ((it + 1) % config.log_every == 0 || last)) {
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log << json{{"iteration", it + 1}, {"lr", lr_at(config.lr, it)},
                  {"loss", window_loss / window_count}, {"wall_seconds", wall}}.dump()
          << '\n';
      log.flush();
      window_loss = 0.0;
      window_count = 0;
    }
    if ((it + 1) % config.checkpoint_every == 0 || last) save(it + 1);
  }
  if (start >= config.iterations) save(start);
  return result;
}

std::vector<SourcePair> pseudo_label(const Separator& teacher,
                                     std::span<const SourcePair> unlabeled,
                                     const std::filesystem::path& out_dir) {
  std::vector<SourcePair> out(unlabeled.size());
  parallel_for(unlabeled.size(), [&](std::size_t i) {
    const SourcePair& song = unlabeled[i];
    const std::size_t n = std::min(song.vocal.size(), song.accompaniment.size());
    AudioClip vocal_track, acc_track;
    vocal_track.samples.assign(song.vocal.samples.begin(), song.vocal.samples.begin() + long(n));
    acc_track.samples.assign(song.accompaniment.samples.begin(),
                             song.accompaniment.samples.begin() + long(n));
    out[i].song_id = song.song_id;
    out[i].vocal = separate(teacher, vocal_track).vocal;
    out[i].accompaniment = separate(teacher, acc_track).accompaniment;
  });
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    CorpusManifest manifest;
    for (const auto& p : out) {
      const auto v = out_dir / (p.song_id + "_vocal.wav");
      const auto a = out_dir / (p.song_id + "_accompaniment.wav");
      write_wav(v, p.vocal);
      write_wav(a, p.accompaniment);
      manifest.entries.push_back({p.song_id, Split::unlabeled, v, a});
    }
    write_manifest(out_dir / "manifest.jsonl", manifest);
  }
  return out;
}

FilterResult filter_selflabeled(std::span<const SourcePair> pseudo, const Vad& vad_vocal,
                                const Vad& vad_acc, double tau, double top_fraction) {
  FilterResult r;
  r.reports.resize(pseudo.size());
  parallel_for(pseudo.size(), [&](std::size_t i) {
    r.reports[i] = count_poor_frames(pseudo[i].vocal, pseudo[i].accompaniment, vad_vocal,
                                     vad_acc, tau, pseudo[i].song_id);
  });
  r.kept = rank_and_filter(r.reports, top_fraction);
  return r;
}

std::vector<SourcePair> select_songs(std::span<const SourcePair> pseudo,
                                     std::span<const std::string> ids) {
  std::map<std::string, const SourcePair*> by_id;
  for (const auto& p : pseudo) by_id[p.song_id] = &p;
  std::vector<SourcePair> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ShapeError("select_songs: unknown song id '" + id + "'");
    out.push_back(*it->second);
  }
  return out;
}

TrainResult train_student(std::span<const SourcePair> labeled,
                          std::span<const SourcePair> selflabeled, const TrainConfig& config,
                          TrainOptions options, double selflabeled_weight) {
  std::vector<SourcePair> data(labeled.begin(), labeled.end());
  data.insert(data.end(), selflabeled.begin(), selflabeled.end());
  options.sources.assign(labeled.size(), "labeled");
  options.sources.resize(data.size(), "selflabeled");
  options.weights.clear();
  if (selflabeled_weight != 1.0) {
    options.weights.assign(labeled.size(), 1.0);
    options.weights.resize(data.size(), selflabeled_weight);
  }
  return train_separator(data, config, options);
}

namespace {

std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t local, const std::string& what) {
  return stable_hash(std::to_string(run_seed) + "/" + std::to_string(local) + "/" + what);
}

class LoopState {
 public:
  explicit LoopState(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
      std::ifstream in(path_);
      try {
        state_ = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError("corrupt loop state '" + path_.string() + "': " + e.what());
      }
    } else {
      state_ = {{"done", json::object()}, {"trace", json::array()}};
    }
  }
  bool done(const std::string& phase) const { return state_["done"].contains(phase); }
  const json& value(const std::string& phase) const { return state_["done"].at(phase); }
  void finish(const std::string& phase, json value = true) {
    state_["done"][phase] = std::move(value);
    write();
  }
  std::vector<GenerationRecord> trace() const {
    std::vector<GenerationRecord> out;
    for (const auto& g : state_["trace"]) {
      GenerationRecord r;
      r.generation = g.at("generation").get<int>();
      if (!g.at("validation_mean").is_null()) r.validation_mean = g.at("validation_mean").get<double>();
      r.checkpoint = g.at("checkpoint").get<std::string>();
      r.n_selflabeled = g.at("n_selflabeled").get<int>();
      out.push_back(r);
    }
    return out;
  }
  void record(const GenerationRecord& r) {
    state_["trace"].push_back({{"generation", r.generation},
                               {"validation_mean", r.validation_mean ? json(*r.validation_mean)
                                                                     : json(nullptr)},
                               {"checkpoint", r.checkpoint.string()},
                               {"n_selflabeled", r.n_selflabeled}});
    write();
  }

 private:
  void write() const {
    auto tmp = path_;
    tmp += ".tmp";
    {
      std::ofstream out(tmp);
      out << state_.dump(2) << '\n';
      if (!out) throw ConfigError("cannot write loop state '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path_);
  }

  std::filesystem::path path_;
  json state_;
};

}  // namespace

LoopResult self_training_loop(const RunConfig& config, const LoopData& data) {
  config.validate();
  if (data.labeled.empty()) throw ShapeError("self_training_loop: no labeled songs");
  if (data.validation.empty()) throw ShapeError("self_training_loop: no validation songs");
  const auto& dir = config.run_dir;
  std::filesystem::create_directories(dir);
  save_run_config(dir / "config.json", config);
  LoopState state(dir / "loop_state.json");

  auto validate_model = [&](const Separator& m) {
    return evaluate_testset(m, data.validation).summary.mean;
  };

  // Generation 0: the teacher.
  const auto teacher_ckpt = dir / "gen0" / "model.ckpt";
  Separator current;
  if (!state.done("teacher")) {
    TrainConfig tc = config.teacher;
    tc.seed = derive_seed(config.seed, tc.seed, "teacher");
    TrainOptions opt;
    opt.log_path = dir / "gen0" / "train_log.jsonl";
    opt.checkpoint_path = teacher_ckpt;
    opt.provenance_path = dir / "gen0" / "provenance.jsonl";
    opt.resume = true;
    current = train_separator(data.labeled, tc, opt).model;
    state.finish("teacher");
  } else {
    current = load_separator(teacher_ckpt).model;
  }
  if (state.trace().empty())
    state.record({0, validate_model(current), teacher_ckpt, 0});

  const auto vad_vocal_path = dir / "vad_vocal.ckpt";
  const auto vad_acc_path = dir / "vad_accompaniment.ckpt";
  Vad vad_vocal, vad_acc;
  if (!state.done("vad")) {
    VadTrainConfig vt = config.vad_train;
    vt.seed = derive_seed(config.seed, config.vad_train.seed, "vad_vocal");
    vad_vocal = train_vad(data.labeled, SourceTag::vocal, config.vad, vt);
    save_vad(vad_vocal_path, vad_vocal);
    vt.seed = derive_seed(config.seed, config.vad_train.seed, "vad_accompaniment");
    vad_acc = train_vad(data.labeled, SourceTag::accompaniment, config.vad, vt);
    save_vad(vad_acc_path, vad_acc);
    state.finish("vad");
  } else {
    vad_vocal = load_vad(vad_vocal_path);
    vad_acc = load_vad(vad_acc_path);
  }

  for (int g = 1; g <= config.max_iterations; ++g) {
    auto trace = state.trace();
    if (int(trace.size()) > g) {
      current = load_separator(trace[std::size_t(g)].checkpoint).model;
      continue;
    }
    if (state.done("gen" + std::to_string(g) + ".failed")) break;
    if (trace.size() >= 2) {
      const auto& a = trace[trace.size() - 2].validation_mean;
      const auto& b = trace.back().validation_mean;
      if (!a || !b || *b - *a < config.min_gain_db) break;
    }
    const std::string tag = "gen" + std::to_string(g);
    const auto gdir = dir / tag;
    try {
      std::vector<SourcePair> pseudo;
      if (!state.done(tag + ".pseudo")) {
        pseudo = pseudo_label(current, data.unlabeled, gdir / "pseudo");
        state.finish(tag + ".pseudo");
      } else {
        pseudo = load_pairs(read_manifest(gdir / "pseudo" / "manifest.jsonl").entries);
      }

      std::vector<std::string> kept;
      if (!state.done(tag + ".filter")) {
        const auto f = filter_selflabeled(pseudo, vad_vocal, vad_acc, config.tau,
                                          config.top_fraction);
        write_reports(gdir / "quality.jsonl", f.reports);
        kept = f.kept;
        state.finish(tag + ".filter", kept);
      } else {
        kept = state.value(tag + ".filter").get<std::vector<std::string>>();
      }
      const auto selected = select_songs(pseudo, kept);

      const auto ckpt = gdir / "model.ckpt";
      if (!state.done(tag + ".student")) {
        TrainConfig sc = config.student;
        sc.seed = derive_seed(config.seed, sc.seed, tag);
        TrainOptions opt;
        opt.log_path = gdir / "train_log.jsonl";
        opt.checkpoint_path = ckpt;
        opt.provenance_path = gdir / "provenance.jsonl";
        opt.resume = true;
        current = train_student(data.labeled, selected, sc, opt, config.selflabeled_weight).model;
        state.finish(tag + ".student");
      } else {
        current = load_separator(ckpt).model;
      }
      state.record({g, validate_model(current), ckpt, int(selected.size())});
    } catch (const Error& e) {
      state.finish(tag + ".failed", e.what());
      break;
    }
  }

  LoopResult result;
  result.trace = state.trace();
  for (std::size_t i = 1; i < result.trace.size(); ++i) {
    const auto& best = result.trace[std::size_t(result.best_generation)].validation_mean;
    const auto& cand = result.trace[i].validation_mean;
    if (cand && (!best || *cand > *best)) result.best_generation = int(i);
  }
  result.best =
      load_separator(result.trace[std::size_t(result.best_generation)].checkpoint).model;
  return result;
}

}  // namespace svsep
