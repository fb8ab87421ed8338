// config.cc

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

#include "svsep/config.h"

#include <fstream>
#include <set>

#include "svsep/error.h"

namespace svsep {

using json = nlohmann::json;

void TrainConfig::validate() const {
  model.validate();
  augment.validate();
  loss.validate();
  lr.validate();
  if (iterations < 0 || batch < 1 || log_every < 1 || checkpoint_every < 1)
    throw ConfigError("training needs iterations >= 0, batch/log/checkpoint intervals >= 1");
}

TrainConfig TrainConfig::with_preset(const std::string& preset) {
  TrainConfig c;
  c.model = separator_preset(preset);
  return c;
}

void RunConfig::validate() const {
  synth.validate();
  teacher.validate();
  student.validate();
  vad.validate();
  vad_train.validate();
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
  if (!(top_fraction > 0.0 && top_fraction <= 1.0))
    throw ConfigError("top_fraction must lie in (0, 1]");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(min_gain_db >= 0.0)) throw ConfigError("min_gain_db must be >= 0");
  if (!(selflabeled_weight >= 0.0)) throw ConfigError("selflabeled_weight must be >= 0");
}

namespace {

// Reads fields of one JSON object and rejects any key that was not read.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }
  const json* sub(const char* key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string path(const char* key) const { return where_ + "." + key; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

json interval(const Interval& i) { return json::array({i.lo, i.hi}); }

void read_interval(Fields& f, const char* key, Interval& out) {
  if (const json* v = f.sub(key)) {
    if (!v->is_array() || v->size() != 2)
      throw ConfigError(f.path(key) + ": expected [lo, hi]");
    out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
  }
}

json to_json(const StftConfig& s) { return {{"fft_size", s.fft_size}, {"hop", s.hop}}; }

StftConfig stft_from_json(const json& j, const std::string& where) {
  StftConfig s;
  Fields f(j, where);
  f.get("fft_size", s.fft_size);
  f.get("hop", s.hop);
  return s;
}

json to_json(const AugmentConfig& a) {
  return {{"window_seconds", a.window_seconds}, {"p_mix", a.p_mix},
          {"gain_db", interval(a.gain_db)},     {"pitch_semitones", interval(a.pitch_semitones)},
          {"lowpass_hz", interval(a.lowpass_hz)}, {"eq_center_hz", interval(a.eq_center_hz)},
          {"eq_gain_db", interval(a.eq_gain_db)}, {"eq_q", interval(a.eq_q)},
          {"p_pitch", a.p_pitch},               {"p_lowpass", a.p_lowpass},
          {"p_eq", a.p_eq}};
}

AugmentConfig augment_from_json(const json& j, const std::string& where) {
  AugmentConfig a;
  Fields f(j, where);
  f.get("window_seconds", a.window_seconds);
  f.get("p_mix", a.p_mix);
  read_interval(f, "gain_db", a.gain_db);
  read_interval(f, "pitch_semitones", a.pitch_semitones);
  read_interval(f, "lowpass_hz", a.lowpass_hz);
  read_interval(f, "eq_center_hz", a.eq_center_hz);
  read_interval(f, "eq_gain_db", a.eq_gain_db);
  read_interval(f, "eq_q", a.eq_q);
  f.get("p_pitch", a.p_pitch);
  f.get("p_lowpass", a.p_lowpass);
  f.get("p_eq", a.p_eq);
  return a;
}

json to_json(const LossWeights& w) {
  return {{"audio", w.audio}, {"spec", w.spec}, {"vocal", w.vocal},
          {"accompaniment", w.accompaniment}};
}

LossWeights loss_from_json(const json& j, const std::string& where) {
  LossWeights w;
  Fields f(j, where);
  f.get("audio", w.audio);
  f.get("spec", w.spec);
  f.get("vocal", w.vocal);
  f.get("accompaniment", w.accompaniment);
  return w;
}

json to_json(const LrSchedule& s) {
  return {{"initial", s.initial}, {"halve_every", s.halve_every}, {"floor", s.floor}};
}

LrSchedule lr_from_json(const json& j, const std::string& where) {
  LrSchedule s;
  Fields f(j, where);
  f.get("initial", s.initial);
  f.get("halve_every", s.halve_every);
  f.get("floor", s.floor);
  return s;
}

json to_json(const SynthSpec& s) {
  return {{"n_labeled_songs", s.n_labeled_songs},
          {"n_unlabeled_songs", s.n_unlabeled_songs},
          {"n_validation_songs", s.n_validation_songs},
          {"n_test_songs", s.n_test_songs},
          {"song_seconds", s.song_seconds},
          {"leakage_range", interval(s.leakage_range)},
          {"seed", s.seed}};
}

SynthSpec synth_from_json(const json& j, const std::string& where) {
  SynthSpec s;
  Fields f(j, where);
  f.get("n_labeled_songs", s.n_labeled_songs);
  f.get("n_unlabeled_songs", s.n_unlabeled_songs);
  f.get("n_validation_songs", s.n_validation_songs);
  f.get("n_test_songs", s.n_test_songs);
  f.get("song_seconds", s.song_seconds);
  read_interval(f, "leakage_range", s.leakage_range);
  f.get("seed", s.seed);
  return s;
}

json to_json(const VadTrainConfig& v) {
  return {{"iterations", v.iterations}, {"batch", v.batch},
          {"lr", v.lr},                 {"window_seconds", v.window_seconds},
          {"p_mix", v.p_mix},           {"gain_db", interval(v.gain_db)},
          {"p_drop", v.p_drop},         {"seed", v.seed}};
}

VadTrainConfig vad_train_from_json(const json& j, const std::string& where) {
  VadTrainConfig v;
  Fields f(j, where);
  f.get("iterations", v.iterations);
  f.get("batch", v.batch);
  f.get("lr", v.lr);
  f.get("window_seconds", v.window_seconds);
  f.get("p_mix", v.p_mix);
  read_interval(f, "gain_db", v.gain_db);
  f.get("p_drop", v.p_drop);
  f.get("seed", v.seed);
  return v;
}

SeparatorConfig separator_from_json_at(const json& j, const std::string& where) {
  Fields f(j, where);
  SeparatorConfig c;
  std::string preset;
  f.get("preset", preset);
  if (!preset.empty()) c = separator_preset(preset);
  f.get("channels", c.channels);
  f.get("dense_layers", c.dense_layers);
  f.get("attn_channels", c.attn_channels);
  f.get("attn_key_dim", c.attn_key_dim);
  f.get("attn_band", c.attn_band);
  f.get("pos_k", c.pos_k);
  if (const json* s = f.sub("stft")) c.stft = stft_from_json(*s, f.path("stft"));
  return c;
}

TrainConfig train_from_json_at(const json& j, const std::string& where,
                               const TrainConfig& fallback = {}) {
  Fields f(j, where);
  TrainConfig c = fallback;
  if (const json* m = f.sub("model")) c.model = separator_from_json_at(*m, f.path("model"));
  f.get("iterations", c.iterations);
  f.get("batch", c.batch);
  if (const json* a = f.sub("augment")) c.augment = augment_from_json(*a, f.path("augment"));
  if (const json* l = f.sub("loss")) c.loss = loss_from_json(*l, f.path("loss"));
  if (const json* l = f.sub("lr")) c.lr = lr_from_json(*l, f.path("lr"));
  f.get("seed", c.seed);
  f.get("log_every", c.log_every);
  f.get("checkpoint_every", c.checkpoint_every);
  return c;
}

VadConfig vad_from_json_at(const json& j, const std::string& where) {
  Fields f(j, where);
  VadConfig c;
  f.get("conv_channels", c.conv_channels);
  f.get("freq_pool", c.freq_pool);
  f.get("hidden", c.hidden);
  if (const json* s = f.sub("stft")) c.stft = stft_from_json(*s, f.path("stft"));
  return c;
}

}  // namespace

json to_json(const SeparatorConfig& c) {
  return {{"channels", c.channels},         {"dense_layers", c.dense_layers},
          {"attn_channels", c.attn_channels}, {"attn_key_dim", c.attn_key_dim},
          {"attn_band", c.attn_band},       {"pos_k", c.pos_k},
          {"stft", to_json(c.stft)}};
}

json to_json(const TrainConfig& c) {
  return {{"model", to_json(c.model)},     {"iterations", c.iterations},
          {"batch", c.batch},              {"augment", to_json(c.augment)},
          {"loss", to_json(c.loss)},       {"lr", to_json(c.lr)},
          {"seed", c.seed},                {"log_every", c.log_every},
          {"checkpoint_every", c.checkpoint_every}};
}

json to_json(const VadConfig& c) {
  return {{"conv_channels", c.conv_channels}, {"freq_pool", c.freq_pool},
          {"hidden", c.hidden}, {"stft", to_json(c.stft)}};
}

json to_json(const RunConfig& c) {
  return {{"version", kConfigVersion},
          {"seed", c.seed},
          {"deterministic", c.deterministic},
          {"paths", {{"manifest", c.manifest.string()}, {"run_dir", c.run_dir.string()}}},
          {"synth", to_json(c.synth)},
          {"teacher", to_json(c.teacher)},
          {"student", to_json(c.student)},
          {"selflabeled_weight", c.selflabeled_weight},
          {"vad", {{"model", to_json(c.vad)}, {"train", to_json(c.vad_train)}, {"tau", c.tau}}},
          {"filter", {{"top_fraction", c.top_fraction}}},
          {"loop", {{"max_iterations", c.max_iterations}, {"min_gain_db", c.min_gain_db}}}};
}

SeparatorConfig separator_config_from_json(const json& j) {
  auto c = separator_from_json_at(j, "model");
  c.validate();
  return c;
}

TrainConfig train_config_from_json(const json& j) {
  auto c = train_from_json_at(j, "train");
  c.validate();
  return c;
}

VadConfig vad_config_from_json(const json& j) {
  auto c = vad_from_json_at(j, "vad");
  c.validate();
  return c;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  {
    Fields f(j, "config");
    int version = -1;
    f.get("version", version);
    if (version != kConfigVersion)
      throw ConfigError("config: version must be " + std::to_string(kConfigVersion));
    f.get("seed", c.seed);
    f.get("deterministic", c.deterministic);
    if (const json* p = f.sub("paths")) {
      Fields g(*p, "config.paths");
      std::string manifest = c.manifest.string(), run_dir = c.run_dir.string();
      g.get("manifest", manifest);
      g.get("run_dir", run_dir);
      c.manifest = manifest;
      c.run_dir = run_dir;
    }
    if (const json* s = f.sub("synth")) c.synth = synth_from_json(*s, "config.synth");
    if (const json* t = f.sub("teacher"))
      c.teacher = train_from_json_at(*t, "config.teacher", c.teacher);
    if (const json* t = f.sub("student"))
      c.student = train_from_json_at(*t, "config.student", c.student);
    f.get("selflabeled_weight", c.selflabeled_weight);
    if (const json* v = f.sub("vad")) {
      Fields g(*v, "config.vad");
      if (const json* m = g.sub("model")) c.vad = vad_from_json_at(*m, "config.vad.model");
      if (const json* t = g.sub("train")) c.vad_train = vad_train_from_json(*t, "config.vad.train");
      g.get("tau", c.tau);
    }
    if (const json* v = f.sub("filter")) {
      Fields g(*v, "config.filter");
      g.get("top_fraction", c.top_fraction);
    }
    if (const json* v = f.sub("loop")) {
      Fields g(*v, "config.loop");
      g.get("max_iterations", c.max_iterations);
      g.get("min_gain_db", c.min_gain_db);
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path.string() + "': " + e.what());
  }
  RunConfig c = run_config_from_json(j);
  const auto base = path.parent_path();
  if (!c.manifest.empty() && c.manifest.is_relative()) c.manifest = base / c.manifest;
  if (c.run_dir.is_relative()) c.run_dir = base / c.run_dir;
  return c;
}

void save_run_config(const std::filesystem::path& path, const RunConfig& config) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file '" + path.string() + "'");
  out << to_json(config).dump(2) << '\n';
}

}  // namespace svsep
