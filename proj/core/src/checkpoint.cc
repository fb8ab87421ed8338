// checkpoint.cc

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

#include "svsep/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>

#include "svsep/error.h"

namespace svsep {

using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'V', 'S', 'E', 'P', 'C', 'K', 'P'};

template <typename U>
void put_le(std::ostream& out, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), sizeof b);
}

template <typename U>
U get_le(const unsigned char* b) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(b[i]) << (8 * i);
  return v;
}

std::vector<int> shape_vec(const Shape& s) { return {s.n, s.c, s.h, s.w}; }

std::size_t numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= std::size_t(d);
  return n;
}

}  // namespace

const NamedTensor* CheckpointFile::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void write_checkpoint_file(const std::filesystem::path& path, const CheckpointFile& file) {
  json header = file.meta;
  json index = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : file.tensors) {
    if (numel(t.shape) != t.data.size())
      throw CheckpointError(path.string(), "tensor '" + t.name + "' data does not match its shape");
    index.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.data.size();
  }
  header["tensors"] = index;
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError(tmp.string(), "cannot open for writing");
    out.write(kMagic, sizeof kMagic);
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint64_t>(out, text.size());
    out.write(text.data(), std::streamsize(text.size()));
    for (const auto& t : file.tensors)
      for (float v : t.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    out.flush();
    if (!out) throw CheckpointError(tmp.string(), "write failed");
  }
  std::filesystem::rename(tmp, path);
}

CheckpointFile read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path.string(), "cannot open checkpoint");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  constexpr std::size_t prefix = sizeof kMagic + 4 + 8;
  if (bytes.size() < prefix || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError(path.string(), "not a checkpoint file");
  const auto version = get_le<std::uint32_t>(bytes.data() + 8);
  if (version != kCheckpointVersion)
    throw CheckpointError(path.string(), "unsupported format version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(bytes.data() + 12);
  if (header_len > bytes.size() - prefix) throw CheckpointError(path.string(), "truncated header");

  CheckpointFile file;
  try {
    file.meta = json::parse(bytes.begin() + long(prefix),
                            bytes.begin() + long(prefix + header_len));
  } catch (const json::exception& e) {
    throw CheckpointError(path.string(), std::string("bad header: ") + e.what());
  }
  const unsigned char* data = bytes.data() + prefix + header_len;
  const std::size_t n_floats = (bytes.size() - prefix - header_len) / 4;
  try {
    for (const auto& entry : file.meta.at("tensors")) {
      NamedTensor t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<std::vector<int>>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const std::size_t n = numel(t.shape);
      if (offset + n > n_floats)
        throw CheckpointError(path.string(), "tensor '" + t.name + "' runs past end of file");
      t.data.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        t.data[i] = std::bit_cast<float>(get_le<std::uint32_t>(data + 4 * (offset + i)));
      file.tensors.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw CheckpointError(path.string(), std::string("bad tensor index: ") + e.what());
  }
  file.meta.erase("tensors");
  return file;
}

namespace {

// Overwrites `dst` with tensor `name`, which must exist with `shape`.
void restore(const CheckpointFile& file, const std::filesystem::path& path,
             const std::string& name, const std::vector<int>& shape, std::vector<float>& dst) {
  const NamedTensor* t = file.find(name);
  if (!t) throw CheckpointError(path.string(), "missing tensor '" + name + "'");
  if (t->shape != shape)
    throw CheckpointError(path.string(), "tensor '" + name + "' has the wrong shape");
  dst = t->data;
}

template <typename Params>
void check_no_extra(const CheckpointFile& file, const std::filesystem::path& path,
                    const Params& params, std::size_t n_other) {
  if (file.tensors.size() > params.size() + n_other)
    throw CheckpointError(path.string(), "checkpoint holds tensors the model does not have");
}

}  // namespace

void save_separator(const std::filesystem::path& path, const Separator& model,
                    const TrainState* state) {
  CheckpointFile file;
  file.meta["kind"] = "separator";
  file.meta["config"] = to_json(model.config());
  for (const auto& [name, var] : model.params())
    file.tensors.push_back({name, shape_vec(var.shape()), var.value().vec()});
  for (const auto& [name, buf] : model.buffers())
    file.tensors.push_back({name, {int(buf->size())}, *buf});
  if (state) {
    file.meta["train_config"] = to_json(state->config);
    file.meta["iteration"] = state->iteration;
    file.meta["rng_state"] = state->rng_state;
    file.meta["adam_steps"] = state->optimizer.steps();
    const auto& m = state->optimizer.first_moment();
    const auto& v = state->optimizer.second_moment();
    if (!m.empty()) {
      if (m.size() != model.params().size())
        throw CheckpointError(path.string(), "optimizer state does not match the model");
      for (std::size_t i = 0; i < m.size(); ++i) {
        const auto& [name, var] = model.params()[i];
        file.tensors.push_back({"adam.m/" + name, shape_vec(var.shape()), m[i]});
        file.tensors.push_back({"adam.v/" + name, shape_vec(var.shape()), v[i]});
      }
    }
  }
  write_checkpoint_file(path, file);
}

LoadedSeparator load_separator(const std::filesystem::path& path) {
  const auto file = read_checkpoint_file(path);
  LoadedSeparator out;
  try {
    if (file.meta.at("kind") != "separator")
      throw CheckpointError(path.string(), "not a separator checkpoint");
    out.model = Separator(separator_config_from_json(file.meta.at("config")), 0);
  } catch (const json::exception& e) {
    throw CheckpointError(path.string(), std::string("bad header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(path.string(), e.what());
  }
  auto& params = out.model.params();
  for (auto& [name, var] : params)
    restore(file, path, name, shape_vec(var.shape()), var.mutable_value().vec());
  auto buffers = out.model.buffers();
  for (auto& [name, buf] : buffers) restore(file, path, name, {int(buf->size())}, *buf);

  std::size_t n_other = buffers.size();
  if (file.meta.contains("train_config")) {
    TrainState s;
    try {
      s.config = train_config_from_json(file.meta.at("train_config"));
      s.iteration = file.meta.at("iteration").get<std::int64_t>();
      s.rng_state = file.meta.at("rng_state").get<std::string>();
      s.optimizer.set_steps(file.meta.at("adam_steps").get<std::int64_t>());
    } catch (const json::exception& e) {
      throw CheckpointError(path.string(), std::string("bad training state: ") + e.what());
    } catch (const ConfigError& e) {
      throw CheckpointError(path.string(), e.what());
    }
    if (file.find("adam.m/" + params.front().first)) {
      auto& m = s.optimizer.first_moment();
      auto& v = s.optimizer.second_moment();
      m.resize(params.size());
      v.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        const auto shape = shape_vec(params[i].second.shape());
        restore(file, path, "adam.m/" + params[i].first, shape, m[i]);
        restore(file, path, "adam.v/" + params[i].first, shape, v[i]);
      }
      n_other += 2 * params.size();
    }
    out.state = std::move(s);
  }
  check_no_extra(file, path, params, n_other);
  return out;
}

void save_vad(const std::filesystem::path& path, const Vad& vad) {
  CheckpointFile file;
  file.meta["kind"] = "vad";
  file.meta["target"] = to_string(vad.target());
  file.meta["config"] = to_json(vad.config());
  for (const auto& [name, var] : vad.params())
    file.tensors.push_back({name, shape_vec(var.shape()), var.value().vec()});
  for (const auto& [name, buf] : vad.buffers())
    file.tensors.push_back({name, {int(buf->size())}, *buf});
  write_checkpoint_file(path, file);
}

Vad load_vad(const std::filesystem::path& path) {
  const auto file = read_checkpoint_file(path);
  Vad vad;
  try {
    if (file.meta.at("kind") != "vad") throw CheckpointError(path.string(), "not a VAD checkpoint");
    vad = Vad(vad_config_from_json(file.meta.at("config")),
              source_tag_from_string(file.meta.at("target").get<std::string>()), 0);
  } catch (const json::exception& e) {
    throw CheckpointError(path.string(), std::string("bad header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(path.string(), e.what());
  }
  for (auto& [name, var] : vad.params())
    restore(file, path, name, shape_vec(var.shape()), var.mutable_value().vec());
  auto buffers = vad.buffers();
  for (auto& [name, buf] : buffers) restore(file, path, name, {int(buf->size())}, *buf);
  check_no_extra(file, path, vad.params(), buffers.size());
  return vad;
}

}  // namespace svsep
