// audio.cc

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

#include "svsep/audio.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "svsep/error.h"

namespace svsep {

AudioClip SourcePair::mixture() const {
  validate(*this);
  AudioClip mix;
  mix.sample_rate = vocal.sample_rate;
  mix.samples.resize(vocal.size());
  for (std::size_t i = 0; i < mix.samples.size(); ++i)
    mix.samples[i] = vocal.samples[i] + accompaniment.samples[i];
  return mix;
}

void validate(const AudioClip& clip) {
  for (float v : clip.samples)
    if (!std::isfinite(v)) throw ShapeError("audio clip has non-finite sample");
}

void validate(const SourcePair& pair) {
  if (pair.vocal.size() != pair.accompaniment.size())
    throw ShapeError("source pair '" + pair.song_id +
                     "': vocal and accompaniment lengths differ (" +
                     std::to_string(pair.vocal.size()) + " vs " +
                     std::to_string(pair.accompaniment.size()) + ")");
  if (pair.vocal.sample_rate != pair.accompaniment.sample_rate)
    throw ShapeError("source pair '" + pair.song_id +
                     "': sample rates differ");
}

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
         std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

std::uint16_t read_u16(const unsigned char* p) {
  return std::uint16_t(p[0] | p[1] << 8);
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(char(v & 0xff));
  s.push_back(char(v >> 8));
}

constexpr double kKaiserBeta = 8.6;
constexpr int kKaiserTable = 8192;

// Kaiser window sampled on |x| in [0, 1], linearly interpolated.
double kaiser(double x) {
  static const std::vector<double> table = [] {
    std::vector<double> t(kKaiserTable + 2, 0.0);
    const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);
    for (int i = 0; i <= kKaiserTable; ++i) {
      const double u = double(i) / kKaiserTable;
      t[std::size_t(i)] =
          std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - u * u)) / norm;
    }
    return t;
  }();
  const double a = std::abs(x) * kKaiserTable;
  if (a >= kKaiserTable) return 0.0;
  const auto i = std::size_t(a);
  const double frac = a - double(i);
  return table[i] + frac * (table[i + 1] - table[i]);
}

}  // namespace

AudioClip load_audio(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(name, "cannot open file");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw IngestionError(name, "not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw IngestionError(name, "truncated fmt chunk");
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible) {
        if (avail < 40) throw IngestionError(name, "truncated extensible fmt");
        format = read_u16(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;
    }
    pos = body + size + (size & 1u);
  }
  if (channels == 0 || rate == 0)
    throw IngestionError(name, "missing or invalid fmt chunk");
  if (data == nullptr) throw IngestionError(name, "missing data chunk");

  const bool pcm_ok =
      format == kFormatPcm && (bits == 16 || bits == 24 || bits == 32);
  const bool float_ok = format == kFormatFloat && bits == 32;
  if (!pcm_ok && !float_ok)
    throw IngestionError(name, "unsupported encoding (format " +
                                   std::to_string(format) + ", " +
                                   std::to_string(bits) + " bits)");

  const std::size_t frame_bytes = std::size_t(bits / 8) * channels;
  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) throw IngestionError(name, "file contains no samples");

  std::vector<float> mono(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + f * frame_bytes + c * (bits / 8);
      double v = 0.0;
      if (float_ok) {
        float x;
        std::memcpy(&x, p, 4);
        v = x;
      } else if (bits == 16) {
        v = double(std::int16_t(read_u16(p))) / 32768.0;
      } else if (bits == 24) {
        std::int32_t x = std::int32_t(p[0] | p[1] << 8 | p[2] << 16);
        if (x & 0x800000) x -= 0x1000000;
        v = double(x) / 8388608.0;
      } else {
        v = double(std::int32_t(read_u32(p))) / 2147483648.0;
      }
      acc += v;
    }
    mono[f] = channels == 1 ? float(acc) : float(acc / channels);
  }
  for (float v : mono)
    if (!std::isfinite(v)) throw IngestionError(name, "non-finite sample");

  AudioClip clip;
  clip.sample_rate = kSampleRate;
  clip.samples = int(rate) == kSampleRate
                     ? std::move(mono)
                     : resample(mono, int(rate), kSampleRate);
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  const std::uint32_t n = std::uint32_t(clip.samples.size());
  std::string out;
  out.reserve(44 + 2 * std::size_t(n));
  out += "RIFF";
  put_u32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, std::uint32_t(clip.sample_rate));
  put_u32(out, std::uint32_t(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, 2 * n);
  for (float v : clip.samples) {
    const double s = std::clamp(std::round(double(v) * 32768.0), -32768.0,
                                32767.0);
    put_u16(out, std::uint16_t(std::int16_t(s)));
  }
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw Error("write failed for " + path.string());
}

std::vector<float> resample_to_length(std::span<const float> x,
                                      std::size_t out_len, double step) {
  constexpr int kHalfTaps = 32;
  const double cutoff = std::min(1.0, 1.0 / step);
  const double half_width = kHalfTaps / cutoff;
  const long n = long(x.size());
  std::vector<float> y(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double t = double(i) * step;
    const long lo = long(std::ceil(t - half_width));
    const long hi = long(std::floor(t + half_width));
    double acc = 0.0;
    for (long k = std::max(0L, lo); k <= std::min(n - 1, hi); ++k) {
      const double u = t - double(k);
      const double arg = cutoff * u;
      const double sinc =
          arg == 0.0 ? 1.0
                     : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
      acc += x[std::size_t(k)] * cutoff * sinc * kaiser(u / half_width);
    }
    y[i] = float(acc);
  }
  return y;
}

std::vector<float> resample(std::span<const float> x, int in_rate,
                            int out_rate) {
  if (in_rate <= 0 || out_rate <= 0) throw ConfigError("invalid sample rate");
  if (in_rate == out_rate) return {x.begin(), x.end()};
  const std::uint64_t num = std::uint64_t(x.size()) * std::uint64_t(out_rate);
  const std::size_t out_len =
      std::size_t((num + std::uint64_t(in_rate) / 2) / std::uint64_t(in_rate));
  return resample_to_length(x, out_len, double(in_rate) / double(out_rate));
}

std::vector<SourcePair> segment_pair(const SourcePair& pair,
                                     double seg_seconds) {
  validate(pair);
  if (!(seg_seconds > 0.0)) throw ConfigError("segment length must be > 0");
  const std::size_t seg =
      std::size_t(std::llround(seg_seconds * pair.vocal.sample_rate));
  const std::size_t n = pair.size();
  const std::size_t count = std::max<std::size_t>(1, (n + seg - 1) / seg);
  std::vector<SourcePair> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    SourcePair p;
    p.song_id = pair.song_id + "/" + std::to_string(s);
    p.vocal.sample_rate = p.accompaniment.sample_rate = pair.vocal.sample_rate;
    p.vocal.samples.assign(seg, 0.0f);
    p.accompaniment.samples.assign(seg, 0.0f);
    const std::size_t begin = s * seg;
    const std::size_t end = std::min(n, begin + seg);
    for (std::size_t i = begin; i < end; ++i) {
      p.vocal.samples[i - begin] = pair.vocal.samples[i];
      p.accompaniment.samples[i - begin] = pair.accompaniment.samples[i];
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace svsep
