// separator.cc

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

#include "svsep/separator.h"

#include <cmath>
#include <numbers>
#include <random>

#include "svsep/error.h"

namespace svsep {

void SeparatorConfig::validate() const {
  if (channels.empty()) throw ConfigError("separator needs at least one level");
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] < 1) throw ConfigError("separator channel count must be >= 1");
    if (i > 0 && channels[i] < channels[i - 1])
      throw ConfigError("separator channel schedule must be non-decreasing");
  }
  if (dense_layers < 1 || attn_channels < 1 || attn_key_dim < 1 || pos_k < 1 ||
      attn_band < 1)
    throw ConfigError("separator sizes must be >= 1");
  stft.validate();
}

SeparatorConfig separator_preset(const std::string& name) {
  SeparatorConfig c;
  if (name == "toy") {
    c.channels = {8, 16};
    c.stft = {256, 128};
  } else if (name == "toy_student") {
    c.channels = {8, 16, 16};
    c.stft = {256, 128};
  } else if (name == "small") {
    c.channels = {32, 64, 128};
  } else if (name == "medium") {
    c.channels = {36, 72, 144, 288};
  } else if (name == "large") {
    c.channels = {32, 64, 128, 256, 256};
  } else {
    throw ConfigError("unknown separator preset '" + name + "'");
  }
  return c;
}

std::vector<double> positional_embedding(int t_frames, int f_bins, int k) {
  if (t_frames < 1 || f_bins < 1 || k < 1)
    throw ShapeError("positional_embedding: sizes must be >= 1");
  std::vector<double> out(std::size_t(f_bins) * std::size_t(k));
  const double span = f_bins > 1 ? double(f_bins - 1) : 1.0;
  for (int f = 0; f < f_bins; ++f)
    for (int j = 0; j < k; ++j)
      out[std::size_t(f) * std::size_t(k) + std::size_t(j)] =
          std::cos(std::ldexp(1.0, j) * std::numbers::pi * double(f) / span);
  return out;
}

template <typename T>
typename BasicSeparator<T>::Conv BasicSeparator<T>::add_conv(
    const std::string& name, int c_in, int c_out, int k, bool bias) {
  std::mt19937_64 rng(init_state_++);
  const double bound = std::sqrt(6.0 / double(c_in * k * k));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor<T> w(Shape{c_out, c_in, k, k});
  for (auto& v : w.vec()) v = T(u(rng));
  Conv c;
  c.weight = int(params_.size());
  params_.emplace_back(name + ".weight", nn::Var<T>(std::move(w), true));
  if (bias) {
    c.bias = int(params_.size());
    params_.emplace_back(name + ".bias",
                         nn::Var<T>(Tensor<T>(Shape{1, c_out, 1, 1}), true));
  }
  return c;
}

template <typename T>
typename BasicSeparator<T>::Norm BasicSeparator<T>::add_norm(
    const std::string& name, int c) {
  Norm n;
  n.gamma = int(params_.size());
  params_.emplace_back(name + ".gamma",
                       nn::Var<T>(Tensor<T>(Shape{1, c, 1, 1}, T(1)), true));
  n.beta = int(params_.size());
  params_.emplace_back(name + ".beta",
                       nn::Var<T>(Tensor<T>(Shape{1, c, 1, 1}), true));
  n.state = int(norms_.size());
  norms_.push_back({std::vector<T>(std::size_t(c), T(0)),
                    std::vector<T>(std::size_t(c), T(1))});
  norm_names_.push_back(name);
  return n;
}

template <typename T>
typename BasicSeparator<T>::Dense BasicSeparator<T>::add_dense(
    const std::string& name, int c_in, int c_out) {
  Dense d;
  int cur = c_in;
  for (int i = 0; i < config_.dense_layers; ++i) {
    const std::string layer = name + ".layer" + std::to_string(i);
    ConvBn cb;
    cb.conv = add_conv(layer + ".conv", cur, c_out, 3, false);
    cb.norm = add_norm(layer + ".bn", c_out);
    d.layers.push_back(cb);
    cur += c_out;
  }
  d.transition = add_conv(name + ".transition", cur, c_out, 1, true);
  return d;
}

template <typename T>
typename BasicSeparator<T>::Attention BasicSeparator<T>::add_attention(
    const std::string& name, int c) {
  Attention a;
  a.q = add_conv(name + ".query", c, config_.attn_key_dim, 1, true);
  a.k = add_conv(name + ".key", c, config_.attn_key_dim, 1, true);
  a.v = add_conv(name + ".value", c, config_.attn_channels, 1, true);
  a.out = add_conv(name + ".out", config_.attn_channels, c, 1, true);
  return a;
}

template <typename T>
BasicSeparator<T>::BasicSeparator(SeparatorConfig config, std::uint64_t seed)
    : config_(std::move(config)), init_state_(seed * 0x9E3779B97F4A7C15ull + 1) {
  config_.validate();
  const auto& ch = config_.channels;
  const int levels = config_.levels();
  int c_in = config_.input_channels();
  for (int l = 0; l < levels; ++l) {
    encoder_.push_back(add_dense("enc" + std::to_string(l), c_in, ch[std::size_t(l)]));
    c_in = ch[std::size_t(l)];
  }
  bottleneck_attn_ = add_attention("attn_bottleneck", ch.back());
  decoder_.resize(std::size_t(std::max(levels - 1, 0)));
  for (int l = levels - 2; l >= 0; --l) {
    const std::string name = "dec" + std::to_string(l);
    const int c = ch[std::size_t(l)];
    Up& up = decoder_[std::size_t(l)];
    up.conv.conv = add_conv(name + ".up.conv", ch[std::size_t(l + 1)], c, 3, false);
    up.conv.norm = add_norm(name + ".up.bn", c);
    up.dense = add_dense(name, 2 * c, c);
  }
  has_final_attn_ = levels > 1;
  if (has_final_attn_) final_attn_ = add_attention("attn_final", ch.front());
  head_ = add_conv("head", ch.front(), 4, 1, true);
}

template <typename T>
std::vector<typename BasicSeparator<T>::Buffer> BasicSeparator<T>::buffers() {
  std::vector<Buffer> out;
  for (std::size_t i = 0; i < norms_.size(); ++i) {
    out.emplace_back(norm_names_[i] + ".running_mean", &norms_[i].running_mean);
    out.emplace_back(norm_names_[i] + ".running_var", &norms_[i].running_var);
  }
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const std::vector<T>*>>
BasicSeparator<T>::buffers() const {
  std::vector<std::pair<std::string, const std::vector<T>*>> out;
  for (std::size_t i = 0; i < norms_.size(); ++i) {
    out.emplace_back(norm_names_[i] + ".running_mean", &norms_[i].running_mean);
    out.emplace_back(norm_names_[i] + ".running_var", &norms_[i].running_var);
  }
  return out;
}

template <typename T>
std::size_t BasicSeparator<T>::count_params() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.second.value().size();
  return n;
}

template <typename T>
void BasicSeparator<T>::set_requires_grad(bool on) {
  for (auto& p : params_) p.second.node()->requires_grad = on;
}

template <typename T>
Tensor<T> BasicSeparator<T>::make_input(
    const std::vector<const BasicSpectrogram<T>*>& mixtures) const {
  if (mixtures.empty()) throw ShapeError("separator: empty batch");
  const int frames = mixtures[0]->frames, bins = mixtures[0]->bins;
  if (frames < 1 || bins != config_.stft.bins())
    throw ShapeError("separator: expected " + std::to_string(config_.stft.bins()) +
                     " bins, got " + std::to_string(bins) + " x " +
                     std::to_string(frames) + " frames");
  const int k = config_.pos_k;
  const auto emb = positional_embedding(frames, bins, k);
  Tensor<T> x(Shape{int(mixtures.size()), 2 + k, frames, bins});
  for (std::size_t n = 0; n < mixtures.size(); ++n) {
    const auto& m = *mixtures[n];
    if (!m.same_shape(frames, bins))
      throw ShapeError("separator: batch items differ in shape");
    T* re = x.plane(int(n), 0);
    T* im = x.plane(int(n), 1);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      re[i] = m.values[i].real();
      im[i] = m.values[i].imag();
    }
    for (int j = 0; j < k; ++j) {
      T* p = x.plane(int(n), 2 + j);
      for (int t = 0; t < frames; ++t)
        for (int f = 0; f < bins; ++f)
          p[std::size_t(t) * std::size_t(bins) + std::size_t(f)] =
              T(emb[std::size_t(f) * std::size_t(k) + std::size_t(j)]);
    }
  }
  return x;
}

namespace {
constexpr nn::Padding2d kCausal3x3{2, 0, 1, 1};
}

template <typename T>
nn::Var<T> BasicSeparator<T>::run_conv(const Conv& c, const nn::Var<T>& x,
                                       nn::Padding2d pad) const {
  const nn::Var<T> none;
  return nn::conv2d(x, params_[std::size_t(c.weight)].second,
                    c.bias >= 0 ? params_[std::size_t(c.bias)].second : none, pad);
}

template <typename T>
nn::Var<T> BasicSeparator<T>::run_conv_bn(const ConvBn& c, const nn::Var<T>& x,
                                          bool training) {
  auto y = run_conv(c.conv, x, kCausal3x3);
  y = nn::batch_norm(y, params_[std::size_t(c.norm.gamma)].second,
                     params_[std::size_t(c.norm.beta)].second,
                     norms_[std::size_t(c.norm.state)], training);
  return nn::relu(y);
}

template <typename T>
nn::Var<T> BasicSeparator<T>::run_dense(const Dense& d, const nn::Var<T>& x,
                                        bool training) {
  std::vector<nn::Var<T>> feats{x};
  for (const auto& layer : d.layers) {
    const auto in = feats.size() == 1
                        ? feats[0]
                        : nn::concat_channels<T>(std::span<const nn::Var<T>>(feats));
    feats.push_back(run_conv_bn(layer, in, training));
  }
  const auto all = nn::concat_channels<T>(std::span<const nn::Var<T>>(feats));
  return run_conv(d.transition, all, {});
}

template <typename T>
nn::Var<T> BasicSeparator<T>::run_attention(const Attention& a,
                                            const nn::Var<T>& x) const {
  const auto q = run_conv(a.q, x, {});
  const auto k = run_conv(a.k, x, {});
  const auto v = run_conv(a.v, x, {});
  const auto o = nn::causal_attention(q, k, v, config_.attn_band);
  return nn::add(x, run_conv(a.out, o, {}));
}

template <typename T>
nn::Var<T> BasicSeparator<T>::forward(const nn::Var<T>& input, bool training) {
  const Shape s = input.shape();
  if (s.c != config_.input_channels() || s.w != config_.stft.bins())
    throw ShapeError("separator: input " + s.str() + " does not match config");
  const int levels = config_.levels();
  std::vector<nn::Var<T>> skips;
  nn::Var<T> x = input;
  for (int l = 0; l < levels; ++l) {
    if (l > 0) x = nn::causal_pool2(x);
    x = run_dense(encoder_[std::size_t(l)], x, training);
    skips.push_back(x);
  }
  x = run_attention(bottleneck_attn_, x);
  for (int l = levels - 2; l >= 0; --l) {
    const Shape target = skips[std::size_t(l)].shape();
    const Up& up = decoder_[std::size_t(l)];
    x = nn::upsample2(x, target.h, target.w);
    x = run_conv_bn(up.conv, x, training);
    const std::vector<nn::Var<T>> cat{x, skips[std::size_t(l)]};
    x = run_dense(up.dense, nn::concat_channels<T>(std::span<const nn::Var<T>>(cat)),
                  training);
  }
  if (has_final_attn_) x = run_attention(final_attn_, x);
  return run_conv(head_, x, {});
}

template <typename T>
MaskPair<T> split_masks(const Tensor<T>& raw, int sample) {
  const Shape s = raw.shape();
  if (s.c != 4) throw ShapeError("split_masks: expected 4 channels, got " + s.str());
  MaskPair<T> out{BasicMask<T>(s.h, s.w), BasicMask<T>(s.h, s.w)};
  const T* vr = raw.plane(sample, 0);
  const T* vi = raw.plane(sample, 1);
  const T* ar = raw.plane(sample, 2);
  const T* ai = raw.plane(sample, 3);
  for (std::size_t i = 0; i < s.plane(); ++i) {
    out.vocal.values[i] = {vr[i], vi[i]};
    out.accompaniment.values[i] = {ar[i], ai[i]};
  }
  return out;
}

template <typename T>
MaskPair<T> BasicSeparator<T>::separate(const BasicSpectrogram<T>& mixture) const {
  nn::NoGradGuard guard;
  nn::Var<T> input(make_input({&mixture}));
  // Evaluation mode reads the running statistics without writing them.
  auto& self = const_cast<BasicSeparator&>(*this);
  return split_masks(self.forward(input, false).value());
}

template <typename T>
template <typename U>
BasicSeparator<U> BasicSeparator<T>::cast() const {
  BasicSeparator<U> out;
  out.config_ = config_;
  out.init_state_ = init_state_;
  for (const auto& [name, v] : params_)
    out.params_.emplace_back(
        name, nn::Var<U>(v.value().template cast<U>(), v.requires_grad()));
  for (const auto& n : norms_)
    out.norms_.push_back(
        {std::vector<U>(n.running_mean.begin(), n.running_mean.end()),
         std::vector<U>(n.running_var.begin(), n.running_var.end())});
  out.norm_names_ = norm_names_;
  auto copy_conv = [](const Conv& c) {
    return typename BasicSeparator<U>::Conv{c.weight, c.bias};
  };
  auto copy_norm = [](const Norm& n) {
    return typename BasicSeparator<U>::Norm{n.gamma, n.beta, n.state};
  };
  auto copy_dense = [&](const Dense& d) {
    typename BasicSeparator<U>::Dense o;
    for (const auto& l : d.layers) o.layers.push_back({copy_conv(l.conv), copy_norm(l.norm)});
    o.transition = copy_conv(d.transition);
    return o;
  };
  auto copy_attn = [&](const Attention& a) {
    return typename BasicSeparator<U>::Attention{copy_conv(a.q), copy_conv(a.k),
                                                 copy_conv(a.v), copy_conv(a.out)};
  };
  for (const auto& d : encoder_) out.encoder_.push_back(copy_dense(d));
  for (const auto& u : decoder_)
    out.decoder_.push_back({{copy_conv(u.conv.conv), copy_norm(u.conv.norm)},
                            copy_dense(u.dense)});
  out.bottleneck_attn_ = copy_attn(bottleneck_attn_);
  out.final_attn_ = copy_attn(final_attn_);
  out.has_final_attn_ = has_final_attn_;
  out.head_ = copy_conv(head_);
  return out;
}

template class BasicSeparator<float>;
template class BasicSeparator<double>;
template BasicSeparator<double> BasicSeparator<float>::cast<double>() const;
template BasicSeparator<float> BasicSeparator<double>::cast<float>() const;
template BasicSeparator<float> BasicSeparator<float>::cast<float>() const;
template MaskPair<float> split_masks(const Tensor<float>&, int);
template MaskPair<double> split_masks(const Tensor<double>&, int);

}  // namespace svsep
