// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "degan/error.hpp"
#include "degan/image.hpp"
#include "degan/nn/layers.hpp"

namespace degan {

inline constexpr int kPatchSize = 256;

struct GeneratorConfig {
  int depth = 4;           // number of pooling stages
  int base_channels = 64;  // channels of the first stage, doubled per stage
  int kernel_size = 3;

  void validate() const {
    if (depth < 1) throw ConfigError("generator depth must be >= 1");
    if (base_channels < 1) throw ConfigError("generator base_channels must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0)
      throw ConfigError("generator kernel_size must be odd and >= 1");
    if (depth > 30 || kPatchSize % (1 << depth) != 0)
      throw ConfigError("generator depth " + std::to_string(depth) + ": " +
                        std::to_string(kPatchSize) + " is not divisible by 2^depth");
  }

  /// Channels produced by encoder stage `stage`; stage == depth is the bottleneck.
  int stage_channels(int stage) const { return base_channels << stage; }

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

/// U-net: per stage two convolutions then 2x2 max pooling; the decoder
/// up-samples (nearest, then a convolution halving the channels), concatenates
/// the matching encoder features and applies two more convolutions. A 1x1
/// convolution with sigmoid produces the output plane.
template <typename T>
class Generator {
public:
  struct Stage {
    nn::Conv2d<T> conv1, conv2;
  };
  struct DecoderStage {
    nn::Conv2d<T> up, conv1, conv2;
  };

  /// Activations kept for the backward pass.
  struct Cache {
    std::vector<nn::Tensor<T>> enc_in, enc_a1, enc_a2;
    std::vector<nn::MaxPool2<T>> pools;
    nn::Tensor<T> bott_in, bott_a1, bott_a2;
    std::vector<nn::Tensor<T>> dec_up_in, dec_up_out, dec_cat, dec_a1, dec_a2;
    nn::Tensor<T> output;  // sigmoid probabilities
  };

  Generator() = default;

  /// Deterministic in (cfg, seed).
  Generator(const GeneratorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    const int k = cfg.kernel_size;
    const auto same = nn::Padding::same(k, 1);
    int in = 1;
    for (int s = 0; s < cfg.depth; ++s) {
      const int c = cfg.stage_channels(s);
      const std::string p = "enc" + std::to_string(s);
      encoder_.push_back({{p + ".conv1", in, c, k, 1, same}, {p + ".conv2", c, c, k, 1, same}});
      in = c;
    }
    const int cb = cfg.stage_channels(cfg.depth);
    bottleneck_ = {{"bottleneck.conv1", in, cb, k, 1, same},
                   {"bottleneck.conv2", cb, cb, k, 1, same}};
    decoder_.resize(cfg.depth);
    for (int s = cfg.depth - 1; s >= 0; --s) {
      const int c = cfg.stage_channels(s);
      const std::string p = "dec" + std::to_string(s);
      decoder_[s] = {{p + ".up", 2 * c, c, k, 1, same},
                     {p + ".conv1", 2 * c, c, k, 1, same},
                     {p + ".conv2", c, c, k, 1, same}};
    }
    out_ = {"out", cfg.base_channels, 1, 1, 1, nn::Padding{}};

    std::mt19937_64 rng(seed);
    for (auto* l : layers()) l->init(rng);
  }

  const GeneratorConfig& config() const noexcept { return cfg_; }
  const std::vector<Stage>& encoder() const noexcept { return encoder_; }
  const Stage& bottleneck() const noexcept { return bottleneck_; }
  const std::vector<DecoderStage>& decoder() const noexcept { return decoder_; }

  /// Every convolution in a fixed order (encoder, bottleneck, decoder deep to shallow, output).
  std::vector<nn::Conv2d<T>*> layers() {
    std::vector<nn::Conv2d<T>*> out;
    for (auto& s : encoder_) out.insert(out.end(), {&s.conv1, &s.conv2});
    out.insert(out.end(), {&bottleneck_.conv1, &bottleneck_.conv2});
    for (int s = cfg_.depth - 1; s >= 0; --s)
      out.insert(out.end(), {&decoder_[s].up, &decoder_[s].conv1, &decoder_[s].conv2});
    out.push_back(&out_);
    return out;
  }
  std::vector<const nn::Conv2d<T>*> layers() const {
    auto mut = const_cast<Generator*>(this)->layers();
    return {mut.begin(), mut.end()};
  }

  std::vector<nn::ParamView<T>> params() {
    std::vector<nn::ParamView<T>> out;
    for (auto* l : layers())
      for (auto& p : l->params()) out.push_back(std::move(p));
    return out;
  }

  void zero_grad() {
    for (auto* l : layers()) l->zero_grad();
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* l : layers()) n += l->weight.size() + l->bias.size();
    return n;
  }

  /// Input: N x 1 x H x W with H, W divisible by 2^depth. Output: sigmoid plane, same shape.
  nn::Tensor<T> forward(const nn::Tensor<T>& x, Cache* cache = nullptr) const {
    const int div = 1 << cfg_.depth;
    if (x.c() != 1 || x.h() % div || x.w() % div)
      throw ValidationError("generator input " + x.shape_string() +
                            " must be single-channel with extents divisible by " +
                            std::to_string(div));
    Cache local;
    Cache& c = cache ? *cache : local;
    c = Cache{};
    c.pools.resize(cfg_.depth);

    nn::Tensor<T> h = x;
    for (int s = 0; s < cfg_.depth; ++s) {
      const auto& st = encoder_[s];
      auto a1 = st.conv1.forward(h);
      nn::relu_inplace(a1);
      auto a2 = st.conv2.forward(a1);
      nn::relu_inplace(a2);
      c.enc_in.push_back(std::move(h));
      h = c.pools[s].forward(a2);
      c.enc_a1.push_back(std::move(a1));
      c.enc_a2.push_back(std::move(a2));
    }
    {
      auto a1 = bottleneck_.conv1.forward(h);
      nn::relu_inplace(a1);
      auto a2 = bottleneck_.conv2.forward(a1);
      nn::relu_inplace(a2);
      c.bott_in = std::move(h);
      c.bott_a1 = std::move(a1);
      h = a2;
      c.bott_a2 = std::move(a2);
    }
    c.dec_up_in.resize(cfg_.depth);
    c.dec_up_out.resize(cfg_.depth);
    c.dec_cat.resize(cfg_.depth);
    c.dec_a1.resize(cfg_.depth);
    c.dec_a2.resize(cfg_.depth);
    for (int s = cfg_.depth - 1; s >= 0; --s) {
      const auto& st = decoder_[s];
      c.dec_up_in[s] = nn::upsample2(h);
      auto u = st.up.forward(c.dec_up_in[s]);
      nn::relu_inplace(u);
      c.dec_cat[s] = nn::concat_channels(c.enc_a2[s], u);
      c.dec_up_out[s] = std::move(u);
      auto a1 = st.conv1.forward(c.dec_cat[s]);
      nn::relu_inplace(a1);
      auto a2 = st.conv2.forward(a1);
      nn::relu_inplace(a2);
      c.dec_a1[s] = std::move(a1);
      h = a2;
      c.dec_a2[s] = std::move(a2);
    }
    auto y = out_.forward(h);
    nn::sigmoid_inplace(y);
    if (cache) c.output = y;
    return y;
  }

  /// Accumulates parameter gradients given dL/d(output probabilities).
  /// Returns dL/d(input) when `want_input_grad`.
  nn::Tensor<T> backward(const Cache& c, const nn::Tensor<T>& dprob, bool want_input_grad = false) {
    nn::Tensor<T> d = dprob;
    nn::sigmoid_backward_inplace(c.output, d);
    return backward_logits(c, d, want_input_grad);
  }

  /// Same, starting from dL/d(pre-sigmoid logits).
  nn::Tensor<T> backward_logits(const Cache& c, const nn::Tensor<T>& d,
                                bool want_input_grad = false) {
    nn::Tensor<T> dh;
    out_.backward(c.dec_a2[0], d, &dh);

    std::vector<nn::Tensor<T>> dskip(cfg_.depth);
    for (int s = 0; s < cfg_.depth; ++s) {
      auto& st = decoder_[s];
      nn::relu_backward_inplace(c.dec_a2[s], dh);
      nn::Tensor<T> da1;
      st.conv2.backward(c.dec_a1[s], dh, &da1);
      nn::relu_backward_inplace(c.dec_a1[s], da1);
      nn::Tensor<T> dcat;
      st.conv1.backward(c.dec_cat[s], da1, &dcat);
      auto [dsk, du] = nn::split_channels(dcat, c.enc_a2[s].c());
      dskip[s] = std::move(dsk);
      nn::relu_backward_inplace(c.dec_up_out[s], du);
      nn::Tensor<T> dup;
      st.up.backward(c.dec_up_in[s], du, &dup);
      dh = nn::upsample2_backward(dup);
    }
    {
      nn::relu_backward_inplace(c.bott_a2, dh);
      nn::Tensor<T> da1;
      bottleneck_.conv2.backward(c.bott_a1, dh, &da1);
      nn::relu_backward_inplace(c.bott_a1, da1);
      bottleneck_.conv1.backward(c.bott_in, da1, &dh);
    }
    for (int s = cfg_.depth - 1; s >= 0; --s) {
      auto& st = encoder_[s];
      auto da2 = c.pools[s].backward(dh);
      const auto& sk = dskip[s].span();
      auto dst = da2.span();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += sk[i];
      nn::relu_backward_inplace(c.enc_a2[s], da2);
      nn::Tensor<T> da1;
      st.conv2.backward(c.enc_a1[s], da2, &da1);
      nn::relu_backward_inplace(c.enc_a1[s], da1);
      const bool need = s > 0 || want_input_grad;
      st.conv1.backward(c.enc_in[s], da1, need ? &dh : nullptr);
    }
    return want_input_grad ? dh : nn::Tensor<T>{};
  }

private:
  GeneratorConfig cfg_;
  std::vector<Stage> encoder_;
  Stage bottleneck_;
  std::vector<DecoderStage> decoder_;
  nn::Conv2d<T> out_;
};

template <typename T = float>
Generator<T> build_generator(const GeneratorConfig& cfg, std::uint64_t seed) {
  return Generator<T>(cfg, seed);
}

namespace detail {
template <typename T>
nn::Tensor<T> plane_to_tensor(const ImagePlane& p) {
  nn::Tensor<T> t(1, 1, p.height(), p.width());
  auto v = p.values();
  std::copy(v.begin(), v.end(), t.data());
  return t;
}
}  // namespace detail

/// Enhances one 256x256 patch. Output values lie in (0, 1).
template <typename T>
ImagePlane generate(const Generator<T>& gen, const ImagePlane& patch) {
  if (patch.height() != kPatchSize || patch.width() != kPatchSize)
    throw ValidationError("generate: patch must be " + std::to_string(kPatchSize) + "x" +
                          std::to_string(kPatchSize) + ", got " +
                          std::to_string(patch.height()) + "x" + std::to_string(patch.width()));
  auto y = gen.forward(detail::plane_to_tensor<T>(patch));
  // A float sigmoid saturates to exactly 0 or 1 for large logits; keep the open interval.
  constexpr float lo = std::numeric_limits<float>::min();
  const float hi = std::nextafter(1.0f, 0.0f);
  std::vector<float> v(y.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = std::clamp(static_cast<float>(y.data()[i]), lo, hi);
  return ImagePlane::from_values(kPatchSize, kPatchSize, std::move(v));
}

}  // namespace degan
