// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "degan/error.hpp"
#include "degan/generator.hpp"
#include "degan/image.hpp"
#include "degan/nn/layers.hpp"

namespace degan {

inline constexpr int kRealnessSize = 16;
inline constexpr int kDiscriminatorLayers = 6;

struct DiscriminatorConfig {
  int base_channels = 64;  // channel plan: b, 2b, 4b, 4b, 8b, 1
  int kernel_size = 4;
  float leaky_slope = 0.2f;

  void validate() const {
    if (base_channels < 1) throw ConfigError("discriminator base_channels must be >= 1");
    if (kernel_size < 2) throw ConfigError("discriminator kernel_size must be >= 2");
    if (!(leaky_slope >= 0.0f && leaky_slope < 1.0f))
      throw ConfigError("discriminator leaky_slope must be in [0,1)");
  }

  std::array<int, kDiscriminatorLayers> channels() const {
    const int b = base_channels;
    return {b, 2 * b, 4 * b, 4 * b, 8 * b, 1};
  }
  static constexpr std::array<int, kDiscriminatorLayers> strides() { return {2, 2, 2, 2, 1, 1}; }

  friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

/// 16x16 grid of probabilities that the candidate is the ground truth.
class RealnessMap {
public:
  explicit RealnessMap(float fill = 0.5f) { v_.fill(fill); }
  static RealnessMap from_values(std::span<const float> v) {
    if (v.size() != kRealnessSize * kRealnessSize)
      throw ValidationError("RealnessMap: expected 256 entries");
    RealnessMap m;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!(v[i] >= 0.0f && v[i] <= 1.0f))
        throw ValidationError("RealnessMap: probability outside [0,1]");
      m.v_[i] = v[i];
    }
    return m;
  }
  static constexpr int size() { return kRealnessSize; }
  float operator()(int y, int x) const { return v_[y * kRealnessSize + x]; }
  std::span<const float> values() const { return v_; }
  double mean() const {
    double s = 0;
    for (float v : v_) s += v;
    return s / v_.size();
  }

private:
  std::array<float, kRealnessSize * kRealnessSize> v_{};
};

inline RealnessMap real_target() { return RealnessMap(1.0f); }
inline RealnessMap fake_target() { return RealnessMap(0.0f); }

/// Fully convolutional critic over the (degraded, candidate) channel pair:
/// four stride-2 and two stride-1 convolutions with "same" padding, leaky
/// rectifiers in between and a sigmoid on the single-channel output, so the
/// spatial extent shrinks by exactly 16.
template <typename T>
class Discriminator {
public:
  struct Cache {
    std::array<nn::Tensor<T>, kDiscriminatorLayers> inputs;
    nn::Tensor<T> output;
  };

  Discriminator() = default;

  Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    int in = 2;
    const auto ch = cfg.channels();
    const auto st = DiscriminatorConfig::strides();
    for (int i = 0; i < kDiscriminatorLayers; ++i) {
      layers_[i] = nn::Conv2d<T>("disc.conv" + std::to_string(i + 1), in, ch[i], cfg.kernel_size,
                                 st[i], nn::Padding::same(cfg.kernel_size, st[i]));
      in = ch[i];
    }
    std::mt19937_64 rng(seed);
    for (auto& l : layers_) l.init(rng);
  }

  const DiscriminatorConfig& config() const noexcept { return cfg_; }
  const std::array<nn::Conv2d<T>, kDiscriminatorLayers>& stages() const noexcept {
    return layers_;
  }

  std::vector<nn::Conv2d<T>*> layers() {
    std::vector<nn::Conv2d<T>*> out;
    for (auto& l : layers_) out.push_back(&l);
    return out;
  }

  std::vector<nn::ParamView<T>> params() {
    std::vector<nn::ParamView<T>> out;
    for (auto& l : layers_)
      for (auto& p : l.params()) out.push_back(std::move(p));
    return out;
  }

  void zero_grad() {
    for (auto& l : layers_) l.zero_grad();
  }

  /// `pair`: N x 2 x H x W (channel 0 degraded, channel 1 candidate), H, W divisible by 16.
  nn::Tensor<T> forward(const nn::Tensor<T>& pair, Cache* cache = nullptr) const {
    if (pair.c() != 2 || pair.h() % kRealnessSize || pair.w() % kRealnessSize)
      throw ValidationError("discriminator input " + pair.shape_string() +
                            " must have 2 channels and extents divisible by 16");
    nn::Tensor<T> h = pair;
    for (int i = 0; i < kDiscriminatorLayers; ++i) {
      auto o = layers_[i].forward(h);
      if (i + 1 < kDiscriminatorLayers)
        nn::leaky_relu_inplace(o, static_cast<T>(cfg_.leaky_slope));
      else
        nn::sigmoid_inplace(o);
      if (cache) cache->inputs[i] = std::move(h);
      h = std::move(o);
    }
    if (cache) cache->output = h;
    return h;
  }

  /// Accumulates parameter gradients from dL/d(map) and returns dL/d(pair).
  nn::Tensor<T> backward(const Cache& c, const nn::Tensor<T>& dmap, bool want_input_grad) {
    nn::Tensor<T> d = dmap;
    nn::sigmoid_backward_inplace(c.output, d);
    return backward_logits(c, std::move(d), want_input_grad);
  }

  /// Same, starting from dL/d(pre-sigmoid logits).
  nn::Tensor<T> backward_logits(const Cache& c, nn::Tensor<T> d, bool want_input_grad) {
    for (int i = kDiscriminatorLayers - 1; i >= 0; --i) {
      nn::Tensor<T> din;
      const bool need = i > 0 || want_input_grad;
      layers_[i].backward(c.inputs[i], d, need ? &din : nullptr);
      if (i > 0)
        nn::relu_backward_inplace(c.inputs[i], din, static_cast<T>(cfg_.leaky_slope));
      d = std::move(din);
    }
    return d;
  }

private:
  DiscriminatorConfig cfg_;
  std::array<nn::Conv2d<T>, kDiscriminatorLayers> layers_;
};

template <typename T = float>
Discriminator<T> build_discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) {
  return Discriminator<T>(cfg, seed);
}

namespace detail {
template <typename T>
nn::Tensor<T> stack_pair(const ImagePlane& degraded, const ImagePlane& candidate) {
  nn::Tensor<T> t(1, 2, degraded.height(), degraded.width());
  auto a = degraded.values();
  auto b = candidate.values();
  std::copy(a.begin(), a.end(), t.channel(0, 0));
  std::copy(b.begin(), b.end(), t.channel(0, 1));
  return t;
}
}  // namespace detail

/// Scores a (degraded, candidate) 256x256 pair.
template <typename T>
RealnessMap discriminate(const Discriminator<T>& disc, const ImagePlane& degraded,
                         const ImagePlane& candidate) {
  auto ok = [](const ImagePlane& p) {
    return p.height() == kPatchSize && p.width() == kPatchSize;
  };
  if (!ok(degraded) || !ok(candidate))
    throw ValidationError("discriminate: both inputs must be 256x256");
  auto y = disc.forward(detail::stack_pair<T>(degraded, candidate));
  std::vector<float> v(y.size());
  constexpr float lo = std::numeric_limits<float>::min();
  const float hi = std::nextafter(1.0f, 0.0f);
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = std::clamp(static_cast<float>(y.data()[i]), lo, hi);
  return RealnessMap::from_values(v);
}

}  // namespace degan
