// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "degan/error.hpp"

namespace degan {

/// Single-channel image with intensities in [0, 1], stored row-major.
class ImagePlane {
public:
  ImagePlane() = default;

  ImagePlane(int height, int width, float fill = 0.0f) : h_(height), w_(width) {
    check_extent(height, width);
    check_value(fill);
    v_.assign(static_cast<std::size_t>(height) * width, fill);
  }

  /// Takes ownership of row-major `values`; every value must lie in [0, 1].
  static ImagePlane from_values(int height, int width, std::vector<float> values) {
    check_extent(height, width);
    if (values.size() != static_cast<std::size_t>(height) * width)
      throw ValidationError("ImagePlane: " + std::to_string(values.size()) +
                            " values for a " + std::to_string(height) + "x" +
                            std::to_string(width) + " plane");
    for (float v : values) check_value(v);
    ImagePlane p;
    p.h_ = height;
    p.w_ = width;
    p.v_ = std::move(values);
    return p;
  }

  int height() const noexcept { return h_; }
  int width() const noexcept { return w_; }
  std::size_t size() const noexcept { return v_.size(); }
  bool empty() const noexcept { return v_.empty(); }
  bool same_shape(const ImagePlane& o) const noexcept { return h_ == o.h_ && w_ == o.w_; }

  float operator()(int y, int x) const noexcept {
    return v_[static_cast<std::size_t>(y) * w_ + x];
  }
  void set(int y, int x, float v) {
    check_value(v);
    v_[static_cast<std::size_t>(y) * w_ + x] = v;
  }

  std::span<const float> values() const noexcept { return v_; }
  const float* row(int y) const noexcept { return v_.data() + static_cast<std::size_t>(y) * w_; }

  friend bool operator==(const ImagePlane&, const ImagePlane&) = default;

private:
  static void check_extent(int h, int w) {
    if (h < 1 || w < 1)
      throw ValidationError("ImagePlane: extent must be at least 1x1, got " +
                            std::to_string(h) + "x" + std::to_string(w));
  }
  static void check_value(float v) {
    if (!(v >= 0.0f && v <= 1.0f))
      throw ValidationError("ImagePlane: value " + std::to_string(v) + " outside [0,1]");
  }

  int h_ = 0, w_ = 0;
  std::vector<float> v_;
};

/// Binary document image: 0 = ink (foreground), 1 = background.
class BinaryMask {
public:
  BinaryMask() = default;
  BinaryMask(int height, int width, std::uint8_t fill = 1) : h_(height), w_(width) {
    if (height < 1 || width < 1) throw ValidationError("BinaryMask: empty extent");
    if (fill > 1) throw ValidationError("BinaryMask: values must be 0 or 1");
    v_.assign(static_cast<std::size_t>(height) * width, fill);
  }

  static BinaryMask from_values(int height, int width, std::vector<std::uint8_t> values) {
    BinaryMask m(height, width);
    if (values.size() != m.v_.size())
      throw ValidationError("BinaryMask: value count does not match extent");
    for (auto v : values)
      if (v > 1) throw ValidationError("BinaryMask: values must be 0 or 1");
    m.v_ = std::move(values);
    return m;
  }

  int height() const noexcept { return h_; }
  int width() const noexcept { return w_; }
  std::size_t size() const noexcept { return v_.size(); }
  bool same_shape(const BinaryMask& o) const noexcept { return h_ == o.h_ && w_ == o.w_; }

  std::uint8_t operator()(int y, int x) const noexcept {
    return v_[static_cast<std::size_t>(y) * w_ + x];
  }
  void set(int y, int x, std::uint8_t v) {
    if (v > 1) throw ValidationError("BinaryMask: values must be 0 or 1");
    v_[static_cast<std::size_t>(y) * w_ + x] = v;
  }
  bool is_ink(int y, int x) const noexcept { return (*this)(y, x) == 0; }

  std::span<const std::uint8_t> values() const noexcept { return v_; }
  std::size_t ink_count() const noexcept {
    std::size_t n = 0;
    for (auto v : v_) n += v == 0;
    return n;
  }

  /// Ink as 1, background as 0 (the polarity the metrics work in).
  std::vector<std::uint8_t> ink_indicator() const {
    std::vector<std::uint8_t> out(v_.size());
    for (std::size_t i = 0; i < v_.size(); ++i) out[i] = v_[i] == 0;
    return out;
  }

  /// Background maps to 1.0, ink to 0.0.
  ImagePlane to_plane() const {
    std::vector<float> f(v_.begin(), v_.end());
    return ImagePlane::from_values(h_, w_, std::move(f));
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
  int h_ = 0, w_ = 0;
  std::vector<std::uint8_t> v_;
};

/// value >= threshold is background (1), below is ink (0).
inline BinaryMask to_binary(const ImagePlane& img, float threshold = 0.5f) {
  std::vector<std::uint8_t> out(img.size());
  auto vals = img.values();
  for (std::size_t i = 0; i < vals.size(); ++i) out[i] = vals[i] >= threshold ? 1 : 0;
  return BinaryMask::from_values(img.height(), img.width(), std::move(out));
}

/// Mirror index into [0, n) without repeating the edge sample (…2 1 | 0 1 2 … n-1 | n-2 …).
inline int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace degan
