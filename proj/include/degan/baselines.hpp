// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "degan/error.hpp"
#include "degan/image.hpp"
#include "degan/io.hpp"

namespace degan {

/// Classic thresholding binarizers. All of them work on 8-bit levels
/// round(v * 255); a pixel is ink when its level is below the threshold.
namespace baselines {

inline std::array<std::uint64_t, 256> histogram(const ImagePlane& img) {
  std::array<std::uint64_t, 256> h{};
  for (float v : img.values()) ++h[to_level(v)];
  return h;
}

/// Threshold t in [0, 255] maximising the between-class variance of
/// {level < t} and {level >= t}; ties go to the smallest t.
inline int otsu_threshold(const ImagePlane& img) {
  const auto hist = histogram(img);
  std::uint64_t n = 0, s = 0;
  for (int l = 0; l < 256; ++l) {
    n += hist[l];
    s += hist[l] * static_cast<std::uint64_t>(l);
  }
  // sigma_B^2 * n^2 = (n0*s - n*s0)^2 / (n0*n1). Compared exactly by cross
  // multiplication when it fits in 128 bits, otherwise in long double.
  const bool exact = n <= (1u << 16);
  using u128 = unsigned __int128;
  u128 best_num = 0;
  std::uint64_t best_den = 1;
  long double best_ld = 0.0L;
  int best_t = 0;
  std::uint64_t n0 = 0, s0 = 0;
  for (int t = 1; t < 256; ++t) {
    n0 += hist[t - 1];
    s0 += hist[t - 1] * static_cast<std::uint64_t>(t - 1);
    const std::uint64_t n1 = n - n0;
    if (n0 == 0 || n1 == 0) continue;
    const std::int64_t diff = static_cast<std::int64_t>(n0 * s) - static_cast<std::int64_t>(n * s0);
    const std::uint64_t ad = static_cast<std::uint64_t>(diff < 0 ? -diff : diff);
    const std::uint64_t den = n0 * n1;
    if (exact) {
      const u128 num = static_cast<u128>(ad) * ad;
      if (num * best_den > best_num * den) {
        best_num = num;
        best_den = den;
        best_t = t;
      }
    } else {
      const long double v = static_cast<long double>(ad) * ad / den;
      if (v > best_ld) {
        best_ld = v;
        best_t = t;
      }
    }
  }
  return best_t;
}

inline BinaryMask threshold_levels(const ImagePlane& img, int t) {
  std::vector<std::uint8_t> out(img.size());
  auto v = img.values();
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = to_level(v[i]) < t ? 0 : 1;
  return BinaryMask::from_values(img.height(), img.width(), std::move(out));
}

inline BinaryMask otsu(const ImagePlane& img) { return threshold_levels(img, otsu_threshold(img)); }

/// Per-pixel mean and standard deviation over a square window.
struct LocalStats {
  int height = 0, width = 0;
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline void check_window(int window) {
  if (window < 3 || window % 2 == 0)
    throw ValidationError("window must be odd and >= 3, got " + std::to_string(window));
}

/// Windowed statistics in level units (0..255) from 64-bit integral images;
/// borders are reflect-padded.
inline LocalStats level_statistics(const ImagePlane& img, int window) {
  check_window(window);
  const int h = img.height(), w = img.width(), r = window / 2;
  const int ph = h + 2 * r, pw = w + 2 * r;
  // Integral images with a zero first row/column.
  std::vector<std::int64_t> s1(static_cast<std::size_t>(ph + 1) * (pw + 1), 0);
  std::vector<std::int64_t> s2(s1.size(), 0);
  auto idx = [&](int y, int x) { return static_cast<std::size_t>(y) * (pw + 1) + x; };
  for (int y = 0; y < ph; ++y) {
    const int sy = reflect_index(y - r, h);
    std::int64_t row1 = 0, row2 = 0;
    for (int x = 0; x < pw; ++x) {
      const std::int64_t l = to_level(img(sy, reflect_index(x - r, w)));
      row1 += l;
      row2 += l * l;
      s1[idx(y + 1, x + 1)] = s1[idx(y, x + 1)] + row1;
      s2[idx(y + 1, x + 1)] = s2[idx(y, x + 1)] + row2;
    }
  }
  LocalStats st{h, w, std::vector<double>(img.size()), std::vector<double>(img.size())};
  const std::int64_t n = static_cast<std::int64_t>(window) * window;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      // Window in padded coordinates: rows [y, y + window), cols [x, x + window).
      auto box = [&](const std::vector<std::int64_t>& s) {
        return s[idx(y + window, x + window)] - s[idx(y, x + window)] -
               s[idx(y + window, x)] + s[idx(y, x)];
      };
      const std::int64_t a = box(s1), b = box(s2);
      const double mean = static_cast<double>(a) / n;
      const double var = static_cast<double>(n * b - a * a) / static_cast<double>(n * n);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      st.mean[i] = mean;
      st.stddev[i] = std::sqrt(var);
    }
  return st;
}

/// Same statistics on the unit intensity range.
inline LocalStats local_statistics(const ImagePlane& img, int window) {
  auto st = level_statistics(img, window);
  for (auto& v : st.mean) v /= 255.0;
  for (auto& v : st.stddev) v /= 255.0;
  return st;
}

/// T = m + k * s.
inline BinaryMask niblack(const ImagePlane& img, int window = 15, double k = -0.2) {
  const auto st = level_statistics(img, window);
  std::vector<std::uint8_t> out(img.size());
  auto v = img.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double t = st.mean[i] + k * st.stddev[i];
    out[i] = to_level(v[i]) < t ? 0 : 1;
  }
  return BinaryMask::from_values(img.height(), img.width(), std::move(out));
}

/// T = m * (1 + k * (s / R - 1)), with R on the unit range.
inline BinaryMask sauvola(const ImagePlane& img, int window = 25, double k = 0.5, double R = 0.5) {
  check_window(window);
  if (!(R > 0.0)) throw ValidationError("sauvola: R must be > 0");
  const auto st = level_statistics(img, window);
  const double r_level = R * 255.0;
  std::vector<std::uint8_t> out(img.size());
  auto v = img.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double t = st.mean[i] * (1.0 + k * (st.stddev[i] / r_level - 1.0));
    out[i] = to_level(v[i]) < t ? 0 : 1;
  }
  return BinaryMask::from_values(img.height(), img.width(), std::move(out));
}

}  // namespace baselines
}  // namespace degan
