// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "degan/error.hpp"
#include "degan/image.hpp"

namespace degan {

/// Overlapping square tiles of an image plus the placement needed to put them back.
///
/// Images smaller than the patch on an axis are reflect-padded at the bottom/right
/// up to the patch size; `padded_shape` records the tiled extent and
/// `source_shape` the extent restored by stitching.
struct PatchSet {
  int patch_size = 0;
  int stride = 0;
  std::vector<int> origin_rows;
  std::vector<int> origin_cols;
  std::vector<ImagePlane> patches;  // row-major over (origin_rows x origin_cols)
  std::pair<int, int> source_shape{0, 0};
  std::pair<int, int> padded_shape{0, 0};

  std::size_t count() const { return origin_rows.size() * origin_cols.size(); }
  const ImagePlane& at(std::size_t r, std::size_t c) const {
    return patches[r * origin_cols.size() + c];
  }

  void validate() const {
    if (patch_size < 1 || stride < 1 || stride > patch_size)
      throw ValidationError("PatchSet: invalid patch_size/stride");
    if (patches.size() != count())
      throw ValidationError("PatchSet: " + std::to_string(patches.size()) +
                            " patches for a " + std::to_string(origin_rows.size()) + "x" +
                            std::to_string(origin_cols.size()) + " grid");
    for (const auto& p : patches)
      if (p.height() != patch_size || p.width() != patch_size)
        throw ValidationError("PatchSet: patch of " + std::to_string(p.height()) + "x" +
                              std::to_string(p.width()) + ", expected " +
                              std::to_string(patch_size));
    auto check_axis = [&](const std::vector<int>& o, int extent) {
      if (o.empty() || o.front() != 0 || o.back() != extent - patch_size)
        throw ValidationError("PatchSet: offsets do not span the padded extent");
      for (std::size_t i = 1; i < o.size(); ++i)
        if (o[i] <= o[i - 1] || o[i] - o[i - 1] > patch_size)
          throw ValidationError("PatchSet: offsets unsorted or leave a gap");
    };
    check_axis(origin_rows, padded_shape.first);
    check_axis(origin_cols, padded_shape.second);
    if (source_shape.first < 1 || source_shape.second < 1 ||
        source_shape.first > padded_shape.first || source_shape.second > padded_shape.second)
      throw ValidationError("PatchSet: source shape inconsistent with padded shape");
  }
};

/// 0, stride, 2*stride, ... while the patch fits, then a final offset clamped to
/// extent - patch.
inline std::vector<int> patch_offsets(int extent, int patch_size, int stride) {
  if (patch_size < 1 || stride < 1)
    throw ValidationError("patch_offsets: patch_size and stride must be >= 1");
  if (stride > patch_size) throw ValidationError("patch_offsets: stride exceeds patch_size");
  std::vector<int> out;
  for (int off = 0; off + patch_size <= extent; off += stride) out.push_back(off);
  if (out.empty() || out.back() != extent - patch_size) out.push_back(extent - patch_size);
  return out;
}

/// Reflect-pads `img` at the bottom/right to at least `min_h` x `min_w`.
inline ImagePlane reflect_pad(const ImagePlane& img, int min_h, int min_w) {
  const int h = std::max(img.height(), min_h);
  const int w = std::max(img.width(), min_w);
  if (h == img.height() && w == img.width()) return img;
  std::vector<float> v(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    const int sy = reflect_index(y, img.height());
    for (int x = 0; x < w; ++x)
      v[static_cast<std::size_t>(y) * w + x] = img(sy, reflect_index(x, img.width()));
  }
  return ImagePlane::from_values(h, w, std::move(v));
}

inline ImagePlane crop(const ImagePlane& img, int top, int left, int height, int width) {
  if (top < 0 || left < 0 || height < 1 || width < 1 || top + height > img.height() ||
      left + width > img.width())
    throw ValidationError("crop: window outside image");
  std::vector<float> v(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y)
    std::copy_n(img.row(top + y) + left, width, v.begin() + static_cast<std::ptrdiff_t>(y) * width);
  return ImagePlane::from_values(height, width, std::move(v));
}

inline PatchSet extract_patches(const ImagePlane& img, int patch_size, int stride) {
  if (patch_size < 1 || stride < 1)
    throw ValidationError("extract_patches: patch_size and stride must be >= 1");
  if (stride > patch_size)
    throw ValidationError("extract_patches: stride must not exceed patch_size");
  PatchSet ps;
  ps.patch_size = patch_size;
  ps.stride = stride;
  ps.source_shape = {img.height(), img.width()};
  const ImagePlane padded = reflect_pad(img, patch_size, patch_size);
  ps.padded_shape = {padded.height(), padded.width()};
  ps.origin_rows = patch_offsets(padded.height(), patch_size, stride);
  ps.origin_cols = patch_offsets(padded.width(), patch_size, stride);
  ps.patches.reserve(ps.count());
  for (int r : ps.origin_rows)
    for (int c : ps.origin_cols) ps.patches.push_back(crop(padded, r, c, patch_size, patch_size));
  return ps;
}

/// Reassembles patches; pixels covered by k patches get the mean of the k values.
inline ImagePlane stitch_patches(const PatchSet& ps) {
  ps.validate();
  const auto [ph, pw] = ps.padded_shape;
  std::vector<double> sum(static_cast<std::size_t>(ph) * pw, 0.0);
  std::vector<int> cnt(sum.size(), 0);
  std::size_t idx = 0;
  for (int r : ps.origin_rows)
    for (int c : ps.origin_cols) {
      const ImagePlane& p = ps.patches[idx++];
      for (int y = 0; y < ps.patch_size; ++y) {
        const float* src = p.row(y);
        const std::size_t base = static_cast<std::size_t>(r + y) * pw + c;
        for (int x = 0; x < ps.patch_size; ++x) {
          sum[base + x] += src[x];
          ++cnt[base + x];
        }
      }
    }
  const auto [sh, sw] = ps.source_shape;
  std::vector<float> out(static_cast<std::size_t>(sh) * sw);
  for (int y = 0; y < sh; ++y)
    for (int x = 0; x < sw; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * pw + x;
      const double m = sum[i] / cnt[i];
      out[static_cast<std::size_t>(y) * sw + x] = static_cast<float>(std::clamp(m, 0.0, 1.0));
    }
  return ImagePlane::from_values(sh, sw, std::move(out));
}

}  // namespace degan
