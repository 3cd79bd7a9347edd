// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "degan/error.hpp"
#include "degan/image.hpp"

namespace degan {

namespace detail {

// Full-scale sample value for a pixel depth; 0 when unsupported.
inline double channel_max(int depth) {
  switch (depth) {
    case CV_8U: return 255.0;
    case CV_16U: return 65535.0;
    case CV_32F:
    case CV_64F: return 1.0;
    default: return 0.0;
  }
}

}  // namespace detail

/// Reads PNG/TIFF/BMP/JPEG as a grayscale plane in [0,1]. Colour inputs are
/// reduced with Rec. 601 luma weights before normalisation; alpha is ignored.
inline ImagePlane load_image(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    throw DecodeError("cannot read image '" + path.string() + "': no such file");
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
  if (m.data == nullptr)
    throw DecodeError("cannot decode image '" + path.string() + "'");
  if (m.rows < 1 || m.cols < 1)
    throw ValidationError("image '" + path.string() + "' has zero size");
  const double full = detail::channel_max(m.depth());
  if (full == 0.0)
    throw DecodeError("unsupported sample depth in '" + path.string() + "'");
  cv::Mat f;
  m.convertTo(f, CV_64F);
  const int ch = f.channels();
  if (ch != 1 && ch != 3 && ch != 4)
    throw DecodeError("unsupported channel count " + std::to_string(ch) + " in '" +
                      path.string() + "'");
  std::vector<float> v(static_cast<std::size_t>(f.rows) * f.cols);
  for (int y = 0; y < f.rows; ++y) {
    const double* row = f.ptr<double>(y);
    for (int x = 0; x < f.cols; ++x) {
      double lum;
      if (ch == 1) {
        lum = row[x];
      } else {
        const double* px = row + static_cast<std::ptrdiff_t>(x) * ch;  // B, G, R[, A]
        lum = 0.114 * px[0] + 0.587 * px[1] + 0.299 * px[2];
      }
      v[static_cast<std::size_t>(y) * f.cols + x] =
          static_cast<float>(std::clamp(lum / full, 0.0, 1.0));
    }
  }
  return ImagePlane::from_values(f.rows, f.cols, std::move(v));
}

/// 8-bit level for an intensity: round(v * 255).
inline std::uint8_t to_level(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline cv::Mat to_mat8(const ImagePlane& img) {
  cv::Mat m(img.height(), img.width(), CV_8UC1);
  for (int y = 0; y < img.height(); ++y) {
    auto* dst = m.ptr<std::uint8_t>(y);
    const float* src = img.row(y);
    for (int x = 0; x < img.width(); ++x) dst[x] = to_level(src[x]);
  }
  return m;
}

inline void write_mat_png(const std::filesystem::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m, {cv::IMWRITE_PNG_COMPRESSION, 6});
  } catch (const cv::Exception& e) {
    throw IoError("cannot write '" + path.string() + "': " + e.what());
  }
  if (!ok) throw IoError("cannot write '" + path.string() + "'");
}

/// Writes an 8-bit grayscale PNG (intensities scaled by 255, rounded to nearest).
inline void save_png(const std::filesystem::path& path, const ImagePlane& img) {
  write_mat_png(path, to_mat8(img));
}

/// Writes a binary PNG: ink 0, background 255.
inline void save_png(const std::filesystem::path& path, const BinaryMask& mask) {
  write_mat_png(path, to_mat8(mask.to_plane()));
}

/// Plane from an 8-bit single channel matrix.
inline ImagePlane from_mat8(const cv::Mat& m) {
  std::vector<float> v(static_cast<std::size_t>(m.rows) * m.cols);
  for (int y = 0; y < m.rows; ++y) {
    const auto* src = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.cols; ++x)
      v[static_cast<std::size_t>(y) * m.cols + x] = static_cast<float>(src[x] / 255.0);
  }
  return ImagePlane::from_values(m.rows, m.cols, std::move(v));
}

}  // namespace degan
