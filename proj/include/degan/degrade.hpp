// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "degan/error.hpp"
#include "degan/image.hpp"
#include "degan/io.hpp"
#include "degan/keyvalue.hpp"
#include "degan/seed.hpp"

namespace degan::degrade {

enum class Kind { watermark, stamp, gaussian_noise, stain, blur };

inline const char* to_string(Kind k) {
  switch (k) {
    case Kind::watermark: return "watermark";
    case Kind::stamp: return "stamp";
    case Kind::gaussian_noise: return "gaussian_noise";
    case Kind::stain: return "stain";
    case Kind::blur: return "blur";
  }
  return "?";
}

inline Kind kind_from_string(const std::string& s) {
  for (Kind k : {Kind::watermark, Kind::stamp, Kind::gaussian_noise, Kind::stain, Kind::blur})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown degradation kind '" + s + "'");
}

/// Closed interval [lo, hi].
template <typename T>
struct Range {
  T lo{};
  T hi{};

  void validate(const std::string& what) const {
    if (!(lo <= hi))
      throw ConfigError(what + ": range is empty or unordered (" + std::to_string(lo) + ", " +
                        std::to_string(hi) + ")");
  }
  friend bool operator==(const Range&, const Range&) = default;
};

/// Overlaid text marks. Sizes are text heights as a fraction of the page height.
struct WatermarkParams {
  std::string alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  Range<int> length{4, 12};
  std::vector<std::string> fonts{"simplex", "duplex", "complex", "triplex"};
  Range<double> size{0.05, 0.15};
  Range<double> rotation{-45.0, 45.0};  // degrees
  Range<double> opacity{0.2, 0.6};
  Range<double> color{0.3, 0.8};  // gray level of the mark
  Range<int> count{1, 3};
  friend bool operator==(const WatermarkParams&, const WatermarkParams&) = default;
};

/// Ring stamps with a short word inside; radius as a fraction of the page height.
struct StampParams {
  Range<double> radius{0.08, 0.2};
  Range<double> opacity{0.4, 0.9};
  Range<double> color{0.2, 0.7};
  Range<int> count{1, 2};
  friend bool operator==(const StampParams&, const StampParams&) = default;
};

struct NoiseParams {
  Range<double> sigma{0.02, 0.08};
  friend bool operator==(const NoiseParams&, const NoiseParams&) = default;
};

/// Gaussian darkening blobs; radius as a fraction of the shorter page side.
struct StainParams {
  Range<int> count{1, 4};
  Range<double> radius{0.05, 0.25};
  Range<double> intensity{0.1, 0.5};
  friend bool operator==(const StainParams&, const StainParams&) = default;
};

struct BlurParams {
  Range<double> sigma{0.8, 2.0};
  friend bool operator==(const BlurParams&, const BlurParams&) = default;
};

/// Seeded recipe for synthesising a degraded page from a clean one.
struct DegradationSpec {
  std::uint64_t seed = 0;
  std::vector<Kind> kinds;
  WatermarkParams watermark;
  StampParams stamp;
  NoiseParams noise;
  StainParams stain;
  BlurParams blur;

  void validate() const {
    auto unit = [](const Range<double>& r, const std::string& what) {
      r.validate(what);
      if (r.lo < 0.0 || r.hi > 1.0) throw ConfigError(what + ": must lie in [0,1]");
    };
    auto positive = [](const auto& r, const std::string& what) {
      r.validate(what);
      if (r.lo < 0) throw ConfigError(what + ": must be non-negative");
    };
    for (Kind k : kinds) {
      switch (k) {
        case Kind::watermark:
        case Kind::stamp:
          if (watermark.fonts.empty())
            throw ConfigError(std::string(to_string(k)) + " requested with an empty font set");
          if (watermark.alphabet.empty())
            throw ConfigError(std::string(to_string(k)) + " requested with an empty alphabet");
          break;
        default: break;
      }
    }
    watermark.length.validate("watermark.length");
    if (watermark.length.lo < 1) throw ConfigError("watermark.length: must be >= 1");
    positive(watermark.size, "watermark.size");
    watermark.rotation.validate("watermark.rotation");
    unit(watermark.opacity, "watermark.opacity");
    unit(watermark.color, "watermark.color");
    positive(watermark.count, "watermark.count");
    positive(stamp.radius, "stamp.radius");
    unit(stamp.opacity, "stamp.opacity");
    unit(stamp.color, "stamp.color");
    positive(stamp.count, "stamp.count");
    positive(noise.sigma, "noise.sigma");
    positive(stain.count, "stain.count");
    positive(stain.radius, "stain.radius");
    unit(stain.intensity, "stain.intensity");
    positive(blur.sigma, "blur.sigma");
  }

  friend bool operator==(const DegradationSpec&, const DegradationSpec&) = default;
};

/// Dense watermark recipe: 3-8 marks per page, opacity 0.4-1.0, text height
/// 10-40% of the page height.
inline DegradationSpec dense_watermark_preset(std::uint64_t seed = 0) {
  DegradationSpec s;
  s.seed = seed;
  s.kinds = {Kind::watermark};
  s.watermark.count = {3, 8};
  s.watermark.opacity = {0.4, 1.0};
  s.watermark.size = {0.10, 0.40};
  s.watermark.length = {3, 10};
  s.watermark.color = {0.25, 0.85};
  return s;
}

// ---------------------------------------------------------------------------
// Fonts

inline int hershey_face(const std::string& name) {
  static const std::pair<const char*, int> table[] = {
      {"simplex", cv::FONT_HERSHEY_SIMPLEX},
      {"plain", cv::FONT_HERSHEY_PLAIN},
      {"duplex", cv::FONT_HERSHEY_DUPLEX},
      {"complex", cv::FONT_HERSHEY_COMPLEX},
      {"triplex", cv::FONT_HERSHEY_TRIPLEX},
      {"complex_small", cv::FONT_HERSHEY_COMPLEX_SMALL},
      {"script_simplex", cv::FONT_HERSHEY_SCRIPT_SIMPLEX},
      {"script_complex", cv::FONT_HERSHEY_SCRIPT_COMPLEX},
  };
  std::string base = name;
  int flags = 0;
  if (base.size() > 7 && base.ends_with("_italic")) {
    base.resize(base.size() - 7);
    flags = cv::FONT_ITALIC;
  }
  for (const auto& [n, f] : table)
    if (base == n) return f | flags;
  throw ConfigError("unknown font '" + name + "'");
}

// ---------------------------------------------------------------------------
// Rendering helpers

namespace detail {

template <typename T>
T draw(std::mt19937_64& rng, const Range<T>& r) {
  if constexpr (std::is_integral_v<T>) {
    return std::uniform_int_distribution<T>(r.lo, r.hi)(rng);
  } else {
    if (r.lo == r.hi) return r.lo;
    return std::uniform_real_distribution<T>(r.lo, r.hi)(rng);
  }
}

inline std::string random_text(std::mt19937_64& rng, const std::string& alphabet, int len) {
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s;
  for (int i = 0; i < len; ++i) s.push_back(alphabet[pick(rng)]);
  return s;
}

// out = (1 - a) * in + a * color on the nonzero pixels of a hard mask.
inline void blend(std::vector<float>& buf, const cv::Mat& mask, double a, double color) {
  const int w = mask.cols;
  for (int y = 0; y < mask.rows; ++y) {
    const auto* c = mask.ptr<std::uint8_t>(y);
    for (int x = 0; x < w; ++x) {
      if (c[x] == 0) continue;
      float& v = buf[static_cast<std::size_t>(y) * w + x];
      v = static_cast<float>(std::clamp((1.0 - a) * v + a * color, 0.0, 1.0));
    }
  }
}

inline cv::Mat rotate_about(const cv::Mat& mask, cv::Point2f center, double degrees) {
  if (degrees == 0.0) return mask;
  cv::Mat rot = cv::getRotationMatrix2D(center, degrees, 1.0);
  cv::Mat out;
  cv::warpAffine(mask, out, rot, mask.size(), cv::INTER_NEAREST, cv::BORDER_CONSTANT, 0);
  return out;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

inline void gaussian_blur(std::vector<float>& buf, int h, int w, double sigma) {
  if (sigma <= 0.0) return;
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * r + 1);
  double s = 0.0;
  for (int i = -r; i <= r; ++i) s += k[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  for (auto& v : k) v /= s;
  std::vector<float> tmp(buf.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i)
        acc += k[i + r] * buf[static_cast<std::size_t>(y) * w + reflect_index(x + i, w)];
      tmp[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i)
        acc += k[i + r] * tmp[static_cast<std::size_t>(reflect_index(y + i, h)) * w + x];
      buf[static_cast<std::size_t>(y) * w + x] = static_cast<float>(std::clamp(acc, 0.0, 1.0));
    }
}

}  // namespace detail

/// Output of `apply`: the degraded page and a one-line record of the realised
/// parameters.
struct Degraded {
  ImagePlane image;
  std::string record;
};

/// Applies every kind in `spec.kinds`, in order. Deterministic in (clean, spec).
inline Degraded apply_recorded(const ImagePlane& clean, const DegradationSpec& spec) {
  spec.validate();
  const int h = clean.height(), w = clean.width();
  std::vector<float> buf(clean.values().begin(), clean.values().end());
  std::mt19937_64 rng(spec.seed);
  std::ostringstream rec;
  bool first = true;
  auto note = [&](const std::string& s) {
    rec << (first ? "" : ";") << s;
    first = false;
  };

  for (Kind kind : spec.kinds) {
    switch (kind) {
      case Kind::watermark: {
        const auto& p = spec.watermark;
        const int n = detail::draw(rng, p.count);
        for (int m = 0; m < n; ++m) {
          const int len = detail::draw(rng, p.length);
          const std::string text = detail::random_text(rng, p.alphabet, len);
          const auto& font = p.fonts[std::uniform_int_distribution<std::size_t>(
              0, p.fonts.size() - 1)(rng)];
          const int face = hershey_face(font);
          const double size = detail::draw(rng, p.size);
          const double angle = detail::draw(rng, p.rotation);
          const double opacity = detail::draw(rng, p.opacity);
          const double color = detail::draw(rng, p.color);
          const double cx = std::uniform_real_distribution<double>(0.0, w)(rng);
          const double cy = std::uniform_real_distribution<double>(0.0, h)(rng);
          const int height_px = std::max(4, static_cast<int>(std::lround(size * h)));
          const int thickness = std::max(1, static_cast<int>(std::lround(height_px / 14.0)));
          double scale = cv::getFontScaleFromHeight(face, height_px, thickness);
          int baseline = 0;
          cv::Size ts = cv::getTextSize(text, face, scale, thickness, &baseline);
          if (ts.width > w) {  // shrink marks wider than the page
            scale *= static_cast<double>(w) / ts.width;
            ts = cv::getTextSize(text, face, scale, thickness, &baseline);
          }
          cv::Mat mask = cv::Mat::zeros(h, w, CV_8UC1);
          const cv::Point org(static_cast<int>(std::lround(cx - ts.width / 2.0)),
                              static_cast<int>(std::lround(cy + ts.height / 2.0)));
          cv::putText(mask, text, org, face, scale, cv::Scalar(255), thickness, cv::LINE_8);
          mask = detail::rotate_about(mask, cv::Point2f(float(cx), float(cy)), angle);
          detail::blend(buf, mask, opacity, color);
          note("watermark(text=" + text + ",font=" + font + ",size=" + detail::fmt(size) +
               ",rot=" + detail::fmt(angle) + ",opacity=" + detail::fmt(opacity) +
               ",color=" + detail::fmt(color) + ",x=" + detail::fmt(cx) +
               ",y=" + detail::fmt(cy) + ")");
        }
        break;
      }
      case Kind::stamp: {
        const auto& p = spec.stamp;
        const int n = detail::draw(rng, p.count);
        for (int m = 0; m < n; ++m) {
          const double radius = detail::draw(rng, p.radius) * h;
          const double opacity = detail::draw(rng, p.opacity);
          const double color = detail::draw(rng, p.color);
          const double angle = detail::draw(rng, spec.watermark.rotation);
          const double cx = std::uniform_real_distribution<double>(0.0, w)(rng);
          const double cy = std::uniform_real_distribution<double>(0.0, h)(rng);
          const std::string text = detail::random_text(rng, spec.watermark.alphabet, 5);
          const auto& font = spec.watermark.fonts[std::uniform_int_distribution<std::size_t>(
              0, spec.watermark.fonts.size() - 1)(rng)];
          const int face = hershey_face(font);
          const int r = std::max(3, static_cast<int>(std::lround(radius)));
          const int ring = std::max(1, r / 10);
          cv::Mat mask = cv::Mat::zeros(h, w, CV_8UC1);
          const cv::Point c(static_cast<int>(std::lround(cx)), static_cast<int>(std::lround(cy)));
          cv::circle(mask, c, r, cv::Scalar(255), ring, cv::LINE_8);
          cv::circle(mask, c, std::max(1, r - 3 * ring), cv::Scalar(255), std::max(1, ring / 2),
                     cv::LINE_8);
          const int thickness = std::max(1, ring / 2);
          const double scale =
              cv::getFontScaleFromHeight(face, std::max(4, static_cast<int>(0.4 * r)), thickness);
          int baseline = 0;
          const cv::Size ts = cv::getTextSize(text, face, scale, thickness, &baseline);
          const double fit = ts.width > 1.4 * r ? 1.4 * r / ts.width : 1.0;
          const cv::Size fs = cv::getTextSize(text, face, scale * fit, thickness, &baseline);
          cv::putText(mask, text, {c.x - fs.width / 2, c.y + fs.height / 2}, face, scale * fit,
                      cv::Scalar(255), thickness, cv::LINE_8);
          mask = detail::rotate_about(mask, cv::Point2f(float(cx), float(cy)), angle);
          detail::blend(buf, mask, opacity, color);
          note("stamp(text=" + text + ",r=" + detail::fmt(radius) + ",rot=" + detail::fmt(angle) +
               ",opacity=" + detail::fmt(opacity) + ",color=" + detail::fmt(color) +
               ",x=" + detail::fmt(cx) + ",y=" + detail::fmt(cy) + ")");
        }
        break;
      }
      case Kind::gaussian_noise: {
        const double sigma = detail::draw(rng, spec.noise.sigma);
        std::normal_distribution<double> nd(0.0, 1.0);
        if (sigma > 0.0)
          for (auto& v : buf) v = static_cast<float>(std::clamp(v + sigma * nd(rng), 0.0, 1.0));
        note("gaussian_noise(sigma=" + detail::fmt(sigma) + ")");
        break;
      }
      case Kind::stain: {
        const auto& p = spec.stain;
        const int n = detail::draw(rng, p.count);
        for (int m = 0; m < n; ++m) {
          const double radius = std::max(1.0, detail::draw(rng, p.radius) * std::min(h, w));
          const double intensity = detail::draw(rng, p.intensity);
          const double cx = std::uniform_real_distribution<double>(0.0, w)(rng);
          const double cy = std::uniform_real_distribution<double>(0.0, h)(rng);
          const double s2 = 2.0 * (radius / 2.0) * (radius / 2.0);
          const int y0 = std::max(0, static_cast<int>(cy - 2 * radius));
          const int y1 = std::min(h, static_cast<int>(cy + 2 * radius) + 1);
          const int x0 = std::max(0, static_cast<int>(cx - 2 * radius));
          const int x1 = std::min(w, static_cast<int>(cx + 2 * radius) + 1);
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
              const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
              float& v = buf[static_cast<std::size_t>(y) * w + x];
              v = static_cast<float>(std::clamp(v * (1.0 - intensity * std::exp(-d2 / s2)), 0.0, 1.0));
            }
          note("stain(r=" + detail::fmt(radius) + ",intensity=" + detail::fmt(intensity) +
               ",x=" + detail::fmt(cx) + ",y=" + detail::fmt(cy) + ")");
        }
        break;
      }
      case Kind::blur: {
        const double sigma = detail::draw(rng, spec.blur.sigma);
        detail::gaussian_blur(buf, h, w, sigma);
        note("blur(sigma=" + detail::fmt(sigma) + ")");
        break;
      }
    }
  }
  return {ImagePlane::from_values(h, w, std::move(buf)), rec.str()};
}

inline ImagePlane apply(const ImagePlane& clean, const DegradationSpec& spec) {
  return apply_recorded(clean, spec).image;
}

// ---------------------------------------------------------------------------
// Synthetic clean pages

/// Black text lines on a white page, drawn without anti-aliasing so the page
/// is strictly two-level. Deterministic in (height, width, seed).
inline ImagePlane synthesize_clean_page(int height, int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  cv::Mat page(height, width, CV_8UC1, cv::Scalar(255));
  static const int faces[] = {cv::FONT_HERSHEY_SIMPLEX, cv::FONT_HERSHEY_DUPLEX,
                              cv::FONT_HERSHEY_COMPLEX, cv::FONT_HERSHEY_TRIPLEX};
  const int face = faces[std::uniform_int_distribution<int>(0, 3)(rng)];
  const int text_h = std::uniform_int_distribution<int>(std::max(6, height / 28),
                                                        std::max(7, height / 14))(rng);
  const int thickness = std::max(1, text_h / 12) + std::uniform_int_distribution<int>(0, 1)(rng);
  const double scale = cv::getFontScaleFromHeight(face, text_h, thickness);
  const int line_gap = text_h + std::uniform_int_distribution<int>(text_h / 2, text_h)(rng);
  const int margin = std::max(2, width / 20);
  static const std::string letters = "abcdefghijklmnopqrstuvwxyz";
  for (int y = margin + text_h; y < height - margin / 2; y += line_gap) {
    int x = margin + std::uniform_int_distribution<int>(0, std::max(1, width / 10))(rng);
    while (x < width - margin) {
      const int len = std::uniform_int_distribution<int>(2, 9)(rng);
      std::string word = detail::random_text(rng, letters, len);
      if (std::uniform_int_distribution<int>(0, 5)(rng) == 0)
        word[0] = static_cast<char>(std::toupper(word[0]));
      int baseline = 0;
      const cv::Size ts = cv::getTextSize(word, face, scale, thickness, &baseline);
      if (x + ts.width > width - margin) break;
      cv::putText(page, word, {x, y}, face, scale, cv::Scalar(0), thickness, cv::LINE_8);
      x += ts.width + std::max(3, text_h / 2);
    }
  }
  return from_mat8(page);
}

// ---------------------------------------------------------------------------
// Spec files: flat `key = value` text mirroring DegradationSpec.

namespace detail {
template <typename T>
std::string range_text(const Range<T>& r) {
  if constexpr (std::is_integral_v<T>)
    return std::to_string(r.lo) + ", " + std::to_string(r.hi);
  else
    return kv::format_double(r.lo) + ", " + kv::format_double(r.hi);
}

template <typename T>
Range<T> parse_range(const std::string& key, const std::string& v) {
  const auto parts = kv::split_list(v);
  if (parts.size() != 2) throw ConfigError("'" + key + "': expected 'lo, hi'");
  if constexpr (std::is_integral_v<T>)
    return {static_cast<T>(kv::to_int(key, parts[0])), static_cast<T>(kv::to_int(key, parts[1]))};
  else
    return {kv::to_double(key, parts[0]), kv::to_double(key, parts[1])};
}
}  // namespace detail

inline std::string to_text(const DegradationSpec& s) {
  std::ostringstream os;
  os << "seed = " << s.seed << '\n';
  os << "kinds = ";
  for (std::size_t i = 0; i < s.kinds.size(); ++i) os << (i ? ", " : "") << to_string(s.kinds[i]);
  os << '\n';
  os << "watermark.alphabet = " << s.watermark.alphabet << '\n';
  os << "watermark.length = " << detail::range_text(s.watermark.length) << '\n';
  os << "watermark.fonts = ";
  for (std::size_t i = 0; i < s.watermark.fonts.size(); ++i)
    os << (i ? ", " : "") << s.watermark.fonts[i];
  os << '\n';
  os << "watermark.size = " << detail::range_text(s.watermark.size) << '\n';
  os << "watermark.rotation = " << detail::range_text(s.watermark.rotation) << '\n';
  os << "watermark.opacity = " << detail::range_text(s.watermark.opacity) << '\n';
  os << "watermark.color = " << detail::range_text(s.watermark.color) << '\n';
  os << "watermark.count = " << detail::range_text(s.watermark.count) << '\n';
  os << "stamp.radius = " << detail::range_text(s.stamp.radius) << '\n';
  os << "stamp.opacity = " << detail::range_text(s.stamp.opacity) << '\n';
  os << "stamp.color = " << detail::range_text(s.stamp.color) << '\n';
  os << "stamp.count = " << detail::range_text(s.stamp.count) << '\n';
  os << "noise.sigma = " << detail::range_text(s.noise.sigma) << '\n';
  os << "stain.count = " << detail::range_text(s.stain.count) << '\n';
  os << "stain.radius = " << detail::range_text(s.stain.radius) << '\n';
  os << "stain.intensity = " << detail::range_text(s.stain.intensity) << '\n';
  os << "blur.sigma = " << detail::range_text(s.blur.sigma) << '\n';
  return os.str();
}

/// Builds a spec from a parsed document. `preset = dense_watermark` starts from
/// the dense preset; every other key overrides.
inline DegradationSpec from_document(const kv::Document& doc) {
  DegradationSpec s;
  if (auto it = doc.find("preset"); it != doc.end()) {
    if (it->second == "dense_watermark")
      s = dense_watermark_preset();
    else if (it->second != "none")
      throw ConfigError("unknown preset '" + it->second + "'");
  }
  for (const auto& [key, v] : doc) {
    if (key == "preset") continue;
    if (key == "seed") s.seed = kv::to_uint(key, v);
    else if (key == "kinds") {
      s.kinds.clear();
      for (const auto& k : kv::split_list(v)) s.kinds.push_back(kind_from_string(k));
    } else if (key == "watermark.alphabet") s.watermark.alphabet = v;
    else if (key == "watermark.length") s.watermark.length = detail::parse_range<int>(key, v);
    else if (key == "watermark.fonts") {
      s.watermark.fonts = kv::split_list(v);
      for (const auto& f : s.watermark.fonts) hershey_face(f);
    } else if (key == "watermark.size") s.watermark.size = detail::parse_range<double>(key, v);
    else if (key == "watermark.rotation") s.watermark.rotation = detail::parse_range<double>(key, v);
    else if (key == "watermark.opacity") s.watermark.opacity = detail::parse_range<double>(key, v);
    else if (key == "watermark.color") s.watermark.color = detail::parse_range<double>(key, v);
    else if (key == "watermark.count") s.watermark.count = detail::parse_range<int>(key, v);
    else if (key == "stamp.radius") s.stamp.radius = detail::parse_range<double>(key, v);
    else if (key == "stamp.opacity") s.stamp.opacity = detail::parse_range<double>(key, v);
    else if (key == "stamp.color") s.stamp.color = detail::parse_range<double>(key, v);
    else if (key == "stamp.count") s.stamp.count = detail::parse_range<int>(key, v);
    else if (key == "noise.sigma") s.noise.sigma = detail::parse_range<double>(key, v);
    else if (key == "stain.count") s.stain.count = detail::parse_range<int>(key, v);
    else if (key == "stain.radius") s.stain.radius = detail::parse_range<double>(key, v);
    else if (key == "stain.intensity") s.stain.intensity = detail::parse_range<double>(key, v);
    else if (key == "blur.sigma") s.blur.sigma = detail::parse_range<double>(key, v);
    else throw ConfigError("unknown degradation spec key '" + key + "'");
  }
  s.validate();
  return s;
}

inline DegradationSpec load_spec(const std::filesystem::path& path) {
  return from_document(kv::parse_file(path));
}

// ---------------------------------------------------------------------------
// Corpora

inline bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".tif" || ext == ".tiff" || ext == ".bmp" || ext == ".jpg" ||
         ext == ".jpeg";
}

/// Image files directly inside `dir`, sorted by file name.
inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw IoError("not a directory: '" + dir.string() + "'");
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

struct ManifestRecord {
  std::string stem;
  std::uint64_t seed = 0;
  std::string source;  // clean file name
  std::string kinds;
  std::string realized;
};

struct Manifest {
  DegradationSpec spec;
  std::vector<ManifestRecord> records;
};

inline constexpr const char* kManifestMagic = "# degan corpus manifest v1";
inline constexpr const char* kManifestFile = "manifest.tsv";

namespace detail {

inline std::string kinds_text(const DegradationSpec& s) {
  std::string out;
  for (std::size_t i = 0; i < s.kinds.size(); ++i)
    out += (i ? "," : "") + std::string(to_string(s.kinds[i]));
  return out.empty() ? "none" : out;
}

inline void render_record(const ManifestRecord& r, const DegradationSpec& spec,
                          const std::filesystem::path& clean_file,
                          const std::filesystem::path& out_dir) {
  const ImagePlane clean = load_image(clean_file);
  DegradationSpec s = spec;
  s.seed = r.seed;
  save_png(out_dir / "degraded" / (r.stem + ".png"), apply(clean, s));
  save_png(out_dir / "clean" / (r.stem + ".png"), clean);
}

}  // namespace detail

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write manifest '" + path.string() + "'");
  os << kManifestMagic << '\n';
  std::istringstream spec(to_text(m.spec));
  for (std::string line; std::getline(spec, line);) os << "#spec " << line << '\n';
  os << "stem\tseed\tsource\tkinds\trealized\n";
  for (const auto& r : m.records)
    os << r.stem << '\t' << r.seed << '\t' << r.source << '\t' << r.kinds << '\t' << r.realized
       << '\n';
  if (!os) throw IoError("cannot write manifest '" + path.string() + "'");
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read manifest '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kManifestMagic)
    throw ConfigError("'" + path.string() + "' is not a corpus manifest");
  std::ostringstream spec_text;
  Manifest m;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.rfind("#spec ", 0) == 0) {
      spec_text << line.substr(6) << '\n';
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, '\t');) f.push_back(cell);
    if (f.size() < 4) throw ConfigError("malformed manifest record: '" + line + "'");
    ManifestRecord r{f[0], kv::to_uint("seed", f[1]), f[2], f[3], f.size() > 4 ? f[4] : ""};
    m.records.push_back(std::move(r));
  }
  std::istringstream is(spec_text.str());
  m.spec = from_document(kv::parse(is, path.string()));
  return m;
}

/// Writes `n` pairs to out_dir/{degraded,clean}/<stem>.png plus out_dir/manifest.tsv.
/// Pair i degrades clean image i mod (#clean images) with seed sub_seed(spec.seed, i).
inline Manifest build_corpus(const std::filesystem::path& clean_dir, const DegradationSpec& spec,
                             const std::filesystem::path& out_dir, std::size_t n) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw IoError("cannot create output directory '" + out_dir.string() + "'");
  Manifest m;
  m.spec = spec;
  if (n > 0) {
    const auto files = list_images(clean_dir);
    if (files.empty()) throw DatasetError("no images in '" + clean_dir.string() + "'");
    for (std::size_t i = 0; i < n; ++i) {
      const auto& src = files[i % files.size()];
      std::ostringstream stem;
      stem << src.stem().string() << '_' << std::setw(5) << std::setfill('0') << i;
      ManifestRecord r{stem.str(), sub_seed(spec.seed, i), src.filename().string(),
                       detail::kinds_text(spec), ""};
      const ImagePlane clean = load_image(src);
      DegradationSpec s = spec;
      s.seed = r.seed;
      auto deg = apply_recorded(clean, s);
      r.realized = deg.record;
      save_png(out_dir / "degraded" / (r.stem + ".png"), deg.image);
      save_png(out_dir / "clean" / (r.stem + ".png"), clean);
      m.records.push_back(std::move(r));
    }
  }
  write_manifest(out_dir / kManifestFile, m);
  return m;
}

/// Re-renders every record of a manifest into out_dir.
inline void regenerate_corpus(const std::filesystem::path& manifest_path,
                              const std::filesystem::path& clean_dir,
                              const std::filesystem::path& out_dir) {
  const Manifest m = read_manifest(manifest_path);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  for (const auto& r : m.records) detail::render_record(r, m.spec, clean_dir / r.source, out_dir);
  write_manifest(out_dir / kManifestFile, m);
}

}  // namespace degan::degrade
