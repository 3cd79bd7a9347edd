// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "degan/error.hpp"
#include "degan/image.hpp"

namespace degan {

namespace detail {

inline void require_same_shape(int h1, int w1, int h2, int w2, const char* what) {
  if (h1 != h2 || w1 != w2)
    throw ValidationError(std::string(what) + ": shape mismatch " + std::to_string(h1) + "x" +
                          std::to_string(w1) + " vs " + std::to_string(h2) + "x" +
                          std::to_string(w2));
}

}  // namespace detail

/// 10 log10(1 / MSE) on unit-range planes; +inf for identical planes.
inline double psnr(const ImagePlane& a, const ImagePlane& b) {
  detail::require_same_shape(a.height(), a.width(), b.height(), b.width(), "psnr");
  const auto va = a.values(), vb = b.values();
  double se = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = static_cast<double>(va[i]) - vb[i];
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / (se / va.size()));
}

// ---------------------------------------------------------------------------
// SSIM

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Normalised 1-D Gaussian taps; the 2-D window is their outer product.
inline std::array<double, kSsimWindow> ssim_taps() {
  std::array<double, kSsimWindow> g{};
  double s = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    s += g[i];
  }
  for (auto& v : g) v /= s;
  return g;
}

/// Mean SSIM over all fully-contained 11x11 Gaussian windows.
inline double ssim(const ImagePlane& a, const ImagePlane& b) {
  detail::require_same_shape(a.height(), a.width(), b.height(), b.width(), "ssim");
  const int h = a.height(), w = a.width();
  if (h < kSsimWindow || w < kSsimWindow)
    throw ValidationError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                          " smaller than the 11x11 window");
  const auto g = ssim_taps();
  const int oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  // Horizontal pass of the five moment images, then vertical pass per output.
  std::array<std::vector<double>, 5> hz;
  for (auto& v : hz) v.assign(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y) {
    const float* ra = a.row(y);
    const float* rb = b.row(y);
    for (int x = 0; x < ow; ++x) {
      double s[5] = {0, 0, 0, 0, 0};
      for (int k = 0; k < kSsimWindow; ++k) {
        const double pa = ra[x + k], pb = rb[x + k], gk = g[k];
        s[0] += gk * pa;
        s[1] += gk * pb;
        s[2] += gk * pa * pa;
        s[3] += gk * pb * pb;
        s[4] += gk * pa * pb;
      }
      for (int m = 0; m < 5; ++m) hz[m][static_cast<std::size_t>(y) * ow + x] = s[m];
    }
  }
  double total = 0.0;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s[5] = {0, 0, 0, 0, 0};
      for (int k = 0; k < kSsimWindow; ++k)
        for (int m = 0; m < 5; ++m) s[m] += g[k] * hz[m][static_cast<std::size_t>(y + k) * ow + x];
      const double mu_a = s[0], mu_b = s[1];
      const double var_a = s[2] - mu_a * mu_a;
      const double var_b = s[3] - mu_b * mu_b;
      const double cov = s[4] - mu_a * mu_b;
      total += ((2 * mu_a * mu_b + kSsimC1) * (2 * cov + kSsimC2)) /
               ((mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2));
    }
  return total / (static_cast<double>(oh) * ow);
}

// ---------------------------------------------------------------------------
// Binary metrics. Internally ink = 1.

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Confusion confusion(const BinaryMask& pred, const BinaryMask& gt) {
  detail::require_same_shape(pred.height(), pred.width(), gt.height(), gt.width(), "confusion");
  Confusion c;
  const auto p = pred.values(), g = gt.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool pi = p[i] == 0, gi = g[i] == 0;
    c.tp += pi && gi;
    c.fp += pi && !gi;
    c.fn += !pi && gi;
    c.tn += !pi && !gi;
  }
  return c;
}

namespace detail {

// Harmonic mean in percent. Both sets empty counts as perfect agreement.
inline double f_percent(std::size_t hits_p, std::size_t pred_ink, std::size_t hits_r,
                        std::size_t ref_ink) {
  if (ref_ink == 0 && pred_ink == 0) return 100.0;
  if (hits_p == 0 || hits_r == 0 || pred_ink == 0 || ref_ink == 0) return 0.0;
  const double p = static_cast<double>(hits_p) / pred_ink;
  const double r = static_cast<double>(hits_r) / ref_ink;
  return 100.0 * 2.0 * p * r / (p + r);
}

}  // namespace detail

/// F-measure over ink pixels, in percent.
inline double f_measure(const BinaryMask& pred, const BinaryMask& gt) {
  const auto c = confusion(pred, gt);
  return detail::f_percent(c.tp, c.tp + c.fp, c.tp, c.tp + c.fn);
}

/// Zhang-Suen thinning of an ink indicator (1 = ink). Pixels outside the image
/// count as background. Returns the one-pixel-wide skeleton.
inline std::vector<std::uint8_t> zhang_suen_skeleton(std::vector<std::uint8_t> ink, int h, int w) {
  auto at = [&](int y, int x) -> int {
    return (y < 0 || y >= h || x < 0 || x >= w) ? 0 : ink[static_cast<std::size_t>(y) * w + x];
  };
  std::vector<std::size_t> to_clear;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      to_clear.clear();
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          if (!at(y, x)) continue;
          // P2..P9 clockwise from north.
          const int n[8] = {at(y - 1, x), at(y - 1, x + 1), at(y, x + 1), at(y + 1, x + 1),
                            at(y + 1, x), at(y + 1, x - 1), at(y, x - 1), at(y - 1, x - 1)};
          int b = 0, a = 0;
          for (int i = 0; i < 8; ++i) {
            b += n[i];
            a += n[i] == 0 && n[(i + 1) % 8] == 1;
          }
          if (b < 2 || b > 6 || a != 1) continue;
          const bool cond = pass == 0 ? (n[0] * n[2] * n[4] == 0 && n[2] * n[4] * n[6] == 0)
                                      : (n[0] * n[2] * n[6] == 0 && n[0] * n[4] * n[6] == 0);
          if (cond) to_clear.push_back(static_cast<std::size_t>(y) * w + x);
        }
      for (auto i : to_clear) ink[i] = 0;
      changed = changed || !to_clear.empty();
    }
  }
  return ink;
}

/// F-measure whose recall counts hits on the ground-truth ink skeleton.
/// Thinning erases some tiny blobs (a 2x2 square) entirely; if nothing of the
/// ink survives, recall falls back to the full ink set.
inline double pseudo_f_measure(const BinaryMask& pred, const BinaryMask& gt) {
  detail::require_same_shape(pred.height(), pred.width(), gt.height(), gt.width(),
                             "pseudo_f_measure");
  auto skel = zhang_suen_skeleton(gt.ink_indicator(), gt.height(), gt.width());
  if (std::find(skel.begin(), skel.end(), 1) == skel.end()) skel = gt.ink_indicator();
  const auto c = confusion(pred, gt);
  std::size_t skel_n = 0, skel_hit = 0;
  const auto p = pred.values();
  for (std::size_t i = 0; i < skel.size(); ++i) {
    skel_n += skel[i];
    skel_hit += skel[i] && p[i] == 0;
  }
  return detail::f_percent(c.tp, c.tp + c.fp, skel_hit, skel_n);
}

inline constexpr int kDrdRadius = 2;  // 5x5 neighbourhood
inline constexpr int kDrdBlock = 8;

/// Normalised reciprocal-distance weights, centre 0, summing to 1.
inline std::array<std::array<double, 2 * kDrdRadius + 1>, 2 * kDrdRadius + 1> drd_weights() {
  std::array<std::array<double, 2 * kDrdRadius + 1>, 2 * kDrdRadius + 1> wm{};
  double s = 0.0;
  for (int i = -kDrdRadius; i <= kDrdRadius; ++i)
    for (int j = -kDrdRadius; j <= kDrdRadius; ++j) {
      const double v = (i == 0 && j == 0) ? 0.0 : 1.0 / std::sqrt(double(i * i + j * j));
      wm[i + kDrdRadius][j + kDrdRadius] = v;
      s += v;
    }
  for (auto& r : wm)
    for (auto& v : r) v /= s;
  return wm;
}

/// Number of 8x8 ground-truth blocks containing both ink and background.
/// Partial blocks at the right/bottom edges are counted as blocks.
inline std::size_t non_uniform_blocks(const BinaryMask& gt) {
  std::size_t n = 0;
  for (int by = 0; by < gt.height(); by += kDrdBlock)
    for (int bx = 0; bx < gt.width(); bx += kDrdBlock) {
      bool ink = false, bg = false;
      for (int y = by; y < std::min(by + kDrdBlock, gt.height()); ++y)
        for (int x = bx; x < std::min(bx + kDrdBlock, gt.width()); ++x)
          (gt.is_ink(y, x) ? ink : bg) = true;
      n += ink && bg;
    }
  return n;
}

/// Distance reciprocal distortion. NaN when flips exist but NUBN is zero.
/// Neighbours outside the image take the flipped pixel's own ground-truth value.
inline double drd(const BinaryMask& pred, const BinaryMask& gt) {
  detail::require_same_shape(pred.height(), pred.width(), gt.height(), gt.width(), "drd");
  const auto wm = drd_weights();
  const int h = gt.height(), w = gt.width();
  double total = 0.0;
  std::size_t flips = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int b = pred(y, x);
      const int own = gt(y, x);
      if (b == own) continue;
      ++flips;
      double d = 0.0;
      for (int i = -kDrdRadius; i <= kDrdRadius; ++i)
        for (int j = -kDrdRadius; j <= kDrdRadius; ++j) {
          const int yy = y + i, xx = x + j;
          const int g = (yy < 0 || yy >= h || xx < 0 || xx >= w) ? own : gt(yy, xx);
          d += std::abs(g - b) * wm[i + kDrdRadius][j + kDrdRadius];
        }
      total += d;
    }
  if (flips == 0) return 0.0;
  const std::size_t nubn = non_uniform_blocks(gt);
  if (nubn == 0) return std::numeric_limits<double>::quiet_NaN();
  return total / static_cast<double>(nubn);
}

// ---------------------------------------------------------------------------
// Reports

struct MetricsReport {
  double psnr = std::numeric_limits<double>::quiet_NaN();
  double ssim = std::numeric_limits<double>::quiet_NaN();
  double f_measure = std::numeric_limits<double>::quiet_NaN();
  double f_ps = std::numeric_limits<double>::quiet_NaN();
  double drd = std::numeric_limits<double>::quiet_NaN();
};

struct EvalOptions {
  /// Threshold both planes and score the binary results (PSNR/SSIM included).
  std::optional<float> binary_threshold;
};

/// Scores one prediction. SSIM is NaN for images smaller than its window;
/// binary metrics are NaN unless a binary threshold is given.
inline MetricsReport evaluate_pair(const ImagePlane& pred, const ImagePlane& gt,
                                   const EvalOptions& opt = {}) {
  detail::require_same_shape(pred.height(), pred.width(), gt.height(), gt.width(),
                             "evaluate_pair");
  MetricsReport r;
  ImagePlane p = pred, g = gt;
  if (opt.binary_threshold) {
    const auto pm = to_binary(pred, *opt.binary_threshold);
    const auto gm = to_binary(gt, *opt.binary_threshold);
    r.f_measure = f_measure(pm, gm);
    r.f_ps = pseudo_f_measure(pm, gm);
    r.drd = drd(pm, gm);
    p = pm.to_plane();
    g = gm.to_plane();
  }
  r.psnr = psnr(p, g);
  if (p.height() >= kSsimWindow && p.width() >= kSsimWindow) r.ssim = ssim(p, g);
  return r;
}

struct CorpusEntry {
  std::string name;
  MetricsReport metrics;
};

struct CorpusReport {
  std::vector<CorpusEntry> entries;
  MetricsReport mean;
  std::size_t psnr_infinite = 0;  // excluded from the PSNR mean
  std::size_t drd_undefined = 0;  // excluded from the DRD mean
};

/// Per-metric arithmetic mean over entries with a finite value.
inline CorpusReport aggregate(std::vector<CorpusEntry> entries) {
  if (entries.empty()) throw ValidationError("evaluate_corpus: empty corpus");
  CorpusReport rep;
  auto mean_of = [&](double MetricsReport::*field) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& e : entries)
      if (std::isfinite(e.metrics.*field)) {
        s += e.metrics.*field;
        ++n;
      }
    return n ? s / n : std::numeric_limits<double>::quiet_NaN();
  };
  rep.mean.psnr = mean_of(&MetricsReport::psnr);
  rep.mean.ssim = mean_of(&MetricsReport::ssim);
  rep.mean.f_measure = mean_of(&MetricsReport::f_measure);
  rep.mean.f_ps = mean_of(&MetricsReport::f_ps);
  rep.mean.drd = mean_of(&MetricsReport::drd);
  for (const auto& e : entries) {
    rep.psnr_infinite += std::isinf(e.metrics.psnr);
    // DRD is only computed alongside the other binary metrics.
    rep.drd_undefined += std::isnan(e.metrics.drd) && !std::isnan(e.metrics.f_measure);
  }
  rep.entries = std::move(entries);
  return rep;
}

struct NamedPair {
  std::string name;
  ImagePlane pred;
  ImagePlane gt;
};

/// Evaluates every pair (in parallel when `threads` > 1) and aggregates.
/// Entry order follows the input order.
inline CorpusReport evaluate_corpus(const std::vector<NamedPair>& pairs,
                                    const EvalOptions& opt = {}, unsigned threads = 1) {
  if (pairs.empty()) throw ValidationError("evaluate_corpus: empty corpus");
  std::vector<CorpusEntry> out(pairs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < pairs.size();)
      out[i] = {pairs[i].name, evaluate_pair(pairs[i].pred, pairs[i].gt, opt)};
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(pairs.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
  }
  return aggregate(std::move(out));
}

/// "inf", "n/a" or fixed-point with `digits` decimals.
inline std::string format_metric(double v, int digits = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline constexpr const char* kReportColumns[] = {"image", "psnr", "ssim", "f_measure", "f_ps",
                                                 "drd"};

/// Comma-separated report, one row per image plus a final "mean" row.
inline void write_report_csv(std::ostream& os, const CorpusReport& rep) {
  for (std::size_t i = 0; i < std::size(kReportColumns); ++i)
    os << (i ? "," : "") << kReportColumns[i];
  os << '\n';
  auto row = [&](const std::string& name, const MetricsReport& m) {
    os << name << ',' << format_metric(m.psnr, 6) << ',' << format_metric(m.ssim, 6) << ','
       << format_metric(m.f_measure, 6) << ',' << format_metric(m.f_ps, 6) << ','
       << format_metric(m.drd, 6) << '\n';
  };
  for (const auto& e : rep.entries) row(e.name, e.metrics);
  row("mean", rep.mean);
}

inline void write_report_table(std::ostream& os, const CorpusReport& rep) {
  std::size_t wname = 5;
  for (const auto& e : rep.entries) wname = std::max(wname, e.name.size());
  auto line = [&](const std::string& name, const MetricsReport& m) {
    os << std::left << std::setw(static_cast<int>(wname)) << name << std::right << "  "
       << std::setw(9) << format_metric(m.psnr, 2) << "  " << std::setw(7)
       << format_metric(m.ssim, 4) << "  " << std::setw(9) << format_metric(m.f_measure, 2)
       << "  " << std::setw(9) << format_metric(m.f_ps, 2) << "  " << std::setw(8)
       << format_metric(m.drd, 3) << '\n';
  };
  os << std::left << std::setw(static_cast<int>(wname)) << "image" << std::right << "  "
     << std::setw(9) << "PSNR" << "  " << std::setw(7) << "SSIM" << "  " << std::setw(9)
     << "F-measure" << "  " << std::setw(9) << "F_ps" << "  " << std::setw(8) << "DRD" << '\n';
  for (const auto& e : rep.entries) line(e.name, e.metrics);
  line("mean", rep.mean);
  os << rep.entries.size() << " images";
  if (rep.psnr_infinite) os << ", " << rep.psnr_infinite << " with infinite PSNR (excluded from mean)";
  if (rep.drd_undefined) os << ", " << rep.drd_undefined << " with undefined DRD (excluded from mean)";
  os << '\n';
}

}  // namespace degan
