// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "degan/discriminator.hpp"
#include "degan/error.hpp"
#include "degan/image.hpp"

namespace degan {

/// Log arguments are clamped to [eps, 1 - eps].
inline constexpr double kProbEpsilon = 1e-7;

enum class AdversarialForm { non_saturating, saturating };

inline const char* to_string(AdversarialForm f) {
  return f == AdversarialForm::non_saturating ? "non_saturating" : "saturating";
}

struct LossBreakdown {
  double adversarial_G = 0.0;
  double adversarial_D = 0.0;
  double pixel_log = 0.0;
  double combined_G = 0.0;
  double lambda = 0.0;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

namespace detail {

inline double clamp_prob(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }
inline bool clamped(double p) { return p < kProbEpsilon || p > 1.0 - kProbEpsilon; }

// d/dp of log(clamp(p)); zero where the clamp is active.
inline double dlog(double p) { return clamped(p) ? 0.0 : 1.0 / p; }
// d/dp of log(1 - clamp(p)).
inline double dlog1m(double p) { return clamped(p) ? 0.0 : -1.0 / (1.0 - p); }

template <typename T>
void check_same_size(std::span<const T> a, std::span<const T> b, const char* what) {
  if (a.size() != b.size() || a.empty())
    throw ValidationError(std::string(what) + ": size mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
}

}  // namespace detail

/// Discriminator loss (negated adversarial objective):
/// -mean(log real) - mean(log(1 - fake)).
template <typename T>
double adversarial_loss_D(std::span<const T> real_map, std::span<const T> fake_map) {
  if (real_map.empty() || fake_map.empty())
    throw ValidationError("adversarial_loss_D: empty map");
  double r = 0.0, f = 0.0;
  for (T p : real_map) r += std::log(detail::clamp_prob(p));
  for (T p : fake_map) f += std::log(1.0 - detail::clamp_prob(p));
  return -r / real_map.size() - f / fake_map.size();
}

template <typename T>
void adversarial_loss_D_grad(std::span<const T> real_map, std::span<const T> fake_map,
                             std::span<T> d_real, std::span<T> d_fake) {
  const double nr = static_cast<double>(real_map.size());
  const double nf = static_cast<double>(fake_map.size());
  for (std::size_t i = 0; i < real_map.size(); ++i)
    d_real[i] = static_cast<T>(-detail::dlog(real_map[i]) / nr);
  for (std::size_t i = 0; i < fake_map.size(); ++i)
    d_fake[i] = static_cast<T>(-detail::dlog1m(fake_map[i]) / nf);
}

/// Generator adversarial term. Non-saturating: -mean(log fake); saturating:
/// mean(log(1 - fake)).
template <typename T>
double adversarial_loss_G(std::span<const T> fake_map,
                          AdversarialForm form = AdversarialForm::non_saturating) {
  if (fake_map.empty()) throw ValidationError("adversarial_loss_G: empty map");
  double s = 0.0;
  if (form == AdversarialForm::non_saturating) {
    for (T p : fake_map) s -= std::log(detail::clamp_prob(p));
  } else {
    for (T p : fake_map) s += std::log(1.0 - detail::clamp_prob(p));
  }
  return s / fake_map.size();
}

template <typename T>
void adversarial_loss_G_grad(std::span<const T> fake_map, std::span<T> d_fake,
                             AdversarialForm form = AdversarialForm::non_saturating) {
  const double n = static_cast<double>(fake_map.size());
  for (std::size_t i = 0; i < fake_map.size(); ++i) {
    const double g = form == AdversarialForm::non_saturating ? -detail::dlog(fake_map[i])
                                                             : detail::dlog1m(fake_map[i]);
    d_fake[i] = static_cast<T>(g / n);
  }
}

/// Mean per-pixel binary cross-entropy between ground truth and generated values.
template <typename T>
double pixel_log_loss(std::span<const T> gt, std::span<const T> gen) {
  detail::check_same_size(gt, gen, "pixel_log_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double p = detail::clamp_prob(gen[i]);
    const double y = gt[i];
    s -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return s / gt.size();
}

/// d(pixel_log_loss)/d(gen).
template <typename T>
void pixel_log_loss_grad(std::span<const T> gt, std::span<const T> gen, std::span<T> d_gen) {
  detail::check_same_size(gt, gen, "pixel_log_loss_grad");
  const double n = static_cast<double>(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double y = gt[i];
    const double g = -(y * detail::dlog(gen[i]) + (1.0 - y) * detail::dlog1m(gen[i]));
    d_gen[i] = static_cast<T>(g / n);
  }
}

// Gradients with respect to the logits z of sigmoid outputs p = s(z), with the
// clamp ignored: the sigmoid factor p(1-p) cancels the 1/p and 1/(1-p) terms,
// so saturated outputs still receive a gradient.

template <typename T>
void adversarial_loss_D_logit_grad(std::span<const T> real_map, std::span<const T> fake_map,
                                   std::span<T> d_real, std::span<T> d_fake) {
  const double nr = static_cast<double>(real_map.size());
  const double nf = static_cast<double>(fake_map.size());
  for (std::size_t i = 0; i < real_map.size(); ++i)
    d_real[i] = static_cast<T>(-(1.0 - real_map[i]) / nr);
  for (std::size_t i = 0; i < fake_map.size(); ++i)
    d_fake[i] = static_cast<T>(fake_map[i] / nf);
}

template <typename T>
void adversarial_loss_G_logit_grad(std::span<const T> fake_map, std::span<T> d_fake,
                                   AdversarialForm form = AdversarialForm::non_saturating) {
  const double n = static_cast<double>(fake_map.size());
  for (std::size_t i = 0; i < fake_map.size(); ++i) {
    const double p = fake_map[i];
    d_fake[i] = static_cast<T>((form == AdversarialForm::non_saturating ? -(1.0 - p) : -p) / n);
  }
}

template <typename T>
void pixel_log_loss_logit_grad(std::span<const T> gt, std::span<const T> gen, std::span<T> d_gen) {
  detail::check_same_size(gt, gen, "pixel_log_loss_logit_grad");
  const double n = static_cast<double>(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i)
    d_gen[i] = static_cast<T>((static_cast<double>(gen[i]) - gt[i]) / n);
}

inline double adversarial_loss_D(const RealnessMap& real_map, const RealnessMap& fake_map) {
  return adversarial_loss_D(real_map.values(), fake_map.values());
}

inline double adversarial_loss_G(const RealnessMap& fake_map,
                                 AdversarialForm form = AdversarialForm::non_saturating) {
  return adversarial_loss_G(fake_map.values(), form);
}

inline double pixel_log_loss(const ImagePlane& gt, const ImagePlane& gen) {
  if (!gt.same_shape(gen))
    throw ValidationError("pixel_log_loss: shape mismatch " + std::to_string(gt.height()) + "x" +
                          std::to_string(gt.width()) + " vs " + std::to_string(gen.height()) +
                          "x" + std::to_string(gen.width()));
  return pixel_log_loss(gt.values(), gen.values());
}

inline double combined_generator_loss(double adversarial, double pixel, double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("lambda must be > 0");
  return adversarial + lambda * pixel;
}

inline LossBreakdown make_breakdown(double adversarial_D, double adversarial_G, double pixel,
                                    double lambda) {
  return {adversarial_G, adversarial_D, pixel,
          combined_generator_loss(adversarial_G, pixel, lambda), lambda};
}

}  // namespace degan
