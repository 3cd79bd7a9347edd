// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "degan/error.hpp"
#include "degan/nn/layers.hpp"

namespace degan::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0,1)");
    if (!(epsilon > 0.0)) throw ConfigError("adam epsilon must be > 0");
  }
};

/// Adaptive-moment optimiser with bias correction. Moment buffers are laid
/// out in the order of the parameter list it was built for.
template <typename T>
class Adam {
public:
  Adam() = default;
  Adam(const AdamConfig& cfg, const std::vector<ParamView<T>>& params) : cfg_(cfg) {
    cfg.validate();
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), T(0));
      v_.emplace_back(p.value.size(), T(0));
    }
  }

  void step(const std::vector<ParamView<T>>& params) {
    if (params.size() != m_.size()) throw Error("Adam: parameter list changed");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T step = static_cast<T>(cfg_.learning_rate / c1);
    const T inv_c2 = static_cast<T>(1.0 / c2);
    const T eps = static_cast<T>(cfg_.epsilon);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& m = m_[i];
      auto& v = v_[i];
      const auto& p = params[i];
      if (p.value.size() != m.size()) throw Error("Adam: parameter '" + p.name + "' resized");
      for (std::size_t j = 0; j < m.size(); ++j) {
        const T g = p.grad[j];
        m[j] = b1 * m[j] + (T(1) - b1) * g;
        v[j] = b2 * v[j] + (T(1) - b2) * g * g;
        p.value[j] -= step * m[j] / (std::sqrt(v[j] * inv_c2) + eps);
      }
    }
  }

  const AdamConfig& config() const noexcept { return cfg_; }
  std::uint64_t steps() const noexcept { return t_; }
  std::vector<std::vector<T>>& first_moments() noexcept { return m_; }
  std::vector<std::vector<T>>& second_moments() noexcept { return v_; }
  const std::vector<std::vector<T>>& first_moments() const noexcept { return m_; }
  const std::vector<std::vector<T>>& second_moments() const noexcept { return v_; }
  void set_steps(std::uint64_t t) noexcept { t_ = t; }

private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace degan::nn
