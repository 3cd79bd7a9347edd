// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "degan/image.hpp"

namespace testutil {

inline degan::ImagePlane random_plane(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(static_cast<std::size_t>(h) * w);
  for (auto& x : v) x = u(rng);
  return degan::ImagePlane::from_values(h, w, std::move(v));
}

/// 8-bit quantised random plane (values k/255).
inline degan::ImagePlane random_levels(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, 255);
  std::vector<float> v(static_cast<std::size_t>(h) * w);
  for (auto& x : v) x = static_cast<float>(u(rng) / 255.0);
  return degan::ImagePlane::from_values(h, w, std::move(v));
}

inline degan::BinaryMask random_mask(int h, int w, double ink, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(ink);
  std::vector<std::uint8_t> v(static_cast<std::size_t>(h) * w);
  for (auto& x : v) x = b(rng) ? 0 : 1;
  return degan::BinaryMask::from_values(h, w, std::move(v));
}

/// Fresh, empty directory under the system temp dir, unique per test.
inline std::filesystem::path fresh_dir(const std::string& tag) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  std::string name = "degan_" + tag;
  if (info) name += std::string("_") + info->test_suite_name() + "_" + info->name();
  for (auto& c : name)
    if (c == '/') c = '_';
  const auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
