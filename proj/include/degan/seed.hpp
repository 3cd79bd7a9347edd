// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace degan {

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derived seed for stream `index` of a master seed: mix64(master ^ mix64(index)).
constexpr std::uint64_t sub_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master ^ mix64(index));
}

}  // namespace degan
