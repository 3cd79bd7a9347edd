// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "degan/generator.hpp"
#include "helpers.hpp"

using namespace degan;

namespace {

nn::Tensor<double> random_input(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  nn::Tensor<double> t(1, 1, h, w);
  for (auto& v : t.span()) v = u(rng);
  return t;
}

}  // namespace

TEST(GeneratorConfig, DivisibilityGuard) {
  GeneratorConfig c;
  c.depth = 9;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(build_generator(c, 0), ConfigError);
  c.depth = 8;
  EXPECT_NO_THROW(c.validate());
  c.depth = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.base_channels = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.kernel_size = 2;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Generator, EncoderChannelLadder) {
  GeneratorConfig c;  // depth 4, base 64
  const auto g = build_generator(c, 1);
  ASSERT_EQ(g.encoder().size(), 4u);
  const int ladder[] = {64, 128, 256, 512};
  for (int s = 0; s < 4; ++s) {
    EXPECT_EQ(g.encoder()[s].conv1.out_channels, ladder[s]);
    EXPECT_EQ(g.encoder()[s].conv2.out_channels, ladder[s]);
  }
  EXPECT_EQ(g.bottleneck().conv2.out_channels, 1024);
}

TEST(Generator, SkipWiringChannelCounts) {
  GeneratorConfig c;
  c.depth = 3;
  c.base_channels = 5;
  const auto g = build_generator(c, 1);
  for (int s = 0; s < 3; ++s) {
    const auto& d = g.decoder()[s];
    // decoder stage consumes [encoder features, up-sampled features]
    EXPECT_EQ(d.conv1.in_channels, g.encoder()[s].conv2.out_channels + d.up.out_channels);
    const int below = s + 1 < 3 ? g.decoder()[s + 1].conv2.out_channels : g.bottleneck().conv2.out_channels;
    EXPECT_EQ(d.up.in_channels, below);
  }
}

TEST(Generator, DeterministicForSeed) {
  GeneratorConfig c;
  c.depth = 2;
  c.base_channels = 4;
  auto a = build_generator(c, 42), b = build_generator(c, 42), d = build_generator(c, 43);
  const auto pa = a.params(), pb = b.params(), pd = d.params();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ASSERT_TRUE(std::equal(pa[i].value.begin(), pa[i].value.end(), pb[i].value.begin()));
    differs |= !std::equal(pa[i].value.begin(), pa[i].value.end(), pd[i].value.begin());
  }
  EXPECT_TRUE(differs);
}

TEST(Generator, ShapeAndRangeOnFullPatch) {
  GeneratorConfig c;
  c.depth = 4;
  c.base_channels = 4;
  const auto g = build_generator(c, 3);
  const auto in = testutil::random_plane(256, 256, 5);
  const auto out = generate(g, in);
  ASSERT_EQ(out.height(), 256);
  ASSERT_EQ(out.width(), 256);
  for (float v : out.values()) {
    ASSERT_GT(v, 0.0f);
    ASSERT_LT(v, 1.0f);
  }
  const auto other = generate(build_generator(c, 4), in);
  EXPECT_NE(out, other);
  EXPECT_THROW(generate(g, testutil::random_plane(128, 256, 1)), ValidationError);
}

TEST(Generator, ShapePreservedForEveryValidDepth) {
  for (int depth = 1; depth <= 5; ++depth) {
    GeneratorConfig c;
    c.depth = depth;
    c.base_channels = 1;
    const auto g = build_generator<double>(c, depth);
    const int side = 1 << depth;
    const auto y = g.forward(random_input(2 * side, 3 * side, depth));
    EXPECT_EQ(y.h(), 2 * side);
    EXPECT_EQ(y.w(), 3 * side);
  }
}

TEST(Generator, RejectsBadTensorInput) {
  GeneratorConfig c;
  c.depth = 2;
  c.base_channels = 2;
  const auto g = build_generator<double>(c, 0);
  EXPECT_THROW(g.forward(nn::Tensor<double>(1, 1, 6, 8)), ValidationError);
  EXPECT_THROW(g.forward(nn::Tensor<double>(1, 2, 8, 8)), ValidationError);
}

// Full backward pass against central differences, in double.
TEST(Generator, BackwardMatchesFiniteDifferences) {
  GeneratorConfig c;
  c.depth = 2;
  c.base_channels = 2;
  auto g = build_generator<double>(c, 9);
  // Small nonzero biases keep ReLUs away from exact zeros.
  std::mt19937_64 rng(2);
  for (auto* l : g.layers())
    for (auto& b : l->bias) b = std::uniform_real_distribution<double>(0.01, 0.1)(rng);
  const auto x = random_input(8, 8, 1);
  const auto probe = random_input(8, 8, 2);
  auto loss = [&] {
    const auto y = g.forward(x);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += probe.data()[i] * y.data()[i];
    return s;
  };
  typename Generator<double>::Cache cache;
  g.forward(x, &cache);
  g.zero_grad();
  g.backward(cache, probe);
  const double h = 1e-6;
  int checked = 0;
  for (auto& p : g.params()) {
    for (std::size_t j = 0; j < p.value.size(); j += 7) {
      const double keep = p.value[j];
      p.value[j] = keep + h;
      const double lp = loss();
      p.value[j] = keep - h;
      const double lm = loss();
      p.value[j] = keep;
      const double fd = (lp - lm) / (2 * h);
      EXPECT_NEAR(p.grad[j], fd, 1e-6 + 1e-4 * std::abs(fd)) << p.name << "[" << j << "]";
      ++checked;
    }
  }
  EXPECT_GT(checked, 20);
}

TEST(Generator, FirstKernelReceivesGradient) {
  GeneratorConfig c;
  c.depth = 3;
  c.base_channels = 4;
  auto g = build_generator<double>(c, 5);
  const auto x = random_input(32, 32, 3);
  typename Generator<double>::Cache cache;
  g.forward(x, &cache);
  g.zero_grad();
  g.backward(cache, nn::Tensor<double>(1, 1, 32, 32, 1.0));
  double norm = 0;
  for (double v : g.encoder()[0].conv1.weight_grad) norm += v * v;
  EXPECT_GT(norm, 0.0);
}

TEST(Generator, LogitBackwardEqualsProbabilityBackwardTimesSigmoidSlope) {
  GeneratorConfig c;
  c.depth = 1;
  c.base_channels = 2;
  auto g = build_generator<double>(c, 1);
  const auto x = random_input(4, 4, 8);
  typename Generator<double>::Cache cache;
  const auto y = g.forward(x, &cache);
  const auto dp = random_input(4, 4, 9);
  g.zero_grad();
  g.backward(cache, dp);
  const auto ref = g.layers().back()->weight_grad;
  auto dz = dp;
  for (std::size_t i = 0; i < dz.size(); ++i) dz.data()[i] *= y.data()[i] * (1 - y.data()[i]);
  g.zero_grad();
  g.backward_logits(cache, dz);
  const auto& got = g.layers().back()->weight_grad;
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(got[i], ref[i], 1e-14);
}
