#include <gtest/gtest.h>

#include <cmath>

#include "namea/core/gso.hpp"
#include "namea/errors.hpp"
#include "namea/model/gateway.hpp"
#include "namea/rng.hpp"
#include "support/toy.hpp"

using namespace namea;

TEST(GsoLayerRange, MatchesCeilAndFloorThirds) {
  for (std::size_t L = 3; L <= 30; ++L) {
    const auto layers = core::cnn_scaled_layers(L);
    const auto lo = static_cast<std::size_t>(std::ceil(L / 3.0));
    const auto hi = static_cast<std::size_t>(std::floor(2.0 * L / 3.0));
    ASSERT_FALSE(layers.empty()) << L;
    EXPECT_EQ(layers.front(), lo) << L;
    EXPECT_EQ(layers.back(), hi) << L;
    EXPECT_EQ(layers.size(), hi - lo + 1) << L;
  }
}

TEST(GsoLayerRange, RejectsShallowNetworks) {
  EXPECT_THROW(core::cnn_scaled_layers(2), ConfigError);
  EXPECT_THROW(core::cnn_scaled_layers(0), ConfigError);
}

TEST(GsoLayerFactor, WorkedExample) {
  EXPECT_NEAR(core::cnn_layer_factor(6, 12, 1.0, 0.1), 1.2, 1e-12);
  EXPECT_NEAR(core::cnn_layer_factor(4, 12, 1.0, 0.1), 1.3, 1e-12);
  EXPECT_NEAR(core::cnn_layer_factor(8, 12, 1.0, 0.1), 1.15, 1e-12);
  EXPECT_NEAR(core::cnn_layer_factor(2, 5, 0.5, 0.2), 1.0, 1e-12);
}

TEST(GsoLayerFactor, NonincreasingOverScaledRange) {
  for (std::size_t L = 3; L <= 24; ++L) {
    double prev = INFINITY;
    for (std::size_t l : core::cnn_scaled_layers(L)) {
      const double f = core::cnn_layer_factor(l, L, 1.0, 0.1);
      EXPECT_LE(f, prev);
      prev = f;
    }
  }
}

TEST(GsoLayerScale, OnlyScaledRangeChanges) {
  std::vector<Tensor> grads;
  for (int l = 0; l < 9; ++l) grads.emplace_back(Shape{2, 3}, 1.0f);
  core::gso_scale_cnn(grads, 1.0, 0.1);
  for (std::size_t l = 1; l <= 9; ++l) {
    const bool scaled = l >= 3 && l <= 6;
    const float want = scaled ? static_cast<float>(1.0 + 0.1 * 9.0 / static_cast<double>(l)) : 1.0f;
    EXPECT_FLOAT_EQ(grads[l - 1][0], want) << l;
  }
}

TEST(GsoChannel, TwoChannelCase) {
  const std::vector<double> mags{1.0, 3.0};
  const auto f = core::vit_channel_factors(mags);
  EXPECT_NEAR(f[0], std::tanh(1.0), 1e-12);
  EXPECT_NEAR(f[0], 0.761594, 1e-6);
  EXPECT_EQ(f[1], 1.0);
}

TEST(GsoChannel, ConstantMagnitudesAreIdentity) {
  const std::vector<double> mags(5, 0.3);
  for (double f : core::vit_channel_factors(mags)) EXPECT_EQ(f, 1.0);
}

TEST(GsoChannel, FactorRangeProperty) {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = static_cast<std::size_t>(rng.uniform_int(2, 64));
    std::vector<double> mags(c);
    for (double& m : mags) m = rng.uniform01() * (trial % 3 == 0 ? 1e-3 : 5.0);
    double mean = 0.0;
    for (double m : mags) mean += m;
    mean /= static_cast<double>(c);
    const auto f = core::vit_channel_factors(mags);
    for (std::size_t i = 0; i < c; ++i) {
      if (mags[i] < mean) {
        EXPECT_GE(f[i], 0.0);
        EXPECT_LT(f[i], 1.0);
      } else {
        EXPECT_EQ(f[i], 1.0);
      }
    }
  }
}

TEST(GsoChannel, ScalesTokenBlockInPlace) {
  // Channel 0 has magnitude 1, channel 1 magnitude 3 on every token.
  std::vector<float> g{1.0f, -3.0f, -1.0f, 3.0f, 1.0f, 3.0f};
  const auto f = core::gso_scale_vit(g, 3, 2);
  const float t = static_cast<float>(std::tanh(1.0));
  EXPECT_FLOAT_EQ(g[0], t);
  EXPECT_FLOAT_EQ(g[2], -t);
  EXPECT_FLOAT_EQ(g[1], -3.0f);
  EXPECT_EQ(f[1], 1.0);
}

TEST(GsoConfigValidate, RejectsNegativeLambdas) {
  EXPECT_THROW((core::GsoConfig{-1.0, 0.1, true}.validate()), ConfigError);
  EXPECT_THROW((core::GsoConfig{1.0, -0.1, true}.validate()), ConfigError);
}

namespace {

void expect_attach_detach_exact(model::ModelHandle& m) {
  const Tensor x = toy::images(2, 8, 31);
  const std::vector<int> y{0, 2};
  const Tensor before = model::input_gradient(m, x, y);
  {
    auto hook = model::attach_gso(m, core::GsoConfig{1.0, 0.5, true});
    EXPECT_TRUE(m.gso_attached());
    const Tensor scaled = model::input_gradient(m, x, y);
    EXPECT_NE(scaled, before);
  }
  EXPECT_FALSE(m.gso_attached());
  EXPECT_EQ(model::input_gradient(m, x, y), before);

  auto hook = model::attach_gso(m, core::GsoConfig{1.0, 0.5, true});
  hook.detach();
  EXPECT_EQ(model::input_gradient(m, x, y), before);
}

}  // namespace

TEST(GsoAttach, CnnDetachRestoresBitExactly) {
  auto m = toy::handle("c", toy::cnn3());
  expect_attach_detach_exact(m);
}

TEST(GsoAttach, VitDetachRestoresBitExactly) {
  auto m = toy::handle("v", toy::vit(2, 9));
  expect_attach_detach_exact(m);
}

TEST(GsoAttach, DoubleAttachIsUsageError) {
  auto m = toy::handle("c", toy::cnn3());
  auto hook = model::attach_gso(m, core::GsoConfig{});
  EXPECT_THROW(model::attach_gso(m, core::GsoConfig{}), UsageError);
}

TEST(GsoAttach, ShallowCnnIsConfigError) {
  auto m = toy::handle("c", toy::cnn2());
  EXPECT_THROW(model::attach_gso(m, core::GsoConfig{}), ConfigError);
}

TEST(GsoAttach, NeutralSettingsLeaveCnnGradientUnchanged) {
  // lambda1 = 1, lambda2 = 0 scales by exactly one.
  auto m = toy::handle("c", toy::cnn3());
  const Tensor x = toy::images(1, 8, 32);
  const std::vector<int> y{3};
  const Tensor before = model::input_gradient(m, x, y);
  auto hook = model::attach_gso(m, core::GsoConfig{1.0, 0.0, true});
  EXPECT_EQ(model::input_gradient(m, x, y), before);
}

TEST(GsoAttach, MoveTransfersOwnership) {
  auto m = toy::handle("c", toy::cnn3());
  model::GsoAttachment outer;
  {
    auto inner = model::attach_gso(m, core::GsoConfig{});
    outer = std::move(inner);
  }
  EXPECT_TRUE(m.gso_attached());
  outer.detach();
  EXPECT_FALSE(m.gso_attached());
}
