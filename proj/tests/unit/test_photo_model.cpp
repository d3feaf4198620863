// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "thermocal/errors.hpp"
#include "thermocal/photo_model.hpp"

using namespace thermocal;

namespace {

const double kLn2 = std::log(2.0);

}  // namespace

TEST(ApplyForward, IdentityLeavesIntensity) { EXPECT_DOUBLE_EQ(apply_forward({0.0, 0.0, 0, 1}, 0.7), 0.7); }

TEST(ApplyForward, HandValues) {
  EXPECT_NEAR(apply_forward({kLn2, 0.1, 0, 1}, 0.5), 0.2, 1e-15);
  EXPECT_NEAR(apply_forward({kLn2, -0.1, 0, 1}, 0.2), 0.15, 1e-15);
}

TEST(ApplyForward, NotClamped) { EXPECT_NEAR(apply_forward({std::log(0.5), -0.2, 0, 1}, 0.9), 2.2, 1e-12); }

TEST(Compose, IdentityIsNeutral) {
  const RelativeParams p{0.3, -0.07, 1, 2};
  EXPECT_EQ(compose(RelativeParams::identity(1), p), p);
  EXPECT_EQ(compose(p, RelativeParams::identity(2)), p);
}

TEST(Compose, HalvingUndoesDoubling) {
  const auto r = compose({kLn2, 0.1, 0, 1}, {std::log(0.5), -0.05, 1, 2});
  EXPECT_NEAR(r.a, 0.0, 1e-15);
  EXPECT_NEAR(r.b, 0.0, 1e-15);
  EXPECT_EQ(r.from, 0);
  EXPECT_EQ(r.to, 2);
}

TEST(Compose, FrameMismatchThrows) {
  EXPECT_THROW(compose({0.0, 0.0, 0, 1}, {0.0, 0.0, 2, 3}), ContractViolation);
}

TEST(Compose, AssociativeAndConsistentWithApply) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = fixtures::random_params(rng, 0, 1);
    const auto q = fixtures::random_params(rng, 1, 2);
    const auto r = fixtures::random_params(rng, 2, 3);
    const auto left = compose(compose(p, q), r);
    const auto right = compose(p, compose(q, r));
    EXPECT_NEAR(left.a, right.a, 1e-12);
    EXPECT_NEAR(left.b, right.b, 1e-12);
    for (double i : {0.0, 0.25, 0.5, 1.0}) {
      EXPECT_NEAR(apply_forward(compose(p, q), i), apply_forward(q, apply_forward(p, i)), 1e-12);
    }
  }
}

TEST(Inverse, ComposesToIdentity) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = fixtures::random_params(rng, 3, 7);
    const auto q = compose(p, inverse(p));
    EXPECT_NEAR(q.a, 0.0, 1e-12);
    EXPECT_NEAR(q.b, 0.0, 1e-12);
    EXPECT_EQ(q.from, 3);
    EXPECT_EQ(q.to, 3);
  }
}

TEST(ChangeRef, PreviousFrameIsUnchanged) {
  const RelativeParams p{0.2, 0.03, 4, 5};
  EXPECT_EQ(change_ref(p, {0.1, 0.0, 0, 4}, {0.1, 0.0, 0, 4}), p);
}

TEST(ChangeRef, AllIdentity) {
  const auto r = change_ref({0.0, 0.0, 2, 4}, {0.0, 0.0, 0, 2}, {0.0, 0.0, 0, 3});
  EXPECT_EQ(r.a, 0.0);
  EXPECT_EQ(r.b, 0.0);
  EXPECT_EQ(r.from, 3);
  EXPECT_EQ(r.to, 4);
}

TEST(ChangeRef, MatchesCompositionOracle) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    // Ground-truth chain over frames 0..4 built from per-step params.
    std::vector<RelativeParams> ref{RelativeParams::identity(0)};
    for (FrameIndex t = 1; t <= 4; ++t) ref.push_back(compose(ref.back(), fixtures::random_params(rng, t - 1, t)));
    for (FrameIndex i = 0; i <= 3; ++i) {
      const auto i_to_t = compose(inverse(ref[i]), ref[4]);
      const auto oracle = compose(inverse(ref[3]), ref[4]);
      const auto r = change_ref(i_to_t, ref[i], ref[3]);
      EXPECT_NEAR(r.a, oracle.a, 1e-12);
      EXPECT_NEAR(r.b, oracle.b, 1e-12);
      EXPECT_EQ(r.from, 3);
      EXPECT_EQ(r.to, 4);
    }
  }
}

TEST(ChangeRef, InconsistentFramesThrow) {
  EXPECT_THROW(change_ref({0.0, 0.0, 2, 4}, {0.0, 0.0, 0, 1}, {0.0, 0.0, 0, 3}), ContractViolation);
}

TEST(AdjustForDrift, NominalIsFixedPoint) {
  for (const DriftConfig cfg : {DriftConfig{}, DriftConfig{0.5, 0.5, 0.05}, DriftConfig{1.0, 0.0, 0.1}}) {
    const auto r = adjust_for_drift({0.0, 0.0, 0, 1}, cfg);
    EXPECT_NEAR(r.a, 0.0, 1e-15);
    EXPECT_NEAR(r.b, 0.0, 1e-15);
  }
}

TEST(AdjustForDrift, HandEvaluatedStep) {
  const auto r = adjust_for_drift({std::log(1.2), -0.1, 0, 1}, {0.1, 0.025, 0.05});
  EXPECT_NEAR(r.c(), 1.0775, 1e-12);
  EXPECT_NEAR(r.b, -0.0775, 1e-12);
  EXPECT_NEAR(r.a, std::log(1.155), 1e-12);
}

TEST(AdjustForDrift, ZeroCoefficientsAreIdentity) {
  const RelativeParams p{std::log(1.2), -0.1, 0, 1};
  EXPECT_EQ(adjust_for_drift(p, {0.0, 0.0, 0.05}), p);
}

TEST(AdjustForDrift, GapClampedSymmetrically) {
  // e^a = 0.01 is below the floor; xi = 0 so only the clamp acts.
  const RelativeParams p{std::log(0.01), 0.4, 0, 1};
  const auto r = adjust_for_drift(p, {0.0, 0.0, 0.05});
  EXPECT_NEAR(r.gap(), 0.05, 1e-12);
  EXPECT_NEAR(0.5 * (r.c() + r.b), 0.5 * (p.c() + p.b), 1e-12);
}

TEST(AdjustForDrift, GapNeverBelowFloor) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> a(-8.0, 2.0);
  std::uniform_real_distribution<double> b(-2.0, 2.0);
  std::uniform_real_distribution<double> xi(0.0, 0.99);
  for (int k = 0; k < 2000; ++k) {
    const DriftConfig cfg{xi(rng), xi(rng), 0.05};
    const auto r = adjust_for_drift({a(rng), b(rng), 0, 1}, cfg);
    EXPECT_GE(r.gap(), 0.05 - 1e-12);
  }
}

TEST(DriftConfig, Validation) {
  EXPECT_NO_THROW(DriftConfig{}.validate());
  EXPECT_THROW((DriftConfig{-0.1, 0.0, 0.05}.validate()), ConfigError);
  EXPECT_THROW((DriftConfig{0.1, 1.0, 0.05}.validate()), ConfigError);
  EXPECT_THROW((DriftConfig{0.1, 0.0, 0.0}.validate()), ConfigError);
}

TEST(CalibratePixel, HandValues) {
  EXPECT_DOUBLE_EQ(calibrate_pixel(0.3, RelativeParams::identity(0), 0.0), 0.3);
  EXPECT_NEAR(calibrate_pixel(0.2, {kLn2, 0.1, 0, 3}, 0.05), 0.45, 1e-15);
}

TEST(CalibratePixel, ForwardModelRoundTrip) {
  // I' = (I + r - b)/e^a; calibrating with the same (a, b, r) returns I.
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    const auto p = fixtures::random_params(rng, 0, 1);
    const double radiance = u(rng);
    const double r = 0.1 * (u(rng) - 0.5);
    const double observed = (radiance + r - p.b) / std::exp(p.a);
    EXPECT_NEAR(calibrate_pixel(observed, p, r), radiance, 1e-12);
  }
}

TEST(CyclicGray, HandValues) {
  EXPECT_DOUBLE_EQ(cyclic_gray(0.0), 0.0);
  EXPECT_DOUBLE_EQ(cyclic_gray(0.25), 0.5);
  EXPECT_DOUBLE_EQ(cyclic_gray(0.75), 0.5);
  EXPECT_NEAR(cyclic_gray(1.2), 0.4, 1e-12);
  EXPECT_DOUBLE_EQ(cyclic_gray(0.5), 1.0);
  EXPECT_NEAR(cyclic_gray(-0.1), 0.2, 1e-12);
}

TEST(CyclicGray, PeriodicBoundedContinuous) {
  double prev = cyclic_gray(-2.0);
  for (int k = 1; k <= 40000; ++k) {
    const double v = -2.0 + k * 1e-4;
    const double g = cyclic_gray(v);
    EXPECT_GE(g, 0.0);
    EXPECT_LE(g, 1.0);
    EXPECT_LE(std::abs(g - prev), 2.0 * 1e-4 * 2.0);
    EXPECT_NEAR(g, cyclic_gray(v + 3.0), 1e-9);
    prev = g;
  }
}

TEST(QuantizeU8, RoundsAndClamps) {
  EXPECT_EQ(quantize_u8(0.0), 0);
  EXPECT_EQ(quantize_u8(1.0), 255);
  EXPECT_EQ(quantize_u8(-0.3), 0);
  EXPECT_EQ(quantize_u8(1.7), 255);
  EXPECT_EQ(quantize_u8(0.5), 128);
  for (int k = 0; k < 256; ++k) EXPECT_EQ(quantize_u8(k / 255.0), k);
}

TEST(CyclicColormap, ZeroAndOneAgree) {
  const auto palette = ColorPalette::rainbow();
  EXPECT_EQ(cyclic_colormap(0.0, palette), cyclic_colormap(1.0, palette));
  const Rgb p = cyclic_colormap(0.3, palette);
  const Rgb q = cyclic_colormap(2.3, palette);
  EXPECT_NEAR(p.r, q.r, 1e-12);
  EXPECT_NEAR(p.g, q.g, 1e-12);
  EXPECT_NEAR(p.b, q.b, 1e-12);
}

TEST(CyclicColormap, BlackPalette) {
  const ColorPalette black({{0, 0, 0}, {0, 0, 0}});
  EXPECT_EQ(cyclic_colormap(0.5, black), (Rgb{0, 0, 0}));
}

TEST(CyclicColormap, PaletteValidation) {
  EXPECT_THROW(ColorPalette({{0, 0, 0}}), ConfigError);
  EXPECT_THROW(ColorPalette({{0, 0, 0}, {1, 1, 1}}), ConfigError);
  EXPECT_THROW(ColorPalette::grayscale_ramp(1), ConfigError);
}

TEST(CyclicColormap, GrayscaleRampMatchesCyclicGray) {
  const std::size_t n = 257;
  const auto ramp = ColorPalette::grayscale_ramp(n);
  // Linear interpolation of a piecewise-linear function with a knot at 0.5
  // errs by at most one table step times the slope.
  const double tol = 2.0 / static_cast<double>(n - 1);
  for (int k = 0; k < 1000; ++k) {
    const double v = k / 1000.0 * 3.0 - 1.0;
    const Rgb c = cyclic_colormap(v, ramp);
    EXPECT_NEAR(c.r, cyclic_gray(v), tol);
    EXPECT_EQ(c.r, c.g);
    EXPECT_EQ(c.g, c.b);
  }
}

TEST(ParamChain, ReferenceAndLookup) {
  ParamChain chain(0);
  EXPECT_EQ(chain.reference_frame(), 0);
  chain.append_relative({kLn2, 0.1, 0, 1});
  chain.append_relative({std::log(0.5), -0.05, 1, 2});
  EXPECT_EQ(chain.size(), 3u);
  EXPECT_EQ(chain.last_frame(), 2);
  EXPECT_TRUE(chain.contains(1));
  EXPECT_FALSE(chain.contains(3));
  EXPECT_NEAR(chain.at(2).a, 0.0, 1e-15);
  EXPECT_NEAR(chain.at(2).b, 0.0, 1e-15);
  const auto rel = chain.relative(1, 2);
  EXPECT_NEAR(rel.a, std::log(0.5), 1e-15);
  EXPECT_NEAR(rel.b, -0.05, 1e-15);
  EXPECT_THROW(chain.at(5), ContractViolation);
}

TEST(ParamChain, RejectsNonExtendingEntries) {
  ParamChain chain;
  EXPECT_THROW(chain.push_back({0.1, 0.0, 0, 0}), ContractViolation);
  chain.push_back(RelativeParams::identity(0));
  chain.push_back({0.1, 0.0, 0, 2});
  EXPECT_THROW(chain.push_back({0.1, 0.0, 0, 2}), ContractViolation);
  EXPECT_THROW(chain.push_back({0.1, 0.0, 1, 3}), ContractViolation);
  EXPECT_THROW(ParamChain().reference_frame(), ContractViolation);
}
