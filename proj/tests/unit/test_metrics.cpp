// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "test_support.hpp"
#include "thermocal/errors.hpp"
#include "thermocal/metrics.hpp"

using namespace thermocal;

namespace {

RelativeParams from_cb(double c, double b, FrameIndex to) { return {std::log(c - b), b, 0, to}; }

double brute_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  long double mx = 0;
  long double my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double cov = 0;
  long double vx = 0;
  long double vy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(cov / std::sqrt(vx * vy));
}

}  // namespace

TEST(PhotometricError, IdenticalIntensitiesAreZero) {
  CorrespondenceSet set{0, 1, {{0.3, 0.3, {1, 1}, {2, 2}}, {0.7, 0.7, {3, 3}, {4, 4}}}};
  EXPECT_DOUBLE_EQ(photometric_error(set, ParamChain(0), nullptr, CalibrationMode::Uncalibrated), 0.0);
}

TEST(PhotometricError, ModesUseTheirParameters) {
  ParamChain chain(0);
  chain.push_back({std::log(2.0), 0.1, 0, 1});
  // Frame 1 value v maps to 2v + 0.1 in reference units.
  CorrespondenceSet set{0, 1, {{0.5, 0.2, {0, 0}, {5, 0}}, {0.3, 0.1, {0, 1}, {5, 1}}}};
  EXPECT_NEAR(photometric_error(set, chain, nullptr, CalibrationMode::Uncalibrated), 100.0 * (0.3 + 0.2) / 2, 1e-12);
  EXPECT_NEAR(photometric_error(set, chain, nullptr, CalibrationMode::Temporal), 100.0 * (0.0 + 0.0) / 2, 1e-12);

  GridSpec grid{2, 1, 10, 2};
  auto field = SpatialField::zeros(grid);
  field.r = {0.0, 0.0};
  EXPECT_NEAR(photometric_error(set, chain, &field, CalibrationMode::TemporalSpatial), 0.0, 1e-12);
  EXPECT_THROW(photometric_error(set, chain, nullptr, CalibrationMode::TemporalSpatial), ContractViolation);
  EXPECT_THROW(photometric_error(CorrespondenceSet{0, 1, {}}, chain, nullptr, CalibrationMode::Temporal), MetricError);
  CorrespondenceSet missing{0, 1, {{NAN, 0.2, {0, 0}, {1, 1}}}};
  EXPECT_THROW(photometric_error(missing, chain, nullptr, CalibrationMode::Temporal), MetricError);
  CorrespondenceSet later{0, 4, set.pairs};
  EXPECT_THROW(photometric_error(later, chain, nullptr, CalibrationMode::Temporal), ContractViolation);
}

TEST(PhotometricDelta, HandValues) {
  ParamChain chain(0);
  chain.push_back(from_cb(1.1, 0.0, 1));
  chain.push_back(from_cb(1.0, 0.05, 2));
  chain.push_back(from_cb(1.0, 0.05, 3));
  EXPECT_NEAR(photometric_delta(chain, 2), std::sqrt(0.0125), 1e-12);
  EXPECT_NEAR(photometric_delta(chain, 2), 0.111803, 1e-6);
  EXPECT_DOUBLE_EQ(photometric_delta(chain, 3), 0.0);
  EXPECT_DOUBLE_EQ(photometric_delta(chain.at(1), chain.at(2)), photometric_delta(chain.at(2), chain.at(1)));
  EXPECT_THROW(photometric_delta(chain, 0), ContractViolation);
  EXPECT_THROW(photometric_delta(chain, 4), ContractViolation);
}

TEST(Pearson, ClosedForms) {
  const std::vector<double> xs{1, 2, 3, 4, 5};
  std::vector<double> up;
  std::vector<double> down;
  for (double x : xs) {
    up.push_back(2 * x + 1);
    down.push_back(-x);
  }
  EXPECT_NEAR(pearson(xs, up), 1.0, 1e-15);
  EXPECT_NEAR(pearson(xs, down), -1.0, 1e-15);
  EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}), 0.5, 1e-15);
}

TEST(Pearson, MatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(50);
    std::vector<double> y(50);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = g(rng) * 3 + 7;
      y[i] = 0.4 * x[i] + g(rng);
    }
    EXPECT_NEAR(pearson(x, y), brute_pearson(x, y), 1e-12);
  }
}

TEST(Pearson, Errors) {
  EXPECT_THROW(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), MetricError);
  EXPECT_THROW(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), ContractViolation);
  EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{1}), ContractViolation);
}

TEST(Pearson, FisherInterval) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(40);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = g(rng);
    y[i] = x[i] + g(rng);
  }
  const auto ci = pearson_ci(x, y);
  const double z = std::atanh(ci.r);
  const double half = 1.959963984540054 / std::sqrt(37.0);
  EXPECT_NEAR(ci.lower, std::tanh(z - half), 1e-9);
  EXPECT_NEAR(ci.upper, std::tanh(z + half), 1e-9);
  EXPECT_LT(ci.lower, ci.r);
  EXPECT_GT(ci.upper, ci.r);
  EXPECT_EQ(ci.n, 40u);
  const auto wide = pearson_ci(x, y, 0.99);
  EXPECT_LT(wide.lower, ci.lower);
  EXPECT_THROW(pearson_ci(std::vector<double>{1, 2, 3}, std::vector<double>{3, 1, 2}), MetricError);
}

TEST(Sweep, ThresholdsFilterSamples) {
  const std::vector<double> deltas{0.01, 0.02, 0.06, 0.08, 0.12, 0.2};
  const std::vector<double> improvements{1.0, 3.0, 2.0, 5.0, 4.0, 6.0};
  const std::vector<double> thresholds{0.0, 0.05, 0.15, 0.5};
  const auto sweep = threshold_sweep(deltas, improvements, thresholds);
  ASSERT_EQ(sweep.size(), 4u);
  EXPECT_EQ(sweep[0].n, 6u);
  EXPECT_NEAR(*sweep[0].rho, pearson(deltas, improvements), 1e-15);
  EXPECT_EQ(sweep[1].n, 4u);
  EXPECT_EQ(sweep[2].n, 1u);
  EXPECT_FALSE(sweep[2].rho.has_value());
  EXPECT_EQ(sweep[3].n, 0u);
  EXPECT_FALSE(sweep[3].rho.has_value());
}

TEST(Sweep, InjectedHighDeltaCorrelationStrengthens) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> uni(0.0, 0.25);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> deltas(600);
  std::vector<double> improvements(600);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    deltas[i] = uni(rng);
    // Below 0.05 the improvement is pure noise; above it tracks delta with
    // noise that shrinks as delta grows.
    const double d = deltas[i];
    const double e = g(rng);
    if (d < 0.05) {
      improvements[i] = 3.0 * e;
    } else {
      improvements[i] = 40.0 * d + (d < 0.10 ? 1.5 : d < 0.15 ? 0.5 : 0.05) * e;
    }
  }
  const auto sweep = threshold_sweep(deltas, improvements, kDefaultThresholds);
  ASSERT_EQ(sweep.size(), 4u);
  for (std::size_t k = 1; k < sweep.size(); ++k) {
    ASSERT_TRUE(sweep[k].rho.has_value());
    EXPECT_GT(std::abs(*sweep[k].rho), std::abs(*sweep[k - 1].rho));
    EXPECT_LT(sweep[k].n, sweep[k - 1].n);
  }
}

TEST(Evaluate, PoolsSetsPerFrame) {
  ParamChain chain(0);
  chain.push_back({0.0, 0.1, 0, 1});
  chain.push_back({0.0, 0.3, 0, 2});
  // Sets follow the chain exactly except for a constant 0.01 mismatch in one set.
  std::vector<CorrespondenceSet> sets;
  sets.push_back({0, 1, {{0.5, 0.4, {0, 0}, {0, 0}}, {0.6, 0.5, {1, 0}, {1, 0}}}});
  sets.push_back({0, 2, {{0.5, 0.2, {0, 0}, {0, 0}}}});
  sets.push_back({1, 2, {{0.4, 0.21, {0, 0}, {0, 0}}, {0.5, 0.31, {0, 0}, {0, 0}}, {0.6, 0.41, {0, 0}, {0, 0}}}});
  const auto report = evaluate(sets, chain, nullptr);
  ASSERT_EQ(report.frames.size(), 2u);
  EXPECT_EQ(report.frames[0].frame, 1);
  EXPECT_EQ(report.frames[1].pairs, 4u);
  EXPECT_NEAR(*report.frames[0].uncalibrated, 10.0, 1e-9);
  EXPECT_NEAR(*report.frames[0].temporal, 0.0, 1e-9);
  EXPECT_NEAR(*report.frames[1].uncalibrated, (30.0 + 3 * 19.0) / 4, 1e-9);
  EXPECT_NEAR(*report.frames[1].temporal, (0.0 + 3 * 1.0) / 4, 1e-9);
  EXPECT_FALSE(report.frames[0].temporal_spatial.has_value());
  EXPECT_NEAR(*report.frames[1].delta, 0.2 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(*report.mean_temporal, 0.375, 1e-9);
  EXPECT_FALSE(report.mean_temporal_spatial.has_value());
  EXPECT_EQ(report.sweep.size(), kDefaultThresholds.size());
}

TEST(Recovery, ComparesChains) {
  ParamChain a(0);
  ParamChain b(0);
  a.push_back({0.1, 0.0, 0, 1});
  b.push_back({0.0, 0.0, 0, 1});
  a.push_back({0.0, 0.2, 0, 2});
  b.push_back({0.0, 0.0, 0, 2});
  const auto rec = parameter_recovery(a, b);
  EXPECT_EQ(rec.frames, 3u);
  EXPECT_NEAR(rec.rmse_a, std::sqrt(0.01 / 3), 1e-15);
  EXPECT_NEAR(rec.rmse_b, std::sqrt(0.04 / 3), 1e-15);
  EXPECT_NEAR(rec.rmse_scale, std::sqrt((std::exp(0.1) - 1) * (std::exp(0.1) - 1) / 3), 1e-15);
  EXPECT_FALSE(rec.field_rmse.has_value());
}

TEST(Recovery, FieldComparisonIsMeanAligned) {
  GridSpec grid{2, 2, 4, 4};
  auto field = SpatialField::zeros(grid);
  field.r = {0.1, 0.2, 0.3, 0.0};
  field.source = {CellSource::Solved, CellSource::Solved, CellSource::Gp, CellSource::Unsolved};
  const std::vector<double> truth{1.1, 1.2, 1.3, 9.0};
  const auto rec = parameter_recovery(ParamChain(0), ParamChain(0), &field, &truth);
  ASSERT_TRUE(rec.field_rmse.has_value());
  EXPECT_NEAR(*rec.field_rmse, 0.0, 1e-12);
}

TEST(Report, Writers) {
  ParamChain chain(0);
  chain.push_back({0.0, 0.1, 0, 1});
  std::vector<CorrespondenceSet> sets{{0, 1, {{0.5, 0.4, {0, 0}, {0, 0}}}}};
  auto report = evaluate(sets, chain, nullptr);
  std::ostringstream js;
  write_report_json(js, report);
  const auto doc = nlohmann::json::parse(js.str());
  EXPECT_TRUE(doc.contains("summary"));
  EXPECT_TRUE(doc.at("recovery").is_null());
  EXPECT_EQ(doc.at("frames").size(), 1u);
  std::ostringstream csv;
  write_report_csv(csv, report);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "frame,pairs,uncalibrated,temporal,temporal_spatial,delta");
  std::ostringstream text;
  write_report_summary(text, report);
  EXPECT_FALSE(text.str().empty());
}
