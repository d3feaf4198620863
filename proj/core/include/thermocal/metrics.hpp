// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "thermocal/correspondence.hpp"
#include "thermocal/photo_model.hpp"
#include "thermocal/spatial.hpp"

namespace thermocal {

enum class CalibrationMode { Uncalibrated, Temporal, TemporalSpatial };

const char* to_string(CalibrationMode mode);

/// Mean of 100 * |corrected_to - corrected_from| over the pairs of `set`.
/// Temporal mode uses the chain entries with zero bias, TemporalSpatial adds
/// `field` (required). Throws MetricError on an empty set or missing
/// intensities, ContractViolation when the mode's parameters are unavailable.
double photometric_error(const CorrespondenceSet& set, const ParamChain& chain, const SpatialField* field,
                         CalibrationMode mode);

/// sqrt((c_{t-1} - c_t)^2 + (b_{t-1} - b_t)^2) on chain entries.
double photometric_delta(const ParamChain& chain, FrameIndex t);
double photometric_delta(const RelativeParams& p, const RelativeParams& q);

/// Sample Pearson correlation. MetricError when either series is constant.
double pearson(std::span<const double> xs, std::span<const double> ys);

struct PearsonInterval {
  double r = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t n = 0;
};

/// Fisher z interval; needs at least 4 samples.
PearsonInterval pearson_ci(std::span<const double> xs, std::span<const double> ys, double confidence = 0.95);

struct SweepEntry {
  double threshold = 0.0;
  std::optional<double> rho;  // empty when fewer than 2 survivors or no variance
  std::optional<double> rho_lower;
  std::optional<double> rho_upper;
  std::size_t n = 0;
};

/// Pearson over the samples with delta >= threshold, per threshold.
std::vector<SweepEntry> threshold_sweep(std::span<const double> deltas, std::span<const double> improvements,
                                        std::span<const double> thresholds);

struct FrameEval {
  FrameIndex frame = 0;
  std::size_t pairs = 0;
  std::optional<double> uncalibrated;
  std::optional<double> temporal;
  std::optional<double> temporal_spatial;
  std::optional<double> delta;
};

struct ParameterRecovery {
  std::size_t frames = 0;
  double rmse_a = 0.0;
  double rmse_b = 0.0;
  double rmse_scale = 0.0;
  std::optional<double> field_rmse;
};

struct EvalReport {
  std::vector<FrameEval> frames;
  std::vector<SweepEntry> sweep;
  std::optional<double> mean_uncalibrated;
  std::optional<double> mean_temporal;
  std::optional<double> mean_temporal_spatial;
  std::optional<ParameterRecovery> recovery;
};

inline const std::vector<double> kDefaultThresholds{0.0, 0.05, 0.10, 0.15};

/// Per-frame errors pool every set ending in that frame. The sweep correlates
/// delta with the per-frame improvement (uncalibrated minus the best
/// available calibrated error).
EvalReport evaluate(std::span<const CorrespondenceSet> sets, const ParamChain& chain, const SpatialField* field,
                    std::span<const double> thresholds = kDefaultThresholds);

/// Compares the chain with the true chain over the frames both contain. The
/// field comparison (per cell, mean aligned, non-empty cells only) runs when
/// both `field` and `truth_cell_bias` are given.
ParameterRecovery parameter_recovery(const ParamChain& chain, const ParamChain& truth,
                                     const SpatialField* field = nullptr,
                                     const std::vector<double>* truth_cell_bias = nullptr);

void write_report_json(std::ostream& out, const EvalReport& report);
void write_report_csv(std::ostream& out, const EvalReport& report);
void write_report_summary(std::ostream& out, const EvalReport& report);

}  // namespace thermocal
