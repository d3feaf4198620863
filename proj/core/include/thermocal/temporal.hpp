// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "thermocal/correspondence.hpp"
#include "thermocal/photo_model.hpp"

namespace thermocal {

/// Minimum spread of from-intensities for a fit to be considered well posed.
inline constexpr double kDegeneracyEpsilon = 1e-4;

struct RansacConfig {
  /// A candidate model needs exactly two correspondences.
  static constexpr int kSampleSize = 2;

  int max_iterations = 200;
  double inlier_threshold = 0.02;
  int min_inliers = 5;
  /// Stop sampling once this fraction of the set agrees with a hypothesis.
  double early_exit_ratio = 0.99;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct PairEstimate {
  RelativeParams params;
  std::size_t inlier_count = 0;
  double residual_rms = 0.0;
  std::vector<bool> inliers;
};

/// Intensity observed in the from-frame and in the to-frame.
struct IntensityPair {
  double from = 0.0;
  double to = 0.0;
};

/// Exact two-point solution of to = (from - b) / e^a. Returns nullopt for a
/// degenerate sample (from-intensities closer than kDegeneracyEpsilon, equal
/// to-intensities, or a non-positive scale); the caller resamples.
std::optional<RelativeParams> fit_pair_exact(IntensityPair p1, IntensityPair p2);

/// Least-squares fit of to = (from - b) / e^a over the pairs selected by
/// `mask` (all pairs when empty). Throws EstimationError::DegenerateSet for
/// fewer than two pairs or a from-intensity spread below kDegeneracyEpsilon,
/// and EstimationError::InvalidScale when the fitted slope is not positive.
RelativeParams fit_pair_lsq(std::span<const CorrespondencePair> pairs, std::span<const bool> mask = {});
RelativeParams fit_pair_lsq(std::span<const CorrespondencePair> pairs, const std::vector<bool>& mask);

/// Hypothesize-and-verify estimate for one correspondence set. The sampler is
/// seeded from (from, to) and cfg.rng_seed, so results do not depend on the
/// order in which sets are processed. Throws EstimationError::EstimationFailed
/// when the best consensus has fewer than cfg.min_inliers members and
/// ContractViolation for fewer than two pairs.
PairEstimate ransac_estimate(const CorrespondenceSet& set, const RansacConfig& cfg);

struct SetOutcome {
  FrameIndex from = 0;
  std::size_t pairs = 0;
  bool ok = false;
  /// (t-1) -> t params implied by this set; meaningful when ok.
  RelativeParams step;
  std::size_t inlier_count = 0;
};

struct FrameUpdate {
  FrameIndex frame = 0;
  /// Fused (t-1) -> t estimate before drift adjustment.
  RelativeParams step;
  /// Entry appended to the chain.
  RelativeParams entry;
  bool tracked = false;
  std::vector<SetOutcome> sets;
};

/// Estimates frame `frame` from every correspondence set ending there and
/// appends its 1-referenced entry to `chain`.
///
/// Each set is estimated independently (concurrently when there is more than
/// one), re-referenced to the (t-1) -> t basis and averaged on (a, b) with
/// weights equal to the set sizes. The composed entry is then passed through
/// adjust_for_drift. Sets whose from-frame is not in the chain, that are too
/// small, or that fail estimation get zero weight; if none survive the
/// identity step is appended, no drift adjustment is applied and the frame is
/// reported untracked.
FrameUpdate process_frame(FrameIndex frame, std::span<const CorrespondenceSet> sets, ParamChain& chain,
                          const RansacConfig& ransac, const DriftConfig& drift);

}  // namespace thermocal
