// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#include "thermocal/temporal.hpp"

#include <cmath>
#include <future>
#include <memory>
#include <random>

#include "thermocal/errors.hpp"

namespace thermocal {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t set_seed(FrameIndex from, FrameIndex to, std::uint64_t global) {
  const std::uint64_t key = splitmix64(static_cast<std::uint64_t>(from)) ^
                            splitmix64(static_cast<std::uint64_t>(to) + 0x632be59bd9b4e019ULL);
  return key ^ global;
}

double residual(const RelativeParams& p, const CorrespondencePair& pair) {
  return pair.i_to - apply_forward(p, pair.i_from);
}

}  // namespace

void RansacConfig::validate() const {
  if (max_iterations < 1) throw ConfigError("ransac.max_iterations must be >= 1");
  if (!(inlier_threshold > 0.0)) throw ConfigError("ransac.inlier_threshold must be positive");
  if (min_inliers < kSampleSize) throw ConfigError("ransac.min_inliers must be >= 2");
  if (!(early_exit_ratio > 0.0 && early_exit_ratio <= 1.0)) throw ConfigError("ransac.early_exit_ratio must lie in (0,1]");
}

std::optional<RelativeParams> fit_pair_exact(IntensityPair p1, IntensityPair p2) {
  const double d_from = p1.from - p2.from;
  const double d_to = p1.to - p2.to;
  if (std::abs(d_from) <= kDegeneracyEpsilon || d_to == 0.0) return std::nullopt;
  const double scale = d_from / d_to;
  if (!(scale > 0.0) || !std::isfinite(scale)) return std::nullopt;
  return RelativeParams{std::log(scale), p1.from - scale * p1.to, 0, 0};
}

RelativeParams fit_pair_lsq(std::span<const CorrespondencePair> pairs, std::span<const bool> mask) {
  if (!mask.empty() && mask.size() != pairs.size()) throw ContractViolation("fit_pair_lsq: mask size mismatch");
  auto selected = [&](std::size_t i) { return mask.empty() || mask[i]; };

  std::size_t n = 0;
  double mean_f = 0.0;
  double mean_t = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!selected(i)) continue;
    ++n;
    mean_f += pairs[i].i_from;
    mean_t += pairs[i].i_to;
  }
  if (n < 2) throw EstimationError(EstimationError::Kind::DegenerateSet, "fewer than two correspondences");
  mean_f /= static_cast<double>(n);
  mean_t /= static_cast<double>(n);

  double sff = 0.0;
  double sft = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!selected(i)) continue;
    const double df = pairs[i].i_from - mean_f;
    sff += df * df;
    sft += df * (pairs[i].i_to - mean_t);
  }
  if (std::sqrt(sff / static_cast<double>(n)) <= kDegeneracyEpsilon) {
    throw EstimationError(EstimationError::Kind::DegenerateSet, "from-intensities have no spread");
  }
  // to = u * from + v with u = e^-a, v = -b e^-a.
  const double u = sft / sff;
  const double v = mean_t - u * mean_f;
  if (!(u > 0.0)) throw EstimationError(EstimationError::Kind::InvalidScale, "non-positive intensity scale");
  return {-std::log(u), -v / u, 0, 0};
}

RelativeParams fit_pair_lsq(std::span<const CorrespondencePair> pairs, const std::vector<bool>& mask) {
  // std::vector<bool> is packed; unpack into contiguous storage.
  std::unique_ptr<bool[]> flags(new bool[mask.size()]);
  for (std::size_t i = 0; i < mask.size(); ++i) flags[i] = mask[i];
  return fit_pair_lsq(pairs, std::span<const bool>(flags.get(), mask.size()));
}

PairEstimate ransac_estimate(const CorrespondenceSet& set, const RansacConfig& cfg) {
  const auto& pairs = set.pairs;
  const std::size_t n = pairs.size();
  if (n < static_cast<std::size_t>(RansacConfig::kSampleSize)) {
    throw ContractViolation("ransac_estimate needs at least two correspondences");
  }

  std::mt19937_64 rng(set_seed(set.from, set.to, cfg.rng_seed));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_int_distribution<std::size_t> pick_other(0, n - 2);

  const auto enough = static_cast<std::size_t>(std::ceil(cfg.early_exit_ratio * static_cast<double>(n)));
  std::size_t best_count = 0;
  double best_cost = 0.0;
  RelativeParams best;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    const std::size_t i = pick(rng);
    std::size_t j = pick_other(rng);
    if (j >= i) ++j;
    const auto candidate =
        fit_pair_exact({pairs[i].i_from, pairs[i].i_to}, {pairs[j].i_from, pairs[j].i_to});
    if (!candidate) continue;

    std::size_t count = 0;
    double cost = 0.0;
    for (const auto& pair : pairs) {
      const double r = std::abs(residual(*candidate, pair));
      if (r < cfg.inlier_threshold) {
        ++count;
        cost += r;
      }
    }
    if (count > best_count || (count == best_count && count > 0 && cost < best_cost)) {
      best_count = count;
      best_cost = cost;
      best = *candidate;
    }
    if (best_count >= enough) break;
  }

  if (best_count < static_cast<std::size_t>(cfg.min_inliers)) {
    throw EstimationError(EstimationError::Kind::EstimationFailed,
                          "consensus of " + std::to_string(best_count) + " below min_inliers for set " +
                              std::to_string(set.from) + "->" + std::to_string(set.to));
  }

  PairEstimate estimate;
  estimate.inliers.assign(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    estimate.inliers[k] = std::abs(residual(best, pairs[k])) < cfg.inlier_threshold;
  }
  estimate.inlier_count = best_count;
  estimate.params = fit_pair_lsq(pairs, estimate.inliers);
  estimate.params.from = set.from;
  estimate.params.to = set.to;

  double ss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!estimate.inliers[k]) continue;
    const double r = residual(estimate.params, pairs[k]);
    ss += r * r;
  }
  estimate.residual_rms = std::sqrt(ss / static_cast<double>(best_count));
  return estimate;
}

FrameUpdate process_frame(FrameIndex frame, std::span<const CorrespondenceSet> sets, ParamChain& chain,
                          const RansacConfig& ransac, const DriftConfig& drift) {
  if (chain.empty()) throw ContractViolation("process_frame needs a chain with a reference frame");
  const FrameIndex prev = chain.last_frame();
  if (frame <= prev) throw ContractViolation("process_frame: frame " + std::to_string(frame) + " already in chain");

  FrameUpdate update;
  update.frame = frame;
  update.sets.resize(sets.size());

  auto estimate_one = [&](std::size_t k) {
    const auto& set = sets[k];
    SetOutcome outcome;
    outcome.from = set.from;
    outcome.pairs = set.size();
    if (set.to != frame) throw ContractViolation("correspondence set does not end at frame " + std::to_string(frame));
    if (!chain.contains(set.from) || set.size() < static_cast<std::size_t>(RansacConfig::kSampleSize)) {
      return outcome;
    }
    try {
      const auto estimate = ransac_estimate(set, ransac);
      outcome.step = change_ref(estimate.params, chain.at(set.from), chain.at(prev));
      outcome.inlier_count = estimate.inlier_count;
      outcome.ok = true;
    } catch (const EstimationError&) {
      outcome.ok = false;
    }
    return outcome;
  };

  if (sets.size() > 1) {
    std::vector<std::future<SetOutcome>> jobs;
    jobs.reserve(sets.size());
    for (std::size_t k = 0; k < sets.size(); ++k) jobs.push_back(std::async(std::launch::async, estimate_one, k));
    for (std::size_t k = 0; k < sets.size(); ++k) update.sets[k] = jobs[k].get();
  } else if (sets.size() == 1) {
    update.sets[0] = estimate_one(0);
  }

  // Reduction in input order keeps the result independent of scheduling.
  double sum_a = 0.0;
  double sum_b = 0.0;
  double total = 0.0;
  for (const auto& outcome : update.sets) {
    if (!outcome.ok) continue;
    const auto weight = static_cast<double>(outcome.pairs);
    sum_a += outcome.step.a * weight;
    sum_b += outcome.step.b * weight;
    total += weight;
  }

  if (total > 0.0) {
    update.tracked = true;
    update.step = {sum_a / total, sum_b / total, prev, frame};
    update.entry = adjust_for_drift(compose(chain.at(prev), update.step), drift);
  } else {
    update.tracked = false;
    update.step = {0.0, 0.0, prev, frame};
    update.entry = compose(chain.at(prev), update.step);
  }
  chain.push_back(update.entry);
  return update;
}

}  // namespace thermocal
