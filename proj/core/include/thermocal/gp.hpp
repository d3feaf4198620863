// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "thermocal/correspondence.hpp"
#include "thermocal/spatial.hpp"

namespace thermocal {

struct GpConfig {
  double length_scale = 64.0;       // pixels
  double signal_variance = 0.0025;  // sigma_f = 0.05
  double noise_variance = 2.5e-5;   // sigma_n = 0.005
  std::size_t max_training_points = 1024;
  std::uint64_t seed = 0;

  /// Defaults with the length scale at a quarter of the image width.
  static GpConfig for_width(int width);
  void validate() const;
};

struct GpSample {
  Pixel at;
  double value = 0.0;
};

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
  /// Magnitude of negative roundoff clipped off the variance.
  double variance_clip = 0.0;
};

/// Zero-mean GP with k(p,q) = sf2 exp(-|p-q|^2 / (2 l^2)).
class GpModel {
 public:
  /// Factorizes K + sn2 I. If the Cholesky factorization fails the noise
  /// variance is raised tenfold and the fit retried once; a second failure
  /// throws NumericalError. Throws ContractViolation for an empty or
  /// non-finite training set. Training sets above max_training_points are
  /// subsampled with a fixed seed.
  static GpModel fit(std::span<const GpSample> points, const GpConfig& cfg);

  GpPrediction predict(Pixel query) const;
  /// Mean only; skips the O(n^2) variance solve.
  double predict_mean(Pixel query) const;

  double kernel(Pixel p, Pixel q) const;
  std::size_t training_size() const { return static_cast<std::size_t>(inputs_.rows()); }
  double noise_variance() const { return noise_variance_; }

 private:
  GpConfig cfg_;
  double noise_variance_ = 0.0;
  Eigen::MatrixX2d inputs_;
  Eigen::LLT<Eigen::MatrixXd> factor_;
  Eigen::VectorXd alpha_;
};

/// Fills every unsolved cell of `field` with the GP posterior mean trained on
/// its solved cells (cell centers in pixels). Solved cells are unchanged;
/// filled cells are marked CellSource::Gp. A field without solved cells is
/// returned as is.
SpatialField complete_field(const SpatialField& field, const GpConfig& cfg);

}  // namespace thermocal
