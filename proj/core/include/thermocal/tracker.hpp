// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#pragma once

#include <span>
#include <vector>

#include "thermocal/correspondence.hpp"
#include "thermocal/image.hpp"

namespace thermocal {

struct TrackerConfig {
  int max_features = 400;
  int pyramid_levels = 3;
  int window_radius = 7;
  /// Minimum eigenvalue of the per-pixel averaged structure tensor, as a
  /// fraction of the frame's intensity variance. Relative so that detection
  /// does not collapse when AGC compresses the contrast.
  double min_eigen_threshold = 2e-3;
  /// Upper bound on the final mean squared window residual. With normalized
  /// windows this equals 2 (1 - NCC).
  double max_track_error = 0.3;
  /// Detection keeps at most one feature per cell of a grid_cells^2 grid.
  int grid_cells = 20;
  int max_iterations = 30;
  double epsilon = 0.01;
  /// Compare windows after zero-mean / unit-variance normalization, which
  /// makes tracking invariant to global affine intensity changes.
  bool normalize_windows = true;

  void validate() const;
};

/// Gaussian image pyramid; level 0 is the input.
class Pyramid {
 public:
  Pyramid(const Image& image, int levels);
  int levels() const { return static_cast<int>(levels_.size()); }
  const Image& level(int i) const { return levels_[i]; }

 private:
  std::vector<Image> levels_;
};

/// Shi-Tomasi corners: local maxima of the minimum eigenvalue above the
/// threshold, best per occupancy cell, strongest first, at most max_features.
std::vector<Pixel> detect_features(const Image& image, const TrackerConfig& cfg);
inline std::vector<Pixel> detect_features(const Frame& frame, const TrackerConfig& cfg) {
  return detect_features(frame.image, cfg);
}

struct PointTrack {
  Pixel position;
  double error = 0.0;
  bool ok = false;
};

/// Pyramidal Lucas-Kanade for every point; one result per input point.
std::vector<PointTrack> track_points(const Pyramid& prev, const Pyramid& next, std::span<const Pixel> points,
                                     const TrackerConfig& cfg);

struct TrackResult {
  CorrespondenceSet set;
  /// Index into the input points for every surviving pair.
  std::vector<std::size_t> source;
  std::size_t dropped = 0;
};

/// Tracks `points` from prev into next. Lost points are dropped; surviving
/// pairs carry bilinearly sampled intensities at both ends.
TrackResult track(const Frame& prev, const Frame& next, std::span<const Pixel> points, const TrackerConfig& cfg);

}  // namespace thermocal
