// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "thermocal/correspondence.hpp"
#include "thermocal/image.hpp"
#include "thermocal/photo_model.hpp"

namespace thermocal {

/// Radiance added to a scene-space rectangle for frames [first, last].
struct HotEvent {
  FrameIndex first = 0;
  FrameIndex last = 0;
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  double radiance = 0.0;
};

struct GaussianBump {
  double x = 0.0;
  double y = 0.0;
  double sigma = 1.0;
  double amplitude = 0.0;
};

enum class AgcMode { MinMax, Percentile };

/// Offset of the viewport origin in scene (radiance map) coordinates. A scene
/// point at s appears at pixel s - offset, so increasing the offset moves the
/// content toward smaller pixel coordinates.
using Offset = std::array<int, 2>;

struct SceneSpec {
  Image radiance;
  int width = 0;
  int height = 0;
  /// One entry per frame; the sequence length.
  std::vector<Offset> motion;
  std::vector<HotEvent> hot_events;
  /// Per-viewport-pixel bias r_x; empty means zero.
  Image spatial_field;
  double noise_sigma = 0.0;
  double outlier_fraction = 0.0;
  AgcMode agc = AgcMode::MinMax;
  /// Lower/upper tail fraction for AgcMode::Percentile.
  double percentile = 0.01;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Smooth procedural texture in [0,1]: octaves of bilinearly smoothed
/// lattice noise, the first with lattice spacing `period`.
Image value_noise(int width, int height, std::uint64_t seed, int octaves = 4, double period = 32.0);
/// Sum of isotropic Gaussians evaluated on the pixel grid.
Image gaussian_field(int width, int height, const std::vector<GaussianBump>& bumps);

struct GroundTruth {
  /// Per frame, parameters relative to the hypothetical unit frame:
  /// e^a = max - min, b = min of the raw viewport response.
  std::vector<RelativeParams> absolute;
  Image spatial_field;
  std::vector<Offset> motion;
  std::uint64_t seed = 0;

  std::size_t frames() const { return absolute.size(); }
  /// Transfer from frame i to frame j.
  RelativeParams relative(FrameIndex i, FrameIndex j) const;
  /// Entries relative to frame 0, in the layout the estimator produces.
  ParamChain chain() const;
  /// Bias in reference-frame units (r / e^{a_0}), the gauge the estimator recovers.
  double reference_bias(int x, int y) const;
};

struct Sequence {
  std::vector<Frame> frames;
  GroundTruth truth;
};

/// Renders I'_{x,t} = (I_x + hot_t + r_x - min_t) / (max_t - min_t) + noise,
/// clamped to [0,1]. Frame t uses the viewport at motion[t]. Throws DataError
/// when a frame has no radiance range.
Sequence render_sequence(const SceneSpec& spec, std::uint64_t seed);

struct TruthCorrespondences {
  CorrespondenceSet set;
  /// True for pairs whose to-pixel was displaced to a wrong location.
  std::vector<bool> perturbed;
};

/// `n` distinct integer pixels of frame i whose scene point is also visible
/// in frame j, with intensities read from the rendered frames. Exactly
/// round(outlier_fraction * returned) pairs are perturbed by moving the
/// to-pixel to a random other location. Fewer than n pairs are returned when
/// the overlap is smaller than n.
TruthCorrespondences truth_correspondences(const SceneSpec& spec, const Sequence& seq, FrameIndex i, FrameIndex j,
                                           std::size_t n, std::uint64_t seed);

/// All sets into each frame from the previous `window` frames.
std::vector<CorrespondenceSet> truth_correspondence_window(const SceneSpec& spec, const Sequence& seq,
                                                           std::size_t pairs, int window, std::uint64_t seed);

/// Parsed scene description file (JSON) with generation settings.
struct SceneFile {
  SceneSpec spec;
  std::size_t pairs_per_set = 500;
  int window = 5;
  /// Canonical echo of the parsed description, embedded in the ground truth.
  std::string echo;
};

/// Throws ConfigError naming the invalid or unknown field.
SceneFile parse_scene(const std::string& json_text, std::uint64_t seed,
                      const std::filesystem::path& base_dir = {});
SceneFile load_scene(const std::filesystem::path& path, std::uint64_t seed);

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth, const std::string& echo);
GroundTruth read_ground_truth(const std::filesystem::path& path);

}  // namespace thermocal
