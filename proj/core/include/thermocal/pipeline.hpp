// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#pragma once

#include <cstdint>
#include <filesystem>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "thermocal/correspondence.hpp"
#include "thermocal/gp.hpp"
#include "thermocal/image.hpp"
#include "thermocal/metrics.hpp"
#include "thermocal/photo_model.hpp"
#include "thermocal/spatial.hpp"
#include "thermocal/temporal.hpp"
#include "thermocal/tracker.hpp"

namespace thermocal {

enum class OutputMode { Gray, Clamp, Palette };
enum class CorrespondenceSource { Tracker, External };

OutputMode parse_output_mode(const std::string& text);
const char* to_string(OutputMode mode);

struct PipelineConfig {
  TrackerConfig tracker;
  RansacConfig ransac;
  DriftConfig drift;
  int cells_x = 32;
  int cells_y = 32;
  ConstraintOptions constraints;
  bool spatial_enabled = true;
  /// Solve the spatial field after every `spatial_cadence` frames and at the end.
  int spatial_cadence = 50;
  bool gp_enabled = true;
  /// Unset length scale means a quarter of the image width.
  std::optional<double> gp_length_scale;
  double gp_signal_variance = 0.0025;
  double gp_noise_variance = 2.5e-5;
  std::size_t gp_max_training_points = 1024;
  OutputMode output_mode = OutputMode::Gray;
  CorrespondenceSource source = CorrespondenceSource::Tracker;
  std::filesystem::path correspondences;
  /// Correspondence sets are kept from the last `window` frames.
  int window = 5;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the field.
  void validate() const;
  GridSpec grid(ImageSize size) const;
  GpConfig gp(ImageSize size) const;
};

/// JSON document; unknown keys are rejected with ConfigError.
PipelineConfig parse_pipeline_config(const std::string& json_text);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
std::string dump_pipeline_config(const PipelineConfig& cfg);

struct FrameResult {
  FrameIndex frame = 0;
  FrameUpdate update;
  /// Calibrated intensities before the output mapping.
  Image calibrated;
  /// Correspondences into this frame that were used for estimation.
  std::vector<CorrespondenceSet> sets;
  double track_ms = 0.0;
  double temporal_ms = 0.0;
};

/// Online calibrator. Frames are pushed in order; the output for frame t
/// depends only on frames <= t. The spatial solve runs on a background
/// thread and is joined before the next frame is calibrated.
class Calibrator {
 public:
  Calibrator(PipelineConfig cfg, ImageSize size);
  ~Calibrator();
  Calibrator(const Calibrator&) = delete;
  Calibrator& operator=(const Calibrator&) = delete;

  /// `external` holds sets ending in this frame; ignored in tracker mode.
  FrameResult push_frame(const Image& image, std::vector<CorrespondenceSet> external = {});
  /// Joins any pending solve and runs a final one over all constraints.
  void finish();

  const ParamChain& chain() const { return chain_; }
  const SpatialField& field();
  const std::vector<FrameIndex>& untracked() const { return untracked_; }
  const std::vector<double>& solve_ms() const { return solve_ms_; }
  FrameIndex frames() const { return next_frame_; }
  const PipelineConfig& config() const { return cfg_; }

  std::vector<std::uint8_t> render_gray(const Image& calibrated) const;
  std::vector<std::uint8_t> render_palette(const Image& calibrated) const;

 private:
  struct Track {
    FrameIndex origin = 0;
    Pixel origin_pos;
    double origin_intensity = 0.0;
    Pixel pos;
  };
  struct Solve {
    SpatialField field;
    double ms = 0.0;
  };

  std::vector<CorrespondenceSet> tracked_sets(const Image& image, FrameIndex t);
  void join_solve();
  Solve run_solve(std::vector<DifferenceConstraint> constraints) const;

  PipelineConfig cfg_;
  ImageSize size_;
  GridSpec grid_;
  GpConfig gp_;
  ParamChain chain_;
  ConstraintAccumulator accumulator_;
  SpatialField field_;
  std::future<Solve> pending_;
  std::vector<double> solve_ms_;
  std::vector<FrameIndex> untracked_;
  FrameIndex next_frame_ = 0;
  std::size_t observations_at_solve_ = 0;

  std::optional<Pyramid> prev_pyramid_;
  std::vector<Track> tracks_;
  std::vector<Image> history_;
};

struct CalibrateSummary {
  std::size_t frames = 0;
  std::size_t untracked = 0;
  double mean_temporal_ms = 0.0;
  double max_temporal_ms = 0.0;
  double mean_solve_ms = 0.0;
};

/// Reads the PGM frames of `input` in lexicographic order and writes
/// frames/, chain.jsonl, chain.csv, spatial_field.json, spatial_field.pgm,
/// correspondences.csv, untracked.txt and timing.json into `output`.
CalibrateSummary cmd_calibrate(const std::filesystem::path& input, const PipelineConfig& cfg,
                               const std::filesystem::path& output);

struct SynthSummary {
  std::size_t frames = 0;
  std::size_t correspondences = 0;
};

/// Renders a scene file into frames/frame_NNNNNN.pgm, truth.json and
/// correspondences.csv (exact intensities, outliers included).
SynthSummary cmd_synth(const std::filesystem::path& scene, std::uint64_t seed, const std::filesystem::path& output);

/// Evaluates a calibrate output directory. `truth` may be a truth.json file
/// or a directory containing one. Writes report.json and report.csv.
EvalReport cmd_eval(const std::filesystem::path& calibration, const std::optional<std::filesystem::path>& truth,
                    const std::filesystem::path& output);

}  // namespace thermocal
