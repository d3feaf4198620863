// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#include "thermocal/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "json_fields.hpp"
#include "thermocal/errors.hpp"
#include "thermocal/param_io.hpp"
#include "thermocal/synth.hpp"

namespace thermocal {

namespace fs = std::filesystem;
using nlohmann::json;
using detail::check_keys;
using detail::field;
using detail::field_or;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw DataError("missing " + path.string());
}

}  // namespace

OutputMode parse_output_mode(const std::string& text) {
  if (text == "gray") return OutputMode::Gray;
  if (text == "clamp") return OutputMode::Clamp;
  if (text == "palette") return OutputMode::Palette;
  throw ConfigError("output_mode: expected gray, clamp or palette, got '" + text + "'");
}

const char* to_string(OutputMode mode) {
  switch (mode) {
    case OutputMode::Gray:
      return "gray";
    case OutputMode::Clamp:
      return "clamp";
    case OutputMode::Palette:
      return "palette";
  }
  return "gray";
}

void PipelineConfig::validate() const {
  tracker.validate();
  ransac.validate();
  drift.validate();
  if (cells_x < 1) throw ConfigError("grid.cells_x: must be >= 1");
  if (cells_y < 1) throw ConfigError("grid.cells_y: must be >= 1");
  if (!(constraints.max_abs_rhs > 0.0)) throw ConfigError("spatial.max_abs_rhs: must be positive");
  if (spatial_cadence < 1) throw ConfigError("spatial.cadence: must be >= 1");
  if (gp_length_scale && !(*gp_length_scale > 0.0)) throw ConfigError("gp.length_scale: must be positive");
  if (!(gp_signal_variance > 0.0)) throw ConfigError("gp.signal_variance: must be positive");
  if (!(gp_noise_variance > 0.0)) throw ConfigError("gp.noise_variance: must be positive");
  if (gp_max_training_points < 1) throw ConfigError("gp.max_training_points: must be >= 1");
  if (window < 1) throw ConfigError("window: must be >= 1");
}

GridSpec PipelineConfig::grid(ImageSize size) const {
  GridSpec g{cells_x, cells_y, size.width, size.height};
  g.validate();
  return g;
}

GpConfig PipelineConfig::gp(ImageSize size) const {
  GpConfig g = GpConfig::for_width(size.width);
  if (gp_length_scale) g.length_scale = *gp_length_scale;
  g.signal_variance = gp_signal_variance;
  g.noise_variance = gp_noise_variance;
  g.max_training_points = gp_max_training_points;
  g.seed = seed;
  g.validate();
  return g;
}

PipelineConfig parse_pipeline_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  check_keys(doc, "", {"seed", "window", "output_mode", "correspondences", "tracker", "ransac", "drift", "grid",
                       "spatial", "gp"});
  PipelineConfig cfg;
  cfg.seed = field_or<std::uint64_t>(doc, "", "seed", cfg.seed);
  cfg.window = field_or<int>(doc, "", "window", cfg.window);
  cfg.output_mode = parse_output_mode(field_or<std::string>(doc, "", "output_mode", to_string(cfg.output_mode)));

  if (doc.contains("correspondences")) {
    const auto& c = doc.at("correspondences");
    check_keys(c, "correspondences", {"source", "path"});
    const auto source = field_or<std::string>(c, "correspondences", "source", "tracker");
    if (source == "tracker") {
      cfg.source = CorrespondenceSource::Tracker;
    } else if (source == "external") {
      cfg.source = CorrespondenceSource::External;
    } else {
      throw ConfigError("correspondences.source: expected tracker or external");
    }
    cfg.correspondences = field_or<std::string>(c, "correspondences", "path", "");
  }

  if (doc.contains("tracker")) {
    const auto& t = doc.at("tracker");
    const std::string w = "tracker";
    check_keys(t, w, {"max_features", "pyramid_levels", "window_radius", "min_eigen_threshold", "max_track_error",
                      "grid_cells", "max_iterations", "epsilon", "normalize_windows"});
    auto& k = cfg.tracker;
    k.max_features = field_or(t, w, "max_features", k.max_features);
    k.pyramid_levels = field_or(t, w, "pyramid_levels", k.pyramid_levels);
    k.window_radius = field_or(t, w, "window_radius", k.window_radius);
    k.min_eigen_threshold = field_or(t, w, "min_eigen_threshold", k.min_eigen_threshold);
    k.max_track_error = field_or(t, w, "max_track_error", k.max_track_error);
    k.grid_cells = field_or(t, w, "grid_cells", k.grid_cells);
    k.max_iterations = field_or(t, w, "max_iterations", k.max_iterations);
    k.epsilon = field_or(t, w, "epsilon", k.epsilon);
    k.normalize_windows = field_or(t, w, "normalize_windows", k.normalize_windows);
  }
  if (doc.contains("ransac")) {
    const auto& r = doc.at("ransac");
    const std::string w = "ransac";
    check_keys(r, w, {"max_iterations", "inlier_threshold", "min_inliers", "early_exit_ratio"});
    auto& k = cfg.ransac;
    k.max_iterations = field_or(r, w, "max_iterations", k.max_iterations);
    k.inlier_threshold = field_or(r, w, "inlier_threshold", k.inlier_threshold);
    k.min_inliers = field_or(r, w, "min_inliers", k.min_inliers);
    k.early_exit_ratio = field_or(r, w, "early_exit_ratio", k.early_exit_ratio);
  }
  if (doc.contains("drift")) {
    const auto& d = doc.at("drift");
    const std::string w = "drift";
    check_keys(d, w, {"xi_gap", "xi_base", "gap_floor"});
    cfg.drift.xi_gap = field_or(d, w, "xi_gap", cfg.drift.xi_gap);
    cfg.drift.xi_base = field_or(d, w, "xi_base", cfg.drift.xi_base);
    cfg.drift.gap_floor = field_or(d, w, "gap_floor", cfg.drift.gap_floor);
  }
  if (doc.contains("grid")) {
    const auto& g = doc.at("grid");
    check_keys(g, "grid", {"cells_x", "cells_y"});
    cfg.cells_x = field_or(g, "grid", "cells_x", cfg.cells_x);
    cfg.cells_y = field_or(g, "grid", "cells_y", cfg.cells_y);
  }
  if (doc.contains("spatial")) {
    const auto& s = doc.at("spatial");
    const std::string w = "spatial";
    check_keys(s, w, {"enabled", "cadence", "max_abs_rhs", "deduplicate"});
    cfg.spatial_enabled = field_or(s, w, "enabled", cfg.spatial_enabled);
    cfg.spatial_cadence = field_or(s, w, "cadence", cfg.spatial_cadence);
    cfg.constraints.max_abs_rhs = field_or(s, w, "max_abs_rhs", cfg.constraints.max_abs_rhs);
    cfg.constraints.deduplicate = field_or(s, w, "deduplicate", cfg.constraints.deduplicate);
  }
  if (doc.contains("gp")) {
    const auto& g = doc.at("gp");
    const std::string w = "gp";
    check_keys(g, w, {"enabled", "length_scale", "signal_variance", "noise_variance", "max_training_points"});
    cfg.gp_enabled = field_or(g, w, "enabled", cfg.gp_enabled);
    if (g.contains("length_scale") && !g.at("length_scale").is_null()) {
      cfg.gp_length_scale = field<double>(g, w, "length_scale");
    }
    cfg.gp_signal_variance = field_or(g, w, "signal_variance", cfg.gp_signal_variance);
    cfg.gp_noise_variance = field_or(g, w, "noise_variance", cfg.gp_noise_variance);
    cfg.gp_max_training_points = field_or(g, w, "max_training_points", cfg.gp_max_training_points);
  }
  cfg.ransac.rng_seed = cfg.seed;
  cfg.validate();
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) { return parse_pipeline_config(read_text(path)); }

std::string dump_pipeline_config(const PipelineConfig& cfg) {
  nlohmann::ordered_json doc;
  doc["seed"] = cfg.seed;
  doc["window"] = cfg.window;
  doc["output_mode"] = to_string(cfg.output_mode);
  doc["correspondences"] = {{"source", cfg.source == CorrespondenceSource::Tracker ? "tracker" : "external"},
                            {"path", cfg.correspondences.string()}};
  const auto& t = cfg.tracker;
  doc["tracker"] = {{"max_features", t.max_features},
                    {"pyramid_levels", t.pyramid_levels},
                    {"window_radius", t.window_radius},
                    {"min_eigen_threshold", t.min_eigen_threshold},
                    {"max_track_error", t.max_track_error},
                    {"grid_cells", t.grid_cells},
                    {"max_iterations", t.max_iterations},
                    {"epsilon", t.epsilon},
                    {"normalize_windows", t.normalize_windows}};
  const auto& r = cfg.ransac;
  doc["ransac"] = {{"max_iterations", r.max_iterations},
                   {"inlier_threshold", r.inlier_threshold},
                   {"min_inliers", r.min_inliers},
                   {"early_exit_ratio", r.early_exit_ratio}};
  doc["drift"] = {{"xi_gap", cfg.drift.xi_gap}, {"xi_base", cfg.drift.xi_base}, {"gap_floor", cfg.drift.gap_floor}};
  doc["grid"] = {{"cells_x", cfg.cells_x}, {"cells_y", cfg.cells_y}};
  doc["spatial"] = {{"enabled", cfg.spatial_enabled},
                    {"cadence", cfg.spatial_cadence},
                    {"max_abs_rhs", cfg.constraints.max_abs_rhs},
                    {"deduplicate", cfg.constraints.deduplicate}};
  doc["gp"] = {{"enabled", cfg.gp_enabled},
               {"length_scale", cfg.gp_length_scale ? json(*cfg.gp_length_scale) : json(nullptr)},
               {"signal_variance", cfg.gp_signal_variance},
               {"noise_variance", cfg.gp_noise_variance},
               {"max_training_points", cfg.gp_max_training_points}};
  return doc.dump(1);
}

Calibrator::Calibrator(PipelineConfig cfg, ImageSize size)
    : cfg_(std::move(cfg)),
      size_(size),
      grid_(cfg_.grid(size)),
      gp_(cfg_.gp(size)),
      accumulator_(grid_, cfg_.constraints),
      field_(SpatialField::zeros(grid_)) {
  cfg_.validate();
  cfg_.ransac.rng_seed = cfg_.seed;
}

Calibrator::~Calibrator() {
  if (pending_.valid()) pending_.wait();
}

const SpatialField& Calibrator::field() {
  join_solve();
  return field_;
}

void Calibrator::join_solve() {
  if (!pending_.valid()) return;
  Solve s = pending_.get();
  field_ = std::move(s.field);
  solve_ms_.push_back(s.ms);
}

Calibrator::Solve Calibrator::run_solve(std::vector<DifferenceConstraint> constraints) const {
  const auto start = Clock::now();
  Solve out{SpatialField::zeros(grid_), 0.0};
  if (!constraints.empty()) {
    const auto components = connected_components(constraints, grid_);
    out.field = solve_spatial(constraints, components, grid_);
    if (cfg_.gp_enabled) out.field = complete_field(out.field, gp_);
  }
  out.ms = elapsed_ms(start);
  return out;
}

std::vector<CorrespondenceSet> Calibrator::tracked_sets(const Image& image, FrameIndex t) {
  Pyramid next(image, cfg_.tracker.pyramid_levels);
  std::vector<CorrespondenceSet> sets;
  if (prev_pyramid_ && !tracks_.empty()) {
    std::vector<Pixel> points;
    points.reserve(tracks_.size());
    for (const auto& tr : tracks_) points.push_back(tr.pos);
    const auto results = track_points(*prev_pyramid_, next, points, cfg_.tracker);

    std::vector<Track> alive;
    std::map<FrameIndex, CorrespondenceSet> by_origin;
    for (std::size_t k = 0; k < tracks_.size(); ++k) {
      if (!results[k].ok) continue;
      Track tr = tracks_[k];
      tr.pos = results[k].position;
      auto& set = by_origin[tr.origin];
      set.from = tr.origin;
      set.to = t;
      set.pairs.push_back({tr.origin_intensity, image.sample(tr.pos.x, tr.pos.y), tr.origin_pos, tr.pos});
      alive.push_back(tr);
    }
    for (auto& [origin, set] : by_origin) sets.push_back(std::move(set));
    tracks_ = std::move(alive);
  }

  // Tracks whose origin would fall outside the window for the next frame end here.
  std::erase_if(tracks_, [&](const Track& tr) { return tr.origin <= t - cfg_.window; });
  for (const auto& p : detect_features(image, cfg_.tracker)) {
    tracks_.push_back({t, p, image.sample(p.x, p.y), p});
  }
  prev_pyramid_.emplace(std::move(next));
  return sets;
}

FrameResult Calibrator::push_frame(const Image& image, std::vector<CorrespondenceSet> external) {
  if (image.width() != size_.width || image.height() != size_.height) {
    throw DataError("frame " + std::to_string(next_frame_) + " is " + std::to_string(image.width()) + "x" +
                    std::to_string(image.height()) + ", expected " + std::to_string(size_.width) + "x" +
                    std::to_string(size_.height));
  }
  join_solve();

  FrameResult result;
  const FrameIndex t = next_frame_;
  result.frame = t;

  history_.push_back(image);
  if (history_.size() > static_cast<std::size_t>(cfg_.window) + 1) history_.erase(history_.begin());

  auto start = Clock::now();
  if (cfg_.source == CorrespondenceSource::Tracker) {
    result.sets = tracked_sets(image, t);
  } else {
    for (auto& set : external) {
      if (set.to != t) throw ContractViolation("external set does not end in frame " + std::to_string(t));
      if (set.from < t - cfg_.window || set.from >= t || set.empty()) continue;
      if (!set.has_intensities()) {
        const Image& from = history_[history_.size() - 1 - static_cast<std::size_t>(t - set.from)];
        sample_intensities(set, from, image);
      }
      result.sets.push_back(std::move(set));
    }
  }
  result.track_ms = elapsed_ms(start);

  start = Clock::now();
  if (t == 0) {
    chain_ = ParamChain(0);
    result.update.frame = 0;
    result.update.step = RelativeParams::identity(0);
    result.update.entry = RelativeParams::identity(0);
    result.update.tracked = true;
  } else {
    result.update = process_frame(t, result.sets, chain_, cfg_.ransac, cfg_.drift);
    if (!result.update.tracked) untracked_.push_back(t);
  }
  result.temporal_ms = elapsed_ms(start);

  if (cfg_.spatial_enabled) {
    for (const auto& set : result.sets) accumulator_.add(set, chain_);
  }

  const RelativeParams& entry = chain_.at(t);
  result.calibrated = Image(size_.width, size_.height);
  for (int y = 0; y < size_.height; ++y) {
    for (int x = 0; x < size_.width; ++x) {
      result.calibrated(x, y) = calibrate_pixel(image(x, y), entry, field_.bias_at(x, y));
    }
  }

  ++next_frame_;
  if (cfg_.spatial_enabled && next_frame_ % cfg_.spatial_cadence == 0 &&
      accumulator_.observations() > observations_at_solve_) {
    observations_at_solve_ = accumulator_.observations();
    pending_ = std::async(std::launch::async, [this, c = accumulator_.snapshot()]() mutable {
      return run_solve(std::move(c));
    });
  }
  return result;
}

void Calibrator::finish() {
  join_solve();
  if (!cfg_.spatial_enabled || accumulator_.observations() == observations_at_solve_) return;
  observations_at_solve_ = accumulator_.observations();
  Solve s = run_solve(accumulator_.snapshot());
  field_ = std::move(s.field);
  solve_ms_.push_back(s.ms);
}

std::vector<std::uint8_t> Calibrator::render_gray(const Image& calibrated) const {
  std::vector<std::uint8_t> out(calibrated.size());
  const auto px = calibrated.pixels();
  for (std::size_t k = 0; k < px.size(); ++k) {
    out[k] = quantize_u8(cfg_.output_mode == OutputMode::Clamp ? px[k] : cyclic_gray(px[k]));
  }
  return out;
}

std::vector<std::uint8_t> Calibrator::render_palette(const Image& calibrated) const {
  static const ColorPalette palette = ColorPalette::rainbow();
  std::vector<std::uint8_t> out;
  out.reserve(calibrated.size() * 3);
  for (double v : calibrated.pixels()) {
    const Rgb c = cyclic_colormap(v, palette);
    out.push_back(quantize_u8(c.r));
    out.push_back(quantize_u8(c.g));
    out.push_back(quantize_u8(c.b));
  }
  return out;
}

CalibrateSummary cmd_calibrate(const fs::path& input, const PipelineConfig& cfg, const fs::path& output) {
  cfg.validate();
  if (cfg.source == CorrespondenceSource::External && cfg.correspondences.empty()) {
    throw ConfigError("correspondences.path: required for the external source");
  }
  const auto paths = list_frames(input);
  if (paths.empty()) throw DataError("no PGM frames in " + input.string());

  const Image first = read_pgm(paths.front());
  const ImageSize size{first.width(), first.height()};

  std::map<FrameIndex, std::vector<CorrespondenceSet>> external;
  if (cfg.source == CorrespondenceSource::External) {
    for (auto& set : ingest_correspondences(cfg.correspondences, size)) {
      if (set.to >= static_cast<FrameIndex>(paths.size())) {
        throw DataError("correspondence set " + std::to_string(set.from) + "->" + std::to_string(set.to) +
                        " refers to a frame beyond the input");
      }
      external[set.to].push_back(std::move(set));
    }
  }

  fs::create_directories(output / "frames");
  Calibrator calibrator(cfg, size);
  std::vector<CorrespondenceSet> used;
  std::vector<double> track_ms;
  std::vector<double> temporal_ms;
  CalibrateSummary summary;

  for (std::size_t k = 0; k < paths.size(); ++k) {
    Image image = k == 0 ? first : read_pgm(paths[k]);
    if (image.width() != size.width || image.height() != size.height) {
      throw DataError(paths[k].filename().string() + ": size " + std::to_string(image.width()) + "x" +
                      std::to_string(image.height()) + " differs from the first frame");
    }
    const auto t = static_cast<FrameIndex>(k);
    std::vector<CorrespondenceSet> ext;
    if (auto it = external.find(t); it != external.end()) ext = std::move(it->second);
    FrameResult r = calibrator.push_frame(image, std::move(ext));

    const fs::path stem = output / "frames" / paths[k].stem();
    if (cfg.output_mode == OutputMode::Palette) {
      write_ppm_u8(fs::path(stem).concat(".ppm"), size.width, size.height, calibrator.render_palette(r.calibrated));
    } else {
      write_pgm_u8(fs::path(stem).concat(".pgm"), size.width, size.height, calibrator.render_gray(r.calibrated));
    }
    track_ms.push_back(r.track_ms);
    temporal_ms.push_back(r.temporal_ms);
    for (auto& s : r.sets) used.push_back(std::move(s));
  }
  calibrator.finish();

  write_chain_jsonl(output / "chain.jsonl", calibrator.chain());
  write_chain_csv(output / "chain.csv", calibrator.chain());
  write_field_json(output / "spatial_field.json", calibrator.field());
  write_field_pgm(output / "spatial_field.pgm", calibrator.field());
  write_correspondences(output / "correspondences.csv", used);

  {
    std::ofstream out(output / "untracked.txt");
    if (!out) throw DataError("cannot write " + (output / "untracked.txt").string());
    for (FrameIndex t : calibrator.untracked()) {
      out << t << ' ' << paths[static_cast<std::size_t>(t)].filename().string() << '\n';
    }
  }

  summary.frames = paths.size();
  summary.untracked = calibrator.untracked().size();
  double sum = 0.0;
  for (std::size_t k = 1; k < temporal_ms.size(); ++k) {
    sum += temporal_ms[k];
    summary.max_temporal_ms = std::max(summary.max_temporal_ms, temporal_ms[k]);
  }
  summary.mean_temporal_ms = temporal_ms.size() > 1 ? sum / static_cast<double>(temporal_ms.size() - 1) : 0.0;
  const auto& solves = calibrator.solve_ms();
  for (double s : solves) summary.mean_solve_ms += s;
  if (!solves.empty()) summary.mean_solve_ms /= static_cast<double>(solves.size());

  nlohmann::ordered_json timing;
  timing["frames"] = summary.frames;
  timing["mean_temporal_ms"] = summary.mean_temporal_ms;
  timing["max_temporal_ms"] = summary.max_temporal_ms;
  timing["mean_spatial_ms"] = summary.mean_solve_ms;
  timing["temporal_ms"] = temporal_ms;
  timing["track_ms"] = track_ms;
  timing["spatial_ms"] = solves;
  std::ofstream out(output / "timing.json");
  if (!out) throw DataError("cannot write " + (output / "timing.json").string());
  out << timing.dump(1) << '\n';
  return summary;
}

SynthSummary cmd_synth(const fs::path& scene, std::uint64_t seed, const fs::path& output) {
  const SceneFile file = load_scene(scene, seed);
  const Sequence seq = render_sequence(file.spec, seed);
  fs::create_directories(output / "frames");
  for (const auto& frame : seq.frames) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06lld.pgm", static_cast<long long>(frame.index));
    write_pgm(output / "frames" / name, frame.image);
  }
  write_ground_truth(output / "truth.json", seq.truth, file.echo);

  std::vector<CorrespondenceSet> sets;
  if (file.pairs_per_set > 0) sets = truth_correspondence_window(file.spec, seq, file.pairs_per_set, file.window, seed);
  write_correspondences(output / "correspondences.csv", sets);

  SynthSummary summary;
  summary.frames = seq.frames.size();
  for (const auto& s : sets) summary.correspondences += s.size();
  return summary;
}

EvalReport cmd_eval(const fs::path& calibration, const std::optional<fs::path>& truth, const fs::path& output) {
  const fs::path chain_path = calibration / "chain.jsonl";
  const fs::path corr_path = calibration / "correspondences.csv";
  const fs::path field_path = calibration / "spatial_field.json";
  require_file(chain_path);
  require_file(corr_path);
  require_file(field_path);

  const ParamChain chain = read_chain_jsonl(chain_path);
  const SpatialField field = read_field_json(field_path);
  const auto sets = ingest_correspondences(corr_path, ImageSize{field.grid.width, field.grid.height});
  EvalReport report = evaluate(sets, chain, &field);

  if (truth) {
    fs::path truth_path = *truth;
    if (fs::is_directory(truth_path)) truth_path /= "truth.json";
    require_file(truth_path);
    const GroundTruth gt = read_ground_truth(truth_path);
    if (gt.spatial_field.width() != field.grid.width || gt.spatial_field.height() != field.grid.height) {
      throw DataError("ground truth size differs from the calibrated sequence");
    }
    // Mean true bias over each cell's pixels, in reference-frame units.
    std::vector<double> cell_bias(field.grid.cell_count(), 0.0);
    std::vector<int> count(field.grid.cell_count(), 0);
    for (int y = 0; y < field.grid.height; ++y) {
      for (int x = 0; x < field.grid.width; ++x) {
        const int c = field.grid.cell_of(x, y);
        cell_bias[c] += gt.reference_bias(x, y);
        ++count[c];
      }
    }
    for (std::size_t c = 0; c < cell_bias.size(); ++c) cell_bias[c] /= std::max(count[c], 1);
    report.recovery = parameter_recovery(chain, gt.chain(), &field, &cell_bias);
  }

  fs::create_directories(output);
  std::ofstream json_out(output / "report.json");
  std::ofstream csv_out(output / "report.csv");
  if (!json_out || !csv_out) throw DataError("cannot write the report into " + output.string());
  write_report_json(json_out, report);
  write_report_csv(csv_out, report);
  return report;
}

}  // namespace thermocal
