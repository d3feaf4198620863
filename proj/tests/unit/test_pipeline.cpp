// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "thermocal/errors.hpp"
#include "thermocal/param_io.hpp"
#include "thermocal/pipeline.hpp"
#include "thermocal/synth.hpp"

using namespace thermocal;

namespace {

SceneSpec moving_scene(int frames, bool hot = true) {
  SceneSpec spec;
  spec.radiance = value_noise(160, 128, 12, 4, 24.0);
  spec.width = 96;
  spec.height = 72;
  for (int t = 0; t < frames; ++t) spec.motion.push_back({20 + (t % 7) - 3, 20 + (t % 5) - 2});
  if (hot) {
    spec.hot_events.push_back({3, 9, 60, 50, 20, 14, 0.6});
    spec.hot_events.push_back({6, 14, 30, 30, 10, 10, -0.5});
  }
  return spec;
}

PipelineConfig external_config() {
  PipelineConfig cfg;
  cfg.source = CorrespondenceSource::External;
  cfg.drift.xi_gap = 0.0;
  cfg.drift.xi_base = 0.0;
  cfg.spatial_enabled = false;
  return cfg;
}

std::string config_error(const std::string& text) {
  try {
    parse_pipeline_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no ConfigError for " << text;
  return {};
}

}  // namespace

TEST(PipelineConfig, DefaultsAndOverrides) {
  const auto cfg = parse_pipeline_config("{}");
  EXPECT_EQ(cfg.cells_x, 32);
  EXPECT_EQ(cfg.spatial_cadence, 50);
  EXPECT_EQ(cfg.output_mode, OutputMode::Gray);
  EXPECT_DOUBLE_EQ(cfg.drift.xi_gap, 0.1);
  EXPECT_DOUBLE_EQ(cfg.drift.xi_base, 0.025);

  const auto custom = parse_pipeline_config(R"({
    "seed": 9, "window": 3, "output_mode": "palette",
    "correspondences": {"source": "external", "path": "c.csv"},
    "ransac": {"max_iterations": 50, "inlier_threshold": 0.03},
    "drift": {"xi_gap": 0.0, "xi_base": 0.0},
    "grid": {"cells_x": 8, "cells_y": 4},
    "spatial": {"enabled": false, "cadence": 10},
    "gp": {"length_scale": 12.5}
  })");
  EXPECT_EQ(custom.seed, 9u);
  EXPECT_EQ(custom.ransac.rng_seed, 9u);
  EXPECT_EQ(custom.window, 3);
  EXPECT_EQ(custom.output_mode, OutputMode::Palette);
  EXPECT_EQ(custom.source, CorrespondenceSource::External);
  EXPECT_EQ(custom.ransac.max_iterations, 50);
  EXPECT_EQ(custom.cells_y, 4);
  EXPECT_FALSE(custom.spatial_enabled);
  EXPECT_DOUBLE_EQ(custom.gp({64, 48}).length_scale, 12.5);
  EXPECT_DOUBLE_EQ(cfg.gp({64, 48}).length_scale, 16.0);
}

TEST(PipelineConfig, DumpRoundTrips) {
  auto cfg = parse_pipeline_config(R"({"seed": 4, "grid": {"cells_x": 16, "cells_y": 8}, "gp": {"enabled": false}})");
  const auto again = parse_pipeline_config(dump_pipeline_config(cfg));
  EXPECT_EQ(dump_pipeline_config(again), dump_pipeline_config(cfg));
  EXPECT_EQ(again.cells_x, 16);
  EXPECT_FALSE(again.gp_enabled);
}

TEST(PipelineConfig, ErrorsNameTheField) {
  EXPECT_NE(config_error(R"({"colour": 1})").find("colour"), std::string::npos);
  EXPECT_NE(config_error(R"({"ransac": {"iterations": 3}})").find("ransac.iterations"), std::string::npos);
  EXPECT_NE(config_error(R"({"drift": {"xi_gap": 2.0}})").find("xi_gap"), std::string::npos);
  EXPECT_NE(config_error(R"({"grid": {"cells_x": 0}})").find("cells_x"), std::string::npos);
  EXPECT_NE(config_error(R"({"output_mode": "sepia"})").find("output_mode"), std::string::npos);
  EXPECT_NE(config_error(R"({"window": "five"})").find("window"), std::string::npos);
  EXPECT_NE(config_error("[1, 2").find("JSON"), std::string::npos);
}

TEST(OutputMode, Parse) {
  EXPECT_EQ(parse_output_mode("gray"), OutputMode::Gray);
  EXPECT_EQ(parse_output_mode("clamp"), OutputMode::Clamp);
  EXPECT_EQ(parse_output_mode("palette"), OutputMode::Palette);
  EXPECT_THROW(parse_output_mode("rgb"), ConfigError);
}

TEST(Calibrator, IdentitySequence) {
  const Image img = value_noise(80, 64, 4, 4, 16.0);
  PipelineConfig cfg;
  cfg.output_mode = OutputMode::Clamp;
  Calibrator cal(cfg, {80, 64});
  for (int t = 0; t < 8; ++t) {
    const auto r = cal.push_frame(img);
    EXPECT_TRUE(r.update.tracked);
    EXPECT_NEAR(r.update.entry.a, 0.0, 1e-9);
    EXPECT_NEAR(r.update.entry.b, 0.0, 1e-9);
    for (std::size_t k = 0; k < img.size(); ++k) ASSERT_NEAR(r.calibrated.pixels()[k], img.pixels()[k], 1e-9);
  }
  cal.finish();
  EXPECT_TRUE(cal.untracked().empty());
  EXPECT_EQ(cal.frames(), 8);
}

TEST(Calibrator, RejectsSizeMismatch) {
  Calibrator cal(PipelineConfig{}, {32, 32});
  EXPECT_THROW(cal.push_frame(Image(31, 32, 0.5)), DataError);
}

TEST(Calibrator, FlatFramesAreUntracked) {
  PipelineConfig cfg;
  Calibrator cal(cfg, {40, 40});
  cal.push_frame(Image(40, 40, 0.5));
  const auto r = cal.push_frame(Image(40, 40, 0.5));
  EXPECT_FALSE(r.update.tracked);
  ASSERT_EQ(cal.untracked().size(), 1u);
  EXPECT_EQ(cal.untracked()[0], 1);
  EXPECT_EQ(cal.chain().at(1).a, 0.0);
}

TEST(Calibrator, RecoversNoiselessChainFromTruthCorrespondences) {
  const auto spec = moving_scene(16);
  const auto seq = render_sequence(spec, 3);
  const auto sets = truth_correspondence_window(spec, seq, 300, 5, 7);
  Calibrator cal(external_config(), {spec.width, spec.height});
  for (const auto& frame : seq.frames) {
    std::vector<CorrespondenceSet> into;
    for (const auto& s : sets) {
      if (s.to == frame.index) into.push_back(s);
    }
    cal.push_frame(frame.image, into);
  }
  cal.finish();
  const auto truth = seq.truth.chain();
  for (FrameIndex t = 0; t < 16; ++t) {
    EXPECT_NEAR(cal.chain().at(t).a, truth.at(t).a, 1e-9) << t;
    EXPECT_NEAR(cal.chain().at(t).b, truth.at(t).b, 1e-9) << t;
  }
}

TEST(Calibrator, ExternalSetsOutsideWindowAreIgnored) {
  const auto spec = moving_scene(8, false);
  const auto seq = render_sequence(spec, 3);
  auto cfg = external_config();
  cfg.window = 2;
  Calibrator cal(cfg, {spec.width, spec.height});
  for (int t = 0; t < 5; ++t) cal.push_frame(seq.frames[static_cast<std::size_t>(t)].image);
  std::vector<CorrespondenceSet> into{truth_correspondences(spec, seq, 1, 5, 100, 1).set,
                                      truth_correspondences(spec, seq, 4, 5, 100, 1).set};
  // Strip intensities so the calibrator must sample them from its history.
  for (auto& p : into[1].pairs) p.i_from = p.i_to = NAN;
  const auto r = cal.push_frame(seq.frames[5].image, into);
  ASSERT_EQ(r.sets.size(), 1u);
  EXPECT_EQ(r.sets[0].from, 4);
  EXPECT_TRUE(r.sets[0].has_intensities());
  EXPECT_THROW(cal.push_frame(seq.frames[6].image, {truth_correspondences(spec, seq, 4, 5, 10, 1).set}),
               ContractViolation);
}

TEST(Calibrator, OutputIsCausal) {
  const auto spec = moving_scene(24);
  const auto seq = render_sequence(spec, 5);
  PipelineConfig cfg;
  cfg.spatial_cadence = 5;
  cfg.cells_x = 8;
  cfg.cells_y = 6;

  auto run = [&](int frames) {
    Calibrator cal(cfg, {spec.width, spec.height});
    std::vector<Image> out;
    for (int t = 0; t < frames; ++t) out.push_back(cal.push_frame(seq.frames[static_cast<std::size_t>(t)].image).calibrated);
    return std::pair{std::move(out), cal.chain()};
  };
  const auto full = run(24);
  const auto part = run(13);
  for (FrameIndex t = 0; t < 13; ++t) {
    EXPECT_EQ(full.second.at(t).a, part.second.at(t).a);
    EXPECT_EQ(full.second.at(t).b, part.second.at(t).b);
    const auto& a = full.first[static_cast<std::size_t>(t)].pixels();
    const auto& b = part.first[static_cast<std::size_t>(t)].pixels();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin())) << t;
  }
}

TEST(Calibrator, ExternalReplayOfTrackedSetsReproducesChain) {
  const auto spec = moving_scene(14);
  const auto seq = render_sequence(spec, 5);
  PipelineConfig cfg;
  cfg.spatial_enabled = false;
  Calibrator tracked(cfg, {spec.width, spec.height});
  std::vector<std::vector<CorrespondenceSet>> used;
  for (const auto& f : seq.frames) used.push_back(tracked.push_frame(f.image).sets);
  tracked.finish();
  EXPECT_TRUE(tracked.untracked().empty());

  // Round-trip through the CSV format as the command line would.
  std::vector<CorrespondenceSet> flat;
  for (const auto& v : used) flat.insert(flat.end(), v.begin(), v.end());
  const auto dir = fixtures::scratch_dir("pipeline_replay");
  write_correspondences(dir / "c.csv", flat);
  const auto back = ingest_correspondences(dir / "c.csv");

  cfg.source = CorrespondenceSource::External;
  Calibrator replay(cfg, {spec.width, spec.height});
  for (const auto& f : seq.frames) {
    std::vector<CorrespondenceSet> into;
    for (const auto& s : back) {
      if (s.to == f.index) into.push_back(s);
    }
    replay.push_frame(f.image, into);
  }
  replay.finish();
  ASSERT_EQ(replay.chain().size(), tracked.chain().size());
  for (FrameIndex t = 0; t < 14; ++t) {
    EXPECT_EQ(replay.chain().at(t).a, tracked.chain().at(t).a);
    EXPECT_EQ(replay.chain().at(t).b, tracked.chain().at(t).b);
  }
}

TEST(Calibrator, TrackerFollowsHotEventSequence) {
  const auto spec = moving_scene(20);
  const auto seq = render_sequence(spec, 2);
  PipelineConfig cfg;
  cfg.drift.xi_gap = 0.0;
  cfg.drift.xi_base = 0.0;
  cfg.spatial_enabled = false;
  Calibrator cal(cfg, {spec.width, spec.height});
  for (const auto& f : seq.frames) cal.push_frame(f.image);
  const auto rec = parameter_recovery(cal.chain(), seq.truth.chain());
  EXPECT_LT(rec.rmse_a, 0.02);
  EXPECT_LT(rec.rmse_b, 0.02);
}

TEST(Calibrator, SpatialSolveRunsAtCadence) {
  auto spec = moving_scene(12, false);
  spec.spatial_field = gaussian_field(spec.width, spec.height, {{30, 30, 12, 0.05}});
  const auto seq = render_sequence(spec, 2);
  PipelineConfig cfg;
  cfg.spatial_cadence = 4;
  cfg.cells_x = 12;
  cfg.cells_y = 9;
  Calibrator cal(cfg, {spec.width, spec.height});
  for (const auto& f : seq.frames) cal.push_frame(f.image);
  cal.finish();
  EXPECT_EQ(cal.solve_ms().size(), 3u);
  const auto& field = cal.field();
  EXPECT_GT(std::count(field.source.begin(), field.source.end(), CellSource::Solved), 0);
}

TEST(Calibrator, RenderModes) {
  PipelineConfig cfg;
  cfg.cells_x = cfg.cells_y = 1;
  cfg.output_mode = OutputMode::Clamp;
  Calibrator clamp(cfg, {3, 1});
  const Image values(3, 1, std::vector<double>{-0.2, 0.5, 1.4});
  EXPECT_EQ(clamp.render_gray(values), (std::vector<std::uint8_t>{0, 128, 255}));
  cfg.output_mode = OutputMode::Gray;
  Calibrator gray(cfg, {3, 1});
  // Cyclic ramp: 1.4 wraps to 0.4 -> 0.8.
  EXPECT_EQ(gray.render_gray(values), (std::vector<std::uint8_t>{quantize_u8(cyclic_gray(-0.2)), 255, 204}));
  cfg.output_mode = OutputMode::Palette;
  Calibrator pal(cfg, {3, 1});
  EXPECT_EQ(pal.render_palette(values).size(), 9u);
}

TEST(Commands, SynthCalibrateEval) {
  const auto dir = fixtures::scratch_dir("pipeline_cmds");
  fixtures::spit(dir / "scene.json", R"({
    "frames": 12, "width": 64, "height": 48,
    "radiance": {"type": "value_noise", "width": 96, "height": 80, "period": 16.0},
    "motion": {"type": "random_walk", "start": [10, 10], "max_step": 2},
    "hot_events": [{"first": 4, "last": 8, "x": 30, "y": 30, "w": 10, "h": 10, "radiance": 0.5}],
    "correspondences": {"pairs": 200, "window": 3}
  })");
  const auto synth = cmd_synth(dir / "scene.json", 6, dir / "seq");
  EXPECT_EQ(synth.frames, 12u);
  EXPECT_EQ(list_frames(dir / "seq" / "frames").size(), 12u);

  PipelineConfig cfg;
  cfg.source = CorrespondenceSource::External;
  cfg.correspondences = dir / "seq" / "correspondences.csv";
  cfg.drift.xi_gap = 0.0;
  cfg.drift.xi_base = 0.0;
  const auto summary = cmd_calibrate(dir / "seq" / "frames", cfg, dir / "cal");
  EXPECT_EQ(summary.frames, 12u);
  EXPECT_EQ(summary.untracked, 0u);
  for (const char* name : {"chain.jsonl", "chain.csv", "spatial_field.json", "spatial_field.pgm",
                           "correspondences.csv", "untracked.txt", "timing.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "cal" / name)) << name;
  }
  EXPECT_EQ(list_frames(dir / "cal" / "frames").size(), 12u);

  const auto report = cmd_eval(dir / "cal", dir / "seq", dir / "cal");
  ASSERT_TRUE(report.recovery.has_value());
  EXPECT_LE(report.recovery->rmse_a, 1e-6);
  EXPECT_LE(report.recovery->rmse_b, 1e-6);
  EXPECT_TRUE(std::filesystem::exists(dir / "cal" / "report.json"));
  EXPECT_FALSE(cmd_eval(dir / "cal", std::nullopt, dir / "cal").recovery.has_value());
  EXPECT_THROW(cmd_eval(dir / "seq", std::nullopt, dir / "x"), DataError);
}
