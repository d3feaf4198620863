// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#include "thermocal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "thermocal/errors.hpp"
#include "json_fields.hpp"

namespace thermocal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

}  // namespace

void SceneSpec::validate() const {
  if (radiance.empty()) throw ConfigError("radiance: empty radiance map");
  if (width < 2 || height < 2) throw ConfigError("width/height: viewport must be at least 2x2");
  if (motion.empty()) throw ConfigError("frames: sequence has no frames");
  for (std::size_t t = 0; t < motion.size(); ++t) {
    const auto [ox, oy] = motion[t];
    if (ox < 0 || oy < 0 || ox + width > radiance.width() || oy + height > radiance.height()) {
      throw ConfigError("motion: viewport leaves the radiance map at frame " + std::to_string(t));
    }
  }
  for (double v : radiance.pixels()) {
    if (!std::isfinite(v)) throw ConfigError("radiance: non-finite radiance value");
  }
  for (const auto& e : hot_events) {
    if (e.w < 0 || e.h < 0 || e.last < e.first || !std::isfinite(e.radiance)) {
      throw ConfigError("hot_events: malformed event");
    }
  }
  if (!spatial_field.empty() && (spatial_field.width() != width || spatial_field.height() != height)) {
    throw ConfigError("spatial_field: size must match the viewport");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma: must be >= 0");
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) throw ConfigError("outlier_fraction: must lie in [0,1]");
  if (!(percentile >= 0.0 && percentile < 0.5)) throw ConfigError("percentile: must lie in [0,0.5)");
}

Image value_noise(int width, int height, std::uint64_t seed, int octaves, double period) {
  Image out(width, height, 0.0);
  double amplitude = 1.0;
  for (int o = 0; o < octaves; ++o) {
    const double p = std::max(period / std::ldexp(1.0, o), 1.0);
    const int gw = static_cast<int>(std::ceil(width / p)) + 2;
    const int gh = static_cast<int>(std::ceil(height / p)) + 2;
    std::mt19937_64 rng(mix(seed, static_cast<std::uint64_t>(o)));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
    for (double& v : lattice) v = uni(rng);
    for (int y = 0; y < height; ++y) {
      const double gy = y / p;
      const int y0 = static_cast<int>(gy);
      const double fy = smooth(gy - y0);
      for (int x = 0; x < width; ++x) {
        const double gx = x / p;
        const int x0 = static_cast<int>(gx);
        const double fx = smooth(gx - x0);
        auto at = [&](int i, int j) { return lattice[static_cast<std::size_t>(j) * gw + i]; };
        const double top = at(x0, y0) + fx * (at(x0 + 1, y0) - at(x0, y0));
        const double bottom = at(x0, y0 + 1) + fx * (at(x0 + 1, y0 + 1) - at(x0, y0 + 1));
        out(x, y) += amplitude * (top + fy * (bottom - top));
      }
    }
    amplitude *= 0.5;
  }
  const auto [lo, hi] = std::minmax_element(out.pixels().begin(), out.pixels().end());
  const double min = *lo;
  const double range = *hi - *lo;
  for (double& v : out.pixels()) v = range > 0.0 ? (v - min) / range : 0.0;
  return out;
}

Image gaussian_field(int width, int height, const std::vector<GaussianBump>& bumps) {
  Image out(width, height, 0.0);
  for (const auto& g : bumps) {
    const double inv = 1.0 / (2.0 * g.sigma * g.sigma);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dx = x - g.x;
        const double dy = y - g.y;
        out(x, y) += g.amplitude * std::exp(-(dx * dx + dy * dy) * inv);
      }
    }
  }
  return out;
}

RelativeParams GroundTruth::relative(FrameIndex i, FrameIndex j) const {
  const auto& pi = absolute.at(static_cast<std::size_t>(i));
  const auto& pj = absolute.at(static_cast<std::size_t>(j));
  return {pj.a - pi.a, (pj.b - pi.b) / std::exp(pi.a), i, j};
}

ParamChain GroundTruth::chain() const {
  ParamChain chain(0);
  for (std::size_t t = 1; t < absolute.size(); ++t) chain.push_back(relative(0, static_cast<FrameIndex>(t)));
  return chain;
}

double GroundTruth::reference_bias(int x, int y) const {
  if (spatial_field.empty()) return 0.0;
  return spatial_field(x, y) / std::exp(absolute.front().a);
}

Sequence render_sequence(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  Sequence seq;
  seq.truth.seed = seed;
  seq.truth.motion = spec.motion;
  seq.truth.spatial_field = spec.spatial_field.empty() ? Image(spec.width, spec.height, 0.0) : spec.spatial_field;

  std::vector<double> raw(static_cast<std::size_t>(spec.width) * spec.height);
  std::vector<double> sorted;
  for (std::size_t t = 0; t < spec.motion.size(); ++t) {
    const auto [ox, oy] = spec.motion[t];
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const int sx = ox + x;
        const int sy = oy + y;
        double v = spec.radiance(sx, sy) + seq.truth.spatial_field(x, y);
        for (const auto& e : spec.hot_events) {
          if (static_cast<FrameIndex>(t) >= e.first && static_cast<FrameIndex>(t) <= e.last && sx >= e.x &&
              sx < e.x + e.w && sy >= e.y && sy < e.y + e.h) {
            v += e.radiance;
          }
        }
        raw[static_cast<std::size_t>(y) * spec.width + x] = v;
      }
    }

    double lo = 0.0;
    double hi = 0.0;
    if (spec.agc == AgcMode::MinMax) {
      const auto [mn, mx] = std::minmax_element(raw.begin(), raw.end());
      lo = *mn;
      hi = *mx;
    } else {
      sorted = raw;
      std::sort(sorted.begin(), sorted.end());
      const double last = static_cast<double>(sorted.size() - 1);
      lo = sorted[static_cast<std::size_t>(std::floor(spec.percentile * last))];
      hi = sorted[static_cast<std::size_t>(std::ceil((1.0 - spec.percentile) * last))];
    }
    if (!(hi > lo)) throw DataError("frame " + std::to_string(t) + " has no radiance range");

    std::mt19937_64 rng(mix(seed, t + 1));
    std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
    Frame frame;
    frame.index = static_cast<FrameIndex>(t);
    frame.image = Image(spec.width, spec.height);
    auto pixels = frame.image.pixels();
    const double range = hi - lo;
    for (std::size_t k = 0; k < raw.size(); ++k) {
      double v = (raw[k] - lo) / range;
      if (spec.noise_sigma > 0.0) v += noise(rng);
      pixels[k] = std::clamp(v, 0.0, 1.0);
    }
    seq.frames.push_back(std::move(frame));
    seq.truth.absolute.push_back({std::log(range), lo, -1, static_cast<FrameIndex>(t)});
  }
  return seq;
}

TruthCorrespondences truth_correspondences(const SceneSpec& spec, const Sequence& seq, FrameIndex i, FrameIndex j,
                                           std::size_t n, std::uint64_t seed) {
  if (i < 0 || j < 0 || static_cast<std::size_t>(std::max(i, j)) >= seq.frames.size()) {
    throw ContractViolation("truth_correspondences: frame not rendered");
  }
  if (i >= j) throw ContractViolation("truth_correspondences: from-frame must precede to-frame");
  const auto& oi = seq.truth.motion[static_cast<std::size_t>(i)];
  const auto& oj = seq.truth.motion[static_cast<std::size_t>(j)];
  const int shift_x = oi[0] - oj[0];
  const int shift_y = oi[1] - oj[1];

  // Pixels of frame i that stay inside frame j after the shift.
  const int x_lo = std::max(0, -shift_x);
  const int x_hi = std::min(spec.width - 1, spec.width - 1 - shift_x);
  const int y_lo = std::max(0, -shift_y);
  const int y_hi = std::min(spec.height - 1, spec.height - 1 - shift_y);

  TruthCorrespondences out;
  out.set.from = i;
  out.set.to = j;
  if (x_hi < x_lo || y_hi < y_lo) return out;

  const auto span_x = static_cast<std::uint64_t>(x_hi - x_lo + 1);
  const auto span_y = static_cast<std::uint64_t>(y_hi - y_lo + 1);
  const std::uint64_t area = span_x * span_y;
  const std::size_t count = static_cast<std::size_t>(std::min<std::uint64_t>(n, area));

  std::mt19937_64 rng(mix(mix(seed, static_cast<std::uint64_t>(i)), static_cast<std::uint64_t>(j)));
  // Floyd's sampling of `count` distinct cells out of `area`.
  std::vector<std::uint64_t> chosen;
  chosen.reserve(count);
  std::unordered_set<std::uint64_t> seen;
  for (std::uint64_t k = area - count; k < area; ++k) {
    std::uniform_int_distribution<std::uint64_t> pick(0, k);
    std::uint64_t v = pick(rng);
    if (seen.count(v)) v = k;
    seen.insert(v);
    chosen.push_back(v);
  }

  const Image& from = seq.frames[static_cast<std::size_t>(i)].image;
  const Image& to = seq.frames[static_cast<std::size_t>(j)].image;
  for (const auto v : chosen) {
    const int x = x_lo + static_cast<int>(v % span_x);
    const int y = y_lo + static_cast<int>(v / span_x);
    CorrespondencePair pair;
    pair.from = {static_cast<double>(x), static_cast<double>(y)};
    pair.to = {static_cast<double>(x + shift_x), static_cast<double>(y + shift_y)};
    pair.i_from = from(x, y);
    pair.i_to = to(x + shift_x, y + shift_y);
    out.set.pairs.push_back(pair);
  }

  out.perturbed.assign(out.set.size(), false);
  const auto outliers = static_cast<std::size_t>(std::lround(spec.outlier_fraction * static_cast<double>(count)));
  if (outliers > 0) {
    std::vector<std::size_t> order(count);
    for (std::size_t k = 0; k < count; ++k) order[k] = k;
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_int_distribution<int> px(0, spec.width - 1);
    std::uniform_int_distribution<int> py(0, spec.height - 1);
    const int min_jump = std::max(3, std::min(spec.width, spec.height) / 8);
    for (std::size_t k = 0; k < outliers; ++k) {
      auto& pair = out.set.pairs[order[k]];
      int x = 0;
      int y = 0;
      do {
        x = px(rng);
        y = py(rng);
      } while (std::abs(x - pair.to.x) + std::abs(y - pair.to.y) < min_jump);
      pair.to = {static_cast<double>(x), static_cast<double>(y)};
      pair.i_to = to(x, y);
      out.perturbed[order[k]] = true;
    }
  }
  return out;
}

std::vector<CorrespondenceSet> truth_correspondence_window(const SceneSpec& spec, const Sequence& seq,
                                                           std::size_t pairs, int window, std::uint64_t seed) {
  std::vector<CorrespondenceSet> sets;
  const auto frames = static_cast<FrameIndex>(seq.frames.size());
  for (FrameIndex t = 1; t < frames; ++t) {
    for (FrameIndex i = std::max<FrameIndex>(0, t - window); i < t; ++i) {
      auto tc = truth_correspondences(spec, seq, i, t, pairs, seed);
      if (!tc.set.empty()) sets.push_back(std::move(tc.set));
    }
  }
  return sets;
}

namespace {

using detail::check_keys;
using detail::field;
using detail::field_or;

Offset offset_of(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    throw ConfigError(where + ": expected [x, y] integers");
  }
  return {v[0].get<int>(), v[1].get<int>()};
}

}  // namespace

SceneFile parse_scene(const std::string& json_text, std::uint64_t seed, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene: not valid JSON: ") + e.what());
  }
  check_keys(doc, "", {"frames", "width", "height", "radiance", "motion", "hot_events", "spatial_field",
                       "noise_sigma", "outlier_fraction", "agc", "percentile", "correspondences"});

  SceneFile file;
  SceneSpec& spec = file.spec;
  const int frames = field<int>(doc, "", "frames");
  if (frames < 1) throw ConfigError("frames: must be >= 1");
  spec.width = field<int>(doc, "", "width");
  spec.height = field<int>(doc, "", "height");

  const json radiance = doc.contains("radiance") ? doc.at("radiance") : json{{"type", "value_noise"}};
  const auto rtype = field_or<std::string>(radiance, "radiance", "type", "value_noise");
  if (rtype == "value_noise") {
    check_keys(radiance, "radiance", {"type", "width", "height", "octaves", "period", "seed"});
    spec.radiance = value_noise(field_or<int>(radiance, "radiance", "width", spec.width * 2),
                                field_or<int>(radiance, "radiance", "height", spec.height * 2),
                                field_or<std::uint64_t>(radiance, "radiance", "seed", seed),
                                field_or<int>(radiance, "radiance", "octaves", 4),
                                field_or<double>(radiance, "radiance", "period", 32.0));
  } else if (rtype == "pgm") {
    check_keys(radiance, "radiance", {"type", "path"});
    fs::path p = field<std::string>(radiance, "radiance", "path");
    if (p.is_relative()) p = base_dir / p;
    try {
      spec.radiance = read_pgm(p);
    } catch (const DataError& e) {
      throw ConfigError(std::string("radiance.path: ") + e.what());
    }
  } else {
    throw ConfigError("radiance.type: expected value_noise or pgm");
  }

  const json motion = doc.contains("motion") ? doc.at("motion") : json{{"type", "static"}};
  const auto mtype = field_or<std::string>(motion, "motion", "type", "static");
  if (mtype == "static") {
    check_keys(motion, "motion", {"type", "start"});
    const Offset start = motion.contains("start") ? offset_of(motion.at("start"), "motion.start") : Offset{0, 0};
    spec.motion.assign(static_cast<std::size_t>(frames), start);
  } else if (mtype == "linear") {
    check_keys(motion, "motion", {"type", "start", "step"});
    const Offset start = offset_of(motion.at("start"), "motion.start");
    const Offset step = offset_of(motion.at("step"), "motion.step");
    for (int t = 0; t < frames; ++t) spec.motion.push_back({start[0] + t * step[0], start[1] + t * step[1]});
  } else if (mtype == "random_walk") {
    check_keys(motion, "motion", {"type", "start", "max_step"});
    Offset pos = offset_of(motion.at("start"), "motion.start");
    const int max_step = field_or<int>(motion, "motion", "max_step", 2);
    std::mt19937_64 rng(mix(seed, 0x6d6f74696f6eULL));
    std::uniform_int_distribution<int> step(-max_step, max_step);
    const int max_x = spec.radiance.width() - spec.width;
    const int max_y = spec.radiance.height() - spec.height;
    for (int t = 0; t < frames; ++t) {
      spec.motion.push_back(pos);
      pos[0] = std::clamp(pos[0] + step(rng), 0, std::max(max_x, 0));
      pos[1] = std::clamp(pos[1] + step(rng), 0, std::max(max_y, 0));
    }
  } else if (mtype == "path") {
    check_keys(motion, "motion", {"type", "offsets"});
    const auto& offsets = motion.at("offsets");
    if (!offsets.is_array() || offsets.size() != static_cast<std::size_t>(frames)) {
      throw ConfigError("motion.offsets: need one [x, y] per frame");
    }
    for (std::size_t t = 0; t < offsets.size(); ++t) {
      spec.motion.push_back(offset_of(offsets[t], "motion.offsets[" + std::to_string(t) + "]"));
    }
  } else {
    throw ConfigError("motion.type: expected static, linear, random_walk or path");
  }

  if (doc.contains("hot_events")) {
    const auto& events = doc.at("hot_events");
    if (!events.is_array()) throw ConfigError("hot_events: expected an array");
    for (std::size_t k = 0; k < events.size(); ++k) {
      const std::string where = "hot_events[" + std::to_string(k) + "]";
      check_keys(events[k], where, {"first", "last", "x", "y", "w", "h", "radiance"});
      HotEvent e;
      e.first = field<FrameIndex>(events[k], where, "first");
      e.last = field<FrameIndex>(events[k], where, "last");
      e.x = field<int>(events[k], where, "x");
      e.y = field<int>(events[k], where, "y");
      e.w = field<int>(events[k], where, "w");
      e.h = field<int>(events[k], where, "h");
      e.radiance = field<double>(events[k], where, "radiance");
      spec.hot_events.push_back(e);
    }
  }

  if (doc.contains("spatial_field")) {
    const auto& sf = doc.at("spatial_field");
    check_keys(sf, "spatial_field", {"gaussians", "regions"});
    std::vector<GaussianBump> bumps;
    if (sf.contains("gaussians")) {
      for (std::size_t k = 0; k < sf.at("gaussians").size(); ++k) {
        const auto& g = sf.at("gaussians")[k];
        const std::string where = "spatial_field.gaussians[" + std::to_string(k) + "]";
        check_keys(g, where, {"x", "y", "sigma", "amplitude"});
        bumps.push_back({field<double>(g, where, "x"), field<double>(g, where, "y"), field<double>(g, where, "sigma"),
                         field<double>(g, where, "amplitude")});
        if (!(bumps.back().sigma > 0.0)) throw ConfigError(where + ".sigma: must be positive");
      }
    }
    spec.spatial_field = gaussian_field(spec.width, spec.height, bumps);
    if (sf.contains("regions")) {
      for (std::size_t k = 0; k < sf.at("regions").size(); ++k) {
        const auto& r = sf.at("regions")[k];
        const std::string where = "spatial_field.regions[" + std::to_string(k) + "]";
        check_keys(r, where, {"x", "y", "w", "h", "value"});
        const int x0 = field<int>(r, where, "x");
        const int y0 = field<int>(r, where, "y");
        const int w = field<int>(r, where, "w");
        const int h = field<int>(r, where, "h");
        const double value = field<double>(r, where, "value");
        for (int y = std::max(0, y0); y < std::min(spec.height, y0 + h); ++y) {
          for (int x = std::max(0, x0); x < std::min(spec.width, x0 + w); ++x) spec.spatial_field(x, y) += value;
        }
      }
    }
  }

  spec.noise_sigma = field_or<double>(doc, "", "noise_sigma", 0.0);
  spec.outlier_fraction = field_or<double>(doc, "", "outlier_fraction", 0.0);
  const auto agc = field_or<std::string>(doc, "", "agc", "minmax");
  if (agc == "minmax") {
    spec.agc = AgcMode::MinMax;
  } else if (agc == "percentile") {
    spec.agc = AgcMode::Percentile;
  } else {
    throw ConfigError("agc: expected minmax or percentile");
  }
  spec.percentile = field_or<double>(doc, "", "percentile", 0.01);

  if (doc.contains("correspondences")) {
    const auto& c = doc.at("correspondences");
    check_keys(c, "correspondences", {"pairs", "window"});
    const int pairs = field_or<int>(c, "correspondences", "pairs", 500);
    if (pairs < 0) throw ConfigError("correspondences.pairs: must be >= 0");
    file.pairs_per_set = static_cast<std::size_t>(pairs);
    file.window = field_or<int>(c, "correspondences", "window", 5);
    if (file.window < 1) throw ConfigError("correspondences.window: must be >= 1");
  }

  spec.validate();
  file.echo = doc.dump();
  return file;
}

SceneFile load_scene(const fs::path& path, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scene: cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scene(buffer.str(), seed, path.parent_path());
}

void write_ground_truth(const fs::path& path, const GroundTruth& truth, const std::string& echo) {
  nlohmann::ordered_json doc;
  doc["seed"] = truth.seed;
  auto frames = nlohmann::ordered_json::array();
  for (const auto& p : truth.absolute) {
    nlohmann::ordered_json f;
    f["frame"] = p.to;
    f["a"] = p.a;
    f["b"] = p.b;
    f["offset"] = {truth.motion[static_cast<std::size_t>(p.to)][0], truth.motion[static_cast<std::size_t>(p.to)][1]};
    frames.push_back(std::move(f));
  }
  doc["frames"] = std::move(frames);
  nlohmann::ordered_json field;
  field["width"] = truth.spatial_field.width();
  field["height"] = truth.spatial_field.height();
  field["r"] = std::vector<double>(truth.spatial_field.pixels().begin(), truth.spatial_field.pixels().end());
  doc["spatial_field"] = std::move(field);
  doc["spec"] = echo.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json::parse(echo);

  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

GroundTruth read_ground_truth(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing ground truth " + path.string());
  try {
    const auto doc = json::parse(in);
    GroundTruth truth;
    truth.seed = doc.value("seed", std::uint64_t{0});
    for (const auto& f : doc.at("frames")) {
      const auto frame = f.at("frame").get<FrameIndex>();
      if (frame != static_cast<FrameIndex>(truth.absolute.size())) throw DataError("ground truth frames out of order");
      truth.absolute.push_back({f.at("a").get<double>(), f.at("b").get<double>(), -1, frame});
      const auto& off = f.at("offset");
      truth.motion.push_back({off.at(0).get<int>(), off.at(1).get<int>()});
    }
    const auto& field = doc.at("spatial_field");
    truth.spatial_field =
        Image(field.at("width").get<int>(), field.at("height").get<int>(), field.at("r").get<std::vector<double>>());
    return truth;
  } catch (const json::exception& e) {
    throw DataError("malformed ground truth " + path.string() + ": " + e.what());
  }
}

}  // namespace thermocal
