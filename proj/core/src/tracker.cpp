// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#include "thermocal/tracker.hpp"

#include <algorithm>
#include <cmath>

#include "thermocal/errors.hpp"

namespace thermocal {

void TrackerConfig::validate() const {
  if (max_features < 0) throw ConfigError("tracker.max_features must be >= 0");
  if (pyramid_levels < 1) throw ConfigError("tracker.pyramid_levels must be >= 1");
  if (window_radius < 2) throw ConfigError("tracker.window_radius must be >= 2");
  if (!(min_eigen_threshold >= 0.0)) throw ConfigError("tracker.min_eigen_threshold must be >= 0");
  if (!(max_track_error > 0.0)) throw ConfigError("tracker.max_track_error must be positive");
  if (grid_cells < 1) throw ConfigError("tracker.grid_cells must be >= 1");
  if (max_iterations < 1) throw ConfigError("tracker.max_iterations must be >= 1");
  if (!(epsilon > 0.0)) throw ConfigError("tracker.epsilon must be positive");
}

namespace {

// Separable [1 4 6 4 1]/16 blur followed by 2x subsampling.
Image downsample(const Image& src) {
  const int w = src.width();
  const int h = src.height();
  constexpr double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  Image tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) acc += k[i + 2] * src(std::clamp(x + i, 0, w - 1), y);
      tmp(x, y) = acc;
    }
  }
  const int dw = (w + 1) / 2;
  const int dh = (h + 1) / 2;
  Image dst(dw, dh);
  for (int y = 0; y < dh; ++y) {
    for (int x = 0; x < dw; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) acc += k[i + 2] * tmp(2 * x, std::clamp(2 * y + i, 0, h - 1));
      dst(x, y) = acc;
    }
  }
  return dst;
}

struct Window {
  std::vector<double> values;
  double mean = 0.0;
  double inv_std = 1.0;
};

// Samples the (2r+1)^2 window centered at (cx, cy) and optionally normalizes it.
bool sample_window(const Image& img, double cx, double cy, int r, bool normalize, Window& win) {
  const std::size_t n = static_cast<std::size_t>(2 * r + 1) * (2 * r + 1);
  win.values.resize(n);
  std::size_t i = 0;
  double sum = 0.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const double v = img.sample(cx + dx, cy + dy);
      win.values[i++] = v;
      sum += v;
    }
  }
  if (!normalize) {
    win.mean = 0.0;
    win.inv_std = 1.0;
    return true;
  }
  win.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : win.values) ss += (v - win.mean) * (v - win.mean);
  const double stddev = std::sqrt(ss / static_cast<double>(n));
  if (stddev < 1e-6) return false;
  win.inv_std = 1.0 / stddev;
  for (double& v : win.values) v = (v - win.mean) * win.inv_std;
  return true;
}

bool inside_margin(const Image& img, double x, double y, double margin) {
  return x >= margin && y >= margin && x <= img.width() - 1.0 - margin && y <= img.height() - 1.0 - margin;
}

}  // namespace

Pyramid::Pyramid(const Image& image, int levels) {
  levels_.push_back(image);
  for (int i = 1; i < levels; ++i) {
    const Image& last = levels_.back();
    if (last.width() < 8 || last.height() < 8) break;
    levels_.push_back(downsample(last));
  }
}

std::vector<Pixel> detect_features(const Image& image, const TrackerConfig& cfg) {
  cfg.validate();
  const int w = image.width();
  const int h = image.height();
  if (w < 3 || h < 3 || cfg.max_features == 0) return {};

  double mean = 0.0;
  for (double v : image.pixels()) mean += v;
  mean /= static_cast<double>(image.size());
  double variance = 0.0;
  for (double v : image.pixels()) variance += (v - mean) * (v - mean);
  variance /= static_cast<double>(image.size());
  if (!(variance > 0.0)) return {};
  const double threshold = cfg.min_eigen_threshold * variance;

  Image gx(w, h);
  Image gy(w, h);
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      gx(x, y) = 0.5 * (image(x + 1, y) - image(x - 1, y));
      gy(x, y) = 0.5 * (image(x, y + 1) - image(x, y - 1));
    }
  }

  constexpr int kBlock = 2;
  constexpr double kBlockArea = (2 * kBlock + 1) * (2 * kBlock + 1);
  const int margin = cfg.window_radius + 1;
  Image score(w, h, 0.0);
  for (int y = std::max(margin, kBlock + 1); y < h - std::max(margin, kBlock + 1); ++y) {
    for (int x = std::max(margin, kBlock + 1); x < w - std::max(margin, kBlock + 1); ++x) {
      double sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (int dy = -kBlock; dy <= kBlock; ++dy) {
        for (int dx = -kBlock; dx <= kBlock; ++dx) {
          const double ix = gx(x + dx, y + dy);
          const double iy = gy(x + dx, y + dy);
          sxx += ix * ix;
          syy += iy * iy;
          sxy += ix * iy;
        }
      }
      sxx /= kBlockArea;
      syy /= kBlockArea;
      sxy /= kBlockArea;
      const double half_trace = 0.5 * (sxx + syy);
      const double disc = std::sqrt(0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy);
      score(x, y) = half_trace - disc;
    }
  }

  struct Candidate {
    double score;
    int x, y;
  };
  const int cells = cfg.grid_cells;
  std::vector<Candidate> best(static_cast<std::size_t>(cells) * cells, Candidate{-1.0, -1, -1});
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double s = score(x, y);
      if (!(s > threshold)) continue;
      // Non-maximum suppression over a 5x5 neighborhood; equal scores go to
      // the earliest pixel in raster order.
      bool is_max = true;
      for (int dy = -2; dy <= 2 && is_max; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
          const int nx = x + dx;
          const int ny = y + dy;
          if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const double o = score(nx, ny);
          const bool earlier = ny < y || (ny == y && nx < x);
          if (o > s || (o == s && earlier)) {
            is_max = false;
            break;
          }
        }
      }
      if (!is_max) continue;
      const int cx = std::min(x * cells / w, cells - 1);
      const int cy = std::min(y * cells / h, cells - 1);
      auto& slot = best[static_cast<std::size_t>(cy) * cells + cx];
      if (s > slot.score) slot = {s, x, y};
    }
  }

  std::vector<Candidate> picked;
  for (const auto& c : best) {
    if (c.x >= 0) picked.push_back(c);
  }
  std::stable_sort(picked.begin(), picked.end(), [](const Candidate& a, const Candidate& b) {
    return a.score > b.score;
  });
  if (picked.size() > static_cast<std::size_t>(cfg.max_features)) picked.resize(cfg.max_features);

  std::vector<Pixel> out;
  out.reserve(picked.size());
  for (const auto& c : picked) out.push_back({static_cast<double>(c.x), static_cast<double>(c.y)});
  return out;
}

std::vector<PointTrack> track_points(const Pyramid& prev, const Pyramid& next, std::span<const Pixel> points,
                                     const TrackerConfig& cfg) {
  cfg.validate();
  const int levels = std::min(prev.levels(), next.levels());
  const int r = cfg.window_radius;
  const std::size_t n = static_cast<std::size_t>(2 * r + 1) * (2 * r + 1);

  std::vector<PointTrack> out(points.size());
  Window tmpl;
  Window cur;
  std::vector<double> grad_x(n);
  std::vector<double> grad_y(n);

  for (std::size_t p = 0; p < points.size(); ++p) {
    const Pixel start = points[p];
    double gx_guess = 0.0;
    double gy_guess = 0.0;
    bool ok = true;
    double error = 0.0;

    for (int level = levels - 1; level >= 0 && ok; --level) {
      const Image& img_prev = prev.level(level);
      const Image& img_next = next.level(level);
      const double scale = std::ldexp(1.0, -level);
      const double px = start.x * scale;
      const double py = start.y * scale;

      if (!sample_window(img_prev, px, py, r, cfg.normalize_windows, tmpl)) {
        ok = false;
        break;
      }
      double gxx = 0.0, gyy = 0.0, gxy = 0.0;
      std::size_t i = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx, ++i) {
          const double ix = 0.5 * (img_prev.sample(px + dx + 1, py + dy) - img_prev.sample(px + dx - 1, py + dy));
          const double iy = 0.5 * (img_prev.sample(px + dx, py + dy + 1) - img_prev.sample(px + dx, py + dy - 1));
          grad_x[i] = ix * tmpl.inv_std;
          grad_y[i] = iy * tmpl.inv_std;
          gxx += grad_x[i] * grad_x[i];
          gyy += grad_y[i] * grad_y[i];
          gxy += grad_x[i] * grad_y[i];
        }
      }
      const double det = gxx * gyy - gxy * gxy;
      const double min_eig =
          0.5 * (gxx + gyy) - std::sqrt(0.25 * (gxx - gyy) * (gxx - gyy) + gxy * gxy);
      if (!(min_eig / static_cast<double>(n) > 1e-9) || !(det > 0.0)) {
        ok = false;
        break;
      }

      double dx_total = gx_guess;
      double dy_total = gy_guess;
      for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        const double qx = px + dx_total;
        const double qy = py + dy_total;
        if (!inside_margin(img_next, qx, qy, 0.0)) {
          ok = false;
          break;
        }
        if (!sample_window(img_next, qx, qy, r, cfg.normalize_windows, cur)) {
          ok = false;
          break;
        }
        double bx = 0.0, by = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double diff = tmpl.values[k] - cur.values[k];
          bx += grad_x[k] * diff;
          by += grad_y[k] * diff;
        }
        const double step_x = (gyy * bx - gxy * by) / det;
        const double step_y = (gxx * by - gxy * bx) / det;
        dx_total += step_x;
        dy_total += step_y;
        if (step_x * step_x + step_y * step_y < cfg.epsilon * cfg.epsilon) break;
      }
      if (!ok) break;

      if (level == 0) {
        gx_guess = dx_total;
        gy_guess = dy_total;
      } else {
        gx_guess = 2.0 * dx_total;
        gy_guess = 2.0 * dy_total;
      }
    }

    PointTrack& result = out[p];
    result.position = {start.x + gx_guess, start.y + gy_guess};
    if (ok && !next.level(0).contains(result.position.x, result.position.y)) ok = false;
    if (ok) {
      const Image& img_prev = prev.level(0);
      const Image& img_next = next.level(0);
      if (!sample_window(img_prev, start.x, start.y, r, cfg.normalize_windows, tmpl) ||
          !sample_window(img_next, result.position.x, result.position.y, r, cfg.normalize_windows, cur)) {
        ok = false;
      } else {
        double ss = 0.0;
        for (std::size_t k = 0; k < n; ++k) ss += (tmpl.values[k] - cur.values[k]) * (tmpl.values[k] - cur.values[k]);
        error = ss / static_cast<double>(n);
        if (!(error <= cfg.max_track_error)) ok = false;
      }
    }
    result.error = error;
    result.ok = ok;
  }
  return out;
}

TrackResult track(const Frame& prev, const Frame& next, std::span<const Pixel> points, const TrackerConfig& cfg) {
  if (prev.image.width() != next.image.width() || prev.image.height() != next.image.height()) {
    throw ContractViolation("track: frames differ in size");
  }
  const Pyramid prev_pyr(prev.image, cfg.pyramid_levels);
  const Pyramid next_pyr(next.image, cfg.pyramid_levels);
  const auto tracks = track_points(prev_pyr, next_pyr, points, cfg);

  TrackResult result;
  result.set.from = prev.index;
  result.set.to = next.index;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (!tracks[i].ok) {
      ++result.dropped;
      continue;
    }
    CorrespondencePair pair;
    pair.from = points[i];
    pair.to = tracks[i].position;
    pair.i_from = prev.image.sample(pair.from.x, pair.from.y);
    pair.i_to = next.image.sample(pair.to.x, pair.to.y);
    result.set.pairs.push_back(pair);
    result.source.push_back(i);
  }
  return result;
}

}  // namespace thermocal
