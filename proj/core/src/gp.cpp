// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#include "thermocal/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "thermocal/errors.hpp"

namespace thermocal {

GpConfig GpConfig::for_width(int width) {
  GpConfig cfg;
  cfg.length_scale = 0.25 * width;
  return cfg;
}

void GpConfig::validate() const {
  if (!(length_scale > 0.0)) throw ConfigError("gp.length_scale must be positive");
  if (!(signal_variance > 0.0)) throw ConfigError("gp.signal_variance must be positive");
  if (!(noise_variance > 0.0)) throw ConfigError("gp.noise_variance must be positive");
  if (max_training_points < 1) throw ConfigError("gp.max_training_points must be >= 1");
}

double GpModel::kernel(Pixel p, Pixel q) const {
  const double dx = p.x - q.x;
  const double dy = p.y - q.y;
  return cfg_.signal_variance * std::exp(-(dx * dx + dy * dy) / (2.0 * cfg_.length_scale * cfg_.length_scale));
}

GpModel GpModel::fit(std::span<const GpSample> points, const GpConfig& cfg) {
  cfg.validate();
  if (points.empty()) throw ContractViolation("gp_fit needs at least one training point");
  for (const auto& p : points) {
    if (!std::isfinite(p.at.x) || !std::isfinite(p.at.y) || !std::isfinite(p.value)) {
      throw ContractViolation("gp_fit: non-finite training point");
    }
  }

  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  if (points.size() > cfg.max_training_points) {
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(cfg.max_training_points);
    std::sort(order.begin(), order.end());
  }

  GpModel model;
  model.cfg_ = cfg;
  const auto n = static_cast<Eigen::Index>(order.size());
  model.inputs_.resize(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = points[order[i]];
    model.inputs_(i, 0) = p.at.x;
    model.inputs_(i, 1) = p.at.y;
    y[i] = p.value;
  }

  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = k(j, i) = model.kernel({model.inputs_(i, 0), model.inputs_(i, 1)},
                                       {model.inputs_(j, 0), model.inputs_(j, 1)});
    }
  }

  double noise = cfg.noise_variance;
  for (int attempt = 0; attempt < 2; ++attempt) {
    Eigen::MatrixXd kn = k;
    kn.diagonal().array() += noise;
    model.factor_.compute(kn);
    if (model.factor_.info() == Eigen::Success) {
      model.noise_variance_ = noise;
      model.alpha_ = model.factor_.solve(y);
      return model;
    }
    noise *= 10.0;
  }
  throw NumericalError("gp_fit: kernel matrix is ill-conditioned");
}

double GpModel::predict_mean(Pixel query) const {
  double mean = 0.0;
  for (Eigen::Index i = 0; i < inputs_.rows(); ++i) mean += kernel(query, {inputs_(i, 0), inputs_(i, 1)}) * alpha_[i];
  return mean;
}

GpPrediction GpModel::predict(Pixel query) const {
  const auto n = inputs_.rows();
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) ks[i] = kernel(query, {inputs_(i, 0), inputs_(i, 1)});
  GpPrediction out;
  out.mean = ks.dot(alpha_);
  const Eigen::VectorXd v = factor_.matrixL().solve(ks);
  out.variance = cfg_.signal_variance - v.squaredNorm();
  if (out.variance < 0.0) {
    out.variance_clip = -out.variance;
    out.variance = 0.0;
  }
  return out;
}

SpatialField complete_field(const SpatialField& field, const GpConfig& cfg) {
  std::vector<GpSample> samples;
  for (std::size_t c = 0; c < field.r.size(); ++c) {
    if (field.source[c] == CellSource::Solved) {
      samples.push_back({field.grid.cell_center(static_cast<int>(c)), field.r[c]});
    }
  }
  if (samples.empty()) return field;

  const GpModel model = GpModel::fit(samples, cfg);
  SpatialField out = field;
  for (std::size_t c = 0; c < field.r.size(); ++c) {
    if (field.source[c] == CellSource::Solved) continue;
    out.r[c] = model.predict_mean(field.grid.cell_center(static_cast<int>(c)));
    out.source[c] = CellSource::Gp;
  }
  return out;
}

}  // namespace thermocal
