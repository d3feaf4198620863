// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#include "thermocal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "thermocal/errors.hpp"
#include "thermocal/param_io.hpp"

namespace thermocal {

namespace {

double corrected(double intensity, const Pixel& at, const RelativeParams& entry, const SpatialField* field) {
  const double bias = field ? field->bias_at(at.x, at.y) : 0.0;
  return calibrate_pixel(intensity, entry, bias);
}

// Two-sided standard normal quantile for `confidence`, by bisection on erf.
double normal_critical(double confidence) {
  double lo = 0.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std::erf(mid / std::sqrt(2.0)) < confidence) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

template <typename T>
nlohmann::ordered_json opt(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string opt_csv(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

const char* to_string(CalibrationMode mode) {
  switch (mode) {
    case CalibrationMode::Uncalibrated:
      return "uncalibrated";
    case CalibrationMode::Temporal:
      return "temporal";
    case CalibrationMode::TemporalSpatial:
      return "temporal_spatial";
  }
  return "unknown";
}

double photometric_error(const CorrespondenceSet& set, const ParamChain& chain, const SpatialField* field,
                         CalibrationMode mode) {
  if (set.empty()) throw MetricError("photometric error of an empty correspondence set");
  if (!set.has_intensities()) throw MetricError("photometric error needs sampled intensities");

  RelativeParams from_entry = RelativeParams::identity(set.from);
  RelativeParams to_entry = RelativeParams::identity(set.to);
  const SpatialField* bias = nullptr;
  if (mode != CalibrationMode::Uncalibrated) {
    if (!chain.contains(set.from) || !chain.contains(set.to)) {
      throw ContractViolation("photometric error: chain does not cover frames " + std::to_string(set.from) + "->" +
                              std::to_string(set.to));
    }
    from_entry = chain.at(set.from);
    to_entry = chain.at(set.to);
  }
  if (mode == CalibrationMode::TemporalSpatial) {
    if (field == nullptr) throw ContractViolation("photometric error: temporal+spatial mode needs a field");
    bias = field;
  }

  double sum = 0.0;
  for (const auto& p : set.pairs) {
    const double from = corrected(p.i_from, p.from, from_entry, bias);
    const double to = corrected(p.i_to, p.to, to_entry, bias);
    sum += std::abs(to - from);
  }
  return 100.0 * sum / static_cast<double>(set.size());
}

double photometric_delta(const RelativeParams& p, const RelativeParams& q) {
  const double dc = p.c() - q.c();
  const double db = p.b - q.b;
  return std::sqrt(dc * dc + db * db);
}

double photometric_delta(const ParamChain& chain, FrameIndex t) {
  if (chain.empty() || t <= chain.reference_frame() || !chain.contains(t) || !chain.contains(t - 1)) {
    throw ContractViolation("photometric delta needs chain entries for frames " + std::to_string(t - 1) + " and " +
                            std::to_string(t));
  }
  return photometric_delta(chain.at(t - 1), chain.at(t));
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ContractViolation("pearson: series lengths differ");
  if (xs.size() < 2) throw ContractViolation("pearson: need at least two samples");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw MetricError("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

PearsonInterval pearson_ci(std::span<const double> xs, std::span<const double> ys, double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw ContractViolation("pearson_ci: confidence must lie in (0,1)");
  if (xs.size() < 4) throw MetricError("pearson_ci: need at least four samples");
  PearsonInterval out;
  out.r = pearson(xs, ys);
  out.n = xs.size();
  const double z = std::atanh(out.r);
  const double half = normal_critical(confidence) / std::sqrt(static_cast<double>(out.n) - 3.0);
  out.lower = std::tanh(z - half);
  out.upper = std::tanh(z + half);
  return out;
}

std::vector<SweepEntry> threshold_sweep(std::span<const double> deltas, std::span<const double> improvements,
                                        std::span<const double> thresholds) {
  if (deltas.size() != improvements.size()) throw ContractViolation("threshold_sweep: series lengths differ");
  std::vector<SweepEntry> out;
  for (double threshold : thresholds) {
    SweepEntry entry;
    entry.threshold = threshold;
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      if (deltas[i] >= threshold) {
        xs.push_back(deltas[i]);
        ys.push_back(improvements[i]);
      }
    }
    entry.n = xs.size();
    if (xs.size() >= 2) {
      try {
        entry.rho = pearson(xs, ys);
        if (xs.size() >= 4) {
          const auto ci = pearson_ci(xs, ys);
          entry.rho_lower = ci.lower;
          entry.rho_upper = ci.upper;
        }
      } catch (const MetricError&) {
        entry.rho.reset();
      }
    }
    out.push_back(entry);
  }
  return out;
}

EvalReport evaluate(std::span<const CorrespondenceSet> sets, const ParamChain& chain, const SpatialField* field,
                    std::span<const double> thresholds) {
  struct Acc {
    std::size_t pairs = 0;
    double unc = 0.0;
    double tmp = 0.0;
    double sp = 0.0;
    bool temporal = true;
  };
  std::map<FrameIndex, Acc> per_frame;
  for (const auto& set : sets) {
    if (set.empty()) continue;
    auto& acc = per_frame[set.to];
    const double n = static_cast<double>(set.size());
    acc.pairs += set.size();
    acc.unc += n * photometric_error(set, chain, nullptr, CalibrationMode::Uncalibrated);
    if (chain.contains(set.from) && chain.contains(set.to)) {
      acc.tmp += n * photometric_error(set, chain, nullptr, CalibrationMode::Temporal);
      if (field) acc.sp += n * photometric_error(set, chain, field, CalibrationMode::TemporalSpatial);
    } else {
      acc.temporal = false;
    }
  }

  EvalReport report;
  std::vector<double> deltas;
  std::vector<double> improvements;
  double sum_unc = 0.0;
  double sum_tmp = 0.0;
  double sum_sp = 0.0;
  std::size_t count_tmp = 0;
  for (const auto& [frame, acc] : per_frame) {
    FrameEval fe;
    fe.frame = frame;
    fe.pairs = acc.pairs;
    const double n = static_cast<double>(acc.pairs);
    fe.uncalibrated = acc.unc / n;
    sum_unc += *fe.uncalibrated;
    if (acc.temporal) {
      fe.temporal = acc.tmp / n;
      sum_tmp += *fe.temporal;
      if (field) {
        fe.temporal_spatial = acc.sp / n;
        sum_sp += *fe.temporal_spatial;
      }
      ++count_tmp;
    }
    if (!chain.empty() && frame > chain.reference_frame() && chain.contains(frame) && chain.contains(frame - 1)) {
      fe.delta = photometric_delta(chain, frame);
      if (fe.temporal) {
        deltas.push_back(*fe.delta);
        improvements.push_back(*fe.uncalibrated - (fe.temporal_spatial ? *fe.temporal_spatial : *fe.temporal));
      }
    }
    report.frames.push_back(fe);
  }
  if (!report.frames.empty()) report.mean_uncalibrated = sum_unc / static_cast<double>(report.frames.size());
  if (count_tmp > 0) {
    report.mean_temporal = sum_tmp / static_cast<double>(count_tmp);
    if (field) report.mean_temporal_spatial = sum_sp / static_cast<double>(count_tmp);
  }
  report.sweep = threshold_sweep(deltas, improvements, thresholds);
  return report;
}

ParameterRecovery parameter_recovery(const ParamChain& chain, const ParamChain& truth, const SpatialField* field,
                                     const std::vector<double>* truth_cell_bias) {
  ParameterRecovery out;
  double sa = 0.0;
  double sb = 0.0;
  double ss = 0.0;
  for (const auto& entry : chain) {
    if (!truth.contains(entry.to)) continue;
    const auto& t = truth.at(entry.to);
    sa += (entry.a - t.a) * (entry.a - t.a);
    sb += (entry.b - t.b) * (entry.b - t.b);
    ss += (entry.scale() - t.scale()) * (entry.scale() - t.scale());
    ++out.frames;
  }
  if (out.frames == 0) throw MetricError("parameter recovery: chain and truth share no frames");
  const double n = static_cast<double>(out.frames);
  out.rmse_a = std::sqrt(sa / n);
  out.rmse_b = std::sqrt(sb / n);
  out.rmse_scale = std::sqrt(ss / n);

  if (field && truth_cell_bias) {
    if (truth_cell_bias->size() != field->r.size()) throw ContractViolation("parameter recovery: field size mismatch");
    std::vector<std::size_t> cells;
    double me = 0.0;
    double mt = 0.0;
    for (std::size_t c = 0; c < field->r.size(); ++c) {
      if (field->source[c] == CellSource::Unsolved) continue;
      cells.push_back(c);
      me += field->r[c];
      mt += (*truth_cell_bias)[c];
    }
    if (!cells.empty()) {
      me /= static_cast<double>(cells.size());
      mt /= static_cast<double>(cells.size());
      double s = 0.0;
      for (auto c : cells) {
        const double d = (field->r[c] - me) - ((*truth_cell_bias)[c] - mt);
        s += d * d;
      }
      out.field_rmse = std::sqrt(s / static_cast<double>(cells.size()));
    }
  }
  return out;
}

void write_report_json(std::ostream& out, const EvalReport& report) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json summary;
  summary["frames"] = report.frames.size();
  summary["mean_uncalibrated"] = opt(report.mean_uncalibrated);
  summary["mean_temporal"] = opt(report.mean_temporal);
  summary["mean_temporal_spatial"] = opt(report.mean_temporal_spatial);
  doc["summary"] = std::move(summary);

  if (report.recovery) {
    nlohmann::ordered_json rec;
    rec["frames"] = report.recovery->frames;
    rec["rmse_a"] = report.recovery->rmse_a;
    rec["rmse_b"] = report.recovery->rmse_b;
    rec["rmse_scale"] = report.recovery->rmse_scale;
    rec["field_rmse"] = opt(report.recovery->field_rmse);
    doc["recovery"] = std::move(rec);
  } else {
    doc["recovery"] = nullptr;
  }

  auto sweep = nlohmann::ordered_json::array();
  for (const auto& s : report.sweep) {
    nlohmann::ordered_json e;
    e["threshold"] = s.threshold;
    e["rho"] = opt(s.rho);
    e["rho_lower"] = opt(s.rho_lower);
    e["rho_upper"] = opt(s.rho_upper);
    e["n"] = s.n;
    sweep.push_back(std::move(e));
  }
  doc["sweep"] = std::move(sweep);

  auto frames = nlohmann::ordered_json::array();
  for (const auto& f : report.frames) {
    nlohmann::ordered_json e;
    e["frame"] = f.frame;
    e["pairs"] = f.pairs;
    e["uncalibrated"] = opt(f.uncalibrated);
    e["temporal"] = opt(f.temporal);
    e["temporal_spatial"] = opt(f.temporal_spatial);
    e["delta"] = opt(f.delta);
    frames.push_back(std::move(e));
  }
  doc["frames"] = std::move(frames);
  out << doc.dump(1) << '\n';
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << "frame,pairs,uncalibrated,temporal,temporal_spatial,delta\n";
  for (const auto& f : report.frames) {
    out << f.frame << ',' << f.pairs << ',' << opt_csv(f.uncalibrated) << ',' << opt_csv(f.temporal) << ','
        << opt_csv(f.temporal_spatial) << ',' << opt_csv(f.delta) << '\n';
  }
}

void write_report_summary(std::ostream& out, const EvalReport& report) {
  auto cell = [](const std::optional<double>& v, int precision) {
    std::ostringstream s;
    if (v) {
      s << std::fixed << std::setprecision(precision) << *v;
    } else {
      s << "-";
    }
    return s.str();
  };
  out << "frames evaluated: " << report.frames.size() << '\n';
  out << std::left << std::setw(20) << "mode" << std::right << std::setw(12) << "error %" << '\n';
  out << std::left << std::setw(20) << "uncalibrated" << std::right << std::setw(12)
      << cell(report.mean_uncalibrated, 4) << '\n';
  out << std::left << std::setw(20) << "temporal" << std::right << std::setw(12) << cell(report.mean_temporal, 4)
      << '\n';
  out << std::left << std::setw(20) << "temporal+spatial" << std::right << std::setw(12)
      << cell(report.mean_temporal_spatial, 4) << '\n';
  out << '\n'
      << std::setw(10) << "delta>=" << std::setw(10) << "rho" << std::setw(10) << "lower" << std::setw(10) << "upper"
      << std::setw(8) << "n" << '\n';
  for (const auto& s : report.sweep) {
    out << std::setw(10) << cell(s.threshold, 2) << std::setw(10) << cell(s.rho, 3) << std::setw(10)
        << cell(s.rho_lower, 3) << std::setw(10) << cell(s.rho_upper, 3) << std::setw(8) << s.n << '\n';
  }
  if (report.recovery) {
    const auto& r = *report.recovery;
    out << "\nparameter recovery over " << r.frames << " frames: rmse a " << std::scientific << std::setprecision(3)
        << r.rmse_a << ", b " << r.rmse_b << ", e^a " << r.rmse_scale;
    if (r.field_rmse) out << ", field " << *r.field_rmse;
    out << std::defaultfloat << '\n';
  } else {
    out << "\nparameter recovery: absent (no ground truth)\n";
  }
}

}  // namespace thermocal
