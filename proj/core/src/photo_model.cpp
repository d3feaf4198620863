// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#include "thermocal/photo_model.hpp"

#include <algorithm>
#include <sstream>

#include "thermocal/errors.hpp"

namespace thermocal {

namespace {

std::string frames(const RelativeParams& p) {
  std::ostringstream os;
  os << p.from << "->" << p.to;
  return os.str();
}

double wrap_unit(double value) { return value - std::floor(value); }

}  // namespace

void DriftConfig::validate() const {
  if (!(xi_gap >= 0.0 && xi_gap <= 1.0)) throw ConfigError("drift.xi_gap must lie in [0,1]");
  if (!(xi_base >= 0.0 && xi_base < 1.0)) throw ConfigError("drift.xi_base must lie in [0,1)");
  if (!(gap_floor > 0.0)) throw ConfigError("drift.gap_floor must be positive");
}

double apply_forward(const RelativeParams& params, double intensity) {
  return (intensity - params.b) / std::exp(params.a);
}

RelativeParams compose(const RelativeParams& first, const RelativeParams& second) {
  if (first.to != second.from) {
    throw ContractViolation("compose: frame mismatch " + frames(first) + " then " + frames(second));
  }
  const double s1 = std::exp(first.a);
  return {first.a + second.a, first.b + s1 * second.b, first.from, second.to};
}

RelativeParams inverse(const RelativeParams& params) {
  return {-params.a, -params.b / std::exp(params.a), params.to, params.from};
}

RelativeParams change_ref(const RelativeParams& i_to_t, const RelativeParams& ref_to_i,
                          const RelativeParams& ref_to_prev) {
  if (ref_to_i.from != ref_to_prev.from || ref_to_i.to != i_to_t.from) {
    throw ContractViolation("change_ref: inconsistent frames " + frames(i_to_t) + ", " + frames(ref_to_i) +
                            ", " + frames(ref_to_prev));
  }
  if (i_to_t.from == ref_to_prev.to) return i_to_t;

  // i -> t-1 from the two 1-referenced entries.
  const double a_i_prev = ref_to_prev.a - ref_to_i.a;
  const double b_i_prev = (ref_to_prev.b - ref_to_i.b) / std::exp(ref_to_i.a);
  // t-1 -> t
  return {i_to_t.a - a_i_prev, (i_to_t.b - b_i_prev) / std::exp(a_i_prev), ref_to_prev.to, i_to_t.to};
}

RelativeParams adjust_for_drift(const RelativeParams& params, const DriftConfig& cfg) {
  const double scale = std::exp(params.a);
  if (cfg.xi_gap == 0.0 && cfg.xi_base == 0.0 && scale >= cfg.gap_floor) return params;
  double c = scale + params.b;
  double b = params.b;
  const double delta = (1.0 - scale) * cfg.xi_gap;
  c = c - (c - 1.0) * cfg.xi_base + delta;
  b = b - b * cfg.xi_base - delta;

  double gap = c - b;
  if (!(gap >= cfg.gap_floor)) {
    const double mid = 0.5 * (c + b);
    b = mid - 0.5 * cfg.gap_floor;
    gap = cfg.gap_floor;
  }
  return {std::log(gap), b, params.from, params.to};
}

double calibrate_pixel(double intensity, const RelativeParams& chain_entry, double bias) {
  return intensity * std::exp(chain_entry.a) + chain_entry.b - bias;
}

double cyclic_gray(double value) {
  const double m = wrap_unit(value);
  return m < 0.5 ? 2.0 * m : -2.0 * m + 2.0;
}

std::uint8_t quantize_u8(double value) {
  const double v = std::clamp(value, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(255.0 * v));
}

ColorPalette::ColorPalette(std::vector<Rgb> entries) : entries_(std::move(entries)) {
  if (entries_.size() < 2) throw ConfigError("palette needs at least two entries");
  if (!(entries_.front() == entries_.back())) throw ConfigError("palette must be closed (first == last)");
}

ColorPalette ColorPalette::grayscale_ramp(std::size_t size) {
  if (size < 2) throw ConfigError("palette needs at least two entries");
  std::vector<Rgb> entries(size);
  for (std::size_t i = 0; i < size; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(size - 1);
    // t == 1 folds back to 0 through the ramp's periodicity.
    const double g = i + 1 == size ? cyclic_gray(0.0) : cyclic_gray(t);
    entries[i] = {g, g, g};
  }
  return ColorPalette(std::move(entries));
}

ColorPalette ColorPalette::rainbow(std::size_t size) {
  if (size < 2) throw ConfigError("palette needs at least two entries");
  std::vector<Rgb> entries(size);
  for (std::size_t i = 0; i < size; ++i) {
    const double hue = i + 1 == size ? 0.0 : 6.0 * static_cast<double>(i) / static_cast<double>(size - 1);
    const double x = 1.0 - std::abs(std::fmod(hue, 2.0) - 1.0);
    switch (static_cast<int>(hue)) {
      case 0: entries[i] = {1.0, x, 0.0}; break;
      case 1: entries[i] = {x, 1.0, 0.0}; break;
      case 2: entries[i] = {0.0, 1.0, x}; break;
      case 3: entries[i] = {0.0, x, 1.0}; break;
      case 4: entries[i] = {x, 0.0, 1.0}; break;
      default: entries[i] = {1.0, 0.0, x}; break;
    }
  }
  return ColorPalette(std::move(entries));
}

Rgb cyclic_colormap(double value, const ColorPalette& palette) {
  const auto& table = palette.entries();
  const double pos = wrap_unit(value) * static_cast<double>(table.size() - 1);
  const auto lo = std::min(static_cast<std::size_t>(pos), table.size() - 2);
  const double w = pos - static_cast<double>(lo);
  const Rgb& p = table[lo];
  const Rgb& q = table[lo + 1];
  return {p.r + w * (q.r - p.r), p.g + w * (q.g - p.g), p.b + w * (q.b - p.b)};
}

FrameIndex ParamChain::reference_frame() const {
  if (entries_.empty()) throw ContractViolation("empty parameter chain");
  return entries_.front().to;
}

FrameIndex ParamChain::last_frame() const {
  if (entries_.empty()) throw ContractViolation("empty parameter chain");
  return entries_.back().to;
}

bool ParamChain::contains(FrameIndex frame) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), frame,
                             [](const RelativeParams& p, FrameIndex f) { return p.to < f; });
  return it != entries_.end() && it->to == frame;
}

const RelativeParams& ParamChain::at(FrameIndex frame) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), frame,
                             [](const RelativeParams& p, FrameIndex f) { return p.to < f; });
  if (it == entries_.end() || it->to != frame) {
    throw ContractViolation("parameter chain has no entry for frame " + std::to_string(frame));
  }
  return *it;
}

RelativeParams ParamChain::relative(FrameIndex i, FrameIndex j) const {
  return compose(inverse(at(i)), at(j));
}

void ParamChain::push_back(const RelativeParams& entry) {
  if (entries_.empty()) {
    if (entry.from != entry.to || entry.a != 0.0 || entry.b != 0.0) {
      throw ContractViolation("first chain entry must be the reference identity");
    }
  } else if (entry.from != reference_frame() || entry.to <= last_frame()) {
    throw ContractViolation("chain entry " + frames(entry) + " does not extend the chain");
  }
  entries_.push_back(entry);
}

void ParamChain::append_relative(const RelativeParams& step) { push_back(compose(entries_.back(), step)); }

}  // namespace thermocal
