// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace thermocal {

using FrameIndex = std::int64_t;

/// Affine intensity transfer between two frames.
///
/// Maps an intensity observed in `from` to the intensity of the same scene
/// point in `to` as `(I - b) / e^a`. The log-scale `a` keeps the gain
/// strictly positive. `c = e^a + b` is the derived upper-bound proxy.
struct RelativeParams {
  double a = 0.0;
  double b = 0.0;
  FrameIndex from = 0;
  FrameIndex to = 0;

  double scale() const { return std::exp(a); }
  double c() const { return std::exp(a) + b; }
  double gap() const { return c() - b; }

  static RelativeParams identity(FrameIndex frame) { return {0.0, 0.0, frame, frame}; }
  static RelativeParams from_scale(double scale, double b, FrameIndex from, FrameIndex to) {
    return {std::log(scale), b, from, to};
  }

  friend bool operator==(const RelativeParams&, const RelativeParams&) = default;
};

struct DriftConfig {
  double xi_gap = 0.1;
  double xi_base = 0.025;
  double gap_floor = 0.05;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// (I - b) / e^a. Not clamped.
double apply_forward(const RelativeParams& params, double intensity);

/// Chains `from -> mid` with `mid -> to`. Throws ContractViolation when the
/// inner frame indices disagree.
RelativeParams compose(const RelativeParams& first, const RelativeParams& second);

/// The `to -> from` transfer such that compose(p, inverse(p)) is the identity.
RelativeParams inverse(const RelativeParams& params);

/// Re-expresses an `i -> t` estimate as a `(t-1) -> t` estimate using the
/// 1-referenced entries for frames i and t-1.
RelativeParams change_ref(const RelativeParams& i_to_t, const RelativeParams& ref_to_i,
                          const RelativeParams& ref_to_prev);

/// Soft pull toward the nominal values c = 1, b = 0 plus gap maintenance.
/// The resulting gap c - b is never below `cfg.gap_floor`; when it would be,
/// c and b are moved apart symmetrically about their midpoint.
RelativeParams adjust_for_drift(const RelativeParams& params, const DriftConfig& cfg);

/// I * e^a + b - r: maps an observed intensity into the reference frame.
double calibrate_pixel(double intensity, const RelativeParams& chain_entry, double bias);

/// Cyclic grayscale ramp: 0 -> 0, 0.5 -> 1, 1 -> 0, period 1.
double cyclic_gray(double value);

/// Quantizes a [0,1] value to 8 bits as round(255 v), clamping out-of-range input.
std::uint8_t quantize_u8(double value);

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Closed lookup table (first entry == last entry) for cyclic color mapping.
class ColorPalette {
 public:
  /// Throws ConfigError for fewer than two entries or an open table.
  explicit ColorPalette(std::vector<Rgb> entries);

  /// `size` samples of the cyclic grayscale ramp.
  static ColorPalette grayscale_ramp(std::size_t size = 256);
  /// Bundled cyclic rainbow (hue wheel at full saturation). Optional palette.
  static ColorPalette rainbow(std::size_t size = 256);

  const std::vector<Rgb>& entries() const { return entries_; }

 private:
  std::vector<Rgb> entries_;
};

/// Linear interpolation into the palette at (value mod 1) * (N - 1).
Rgb cyclic_colormap(double value, const ColorPalette& palette);

/// Per-frame parameters relative to the first processed frame.
///
/// Append-only. The first entry is always the identity of the reference frame
/// and frame indices strictly increase.
class ParamChain {
 public:
  ParamChain() = default;
  explicit ParamChain(FrameIndex reference) { entries_.push_back(RelativeParams::identity(reference)); }

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  FrameIndex reference_frame() const;
  FrameIndex last_frame() const;
  bool contains(FrameIndex frame) const;

  /// 1-referenced params for `frame`; throws ContractViolation if absent.
  const RelativeParams& at(FrameIndex frame) const;
  /// Entry at position `i` in processing order.
  const RelativeParams& operator[](std::size_t i) const { return entries_[i]; }

  /// Transfer from frame i to frame j derived from the two chain entries.
  RelativeParams relative(FrameIndex i, FrameIndex j) const;

  /// Appends an already 1-referenced entry. Its `from` must be the reference
  /// frame and its `to` must exceed the last frame.
  void push_back(const RelativeParams& entry);
  /// Appends last_entry composed with a `(last) -> to` transfer.
  void append_relative(const RelativeParams& step);

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<RelativeParams> entries_;
};

}  // namespace thermocal
