// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "thermocal/photo_model.hpp"

namespace thermocal {

/// Row-major single-channel image of normalized intensities.
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0);
  Image(int width, int height, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<double> pixels() { return data_; }
  std::span<const double> pixels() const { return data_; }

  bool contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x <= width_ - 1.0 && y <= height_ - 1.0;
  }

  /// Bilinear sample; coordinates are clamped to the image.
  double sample(double x, double y) const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// A normalized frame of a sequence.
struct Frame {
  FrameIndex index = 0;
  Image image;

  /// Throws DataError if an intensity is outside [0,1] or not finite.
  void validate() const;
};

struct ImageSize {
  int width = 0;
  int height = 0;
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Reads a binary PGM (P5). 8-bit and 16-bit samples are normalized by maxval.
Image read_pgm(const std::filesystem::path& path);
/// Writes an 8-bit binary PGM; values are quantized with quantize_u8.
void write_pgm(const std::filesystem::path& path, const Image& image);
/// Writes raw 8-bit samples as a binary PGM.
void write_pgm_u8(const std::filesystem::path& path, int width, int height, std::span<const std::uint8_t> data);
/// Writes an 8-bit binary PPM (P6) from interleaved rgb samples.
void write_ppm_u8(const std::filesystem::path& path, int width, int height, std::span<const std::uint8_t> rgb);

/// Image files (*.pgm) in `dir`, sorted lexicographically by filename.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

}  // namespace thermocal
