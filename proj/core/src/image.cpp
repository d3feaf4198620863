// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#include "thermocal/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "thermocal/errors.hpp"

namespace thermocal {

namespace fs = std::filesystem;

Image::Image(int width, int height, double fill)
    : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {
  if (width < 0 || height < 0) throw ContractViolation("negative image dimensions");
}

Image::Image(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 0 || height < 0 || data_.size() != static_cast<std::size_t>(width) * height) {
    throw ContractViolation("image dimensions do not match pixel count");
  }
}

double Image::sample(double x, double y) const {
  x = std::clamp(x, 0.0, width_ - 1.0);
  y = std::clamp(y, 0.0, height_ - 1.0);
  const int x0 = std::min(static_cast<int>(x), width_ - 2 < 0 ? 0 : width_ - 2);
  const int y0 = std::min(static_cast<int>(y), height_ - 2 < 0 ? 0 : height_ - 2);
  const int x1 = std::min(x0 + 1, width_ - 1);
  const int y1 = std::min(y0 + 1, height_ - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (*this)(x0, y0) + fx * ((*this)(x1, y0) - (*this)(x0, y0));
  const double bottom = (*this)(x0, y1) + fx * ((*this)(x1, y1) - (*this)(x0, y1));
  return top + fy * (bottom - top);
}

void Frame::validate() const {
  for (double v : image.pixels()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw DataError("frame " + std::to_string(index) + " has an intensity outside [0,1]");
    }
  }
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string token;
  while (in) {
    int ch = in.peek();
    if (ch == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  in >> token;
  return token;
}

int header_int(std::istream& in, const fs::path& path) {
  const std::string token = header_token(in);
  try {
    std::size_t used = 0;
    const int value = std::stoi(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    throw DataError("malformed PGM header in " + path.string());
  }
}

void write_binary(const fs::path& path, const std::string& header, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << header;
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

Image read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read frame " + path.string());
  if (header_token(in) != "P5") throw DataError("not a binary PGM (P5): " + path.string());
  const int width = header_int(in, path);
  const int height = header_int(in, path);
  const int maxval = header_int(in, path);
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw DataError("invalid PGM header values in " + path.string());
  }
  in.get();  // single whitespace before the raster

  const std::size_t count = static_cast<std::size_t>(width) * height;
  const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(count * bytes_per_sample);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw DataError("truncated PGM raster in " + path.string());

  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned value = bytes_per_sample == 1 ? raw[i] : (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1];
    data[i] = std::min(1.0, static_cast<double>(value) / maxval);
  }
  return Image(width, height, std::move(data));
}

void write_pgm(const fs::path& path, const Image& image) {
  std::vector<std::uint8_t> bytes(image.size());
  std::transform(image.pixels().begin(), image.pixels().end(), bytes.begin(), quantize_u8);
  write_pgm_u8(path, image.width(), image.height(), bytes);
}

void write_pgm_u8(const fs::path& path, int width, int height, std::span<const std::uint8_t> data) {
  if (data.size() != static_cast<std::size_t>(width) * height) throw ContractViolation("PGM size mismatch");
  std::ostringstream header;
  header << "P5\n" << width << ' ' << height << "\n255\n";
  write_binary(path, header.str(), data);
}

void write_ppm_u8(const fs::path& path, int width, int height, std::span<const std::uint8_t> rgb) {
  if (rgb.size() != 3 * static_cast<std::size_t>(width) * height) throw ContractViolation("PPM size mismatch");
  std::ostringstream header;
  header << "P6\n" << width << ' ' << height << "\n255\n";
  write_binary(path, header.str(), rgb);
}

std::vector<fs::path> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("input directory not found: " + dir.string());
  std::vector<fs::path> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm") frames.push_back(entry.path());
  }
  std::sort(frames.begin(), frames.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return frames;
}

}  // namespace thermocal
