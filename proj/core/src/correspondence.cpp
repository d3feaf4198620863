// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#include "thermocal/correspondence.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <string_view>

#include "thermocal/errors.hpp"
#include "thermocal/param_io.hpp"

namespace thermocal {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kHeader = "from_frame,to_frame,x_from,y_from,x_to,y_to,i_from,i_to";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view field, const char* name, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(std::string("invalid ") + name + " '" + std::string(field) + "'", line);
  }
  return value;
}

void check_pixel(const Pixel& p, const char* which, const std::optional<ImageSize>& bounds, std::size_t line) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0) {
    throw ParseError(std::string("coordinate ") + which + " out of bounds", line);
  }
  if (bounds && (p.x > bounds->width - 1.0 || p.y > bounds->height - 1.0)) {
    throw ParseError(std::string("coordinate ") + which + " out of bounds", line);
  }
}

}  // namespace

bool CorrespondenceSet::has_intensities() const {
  for (const auto& p : pairs) {
    if (std::isnan(p.i_from) || std::isnan(p.i_to)) return false;
  }
  return true;
}

void sample_intensities(CorrespondenceSet& set, const Image& from, const Image& to) {
  for (auto& p : set.pairs) {
    if (std::isnan(p.i_from)) p.i_from = from.sample(p.from.x, p.from.y);
    if (std::isnan(p.i_to)) p.i_to = to.sample(p.to.x, p.to.y);
  }
}

std::vector<CorrespondenceSet> read_correspondences(std::istream& in, std::optional<ImageSize> bounds) {
  std::map<std::pair<FrameIndex, FrameIndex>, CorrespondenceSet> grouped;
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    if (!seen_header) {
      seen_header = true;
      if (text == kHeader) continue;
      throw ParseError("expected header '" + std::string(kHeader) + "'", line_no);
    }
    const auto fields = split(text);
    if (fields.size() != 8) throw ParseError("expected 8 columns, got " + std::to_string(fields.size()), line_no);

    CorrespondencePair pair;
    const auto from = parse_number<FrameIndex>(fields[0], "from_frame", line_no);
    const auto to = parse_number<FrameIndex>(fields[1], "to_frame", line_no);
    pair.from = {parse_number<double>(fields[2], "x_from", line_no), parse_number<double>(fields[3], "y_from", line_no)};
    pair.to = {parse_number<double>(fields[4], "x_to", line_no), parse_number<double>(fields[5], "y_to", line_no)};
    pair.i_from = fields[6].empty() ? kNaN : parse_number<double>(fields[6], "i_from", line_no);
    pair.i_to = fields[7].empty() ? kNaN : parse_number<double>(fields[7], "i_to", line_no);

    if (from >= to) throw ParseError("from_frame must precede to_frame", line_no);
    check_pixel(pair.from, "x_from/y_from", bounds, line_no);
    check_pixel(pair.to, "x_to/y_to", bounds, line_no);
    for (double v : {pair.i_from, pair.i_to}) {
      if (!std::isnan(v) && !(v >= 0.0 && v <= 1.0)) throw ParseError("intensity outside [0,1]", line_no);
    }

    auto& set = grouped[{from, to}];
    set.from = from;
    set.to = to;
    set.pairs.push_back(pair);
  }

  std::vector<CorrespondenceSet> sets;
  sets.reserve(grouped.size());
  for (auto& [key, set] : grouped) sets.push_back(std::move(set));
  return sets;
}

std::vector<CorrespondenceSet> ingest_correspondences(const fs::path& path, std::optional<ImageSize> bounds) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read correspondences " + path.string());
  return read_correspondences(in, bounds);
}

void write_correspondences(std::ostream& out, const std::vector<CorrespondenceSet>& sets, bool header) {
  if (header) out << kHeader << '\n';
  auto num = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  for (const auto& set : sets) {
    for (const auto& p : set.pairs) {
      out << set.from << ',' << set.to << ',' << format_double(p.from.x) << ',' << format_double(p.from.y) << ','
          << format_double(p.to.x) << ',' << format_double(p.to.y) << ',' << num(p.i_from) << ',' << num(p.i_to)
          << '\n';
    }
  }
}

void write_correspondences(const fs::path& path, const std::vector<CorrespondenceSet>& sets) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_correspondences(out, sets);
}

}  // namespace thermocal
