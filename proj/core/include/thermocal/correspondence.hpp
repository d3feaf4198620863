// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "thermocal/image.hpp"
#include "thermocal/photo_model.hpp"

namespace thermocal {

struct Pixel {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// One scene point observed in two frames. Intensities are NaN until sampled.
struct CorrespondencePair {
  double i_from = 0.0;
  double i_to = 0.0;
  Pixel from;
  Pixel to;
};

/// Correspondences from frame `from` into a later frame `to`.
struct CorrespondenceSet {
  FrameIndex from = 0;
  FrameIndex to = 0;
  std::vector<CorrespondencePair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  bool has_intensities() const;
};

/// Fills missing (NaN) intensities by bilinear sampling of the two frames.
void sample_intensities(CorrespondenceSet& set, const Image& from, const Image& to);

// CSV schema: from_frame,to_frame,x_from,y_from,x_to,y_to,i_from,i_to
// Intensity columns may be empty. Sets are returned ordered by (from, to).

/// Throws ParseError (with line number) on malformed rows and on rows that
/// fail validation: from_frame >= to_frame, negative or out-of-bounds
/// coordinates, intensities outside [0,1].
std::vector<CorrespondenceSet> read_correspondences(std::istream& in,
                                                    std::optional<ImageSize> bounds = std::nullopt);
std::vector<CorrespondenceSet> ingest_correspondences(const std::filesystem::path& path,
                                                      std::optional<ImageSize> bounds = std::nullopt);

void write_correspondences(std::ostream& out, const std::vector<CorrespondenceSet>& sets, bool header = true);
void write_correspondences(const std::filesystem::path& path, const std::vector<CorrespondenceSet>& sets);

}  // namespace thermocal
