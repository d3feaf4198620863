// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <tuple>
#include <vector>

#include <Eigen/SparseCore>

#include "thermocal/correspondence.hpp"
#include "thermocal/photo_model.hpp"

namespace thermocal {

/// Uniform discretization of the image plane into cells_x * cells_y cells.
struct GridSpec {
  int cells_x = 32;
  int cells_y = 32;
  int width = 0;
  int height = 0;

  void validate() const;
  std::size_t cell_count() const { return static_cast<std::size_t>(cells_x) * cells_y; }
  /// Row-major cell index of the cell containing pixel (x, y).
  int cell_of(double x, double y) const;
  /// Pixel-space center of a cell.
  Pixel cell_center(int cell) const;
  double cell_width() const { return static_cast<double>(width) / cells_x; }
  double cell_height() const { return static_cast<double>(height) / cells_y; }
};

/// r[cell_n] - r[cell_m] = rhs, observed `weight` times (weighted mean rhs).
struct DifferenceConstraint {
  int cell_n = 0;
  int cell_m = 0;
  double rhs = 0.0;
  double weight = 1.0;
};

struct ConstraintOptions {
  /// Constraints with |rhs| above this are discarded as gross outliers.
  double max_abs_rhs = 0.5;
  /// Average constraints sharing (cell pair, frame pair) into one weighted row.
  bool deduplicate = true;
};

/// One constraint per cross-cell correspondence:
///   r_n - r_m = (I_to e^{a_1t} + b_1t) - (I_from e^{a_1i} + b_1i)
/// i.e. the difference of the two intensities mapped into the reference
/// frame, so the solved bias is in the units calibrate_pixel subtracts.
/// Same-cell pairs carry no spatial information and are dropped.
std::vector<DifferenceConstraint> accumulate_constraints(std::span<const CorrespondenceSet> sets,
                                                         const ParamChain& chain, const GridSpec& grid,
                                                         const ConstraintOptions& options = {});

/// Append-only constraint store with deduplication over the whole history.
class ConstraintAccumulator {
 public:
  explicit ConstraintAccumulator(GridSpec grid, ConstraintOptions options = {});

  void add(const CorrespondenceSet& set, const ParamChain& chain);
  /// Constraints in a deterministic order (sorted by key).
  std::vector<DifferenceConstraint> snapshot() const;
  std::size_t observations() const { return observations_; }
  const GridSpec& grid() const { return grid_; }

 private:
  struct Sum {
    double rhs = 0.0;
    double weight = 0.0;
  };
  using Key = std::tuple<int, int, FrameIndex, FrameIndex>;

  GridSpec grid_;
  ConstraintOptions options_;
  std::map<Key, Sum> sums_;
  std::vector<DifferenceConstraint> raw_;
  std::size_t observations_ = 0;
};

struct ComponentLabels {
  /// Per cell: the smallest cell index in its component.
  std::vector<int> label;
  /// Per cell: touched by at least one constraint.
  std::vector<bool> observed;
  /// Cells of the largest observed component, ascending. Empty without constraints.
  std::vector<int> largest;
};

/// Union-find over cells linked by constraints. Ties between equally large
/// components go to the one containing the lowest cell index.
ComponentLabels connected_components(std::span<const DifferenceConstraint> constraints, const GridSpec& grid);

enum class CellSource : std::uint8_t { Unsolved, Solved, Gp };

/// Per-cell spatial bias with provenance.
struct SpatialField {
  GridSpec grid;
  std::vector<double> r;
  std::vector<CellSource> source;
  std::vector<int> component;
  double residual_rms = 0.0;
  std::size_t constraint_count = 0;

  static SpatialField zeros(const GridSpec& grid);

  bool solved(int cell) const { return source[cell] == CellSource::Solved; }
  /// Value used at calibration time for pixel (x, y): bilinear interpolation
  /// between cell centers, treating unsolved cells as 0.
  double bias_at(double x, double y) const;
};

/// Graph Laplacian L = A^T W A of the constraints restricted to `component`
/// (unknown k corresponds to component[k]).
Eigen::SparseMatrix<double> build_laplacian(std::span<const DifferenceConstraint> constraints,
                                            std::span<const int> component, std::size_t cell_count);

/// Least-squares bias over the component with mean-zero gauge. Cells outside
/// the component are left Unsolved. Throws ContractViolation when the
/// component is empty or contains no constraint, NumericalError when the
/// grounded system cannot be factorized.
SpatialField solve_spatial(std::span<const DifferenceConstraint> constraints, const ComponentLabels& components,
                           const GridSpec& grid);

/// JSON: {"cells_x","cells_y","width","height","r":[...|null],"source":[...]}.
void write_field_json(const std::filesystem::path& path, const SpatialField& field);
SpatialField read_field_json(const std::filesystem::path& path);
/// Grayscale rendering at image resolution: 128 is zero bias, scaled by max |r|.
void write_field_pgm(const std::filesystem::path& path, const SpatialField& field);

}  // namespace thermocal
