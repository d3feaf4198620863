// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#include "thermocal/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <Eigen/SparseCholesky>
#include <json.hpp>

#include "thermocal/errors.hpp"
#include "thermocal/image.hpp"

namespace thermocal {

namespace fs = std::filesystem;

void GridSpec::validate() const {
  if (cells_x < 1 || cells_y < 1) throw ConfigError("grid cells must be >= 1");
  if (width < 1 || height < 1) throw ConfigError("grid image size must be positive");
  if (cells_x > width || cells_y > height) throw ConfigError("grid has more cells than pixels");
}

int GridSpec::cell_of(double x, double y) const {
  const int cx = std::clamp(static_cast<int>(std::floor(x * cells_x / width)), 0, cells_x - 1);
  const int cy = std::clamp(static_cast<int>(std::floor(y * cells_y / height)), 0, cells_y - 1);
  return cy * cells_x + cx;
}

Pixel GridSpec::cell_center(int cell) const {
  const int cx = cell % cells_x;
  const int cy = cell / cells_x;
  // Pixel centers sit on integer coordinates, so a cell spanning [x0, x1)
  // has its center at (x0 + x1 - 1) / 2.
  return {(cx + 0.5) * cell_width() - 0.5, (cy + 0.5) * cell_height() - 0.5};
}

namespace {

struct Observation {
  int n;
  int m;
  double rhs;
};

std::optional<Observation> observe(const CorrespondencePair& pair, const RelativeParams& from_entry,
                                   const RelativeParams& to_entry, const GridSpec& grid,
                                   const ConstraintOptions& options) {
  const int m = grid.cell_of(pair.from.x, pair.from.y);
  const int n = grid.cell_of(pair.to.x, pair.to.y);
  if (n == m) return std::nullopt;
  const double rhs = calibrate_pixel(pair.i_to, to_entry, 0.0) - calibrate_pixel(pair.i_from, from_entry, 0.0);
  if (!std::isfinite(rhs) || std::abs(rhs) > options.max_abs_rhs) return std::nullopt;
  return Observation{n, m, rhs};
}

}  // namespace

std::vector<DifferenceConstraint> accumulate_constraints(std::span<const CorrespondenceSet> sets,
                                                         const ParamChain& chain, const GridSpec& grid,
                                                         const ConstraintOptions& options) {
  ConstraintAccumulator acc(grid, options);
  for (const auto& set : sets) acc.add(set, chain);
  return acc.snapshot();
}

ConstraintAccumulator::ConstraintAccumulator(GridSpec grid, ConstraintOptions options)
    : grid_(grid), options_(options) {
  grid_.validate();
}

void ConstraintAccumulator::add(const CorrespondenceSet& set, const ParamChain& chain) {
  const auto& from_entry = chain.at(set.from);
  const auto& to_entry = chain.at(set.to);
  for (const auto& pair : set.pairs) {
    const auto obs = observe(pair, from_entry, to_entry, grid_, options_);
    if (!obs) continue;
    ++observations_;
    if (!options_.deduplicate) {
      raw_.push_back({obs->n, obs->m, obs->rhs, 1.0});
      continue;
    }
    // Orient every key with the smaller cell first.
    const bool flip = obs->n > obs->m;
    auto& sum = sums_[{flip ? obs->m : obs->n, flip ? obs->n : obs->m, set.from, set.to}];
    sum.rhs += flip ? -obs->rhs : obs->rhs;
    sum.weight += 1.0;
  }
}

std::vector<DifferenceConstraint> ConstraintAccumulator::snapshot() const {
  if (!options_.deduplicate) return raw_;
  std::vector<DifferenceConstraint> out;
  out.reserve(sums_.size());
  for (const auto& [key, sum] : sums_) {
    out.push_back({std::get<0>(key), std::get<1>(key), sum.rhs / sum.weight, sum.weight});
  }
  return out;
}

ComponentLabels connected_components(std::span<const DifferenceConstraint> constraints, const GridSpec& grid) {
  const auto cells = grid.cell_count();
  std::vector<int> parent(cells);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };

  ComponentLabels out;
  out.observed.assign(cells, false);
  for (const auto& c : constraints) {
    if (c.cell_n < 0 || c.cell_m < 0 || static_cast<std::size_t>(c.cell_n) >= cells ||
        static_cast<std::size_t>(c.cell_m) >= cells) {
      throw ContractViolation("constraint references a cell outside the grid");
    }
    out.observed[c.cell_n] = true;
    out.observed[c.cell_m] = true;
    const int a = find(c.cell_n);
    const int b = find(c.cell_m);
    // Smaller index becomes the root, so roots are component minima.
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }

  out.label.resize(cells);
  std::vector<int> sizes(cells, 0);
  for (std::size_t i = 0; i < cells; ++i) {
    out.label[i] = find(static_cast<int>(i));
    if (out.observed[i]) ++sizes[out.label[i]];
  }
  int best = -1;
  for (std::size_t root = 0; root < cells; ++root) {
    if (sizes[root] > 0 && (best < 0 || sizes[root] > sizes[best])) best = static_cast<int>(root);
  }
  if (best >= 0) {
    for (std::size_t i = 0; i < cells; ++i) {
      if (out.observed[i] && out.label[i] == best) out.largest.push_back(static_cast<int>(i));
    }
  }
  return out;
}

SpatialField SpatialField::zeros(const GridSpec& grid) {
  SpatialField field;
  field.grid = grid;
  field.r.assign(grid.cell_count(), 0.0);
  field.source.assign(grid.cell_count(), CellSource::Unsolved);
  field.component.assign(grid.cell_count(), -1);
  return field;
}

double SpatialField::bias_at(double x, double y) const {
  if (r.empty()) return 0.0;
  auto value = [&](int cx, int cy) {
    const int cell = cy * grid.cells_x + cx;
    return source[cell] == CellSource::Unsolved ? 0.0 : r[cell];
  };
  // Continuous cell coordinates with cell centers at integers.
  const double u = std::clamp((x + 0.5) / grid.cell_width() - 0.5, 0.0, grid.cells_x - 1.0);
  const double v = std::clamp((y + 0.5) / grid.cell_height() - 0.5, 0.0, grid.cells_y - 1.0);
  const int x0 = std::min(static_cast<int>(u), std::max(grid.cells_x - 2, 0));
  const int y0 = std::min(static_cast<int>(v), std::max(grid.cells_y - 2, 0));
  const int x1 = std::min(x0 + 1, grid.cells_x - 1);
  const int y1 = std::min(y0 + 1, grid.cells_y - 1);
  const double fx = u - x0;
  const double fy = v - y0;
  const double top = value(x0, y0) + fx * (value(x1, y0) - value(x0, y0));
  const double bottom = value(x0, y1) + fx * (value(x1, y1) - value(x0, y1));
  return top + fy * (bottom - top);
}

Eigen::SparseMatrix<double> build_laplacian(std::span<const DifferenceConstraint> constraints,
                                            std::span<const int> component, std::size_t cell_count) {
  std::vector<int> local(cell_count, -1);
  for (std::size_t k = 0; k < component.size(); ++k) local[component[k]] = static_cast<int>(k);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(4 * constraints.size());
  for (const auto& c : constraints) {
    const int n = local[c.cell_n];
    const int m = local[c.cell_m];
    if (n < 0 || m < 0) continue;
    triplets.emplace_back(n, n, c.weight);
    triplets.emplace_back(m, m, c.weight);
    triplets.emplace_back(n, m, -c.weight);
    triplets.emplace_back(m, n, -c.weight);
  }
  const auto k = static_cast<Eigen::Index>(component.size());
  Eigen::SparseMatrix<double> laplacian(k, k);
  laplacian.setFromTriplets(triplets.begin(), triplets.end());
  return laplacian;
}

SpatialField solve_spatial(std::span<const DifferenceConstraint> constraints, const ComponentLabels& components,
                           const GridSpec& grid) {
  const auto& cells = components.largest;
  if (cells.empty()) throw ContractViolation("solve_spatial: empty component");

  std::vector<int> local(grid.cell_count(), -1);
  for (std::size_t k = 0; k < cells.size(); ++k) local[cells[k]] = static_cast<int>(k);

  const auto k = static_cast<Eigen::Index>(cells.size());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  std::size_t inside = 0;
  for (const auto& c : constraints) {
    const int n = local[c.cell_n];
    const int m = local[c.cell_m];
    if (n < 0 || m < 0) continue;
    ++inside;
    rhs[n] += c.weight * c.rhs;
    rhs[m] -= c.weight * c.rhs;
  }
  if (inside == 0) throw ContractViolation("solve_spatial: no constraint inside the component");

  const Eigen::SparseMatrix<double> laplacian = build_laplacian(constraints, cells, grid.cell_count());

  // The Laplacian of a connected component has rank k-1 with the constant
  // vector as null space. Ground the first unknown, solve the SPD remainder,
  // then shift to mean zero.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(k);
  if (k > 1) {
    const Eigen::SparseMatrix<double> reduced = laplacian.bottomRightCorner(k - 1, k - 1);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(reduced);
    if (solver.info() != Eigen::Success) throw NumericalError("spatial system factorization failed");
    x.tail(k - 1) = solver.solve(rhs.tail(k - 1));
    if (solver.info() != Eigen::Success || !x.allFinite()) throw NumericalError("spatial solve failed");
  }
  x.array() -= x.mean();

  SpatialField field = SpatialField::zeros(grid);
  field.constraint_count = inside;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) field.component[c] = components.label[c];
  for (Eigen::Index i = 0; i < k; ++i) {
    field.r[cells[i]] = x[i];
    field.source[cells[i]] = CellSource::Solved;
  }

  double ss = 0.0;
  double wsum = 0.0;
  for (const auto& c : constraints) {
    const int n = local[c.cell_n];
    const int m = local[c.cell_m];
    if (n < 0 || m < 0) continue;
    const double e = x[n] - x[m] - c.rhs;
    ss += c.weight * e * e;
    wsum += c.weight;
  }
  field.residual_rms = std::sqrt(ss / wsum);
  return field;
}

namespace {

const char* source_name(CellSource s) {
  switch (s) {
    case CellSource::Solved: return "solved";
    case CellSource::Gp: return "gp";
    default: return "none";
  }
}

}  // namespace

void write_field_json(const fs::path& path, const SpatialField& field) {
  nlohmann::ordered_json doc;
  doc["cells_x"] = field.grid.cells_x;
  doc["cells_y"] = field.grid.cells_y;
  doc["width"] = field.grid.width;
  doc["height"] = field.grid.height;
  doc["residual_rms"] = field.residual_rms;
  doc["constraints"] = field.constraint_count;
  auto r = nlohmann::ordered_json::array();
  auto source = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < field.r.size(); ++i) {
    if (field.source[i] == CellSource::Unsolved) {
      r.push_back(nullptr);
    } else {
      r.push_back(field.r[i]);
    }
    source.push_back(source_name(field.source[i]));
  }
  doc["r"] = std::move(r);
  doc["source"] = std::move(source);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

SpatialField read_field_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing spatial field " + path.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    GridSpec grid{doc.at("cells_x").get<int>(), doc.at("cells_y").get<int>(), doc.at("width").get<int>(),
                  doc.at("height").get<int>()};
    grid.validate();
    SpatialField field = SpatialField::zeros(grid);
    field.residual_rms = doc.value("residual_rms", 0.0);
    field.constraint_count = doc.value("constraints", std::size_t{0});
    const auto& r = doc.at("r");
    const auto& source = doc.at("source");
    if (r.size() != grid.cell_count() || source.size() != grid.cell_count()) {
      throw DataError("spatial field size mismatch in " + path.string());
    }
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
      const auto name = source[i].get<std::string>();
      if (r[i].is_null() || name == "none") continue;
      field.r[i] = r[i].get<double>();
      field.source[i] = name == "gp" ? CellSource::Gp : CellSource::Solved;
    }
    return field;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed spatial field " + path.string() + ": " + e.what());
  }
}

void write_field_pgm(const fs::path& path, const SpatialField& field) {
  const auto& grid = field.grid;
  double max_abs = 0.0;
  for (std::size_t i = 0; i < field.r.size(); ++i) {
    if (field.source[i] != CellSource::Unsolved) max_abs = std::max(max_abs, std::abs(field.r[i]));
  }
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(grid.width) * grid.height);
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const int cell = grid.cell_of(x, y);
      double v = 0.5;
      if (field.source[cell] != CellSource::Unsolved && max_abs > 0.0) v = 0.5 + 0.5 * field.r[cell] / max_abs;
      pixels[static_cast<std::size_t>(y) * grid.width + x] =
          field.source[cell] == CellSource::Unsolved ? 0 : quantize_u8(v);
    }
  }
  write_pgm_u8(path, grid.width, grid.height, pixels);
}

}  // namespace thermocal
