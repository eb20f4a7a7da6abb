#ifndef PEAKFLOW_GRID_HPP
#define PEAKFLOW_GRID_HPP

#include <array>
#include <cstddef>
#include <vector>

#include "peakflow/common.hpp"

namespace peakflow {

using Point = std::array<double, 2>;

/// Uniform cell-centered rectangular grid over Omega in R^n, n in {1, 2}.
struct Grid {
  int n = 2;
  std::array<double, 2> lengths{1.0, 1.0};
  std::array<int, 2> cells{8, 1};
  std::array<double, 2> h{0.0, 0.0};

  static Grid make_1d(double length, int cx);
  static Grid make_2d(double lx, double ly, int cx, int cy);

  void validate() const;
  std::size_t cell_count() const { return (std::size_t)cells[0] * (n == 2 ? cells[1] : 1); }
  double cell_volume() const { return n == 2 ? h[0] * h[1] : h[0]; }
  double min_h() const { return n == 2 ? std::min(h[0], h[1]) : h[0]; }
  std::size_t idx(int i, int j = 0) const { return (std::size_t)j * cells[0] + i; }
  double centre(int axis, int i) const { return (i + 0.5) * h[axis]; }

  bool operator==(const Grid& o) const {
    return n == o.n && lengths == o.lengths && cells == o.cells;
  }
};

/// Scalar cell-centered function on a Grid; carries the problem scale epsilon.
struct Field {
  Grid grid;
  double epsilon = 1.0;
  std::vector<double> values;

  Field() = default;
  Field(const Grid& g, double eps, double fill = 0.0)
      : grid(g), epsilon(eps), values(g.cell_count(), fill) {}

  double& at(int i, int j = 0) { return values[grid.idx(i, j)]; }
  double at(int i, int j = 0) const { return values[grid.idx(i, j)]; }
  double max_abs() const;
  double max() const;
  bool finite() const;
};

/// Configurable guard against accidentally huge allocations.
inline constexpr std::size_t kMaxCells = std::size_t(1) << 26;

/// Below this cell count the parallel regions cost more than they save.
inline constexpr std::size_t kOmpMinCells = std::size_t(1) << 15;

} // namespace peakflow

#endif
