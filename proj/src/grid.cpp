#include "peakflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace peakflow {

Grid Grid::make_1d(double length, int cx) {
  Grid g;
  g.n = 1;
  g.lengths = {length, 0.0};
  g.cells = {cx, 1};
  g.h = {length / cx, 0.0};
  g.validate();
  return g;
}

Grid Grid::make_2d(double lx, double ly, int cx, int cy) {
  Grid g;
  g.n = 2;
  g.lengths = {lx, ly};
  g.cells = {cx, cy};
  g.h = {lx / cx, ly / cy};
  g.validate();
  return g;
}

void Grid::validate() const {
  if (n != 1 && n != 2) fail(ErrorCode::invalid_parameters, "grid dimension must be 1 or 2");
  for (int a = 0; a < n; ++a) {
    if (!(lengths[a] > 0.0)) fail(ErrorCode::invalid_parameters, "side lengths must be positive");
    if (cells[a] < 8) fail(ErrorCode::invalid_parameters, "need at least 8 cells per axis");
  }
  if (cell_count() > kMaxCells) fail(ErrorCode::invalid_parameters, "cell count exceeds memory cap");
}

double Field::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::fabs(v));
  return m;
}

double Field::max() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  return m;
}

bool Field::finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

} // namespace peakflow
