#ifndef PEAKFLOW_REFERENCE_HPP
#define PEAKFLOW_REFERENCE_HPP

#include "peakflow/grid.hpp"
#include "peakflow/operators.hpp"

// Plain serial implementations of the grid kernels, kept as the reference
// the OpenMP versions are tested and benchmarked against. Same formulas,
// same per-cell operation order, no threading.

namespace peakflow::reference {

inline std::vector<double> cell_coefficients(const Field& u, const std::vector<double>& ext,
                                             double expo, double s_bar) {
  const Grid& g = u.grid;
  const int cx = g.cells[0];
  const int cy = g.n == 2 ? g.cells[1] : 1;
  auto E = [&](int i, int j) { return ext[(std::size_t)(j + 1) * (cx + 2) + (i + 1)]; };
  std::vector<double> coef(g.cell_count());
  for (int j = 0; j < cy; ++j)
    for (int i = 0; i < cx; ++i) {
      double c = E(i, j);
      double dxm = c - E(i - 1, j), dxp = E(i + 1, j) - c;
      double g2 = 0.5 * (dxm * dxm + dxp * dxp) / (g.h[0] * g.h[0]);
      if (g.n == 2) {
        double dym = c - E(i, j - 1), dyp = E(i, j + 1) - c;
        g2 += 0.5 * (dym * dym + dyp * dyp) / (g.h[1] * g.h[1]);
      }
      coef[g.idx(i, j)] = pow_fast(s_bar + g2, expo);
    }
  return coef;
}

inline Field p_laplacian_s(const Field& u, double p, double s_bar) {
  const Grid& g = u.grid;
  const int cx = g.cells[0];
  const int cy = g.n == 2 ? g.cells[1] : 1;
  const double hx = g.h[0];
  const double hy = g.n == 2 ? g.h[1] : 1.0;
  std::vector<double> ext = neumann_extend(u);
  auto E = [&](int i, int j) { return ext[(std::size_t)(j + 1) * (cx + 2) + (i + 1)]; };
  std::vector<double> coef = cell_coefficients(u, ext, 0.5 * (p - 2.0), s_bar);

  std::vector<double> fx((std::size_t)(cx + 1) * cy, 0.0);
  std::vector<double> fy((std::size_t)cx * (cy + 1), 0.0);
  for (int j = 0; j < cy; ++j)
    for (int i = 1; i < cx; ++i) {
      double nd = (E(i, j) - E(i - 1, j)) / hx;
      fx[(std::size_t)j * (cx + 1) + i] =
          0.5 * (coef[g.idx(i - 1, j)] + coef[g.idx(i, j)]) * nd;
    }
  if (g.n == 2)
    for (int j = 1; j < cy; ++j)
      for (int i = 0; i < cx; ++i) {
        double nd = (E(i, j) - E(i, j - 1)) / hy;
        fy[(std::size_t)j * cx + i] = 0.5 * (coef[g.idx(i, j - 1)] + coef[g.idx(i, j)]) * nd;
      }

  Field out(g, u.epsilon);
  for (int j = 0; j < cy; ++j)
    for (int i = 0; i < cx; ++i) {
      double d = (fx[(std::size_t)j * (cx + 1) + i + 1] - fx[(std::size_t)j * (cx + 1) + i]) / hx;
      if (g.n == 2) d += (fy[(std::size_t)(j + 1) * cx + i] - fy[(std::size_t)j * cx + i]) / hy;
      out.values[g.idx(i, j)] = d;
    }
  return out;
}

inline Field scheme_energy_density(const Field& u, double p, double s_bar) {
  Field out(u.grid, u.epsilon);
  std::vector<double> ext = neumann_extend(u);
  out.values = cell_coefficients(u, ext, 0.5 * p, s_bar);
  return out;
}

inline double integrate(const Field& u, double exponent) {
  std::vector<double> buf(u.values.size());
  const bool integral = exponent == std::floor(exponent);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    double v = u.values[i];
    if (!integral && v < 0.0) v = 0.0;
    buf[i] = pow_fast(v, exponent);
  }
  return pairwise_sum(buf) * u.grid.cell_volume();
}

inline Field grad_energy_density(const Field& u, double p, double s_bar) {
  const Grid& g = u.grid;
  const int cx = g.cells[0];
  const int cy = g.n == 2 ? g.cells[1] : 1;
  std::vector<double> ext = neumann_extend(u);
  auto E = [&](int i, int j) { return ext[(std::size_t)(j + 1) * (cx + 2) + (i + 1)]; };
  Field out(g, u.epsilon);
  for (int j = 0; j < cy; ++j)
    for (int i = 0; i < cx; ++i) {
      double gx = (E(i + 1, j) - E(i - 1, j)) / (2.0 * g.h[0]);
      double g2 = gx * gx;
      if (g.n == 2) {
        double gy = (E(i, j + 1) - E(i, j - 1)) / (2.0 * g.h[1]);
        g2 += gy * gy;
      }
      out.values[g.idx(i, j)] = pow_fast(s_bar + g2, 0.5 * p);
    }
  return out;
}

} // namespace peakflow::reference

#endif
