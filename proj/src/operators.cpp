#include "peakflow/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace peakflow {

std::vector<double> neumann_extend(const Field& u) {
  const Grid& g = u.grid;
  const int cx = g.cells[0];
  const int cy = g.n == 2 ? g.cells[1] : 1;
  std::vector<double> ext((std::size_t)(cx + 2) * (cy + 2));
  auto E = [&](int i, int j) -> double& { return ext[(std::size_t)(j + 1) * (cx + 2) + (i + 1)]; };
  for (int j = 0; j < cy; ++j)
    for (int i = 0; i < cx; ++i) E(i, j) = u.values[g.idx(i, j)];
  for (int j = 0; j < cy; ++j) {
    E(-1, j) = E(0, j);
    E(cx, j) = E(cx - 1, j);
  }
  for (int i = -1; i <= cx; ++i) {
    E(i, -1) = E(i, 0);
    E(i, cy) = E(i, cy - 1);
  }
  return ext;
}

namespace {

// Cell gradient square G2_c: per axis the mean of the two squared face
// differences (Neumann faces contribute zero through the mirror ghosts).
// The discrete Dirichlet energy sum_c vol (s_bar + G2_c)^{p/2} has the flux
// divergence below as its exact gradient (up to the factor p), which is what
// makes the flow a true descent for the measured functional.
void cell_coefficients(const Field& u, const std::vector<double>& ghost, double expo,
                       double s_bar, double grad_scale2, std::vector<double>& coef) {
  const Grid& g = u.grid;
  const bool par = g.cell_count() >= kOmpMinCells;
  const int cx = g.cells[0];
  const int cy = g.n == 2 ? g.cells[1] : 1;
  const double hx2 = g.h[0] * g.h[0];
  const double hy2 = g.n == 2 ? g.h[1] * g.h[1] : 1.0;
  auto E = [&](int i, int j) { return ghost[(std::size_t)(j + 1) * (cx + 2) + (i + 1)]; };
  coef.resize(g.cell_count());
#ifdef PEAKFLOW_OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (int j = 0; j < cy; ++j)
    for (int i = 0; i < cx; ++i) {
      double c = E(i, j);
      double dxm = c - E(i - 1, j), dxp = E(i + 1, j) - c;
      double g2 = 0.5 * (dxm * dxm + dxp * dxp) / hx2;
      if (g.n == 2) {
        double dym = c - E(i, j - 1), dyp = E(i, j + 1) - c;
        g2 += 0.5 * (dym * dym + dyp * dyp) / hy2;
      }
      coef[g.idx(i, j)] = pow_fast(s_bar + grad_scale2 * g2, expo);
    }
}

} // namespace

void p_laplacian_s(const Field& u, double p, double s_bar, Field& out, OperatorWorkspace& ws) {
  const Grid& g = u.grid;
  const bool par = g.cell_count() >= kOmpMinCells;
  if (!(p > 1.0)) fail(ErrorCode::invalid_parameters, "p must be > 1");
  if (p < 2.0 && !(s_bar > 0.0))
    fail(ErrorCode::invalid_parameters, "s_bar must be positive for p < 2");
  const int cx = g.cells[0];
  const int cy = g.n == 2 ? g.cells[1] : 1;
  const double hx = g.h[0];
  const double hy = g.n == 2 ? g.h[1] : 1.0;

  ws.ghost = neumann_extend(u);
  cell_coefficients(u, ws.ghost, 0.5 * (p - 2.0), s_bar, 1.0, ws.buf);
  const std::vector<double>& coef = ws.buf;
  auto E = [&](int i, int j) { return ws.ghost[(std::size_t)(j + 1) * (cx + 2) + (i + 1)]; };

  ws.fx.assign((std::size_t)(cx + 1) * cy, 0.0);
  ws.fy.assign((std::size_t)cx * (cy + 1), 0.0);
  auto FX = [&](int i, int j) -> double& { return ws.fx[(std::size_t)j * (cx + 1) + i]; };
  auto FY = [&](int i, int j) -> double& { return ws.fy[(std::size_t)j * cx + i]; };

  // face flux = mean of the two adjacent cell coefficients times the normal
  // difference; boundary faces stay at zero flux
#ifdef PEAKFLOW_OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (int j = 0; j < cy; ++j)
    for (int i = 1; i < cx; ++i) {
      double nd = (E(i, j) - E(i - 1, j)) / hx;
      FX(i, j) = 0.5 * (coef[g.idx(i - 1, j)] + coef[g.idx(i, j)]) * nd;
    }
  if (g.n == 2) {
#ifdef PEAKFLOW_OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
    for (int j = 1; j < cy; ++j)
      for (int i = 0; i < cx; ++i) {
        double nd = (E(i, j) - E(i, j - 1)) / hy;
        FY(i, j) = 0.5 * (coef[g.idx(i, j - 1)] + coef[g.idx(i, j)]) * nd;
      }
  }

  out.grid = g;
  out.epsilon = u.epsilon;
  out.values.resize(g.cell_count());
#ifdef PEAKFLOW_OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (int j = 0; j < cy; ++j)
    for (int i = 0; i < cx; ++i) {
      double d = (FX(i + 1, j) - FX(i, j)) / hx;
      if (g.n == 2) d += (FY(i, j + 1) - FY(i, j)) / hy;
      out.values[g.idx(i, j)] = d;
    }
  if (!out.finite()) fail(ErrorCode::numerical_overflow, "p_laplacian_s produced non-finite values");
}

Field p_laplacian_s(const Field& u, double p, double s_bar) {
  OperatorWorkspace ws;
  Field out;
  p_laplacian_s(u, p, s_bar, out, ws);
  return out;
}

double integrate(const Field& u, double exponent, OperatorWorkspace& ws) {
  if (!(exponent >= 1.0)) fail(ErrorCode::invalid_parameters, "exponent must be >= 1");
  const std::size_t n = u.values.size();
  const bool par = n >= kOmpMinCells;
  ws.buf.resize(n);
  const bool integral = exponent == std::floor(exponent);
#ifdef PEAKFLOW_OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (long long i = 0; i < (long long)n; ++i) {
    double v = u.values[i];
    if (!integral && v < 0.0)
      v = 0.0; // nonnegativity is a caller precondition for fractional powers
    ws.buf[i] = pow_fast(v, exponent);
  }
  return pairwise_sum(ws.buf) * u.grid.cell_volume();
}

double integrate(const Field& u, double exponent) {
  OperatorWorkspace ws;
  return integrate(u, exponent, ws);
}

Field scheme_energy_density(const Field& u, double p, double s_bar, OperatorWorkspace& ws) {
  Field out(u.grid, u.epsilon);
  ws.ghost = neumann_extend(u);
  cell_coefficients(u, ws.ghost, 0.5 * p, s_bar, 1.0, out.values);
  return out;
}

Field scheme_energy_density(const Field& u, double p, double s_bar) {
  OperatorWorkspace ws;
  return scheme_energy_density(u, p, s_bar, ws);
}

Field grad_energy_density(const Field& u, double p, double s_bar, OperatorWorkspace& ws) {
  const Grid& g = u.grid;
  const bool par = g.cell_count() >= kOmpMinCells;
  const int cx = g.cells[0];
  const int cy = g.n == 2 ? g.cells[1] : 1;
  const double hx = g.h[0];
  const double hy = g.n == 2 ? g.h[1] : 1.0;
  ws.ghost = neumann_extend(u);
  auto E = [&](int i, int j) { return ws.ghost[(std::size_t)(j + 1) * (cx + 2) + (i + 1)]; };

  Field out(g, u.epsilon);
  const double expo = 0.5 * p;
#ifdef PEAKFLOW_OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (int j = 0; j < cy; ++j)
    for (int i = 0; i < cx; ++i) {
      double gx = (E(i + 1, j) - E(i - 1, j)) / (2.0 * hx);
      double g2 = gx * gx;
      if (g.n == 2) {
        double gy = (E(i, j + 1) - E(i, j - 1)) / (2.0 * hy);
        g2 += gy * gy;
      }
      out.values[g.idx(i, j)] = pow_fast(s_bar + g2, expo);
    }
  return out;
}

Field grad_energy_density(const Field& u, double p, double s_bar) {
  OperatorWorkspace ws;
  return grad_energy_density(u, p, s_bar, ws);
}

double diffusion_dt_bound(const Field& u, double p, double s_bar, double epsilon) {
  const Grid& g = u.grid;
  const bool par = g.cell_count() >= kOmpMinCells;
  const int cx = g.cells[0];
  const int cy = g.n == 2 ? g.cells[1] : 1;
  const double epsp = pow_fast(epsilon, p);
  std::vector<double> ghost = neumann_extend(u);
  std::vector<double> coef;
  // y-frame coefficient: s_bar + |D_y u|^2 = s_bar + eps^2 |D_x u|^2
  cell_coefficients(u, ghost, 0.5 * (p - 2.0), s_bar, epsilon * epsilon, coef);

  // per-row minima keep the reduction deterministic under OpenMP
  std::vector<double> best(cy, std::numeric_limits<double>::infinity());
#ifdef PEAKFLOW_OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (int j = 0; j < cy; ++j) {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 1; i < cx; ++i) {
      double c = 0.5 * (coef[g.idx(i - 1, j)] + coef[g.idx(i, j)]);
      m = std::min(m, g.h[0] * g.h[0] / (2.0 * g.n * epsp * c));
    }
    if (g.n == 2 && j >= 1)
      for (int i = 0; i < cx; ++i) {
        double c = 0.5 * (coef[g.idx(i, j - 1)] + coef[g.idx(i, j)]);
        m = std::min(m, g.h[1] * g.h[1] / (2.0 * g.n * epsp * c));
      }
    best[j] = m;
  }
  double m = std::numeric_limits<double>::infinity();
  for (double v : best) m = std::min(m, v);
  return m;
}

} // namespace peakflow
