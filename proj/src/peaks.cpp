#include "peakflow/peaks.hpp"

#include "peakflow/operators.hpp"

#include <algorithm>
#include <cmath>

namespace peakflow {

Point boundary_to_ambient(const Grid& grid, const BoundaryPoint& bp) {
  if (grid.n == 1) {
    if (bp.edge == 0) return {0.0, 0.0};
    if (bp.edge == 1) return {grid.lengths[0], 0.0};
    fail(ErrorCode::invalid_parameters, "1d boundary edge must be 0 or 1");
  }
  switch (bp.edge) {
    case 0: return {0.0, bp.arc};
    case 1: return {grid.lengths[0], bp.arc};
    case 2: return {bp.arc, 0.0};
    case 3: return {bp.arc, grid.lengths[1]};
  }
  fail(ErrorCode::invalid_parameters, "2d boundary edge must be in 0..3");
}

int edge_tangent_axis(int edge) { return edge <= 1 ? 1 : 0; }

namespace {

double edge_length(const Grid& grid, int edge) {
  if (grid.n == 1) return 0.0;
  return edge <= 1 ? grid.lengths[1] : grid.lengths[0];
}

double boundary_distance(const Grid& grid, const Point& x) {
  double d = std::min(x[0], grid.lengths[0] - x[0]);
  if (grid.n == 2) d = std::min({d, x[1], grid.lengths[1] - x[1]});
  return d;
}

double dist(const Point& x, const Point& y, int n) {
  double dx = x[0] - y[0];
  double d2 = dx * dx;
  if (n == 2) {
    double dy = x[1] - y[1];
    d2 += dy * dy;
  }
  return std::sqrt(d2);
}

} // namespace

void PeakConfig::validate(const Grid& grid) const {
  if (k() + l() < 1) fail(ErrorCode::invalid_parameters, "need k + l >= 1 peaks");
  if ((int)a.size() != k() || (int)b.size() != l())
    fail(ErrorCode::invalid_parameters, "coefficient counts must match peak counts");
  if (!(epsilon > 0.0)) fail(ErrorCode::invalid_parameters, "epsilon must be positive");
  for (const Point& pt : interior)
    if (boundary_distance(grid, pt) <= 0.0)
      fail(ErrorCode::invalid_parameters, "interior peak lies outside Omega");
  for (const BoundaryPoint& bp : boundary) {
    if (grid.n == 2) {
      double len = edge_length(grid, bp.edge);
      if (bp.edge < 0 || bp.edge > 3 || bp.arc < 0.0 || bp.arc > len)
        fail(ErrorCode::invalid_parameters, "boundary peak is off its edge");
    } else if (bp.edge != 0 && bp.edge != 1) {
      fail(ErrorCode::invalid_parameters, "1d boundary edge must be 0 or 1");
    }
  }
}

NormalizedConfig normalize(const PeakConfig& config) {
  double sum = 0.0;
  for (double v : config.a) sum += v;
  for (double v : config.b) sum += v;
  double mean = sum / (config.k() + config.l());
  NormalizedConfig out{config, mean};
  for (double& v : out.config.a) v /= mean;
  for (double& v : out.config.b) v /= mean;
  return out;
}

const char* traverse_condition_name(TraverseCondition c) {
  switch (c) {
    case TraverseCondition::a: return "a";
    case TraverseCondition::b: return "b";
    case TraverseCondition::c: return "c";
    case TraverseCondition::d: return "d";
    case TraverseCondition::e: return "e";
  }
  return "?";
}

Field build_phi(const PeakConfig& config, const ProfileSampler& sampler, const Grid& grid) {
  config.validate(grid);
  double hmax = grid.n == 2 ? std::max(grid.h[0], grid.h[1]) : grid.h[0];
  if (config.epsilon < 5.0 * hmax)
    fail(ErrorCode::resolution_error, "bump under-resolved: epsilon < 5h");
  Field out(grid, config.epsilon);
  for (int i = 0; i < config.k(); ++i) {
    Field bump = sample_on_grid(sampler, config.interior[i], config.epsilon, grid);
    for (std::size_t c = 0; c < out.values.size(); ++c)
      out.values[c] += config.a[i] * bump.values[c];
  }
  for (int j = 0; j < config.l(); ++j) {
    Field bump = sample_on_grid(sampler, boundary_to_ambient(grid, config.boundary[j]),
                                config.epsilon, grid);
    for (std::size_t c = 0; c < out.values.size(); ++c)
      out.values[c] += config.b[j] * bump.values[c];
  }
  return out;
}

Field build_phi(const PeakConfig& config, const RadialProfile& profile, const Grid& grid) {
  return build_phi(config, ProfileSampler(profile), grid);
}

namespace {

// Half-plane weight: the exact signed overlap fraction of a cell split by
// the plane x_d = t, in [-1, 1].
double plane_weight(double x, double t, double h) {
  return std::clamp(2.0 * (x - t) / h, -1.0, 1.0);
}

} // namespace

double mass_difference_E(const Field& u, Point z, int axis, double t, double eps,
                         int mirror_edge) {
  const Grid& g = u.grid;
  z[axis] = t;
  // mollified ball weight: one-cell linear ramp at the rim (the paper's
  // indicator weight admits alternatives; the ramp keeps E_t continuous on
  // the lattice)
  const double h_ref = g.min_h();
  int i_lo = std::max((int)std::floor((z[0] - eps) / g.h[0] - 1.5), 0);
  int i_hi = std::min((int)std::ceil((z[0] + eps) / g.h[0] + 0.5), g.cells[0] - 1);
  int j_lo = 0, j_hi = 0;
  if (g.n == 2) {
    j_lo = std::max((int)std::floor((z[1] - eps) / g.h[1] - 1.5), 0);
    j_hi = std::min((int)std::ceil((z[1] + eps) / g.h[1] + 0.5), g.cells[1] - 1);
  }
  auto ball = [&](double d2) {
    double d = std::sqrt(d2);
    return std::clamp((eps - d) / h_ref + 0.5, 0.0, 1.0);
  };
  double acc = 0.0;
  for (int j = j_lo; j <= j_hi; ++j)
    for (int i = i_lo; i <= i_hi; ++i) {
      Point xc{g.centre(0, i), g.n == 2 ? g.centre(1, j) : 0.0};
      double v = u.values[g.idx(i, j)];
      double dx = xc[0] - z[0];
      double dy = g.n == 2 ? xc[1] - z[1] : 0.0;
      double w = ball(dx * dx + dy * dy);
      if (w > 0.0) acc += v * w * plane_weight(xc[axis], t, g.h[axis]);
      if (mirror_edge >= 0) {
        Point xm = xc;
        if (mirror_edge == 0) xm[0] = -xc[0];
        else if (mirror_edge == 1) xm[0] = 2.0 * g.lengths[0] - xc[0];
        else if (mirror_edge == 2) xm[1] = -xc[1];
        else xm[1] = 2.0 * g.lengths[1] - xc[1];
        double mx = xm[0] - z[0];
        double my = g.n == 2 ? xm[1] - z[1] : 0.0;
        double wm = ball(mx * mx + my * my);
        if (wm > 0.0) acc += v * wm * plane_weight(xm[axis], t, g.h[axis]);
      }
    }
  return acc * g.cell_volume();
}

namespace {

// bisection on the sign change of E_t within [seed-eps/4, seed+eps/4];
// the continuum bracket is open, so one cell of slack absorbs roots that
// land exactly on the lattice edge of the bracket
double centre_bisect(const Field& u, const Point& z, int axis, double seed_coord, double eps,
                     int mirror_edge) {
  const double slack = u.grid.h[axis];
  double lo = seed_coord - 0.25 * eps - slack;
  double hi = seed_coord + 0.25 * eps + slack;
  double e_lo = mass_difference_E(u, z, axis, lo, eps, mirror_edge);
  double e_hi = mass_difference_E(u, z, axis, hi, eps, mirror_edge);
  if (e_lo == 0.0) return lo;
  if (e_hi == 0.0) return hi;
  if (!(e_lo > 0.0 && e_hi < 0.0))
    fail(ErrorCode::centre_not_found, "no sign change of E_t in the eps/4 bracket");
  while (hi - lo > 1e-8 * eps) {
    double mid = 0.5 * (lo + hi);
    double e = mass_difference_E(u, z, axis, mid, eps, mirror_edge);
    if (e == 0.0) return mid;
    if (e > 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace

Point interior_mass_centre(const Field& u, Point seed, double epsilon) {
  const Grid& g = u.grid;
  Point z = seed;
  for (int sweep = 0; sweep < 50; ++sweep) {
    double move = 0.0;
    for (int axis = 0; axis < g.n; ++axis) {
      double root = centre_bisect(u, z, axis, seed[axis], epsilon, -1);
      move = std::max(move, std::fabs(root - z[axis]));
      z[axis] = root;
    }
    if (move < 1e-3 * epsilon) return z;
  }
  fail(ErrorCode::centre_not_converged, "mass-centre sweeps did not settle in 50 rounds");
}

BoundaryPoint boundary_mass_centre(const Field& u, const BoundaryPoint& seed, double epsilon) {
  const Grid& g = u.grid;
  if (g.n == 1) return seed; // endpoints have no tangential direction
  double len = edge_length(g, seed.edge);
  if (seed.arc <= 0.0 || seed.arc >= len)
    fail(ErrorCode::corner_excluded, "rectangle corners cannot seed a boundary mass centre");
  int axis = edge_tangent_axis(seed.edge);
  Point z = boundary_to_ambient(g, seed);
  BoundaryPoint out = seed;
  for (int sweep = 0; sweep < 50; ++sweep) {
    double root = centre_bisect(u, z, axis, seed.arc, epsilon, seed.edge);
    double move = std::fabs(root - z[axis]);
    z[axis] = root;
    out.arc = root;
    if (move < 1e-3 * epsilon) return out;
  }
  fail(ErrorCode::centre_not_converged, "boundary mass-centre sweeps did not settle in 50 rounds");
}

namespace {

// dense symmetric eigen range by cyclic Jacobi; m is row-major k x k
std::pair<double, double> sym_eigen_range(std::vector<double> m, int k) {
  auto at = [&](int i, int j) -> double& { return m[(std::size_t)i * k + j]; };
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) off += at(i, j) * at(i, j);
    if (off < 1e-30) break;
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) {
        if (at(i, j) == 0.0) continue;
        double theta = 0.5 * std::atan2(2.0 * at(i, j), at(j, j) - at(i, i));
        double c = std::cos(theta), s = std::sin(theta);
        for (int r = 0; r < k; ++r) {
          double mi = at(r, i), mj = at(r, j);
          at(r, i) = c * mi - s * mj;
          at(r, j) = s * mi + c * mj;
        }
        for (int r = 0; r < k; ++r) {
          double mi = at(i, r), mj = at(j, r);
          at(i, r) = c * mi - s * mj;
          at(j, r) = s * mi + c * mj;
        }
      }
  }
  double lo = at(0, 0), hi = at(0, 0);
  for (int i = 1; i < k; ++i) {
    lo = std::min(lo, at(i, i));
    hi = std::max(hi, at(i, i));
  }
  return {lo, hi};
}

std::vector<double> solve_linear(std::vector<double> m, std::vector<double> rhs, int k) {
  auto at = [&](int i, int j) -> double& { return m[(std::size_t)i * k + j]; };
  for (int col = 0; col < k; ++col) {
    int piv = col;
    for (int r = col + 1; r < k; ++r)
      if (std::fabs(at(r, col)) > std::fabs(at(piv, col))) piv = r;
    if (piv != col) {
      for (int c = 0; c < k; ++c) std::swap(at(col, c), at(piv, c));
      std::swap(rhs[col], rhs[piv]);
    }
    for (int r = col + 1; r < k; ++r) {
      double f = at(r, col) / at(col, col);
      for (int c = col; c < k; ++c) at(r, c) -= f * at(col, c);
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> x(k);
  for (int r = k - 1; r >= 0; --r) {
    double acc = rhs[r];
    for (int c = r + 1; c < k; ++c) acc -= at(r, c) * x[c];
    x[r] = acc / at(r, r);
  }
  return x;
}

} // namespace

FitResult fit_coefficients(const Field& u, const std::vector<Point>& interior,
                           const std::vector<BoundaryPoint>& boundary,
                           const RadialProfile& profile, double epsilon) {
  const Grid& g = u.grid;
  const int k = (int)interior.size();
  const int l = (int)boundary.size();
  const int m = k + l;
  if (m < 1) fail(ErrorCode::invalid_parameters, "need at least one centre to fit");

  ProfileSampler sampler(profile);
  std::vector<Field> basis;
  basis.reserve(m);
  for (const Point& pt : interior) basis.push_back(sample_on_grid(sampler, pt, epsilon, g));
  for (const BoundaryPoint& bp : boundary)
    basis.push_back(sample_on_grid(sampler, boundary_to_ambient(g, bp), epsilon, g));

  const double vol = g.cell_volume();
  std::vector<double> gram((std::size_t)m * m), rhs(m);
  std::vector<double> buf(u.values.size());
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      for (std::size_t c = 0; c < buf.size(); ++c) buf[c] = basis[i].values[c] * basis[j].values[c];
      double v = pairwise_sum(buf) * vol;
      gram[(std::size_t)i * m + j] = gram[(std::size_t)j * m + i] = v;
    }
    for (std::size_t c = 0; c < buf.size(); ++c) buf[c] = basis[i].values[c] * u.values[c];
    rhs[i] = pairwise_sum(buf) * vol;
  }

  auto [emin, emax] = sym_eigen_range(gram, m);
  double cond = emin > 0 ? emax / emin : std::numeric_limits<double>::infinity();
  if (!(cond <= 1e8))
    fail(ErrorCode::ill_conditioned_fit, "Gram condition number exceeds 1e8 (peaks too close)");

  std::vector<double> coef = solve_linear(gram, rhs, m);

  for (std::size_t c = 0; c < buf.size(); ++c) {
    double r = u.values[c];
    for (int i = 0; i < m; ++i) r -= coef[i] * basis[i].values[c];
    buf[c] = r * r;
  }
  FitResult out;
  out.residual = pairwise_sum(buf) * vol;
  out.gram_cond = cond;
  out.a.assign(coef.begin(), coef.begin() + k);
  out.b.assign(coef.begin() + k, coef.end());
  return out;
}

DeltaApartResult delta_apart(const PeakConfig& config, const Grid& grid, double delta) {
  DeltaApartResult res;
  for (int i = 0; i < config.k(); ++i) {
    if (boundary_distance(grid, config.interior[i]) <= delta) {
      res.ok = false;
      res.failing_pair = "(p" + std::to_string(i + 1) + ", boundary)";
      return res;
    }
  }
  for (int i = 0; i < config.k(); ++i)
    for (int j = i + 1; j < config.k(); ++j)
      if (dist(config.interior[i], config.interior[j], grid.n) <= 2.0 * delta) {
        res.ok = false;
        res.failing_pair = "(p" + std::to_string(i + 1) + ", p" + std::to_string(j + 1) + ")";
        return res;
      }
  for (int i = 0; i < config.l(); ++i)
    for (int j = i + 1; j < config.l(); ++j) {
      Point qi = boundary_to_ambient(grid, config.boundary[i]);
      Point qj = boundary_to_ambient(grid, config.boundary[j]);
      if (dist(qi, qj, grid.n) <= 2.0 * delta) {
        res.ok = false;
        res.failing_pair = "(q" + std::to_string(i + 1) + ", q" + std::to_string(j + 1) + ")";
        return res;
      }
    }
  return res;
}

MembershipResult membership(const Field& u, const RadialProfile& profile,
                            const MembershipOptions& opts, const PeakConfig& seed) {
  const Grid& g = u.grid;
  seed.validate(g);
  MembershipResult res;
  res.config = seed;
  PeakVerdict& v = res.verdict;

  try {
    for (int i = 0; i < seed.k(); ++i)
      res.config.interior[i] = interior_mass_centre(u, seed.interior[i], seed.epsilon);
    for (int j = 0; j < seed.l(); ++j)
      res.config.boundary[j] = boundary_mass_centre(u, seed.boundary[j], seed.epsilon);
    v.centres_ok = true;
  } catch (const Error& e) {
    v.centres_ok = false;
    v.diagnostic = e.what();
    res.normalized = normalize(res.config);
    return res;
  }

  try {
    FitResult fit = fit_coefficients(u, res.config.interior, res.config.boundary, profile,
                                     seed.epsilon);
    res.config.a = fit.a;
    res.config.b = fit.b;
  } catch (const Error& e) {
    v.centres_ok = false;
    v.diagnostic = e.what();
    res.normalized = normalize(res.config);
    return res;
  }
  res.normalized = normalize(res.config);

  Field phi = build_phi(res.config, profile, g);
  double gap = 0.0;
  for (std::size_t c = 0; c < u.values.size(); ++c)
    gap = std::max(gap, std::fabs(u.values[c] - phi.values[c]));
  v.linf_gap = gap;
  v.gap_ok = gap < opts.deltas.delta_bar;

  DeltaApartResult apart = delta_apart(res.config, g, opts.deltas.delta);
  v.apart_ok = apart.ok;
  if (!apart.ok) v.diagnostic = "delta-apart fails at " + apart.failing_pair;

  v.coeff_ok = true;
  for (double c : res.normalized.config.a)
    if (std::fabs(c - 1.0) >= opts.deltas.delta_hat) v.coeff_ok = false;
  for (double c : res.normalized.config.b)
    if (std::fabs(c - 1.0) >= opts.deltas.delta_hat) v.coeff_ok = false;

  {
    const double eps = seed.epsilon;
    Field dens = grad_energy_density(u, profile.params.p, 0.0);
    double gradp = integrate(dens, 1.0);
    double up = integrate(u, profile.params.p);
    v.energy = (pow_fast(eps, profile.params.p) * gradp + up) / pow_fast(eps, (double)g.n);
    v.energy_ok = v.energy <= opts.energy_cap;
  }

  {
    double best = 0.0;
    const int cx = g.cells[0], cy = g.n == 2 ? g.cells[1] : 1;
    for (int j = 0; j < cy; ++j)
      for (int i = 0; i < cx; ++i) {
        if (i + 1 < cx)
          best = std::max(best, std::fabs(u.at(i + 1, j) - u.at(i, j)) /
                                    std::pow(g.h[0] / seed.epsilon, opts.holder_gamma));
        if (g.n == 2 && j + 1 < cy)
          best = std::max(best, std::fabs(u.at(i, j + 1) - u.at(i, j)) /
                                    std::pow(g.h[1] / seed.epsilon, opts.holder_gamma));
      }
    v.holder_quotient = best;
  }
  bool holder_ok = v.holder_quotient <= opts.holder_cap;

  // Lemma 4.4 bands, first active tag in order a..e
  const double db = opts.deltas.delta_bar, dl = opts.deltas.delta, dh = opts.deltas.delta_hat;
  std::optional<TraverseCondition> band;
  if (gap >= 0.5 * db && gap <= db) band = TraverseCondition::a;
  if (!band)
    for (const Point& pt : res.config.interior) {
      double d = boundary_distance(g, pt);
      if (d >= dl && d <= 2.0 * dl) { band = TraverseCondition::b; break; }
    }
  if (!band)
    for (int i = 0; i < res.config.k() && !band; ++i)
      for (int j = i + 1; j < res.config.k(); ++j) {
        double d = dist(res.config.interior[i], res.config.interior[j], g.n);
        if (d >= dl && d <= 2.0 * dl) { band = TraverseCondition::c; break; }
      }
  if (!band)
    for (int i = 0; i < res.config.l() && !band; ++i)
      for (int j = i + 1; j < res.config.l(); ++j) {
        double d = dist(boundary_to_ambient(g, res.config.boundary[i]),
                        boundary_to_ambient(g, res.config.boundary[j]), g.n);
        if (d >= dl && d <= 2.0 * dl) { band = TraverseCondition::d; break; }
      }
  if (!band) {
    for (double c : res.normalized.config.a)
      if (std::fabs(c - 1.0) >= 0.5 * dh && std::fabs(c - 1.0) <= dh) { band = TraverseCondition::e; break; }
    if (!band)
      for (double c : res.normalized.config.b)
        if (std::fabs(c - 1.0) >= 0.5 * dh && std::fabs(c - 1.0) <= dh) { band = TraverseCondition::e; break; }
  }
  v.failing_condition = band;

  // Sitting inside band a) means u has left the L-inf tube far enough that
  // strict descent applies; the verdict excludes it even though gap < delta_bar.
  bool a_band = band && *band == TraverseCondition::a;
  v.is_peak = v.centres_ok && v.gap_ok && !a_band && v.apart_ok && v.coeff_ok && v.energy_ok &&
              holder_ok;
  return res;
}

} // namespace peakflow
