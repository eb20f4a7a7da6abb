#include "peakflow/flow.hpp"

#include <algorithm>
#include <cmath>

#include "peakflow/io.hpp"

namespace peakflow {

namespace {

// Per-flow scratch. One pass over the current field produces the cell
// gradient squares, the flux coefficients (s + G2)^{(p-2)/2} and the energy
// density (s + G2)^{p/2}; the fluxes, the dt bound and the functional report
// all reuse them, so a step costs a single fractional-power pass per field.
struct StepWorkspace {
  std::vector<double> ghost, coef, dens, fx, fy;
  std::vector<double> ut2, clip, up, uq;
  OperatorWorkspace ops; // for evaluate_functional parity in make_flow_state
  bool cached = false;   // coef/dens/ghost match state.u
};

void build_coefficients(const Field& u, double p, double s, StepWorkspace& ws) {
  const Grid& g = u.grid;
  const bool par = g.cell_count() >= kOmpMinCells;
  const int cx = g.cells[0];
  const int cy = g.n == 2 ? g.cells[1] : 1;
  const double hx2 = g.h[0] * g.h[0];
  const double hy2 = g.n == 2 ? g.h[1] * g.h[1] : 1.0;
  ws.ghost = neumann_extend(u);
  auto E = [&](int i, int j) { return ws.ghost[(std::size_t)(j + 1) * (cx + 2) + (i + 1)]; };
  ws.coef.resize(g.cell_count());
  ws.dens.resize(g.cell_count());
  const double ec = 0.5 * (p - 2.0), ed = 0.5 * p;
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
      ws.coef[g.idx(i, j)] = pow_fast(s + g2, ec);
      ws.dens[g.idx(i, j)] = pow_fast(s + g2, ed);
    }
  ws.cached = true;
}

// identical arithmetic to diffusion_dt_bound, fed from the cached x-frame
// coefficients: c_y = eps^{p-2} c_x
double dt_from_coefficients(const Field& u, double p, double epsilon,
                            const std::vector<double>& coef) {
  const Grid& g = u.grid;
  const bool par = g.cell_count() >= kOmpMinCells;
  const int cx = g.cells[0];
  const int cy = g.n == 2 ? g.cells[1] : 1;
  const double epsp = pow_fast(epsilon, p);
  const double eps_fac = pow_fast(epsilon, p - 2.0);
  std::vector<double> best(cy, std::numeric_limits<double>::infinity());
#ifdef PEAKFLOW_OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (int j = 0; j < cy; ++j) {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 1; i < cx; ++i) {
      double c = 0.5 * (coef[g.idx(i - 1, j)] + coef[g.idx(i, j)]) * eps_fac;
      m = std::min(m, g.h[0] * g.h[0] / (2.0 * g.n * epsp * c));
    }
    if (g.n == 2 && j >= 1)
      for (int i = 0; i < cx; ++i) {
        double c = 0.5 * (coef[g.idx(i, j - 1)] + coef[g.idx(i, j)]) * eps_fac;
        m = std::min(m, g.h[1] * g.h[1] / (2.0 * g.n * epsp * c));
      }
    best[j] = m;
  }
  double m = std::numeric_limits<double>::infinity();
  for (double v : best) m = std::min(m, v);
  return m;
}

// post-update functional report from the freshly cached density; the
// arithmetic mirrors evaluate_functional term for term
FunctionalReport report_from_cache(const Field& u, const FlowParams& params, StepWorkspace& ws) {
  const bool par = u.grid.cell_count() >= kOmpMinCells;
  const double vol = u.grid.cell_volume();
  const double eps_n = pow_fast(params.epsilon, (double)u.grid.n);
  const double eps_p = pow_fast(params.epsilon, params.p);
  const std::size_t n = u.values.size();
  ws.up.resize(n);
  ws.uq.resize(n);
#ifdef PEAKFLOW_OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (long long i = 0; i < (long long)n; ++i) {
    double v = u.values[i] > 0.0 ? u.values[i] : 0.0;
    ws.up[i] = pow_fast(v, params.p);
    ws.uq[i] = pow_fast(v, params.q);
  }
  double grad_term = pairwise_sum(ws.dens) * vol;
  double up = pairwise_sum(ws.up) * vol;
  double uq = pairwise_sum(ws.uq) * vol;
  FunctionalReport rep;
  rep.A = (eps_p * grad_term + up) / eps_n;
  rep.B = uq / eps_n;
  if (!(rep.B > 1e-300)) fail(ErrorCode::degenerate_field, "int u^q is at the machine floor");
  double Bpq = std::pow(rep.B, params.p / params.q);
  EtaValue ev = eta(rep.A, params.eta);
  rep.I_s = rep.A / Bpq;
  rep.I_s_eta = ev.value / Bpq;
  rep.lambda = ev.value / (ev.derivative * rep.B);
  return rep;
}

// reaction-rate bound: (q-1) lambda u^{q-2} + (p-1) u^{p-2} maximized over
// the clamped range [1e-4 umax, umax]; the clamp keeps p < 2 finite at u ~ 0,
// where overshoots are handled by clipping instead
double reaction_rate_bound(double umax, double lambda, double p, double q) {
  if (!(umax > 0.0)) return 0.0;
  double ulo = 1e-4 * umax;
  double b1 = q >= 2.0 ? pow_fast(umax, q - 2.0) : pow_fast(ulo, q - 2.0);
  double b2 = p >= 2.0 ? pow_fast(umax, p - 2.0) : pow_fast(ulo, p - 2.0);
  return std::abs(q - 1.0) * std::abs(lambda) * b1 + (p - 1.0) * b2;
}

void do_step(FlowState& state, const FlowParams& params, double dt, StepWorkspace& ws) {
  if (state.frozen) fail(ErrorCode::invalid_parameters, "cannot step a frozen flow");
  Field& u = state.u;
  const Grid& g = u.grid;
  const bool par = g.cell_count() >= kOmpMinCells;
  const std::size_t n = u.values.size();
  const int cx = g.cells[0];
  const int cy = g.n == 2 ? g.cells[1] : 1;
  const double hx = g.h[0];
  const double hy = g.n == 2 ? g.h[1] : 1.0;
  const double vol = g.cell_volume();
  const double eps_p = pow_fast(params.epsilon, params.p);
  const double eps_n = pow_fast(params.epsilon, (double)g.n);
  const double lambda = state.history.back().report.lambda;
  const double pm1 = params.p - 1.0, qm1 = params.q - 1.0;

  if (!ws.cached) build_coefficients(u, params.p, params.s, ws);

  // fluxes from the cached cell coefficients
  ws.fx.assign((std::size_t)(cx + 1) * cy, 0.0);
  ws.fy.assign((std::size_t)cx * (cy + 1), 0.0);
  auto E = [&](int i, int j) { return ws.ghost[(std::size_t)(j + 1) * (cx + 2) + (i + 1)]; };
  auto FX = [&](int i, int j) -> double& { return ws.fx[(std::size_t)j * (cx + 1) + i]; };
  auto FY = [&](int i, int j) -> double& { return ws.fy[(std::size_t)j * cx + i]; };
#ifdef PEAKFLOW_OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (int j = 0; j < cy; ++j)
    for (int i = 1; i < cx; ++i)
      FX(i, j) = 0.5 * (ws.coef[g.idx(i - 1, j)] + ws.coef[g.idx(i, j)]) *
                 (E(i, j) - E(i - 1, j)) / hx;
  if (g.n == 2) {
#ifdef PEAKFLOW_OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
    for (int j = 1; j < cy; ++j)
      for (int i = 0; i < cx; ++i)
        FY(i, j) = 0.5 * (ws.coef[g.idx(i, j - 1)] + ws.coef[g.idx(i, j)]) *
                   (E(i, j) - E(i, j - 1)) / hy;
  }

  ws.ut2.resize(n);
  ws.clip.resize(n);
  double umax_before = u.max_abs();

#ifdef PEAKFLOW_OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (int j = 0; j < cy; ++j)
    for (int i = 0; i < cx; ++i) {
      std::size_t c = g.idx(i, j);
      double div = (FX(i + 1, j) - FX(i, j)) / hx;
      if (g.n == 2) div += (FY(i, j + 1) - FY(i, j)) / hy;
      double v = u.values[c];
      double vv = v > 0.0 ? v : 0.0;
      double rhs = eps_p * div + lambda * pow_fast(vv, qm1) - pow_fast(vv, pm1);
      double vn = v + dt * rhs;
      double clipped = 0.0;
      if (vn < 0.0) {
        clipped = -vn;
        vn = 0.0;
      }
      double ut = (vn - v) / dt;
      ws.ut2[c] = ut * ut;
      ws.clip[c] = clipped;
      u.values[c] = vn;
    }
  if (!u.finite()) fail(ErrorCode::numerical_overflow, "flow state overflowed");

  double ut_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) ut_max = std::max(ut_max, std::sqrt(ws.ut2[i]));
  double ut_sq_y = pairwise_sum(ws.ut2) * vol / eps_n;
  double clipped_mass = pairwise_sum(ws.clip) * vol;

  build_coefficients(u, params.p, params.s, ws); // refresh for the new field
  FunctionalReport rep = report_from_cache(u, params, ws);
  double dI = rep.I_s_eta - state.history.back().report.I_s_eta;
  state.t += dt;
  state.steps += 1;
  state.clipped_total += clipped_mass;
  state.B_min = std::min(state.B_min, rep.B);
  state.B_max = std::max(state.B_max, rep.B);
  double ut_max_rel = umax_before > 0 ? ut_max / umax_before : 0.0;
  state.history.push_back({state.t, dt, rep, ut_sq_y, clipped_mass, ut_max_rel});
  if (ut_max_rel < params.conv_tol) state.conv_run += 1;
  else state.conv_run = 0;

  if (dI > 10.0 * params.descent_tol)
    fail(ErrorCode::descent_violation,
         "I_s_eta increased by " + std::to_string(dI) + " in one step");
}

void dump_state(const FlowState& state, const std::string& dir, const std::string& why) {
  if (dir.empty()) return;
  try {
    ensure_dir(dir);
    write_pkfld(state.u, state.t, dir + "/abort.pkfld");
    write_history_csv(state.history, dir + "/run.csv");
    std::FILE* f = std::fopen((dir + "/abort.txt").c_str(), "w");
    if (f) {
      std::fprintf(f, "%s\nt=%.17g steps=%lld\n", why.c_str(), state.t, state.steps);
      std::fclose(f);
    }
  } catch (...) {
  }
}

} // namespace

FlowState make_flow_state(Field u, const FlowParams& params) {
  FlowState st;
  st.u = std::move(u);
  FunctionalReport rep = evaluate_functional(st.u, params.functional());
  st.B0 = st.B_min = st.B_max = rep.B;
  st.history.push_back({0.0, 0.0, rep, 0.0, 0.0, 0.0});
  return st;
}

namespace {

double stable_dt_cached(const FlowState& state, const FlowParams& params, StepWorkspace& ws) {
  if (!ws.cached) build_coefficients(state.u, params.p, params.s, ws);
  double dt_diff = dt_from_coefficients(state.u, params.p, params.epsilon, ws.coef);
  double lambda = state.history.back().report.lambda;
  double rr = reaction_rate_bound(state.u.max(), lambda, params.p, params.q);
  double dt_react = rr > 0.0 ? 1.0 / rr : std::numeric_limits<double>::infinity();
  return params.dt_safety * std::min(dt_diff, dt_react);
}

} // namespace

double stable_dt(const FlowState& state, const FlowParams& params) {
  StepWorkspace ws;
  return stable_dt_cached(state, params, ws);
}

void step(FlowState& state, const FlowParams& params, double dt) {
  StepWorkspace ws;
  do_step(state, params, dt, ws);
}

FlowState run_flow(Field initial, const FlowParams& params, const RunOptions& options) {
  if (!(initial.max() > 0.0)) fail(ErrorCode::degenerate_field, "initial field is trivial");
  FlowState state = make_flow_state(std::move(initial), params);
  StepWorkspace ws;

  std::optional<ProfileSampler> sampler;
  PeakConfig track_seed;
  bool tracking_alive = options.tracking.has_value();
  if (tracking_alive) {
    track_seed = options.tracking->seed;
    sampler.emplace(*options.tracking->profile);
  }

  auto above_threshold = [&](double I) { return I > params.threshold; };

  auto track_now = [&]() -> bool {
    // returns false when tracking is lost
    const TrackingOptions& topt = *options.tracking;
    double I = state.history.back().report.I_s_eta;
    TrackRow row;
    row.t = state.t;
    row.frozen = state.frozen;
    row.above_threshold = above_threshold(I);
    row.I_s_eta = I;
    MembershipResult mr = membership(state.u, *topt.profile, topt.membership, track_seed);
    row.is_peak = mr.verdict.is_peak;
    row.linf_gap = mr.verdict.linf_gap;
    row.normalized = mr.normalized;
    row.band = mr.verdict.failing_condition;
    state.config_track.push_back(row);
    if (!mr.verdict.centres_ok) {
      if (topt.abort_on_loss && !state.frozen && row.above_threshold) {
        dump_state(state, options.dump_dir, "peak_tracking_lost");
        fail(ErrorCode::peak_tracking_lost,
             "mass centres lost while unfrozen above threshold at t=" + std::to_string(state.t));
      }
      return false;
    }
    track_seed = mr.config; // follow the configuration
    return true;
  };

  // freezing check at t = 0 (Step 1 of the minimax uses exactly this)
  if (state.history.back().report.I_s_eta <= params.threshold) {
    state.frozen = true;
    state.freeze_time = 0.0;
  }
  if (tracking_alive) tracking_alive = track_now() || !options.tracking->stop_on_loss;
  if (state.frozen) return state;

  while (state.t < options.t_end && state.steps < options.max_steps) {
    double dt = stable_dt_cached(state, params, ws);
    dt = std::min(dt, options.t_end - state.t);
    if (!(dt > 0.0)) break;
    try {
      do_step(state, params, dt, ws);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::descent_violation || e.code() == ErrorCode::numerical_overflow)
        dump_state(state, options.dump_dir, e.what());
      throw;
    }

    bool froze_now = false;
    if (state.history.back().report.I_s_eta <= params.threshold) {
      state.frozen = true;
      state.freeze_time = state.t;
      froze_now = true;
    }
    if (tracking_alive &&
        (state.steps % options.tracking->every == 0 || froze_now || state.t >= options.t_end)) {
      tracking_alive = track_now() || !options.tracking->stop_on_loss;
      if (!tracking_alive && options.tracking->stop_on_loss) break;
    }
    if (options.snapshot && options.snap_every > 0 && state.steps % options.snap_every == 0)
      options.snapshot(state);

    if (state.frozen) break;
    if (state.conv_run >= params.conv_steps) {
      state.converged = true;
      break;
    }
    if (state.history.size() > options.history_cap) {
      std::vector<HistoryRow> thin;
      thin.reserve(state.history.size() / 2 + 2);
      for (std::size_t i = 0; i + 1 < state.history.size(); i += 2)
        thin.push_back(state.history[i]);
      thin.push_back(state.history.back());
      state.history = std::move(thin);
    }
  }

  if (tracking_alive && (state.config_track.empty() || state.config_track.back().t < state.t))
    track_now();
  return state;
}

ResidualReport stationary_residual(const Field& u, const FlowParams& params) {
  FunctionalReport rep = evaluate_functional(u, params.functional());
  return stationary_residual(u, params, rep.lambda);
}

ResidualReport stationary_residual(const Field& u, const FlowParams& params, double lambda) {
  const std::size_t n = u.values.size();
  const double eps_p = pow_fast(params.epsilon, params.p);
  Field div = p_laplacian_s(u, params.p, params.s);
  std::vector<double> res2(n), scale2(n);
  const double pm1 = params.p - 1.0, qm1 = params.q - 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    double v = std::max(u.values[i], 0.0);
    double reaction = lambda * pow_fast(v, qm1);
    double r = eps_p * div.values[i] - pow_fast(v, pm1) + reaction;
    res2[i] = r * r;
    scale2[i] = reaction * reaction;
  }
  double rs = pairwise_sum(res2);
  double sc = pairwise_sum(scale2);
  if (!(sc > 0.0)) fail(ErrorCode::degenerate_field, "residual scale vanished");
  return {std::sqrt(rs / sc), lambda};
}

Field remove_multiplier(const Field& u, double lambda, double p, double q) {
  if (!(lambda > 0.0)) fail(ErrorCode::invalid_parameters, "lambda must be positive");
  Field out = u;
  double mu = std::pow(lambda, 1.0 / (q - p));
  for (double& v : out.values) v *= mu;
  return out;
}

DescentAudit descent_audit(const FlowState& state, const FlowParams& params) {
  if (state.history.size() < 2)
    fail(ErrorCode::invalid_parameters, "descent audit needs at least two history rows");
  DescentAudit audit;
  for (std::size_t i = 1; i < state.history.size(); ++i) {
    const HistoryRow& prev = state.history[i - 1];
    const HistoryRow& cur = state.history[i];
    double dI = cur.report.I_s_eta - prev.report.I_s_eta;
    audit.worst_step_increase = std::max(audit.worst_step_increase, dI);
    audit.rows += 1;
    // dissipation comparison away from freezing and converged-flat rows;
    // thinned rows (spacing wider than their dt) are skipped
    if (cur.dt <= 0.0 || cur.ut_sq_y <= 0.0) continue;
    if (std::fabs((cur.t - prev.t) - cur.dt) > 1e-9 * std::max(cur.dt, 1e-300)) continue;
    double A = prev.report.A, B = prev.report.B;
    EtaValue ev = eta(A, params.eta);
    double predicted = params.p * ev.derivative / std::pow(B, params.p / params.q) * cur.ut_sq_y;
    if (predicted <= 0.0) continue;
    double measured = -dI / cur.dt;
    if (measured <= 0.0) continue;
    double ratio = measured / predicted;
    audit.ratio_min = std::min(audit.ratio_min, ratio);
    audit.ratio_max = std::max(audit.ratio_max, ratio);
  }
  return audit;
}

namespace {

struct BandSpec {
  std::string name;
  double inner, outer; // inner edge and outer edge values
  bool outward_up;     // true: quantity grows when leaving the class
};

void scan_quantity(const std::vector<double>& ts, const std::vector<double>& qs,
                   const std::vector<bool>& active, const BandSpec& spec,
                   std::vector<std::string>& out) {
  // traverse = enters the band from the inner side, later exits past the
  // outer edge, all while rows are active (unfrozen above threshold)
  bool in_band_from_inner = false;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    if (!active[i]) {
      in_band_from_inner = false;
      continue;
    }
    double v = qs[i];
    bool inner_side = spec.outward_up ? v < spec.inner : v > spec.inner;
    bool outer_side = spec.outward_up ? v > spec.outer : v < spec.outer;
    bool in_band = !inner_side && !outer_side;
    if (outer_side && in_band_from_inner) {
      out.push_back(spec.name + " traversed outward at t=" + std::to_string(ts[i]));
      in_band_from_inner = false;
    } else if (outer_side && i > 0 && active[i - 1]) {
      bool prev_inner = spec.outward_up ? qs[i - 1] < spec.inner : qs[i - 1] > spec.inner;
      if (prev_inner)
        out.push_back(spec.name + " jumped across the band at t=" + std::to_string(ts[i]));
    }
    if (in_band)
      in_band_from_inner = in_band_from_inner || (i > 0 && active[i - 1] &&
                           (spec.outward_up ? qs[i - 1] < spec.inner : qs[i - 1] > spec.inner));
    if (inner_side) in_band_from_inner = false;
  }
}

} // namespace

std::vector<std::string> find_outward_traverses(const FlowState& state, const PeakDeltas& deltas,
                                                const Grid& grid) {
  std::vector<std::string> out;
  const auto& track = state.config_track;
  if (track.size() < 2) return out;

  std::vector<double> ts(track.size());
  std::vector<bool> active(track.size());
  for (std::size_t i = 0; i < track.size(); ++i) {
    ts[i] = track[i].t;
    active[i] = !track[i].frozen && track[i].above_threshold;
  }
  auto collect = [&](const BandSpec& spec, auto&& get) {
    std::vector<double> qs(track.size());
    for (std::size_t i = 0; i < track.size(); ++i) qs[i] = get(track[i]);
    scan_quantity(ts, qs, active, spec, out);
  };

  collect({"condition a) gap", 0.5 * deltas.delta_bar, deltas.delta_bar, true},
          [](const TrackRow& r) { return r.linf_gap; });

  const PeakConfig& c0 = track.front().normalized.config;
  for (int i = 0; i < c0.k(); ++i)
    collect({"condition b) d_p" + std::to_string(i + 1), 2.0 * deltas.delta, deltas.delta, false},
            [&, i](const TrackRow& r) {
              const Point& pt = r.normalized.config.interior[i];
              double d = std::min(pt[0], grid.lengths[0] - pt[0]);
              if (grid.n == 2) d = std::min({d, pt[1], grid.lengths[1] - pt[1]});
              return d;
            });
  for (int i = 0; i < c0.k(); ++i)
    for (int j = i + 1; j < c0.k(); ++j)
      collect({"condition c) |p" + std::to_string(i + 1) + "-p" + std::to_string(j + 1) + "|",
               2.0 * deltas.delta, deltas.delta, false},
              [&, i, j](const TrackRow& r) {
                const Point& a = r.normalized.config.interior[i];
                const Point& b = r.normalized.config.interior[j];
                double dx = a[0] - b[0], dy = grid.n == 2 ? a[1] - b[1] : 0.0;
                return std::sqrt(dx * dx + dy * dy);
              });
  for (int i = 0; i < c0.l(); ++i)
    for (int j = i + 1; j < c0.l(); ++j)
      collect({"condition d) |q" + std::to_string(i + 1) + "-q" + std::to_string(j + 1) + "|",
               2.0 * deltas.delta, deltas.delta, false},
              [&, i, j](const TrackRow& r) {
                Point a = boundary_to_ambient(grid, r.normalized.config.boundary[i]);
                Point b = boundary_to_ambient(grid, r.normalized.config.boundary[j]);
                double dx = a[0] - b[0], dy = grid.n == 2 ? a[1] - b[1] : 0.0;
                return std::sqrt(dx * dx + dy * dy);
              });
  for (int i = 0; i < c0.k() + c0.l(); ++i)
    collect({"condition e) coeff " + std::to_string(i + 1), 0.5 * deltas.delta_hat,
             deltas.delta_hat, true},
            [&, i](const TrackRow& r) {
              const PeakConfig& c = r.normalized.config;
              double v = i < c.k() ? c.a[i] : c.b[i - c.k()];
              return std::fabs(v - 1.0);
            });
  return out;
}

} // namespace peakflow
