#include "peakflow/minimax.hpp"

#include <algorithm>
#include <cmath>

namespace peakflow {

int g_dimension(const GSpec& spec, int n) { return (n + 1) * spec.k + n * spec.l - 1; }

MembershipOptions default_membership(const GSpec& spec, const RadialProfile& profile,
                                     double epsilon) {
  MembershipOptions opts;
  opts.deltas.delta = spec.delta(epsilon);
  opts.deltas.delta_bar = 0.1 * profile.beta;
  opts.deltas.delta_hat = spec.delta_hat;
  opts.energy_cap = 3.0 * (spec.k + spec.l) * profile.E_p;
  return opts;
}

namespace {

std::vector<double> axis_lattice(double lo, double hi, int res) {
  std::vector<double> out;
  if (res <= 1 || hi <= lo) {
    out.push_back(0.5 * (lo + hi));
    return out;
  }
  for (int i = 0; i < res; ++i) out.push_back(lo + (hi - lo) * i / (res - 1));
  return out;
}

// unordered combinations of size k from a point set
template <class T>
void combinations(const std::vector<T>& pool, int k, std::vector<std::vector<T>>& out) {
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  if ((int)pool.size() < k) return;
  while (true) {
    std::vector<T> pick;
    for (int i : idx) pick.push_back(pool[i]);
    out.push_back(pick);
    int j = k - 1;
    while (j >= 0 && idx[j] == (int)pool.size() - k + j) --j;
    if (j < 0) break;
    ++idx[j];
    for (int r = j + 1; r < k; ++r) idx[r] = idx[r - 1] + 1;
  }
}

// mean-one coefficient slices over (1 - dh, 1 + dh)
std::vector<std::vector<double>> coefficient_slices(int count, double delta_hat, int res) {
  std::vector<std::vector<double>> out;
  if (count == 1) {
    out.push_back({1.0});
    return out;
  }
  std::vector<double> axis = axis_lattice(1.0 - 0.5 * delta_hat, 1.0 + 0.5 * delta_hat, res);
  std::vector<std::vector<double>> partial{{}};
  for (int c = 0; c + 1 < count; ++c) {
    std::vector<std::vector<double>> next;
    for (const auto& head : partial)
      for (double v : axis) {
        auto h = head;
        h.push_back(v);
        next.push_back(h);
      }
    partial = next;
  }
  for (auto& head : partial) {
    double sum = 0.0;
    for (double v : head) sum += v;
    double last = count - sum;
    if (last <= 1.0 - delta_hat || last >= 1.0 + delta_hat) continue;
    head.push_back(last);
    out.push_back(head);
  }
  return out;
}

} // namespace

std::vector<GSample> sample_G(const GSpec& spec, const Grid& grid, const RadialProfile& profile,
                              double epsilon) {
  if (spec.k + spec.l < 1) fail(ErrorCode::invalid_parameters, "need k + l >= 1");
  const double delta = spec.delta(epsilon);
  std::vector<GSample> samples;

  // interior position pool: lattice over [0.9 delta, L - 0.9 delta]; the
  // endpoints violate the apart condition and become boundary-of-G seeds
  std::vector<Point> ipool;
  {
    std::vector<double> xs = axis_lattice(0.9 * delta, grid.lengths[0] - 0.9 * delta,
                                          spec.pos_res);
    if (grid.n == 2) {
      std::vector<double> ys = axis_lattice(0.9 * delta, grid.lengths[1] - 0.9 * delta,
                                            spec.pos_res);
      for (double y : ys)
        for (double x : xs) ipool.push_back({x, y});
    } else {
      for (double x : xs) ipool.push_back({x, 0.0});
    }
  }

  std::vector<BoundaryPoint> bpool;
  if (spec.l > 0) {
    if (grid.n == 1) {
      bpool.push_back({0, 0.0});
      bpool.push_back({1, 0.0});
    } else {
      int res = spec.bpos_res > 0 ? spec.bpos_res : spec.pos_res;
      for (int edge = 0; edge < 4; ++edge) {
        double len = edge <= 1 ? grid.lengths[1] : grid.lengths[0];
        for (double arc : axis_lattice(std::max(delta, 0.05 * len),
                                       len - std::max(delta, 0.05 * len), res))
          bpool.push_back({edge, arc});
      }
    }
  }

  std::vector<std::vector<Point>> ichoices{{}};
  if (spec.k > 0) {
    ichoices.clear();
    combinations(ipool, spec.k, ichoices);
  }
  std::vector<std::vector<BoundaryPoint>> bchoices{{}};
  if (spec.l > 0) {
    bchoices.clear();
    combinations(bpool, spec.l, bchoices);
  }
  auto slices = coefficient_slices(spec.k + spec.l, spec.delta_hat, spec.coeff_res);

  for (const auto& ipick : ichoices)
    for (const auto& bpick : bchoices)
      for (const auto& coeffs : slices) {
        GSample s;
        s.config.interior = ipick;
        s.config.boundary = bpick;
        s.config.a.assign(coeffs.begin(), coeffs.begin() + spec.k);
        s.config.b.assign(coeffs.begin() + spec.k, coeffs.end());
        s.config.epsilon = epsilon;
        s.boundary_of_G = !delta_apart(s.config, grid, delta).ok;
        samples.push_back(std::move(s));
      }

  // coefficient-box edges of G (only exist when the coefficient factor does)
  if (spec.k + spec.l > 1 && !samples.empty()) {
    const GSample* deep = nullptr;
    double best = -1.0;
    for (const GSample& s : samples) {
      if (s.boundary_of_G) continue;
      double d = std::numeric_limits<double>::infinity();
      for (const Point& pt : s.config.interior) {
        d = std::min({d, pt[0], grid.lengths[0] - pt[0]});
        if (grid.n == 2) d = std::min({d, pt[1], grid.lengths[1] - pt[1]});
      }
      if (d > best) {
        best = d;
        deep = &s;
      }
    }
    if (deep) {
      int m = spec.k + spec.l;
      for (int sign = -1; sign <= 1; sign += 2) {
        GSample s = *deep;
        double edge = 1.0 + sign * 0.95 * spec.delta_hat;
        double rest = (m - edge) / (m - 1);
        if (rest <= 1.0 - spec.delta_hat || rest >= 1.0 + spec.delta_hat) continue;
        std::vector<double> coeffs(m, rest);
        coeffs[0] = edge;
        s.config.a.assign(coeffs.begin(), coeffs.begin() + spec.k);
        s.config.b.assign(coeffs.begin() + spec.k, coeffs.end());
        s.boundary_of_G = true; // at the coefficient box edge
        samples.push_back(std::move(s));
      }
    }
  }

  bool any_interior = false;
  for (const GSample& s : samples)
    if (!s.boundary_of_G) any_interior = true;
  if (!any_interior)
    fail(ErrorCode::infeasible_G, "no delta-apart sample fits: domain too small for this (k, l)");
  (void)profile;
  return samples;
}

namespace {

bool centres_near_seed(const NormalizedConfig& now, const PeakConfig& seed, const Grid& grid,
                       double radius) {
  for (int i = 0; i < seed.k(); ++i) {
    double dx = now.config.interior[i][0] - seed.interior[i][0];
    double dy = grid.n == 2 ? now.config.interior[i][1] - seed.interior[i][1] : 0.0;
    if (std::sqrt(dx * dx + dy * dy) > radius) return false;
  }
  for (int j = 0; j < seed.l(); ++j) {
    if (now.config.boundary[j].edge != seed.boundary[j].edge) return false;
    if (std::fabs(now.config.boundary[j].arc - seed.boundary[j].arc) > radius) return false;
  }
  return true;
}

} // namespace

double estimate_S(const GSample& sample, const GSpec& spec, const RadialProfile& profile,
                  const Grid& grid, FlowParams params, const MinimaxSchedule& schedule) {
  params.threshold = -std::numeric_limits<double>::infinity();
  Field phi = build_phi(sample.config, profile, grid);

  RunOptions opts;
  opts.t_end = schedule.estimate_horizon;
  TrackingOptions tr;
  tr.profile = &profile;
  tr.seed = sample.config;
  tr.membership = default_membership(spec, profile, sample.config.epsilon);
  tr.every = schedule.track_every;
  tr.abort_on_loss = false;
  tr.stop_on_loss = true;
  opts.tracking = tr;

  FlowState st = run_flow(std::move(phi), params, opts);

  const double radius = schedule.tracking_radius_frac * spec.delta(sample.config.epsilon);
  double inf = std::numeric_limits<double>::infinity();
  for (const TrackRow& row : st.config_track) {
    if (!row.is_peak) continue;
    if (!centres_near_seed(row.normalized, sample.config, grid, radius)) continue;
    inf = std::min(inf, row.I_s_eta);
  }
  if (!std::isfinite(inf))
    fail(ErrorCode::estimate_failed, "tracking lost before any trajectory record");
  return inf;
}

SStarEstimate estimate_S_star(const std::vector<GSample>& samples) {
  SStarEstimate out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const GSample& s = samples[i];
    if (s.boundary_of_G || !s.estimate_ok) continue;
    if (out.argmax < 0 || s.S_estimate > out.S_star) {
      out.S_star = s.S_estimate;
      out.argmax = (int)i;
    }
  }
  if (out.argmax < 0) fail(ErrorCode::estimate_failed, "no successful S estimate");
  return out;
}

TrackTResult track_T(const GSample& sample, const GSpec& spec, const RadialProfile& profile,
                     const Grid& grid, FlowParams params, double threshold, double t,
                     const MinimaxSchedule& schedule) {
  if (sample.boundary_of_G || t <= 0.0)
    return {normalize(sample.config), sample.boundary_of_G};

  params.threshold = threshold;
  Field phi = build_phi(sample.config, profile, grid);
  RunOptions opts;
  opts.t_end = t;
  TrackingOptions tr;
  tr.profile = &profile;
  tr.seed = sample.config;
  tr.membership = default_membership(spec, profile, sample.config.epsilon);
  tr.every = schedule.track_every;
  opts.tracking = tr;
  FlowState st = run_flow(std::move(phi), params, opts);
  if (st.config_track.empty()) return {normalize(sample.config), st.frozen};
  return {st.config_track.back().normalized, st.frozen};
}

MinimaxReport minimax_solve(const GSpec& spec, const RadialProfile& profile, const Grid& grid,
                            FlowParams params, const MinimaxSchedule& schedule,
                            const std::string& out_dir) {
  MinimaxReport report;
  report.S0 = sobolev_constant(profile).S0;
  report.reference = reference_level(spec.k, spec.l, profile.params.p, profile.params.q,
                                     report.S0);
  report.samples = sample_G(spec, grid, profile, params.epsilon);

  // pass 1: S(Lambda) estimates for the interior of G
  for (GSample& s : report.samples) {
    Field phi = build_phi(s.config, profile, grid);
    s.I0 = evaluate_functional(phi, params.functional()).I_s_eta;
    if (s.boundary_of_G) continue;
    try {
      s.S_estimate = estimate_S(s, spec, profile, grid, params, schedule);
      s.estimate_ok = true;
    } catch (const Error&) {
      s.estimate_ok = false;
    }
  }
  SStarEstimate star = estimate_S_star(report.samples);
  report.S_star = star.S_star;
  report.argmax = star.argmax;
  if (params.sigma <= 0.0) params.sigma = 1e-4 * report.S0;
  report.threshold = report.S_star - params.sigma;
  params.threshold = report.threshold;
  report.relative_gap = std::fabs(report.S_star - report.reference) / report.S0;

  // Step 1: boundary-of-G seeds must sit at or below the threshold at t = 0
  int boundary_count = 0, boundary_frozen = 0;
  for (GSample& s : report.samples) {
    if (!s.boundary_of_G) continue;
    ++boundary_count;
    s.frozen_at_zero = s.I0 <= report.threshold;
    if (s.frozen_at_zero) ++boundary_frozen;
  }
  report.boundary_frozen_fraction =
      boundary_count > 0 ? (double)boundary_frozen / boundary_count : 1.0;

  // Steps 2/3: frozen pass over the interior; containment and traverses
  int winner = -1;
  double best_duration = -1.0;
  double best_I = -std::numeric_limits<double>::infinity();
  Field winner_final;
  PeakConfig winner_seed;
  MembershipOptions mopts = default_membership(spec, profile, params.epsilon);
  for (std::size_t i = 0; i < report.samples.size(); ++i) {
    GSample& s = report.samples[i];
    if (s.boundary_of_G || !s.estimate_ok) continue;
    Field phi = build_phi(s.config, profile, grid);
    RunOptions opts;
    opts.t_end = schedule.solve_horizon;
    TrackingOptions tr;
    tr.profile = &profile;
    tr.seed = s.config;
    tr.membership = mopts;
    tr.every = schedule.track_every;
    if (!out_dir.empty()) opts.dump_dir = out_dir + "/counterexamples";
    opts.tracking = tr;
    FlowState st = run_flow(std::move(phi), params, opts);
    s.maintained_until = st.frozen ? st.freeze_time : st.t;

    if (!out_dir.empty()) {
      std::string dir = out_dir + "/sample_" + std::to_string(i);
      ensure_dir(dir);
      write_history_csv(st.history, dir + "/run.csv");
      write_config_track_csv(st.config_track, grid, dir + "/config_track.csv");
      write_pkfld(st.u, st.t, dir + "/final.pkfld");
      std::FILE* sf = std::fopen((dir + "/config.txt").c_str(), "w");
      if (sf) {
        std::fputs(serialize_peak_config(s.config).c_str(), sf);
        std::fprintf(sf, "boundary_of_G = %d\nS_estimate = %.17g\nmaintained_until = %.17g\n",
                     s.boundary_of_G ? 1 : 0, s.S_estimate, s.maintained_until);
        std::fclose(sf);
      }
    }

    for (const TrackRow& row : st.config_track) {
      if (row.frozen || !row.above_threshold) continue;
      DeltaApartResult apart = delta_apart(row.normalized.config, grid, spec.delta(params.epsilon));
      bool coeff_ok = true;
      for (double c : row.normalized.config.a)
        if (std::fabs(c - 1.0) >= spec.delta_hat) coeff_ok = false;
      for (double c : row.normalized.config.b)
        if (std::fabs(c - 1.0) >= spec.delta_hat) coeff_ok = false;
      if (!apart.ok || !coeff_ok)
        report.containment_violations.push_back(
            "sample " + std::to_string(i) + " left G unfrozen at t=" + std::to_string(row.t));
    }
    auto tv = find_outward_traverses(st, mopts.deltas, grid);
    for (auto& v : tv)
      report.traverse_violations.push_back("sample " + std::to_string(i) + ": " + v);

    double duration = s.maintained_until;
    double final_I = st.history.back().report.I_s_eta;
    if (duration > best_duration ||
        (duration == best_duration && final_I > best_I)) {
      best_duration = duration;
      best_I = final_I;
      winner = (int)i;
      winner_final = st.u;
      winner_seed = st.config_track.empty() ? s.config : st.config_track.back().normalized.config;
      for (int c = 0; c < (int)winner_seed.a.size(); ++c) winner_seed.a[c] = report.samples[i].config.a[c];
      for (int c = 0; c < (int)winner_seed.b.size(); ++c) winner_seed.b[c] = report.samples[i].config.b[c];
    }
  }
  if (winner < 0) fail(ErrorCode::minimax_failed, "no sample maintained the minimax level");
  report.winner = winner;

  // Step 4: continue the winner to a stationary point
  if (schedule.converge_s > 0.0) params.s = schedule.converge_s;
  RunOptions opts;
  opts.t_end = schedule.converge_horizon;
  TrackingOptions tr;
  tr.profile = &profile;
  tr.seed = winner_seed;
  tr.membership = mopts;
  tr.every = schedule.track_every;
  tr.abort_on_loss = false;
  opts.tracking = tr;
  if (!out_dir.empty()) opts.dump_dir = out_dir + "/counterexamples";
  FlowState st = run_flow(std::move(winner_final), params, opts);
  {
    auto tv = find_outward_traverses(st, mopts.deltas, grid);
    for (auto& v : tv) report.traverse_violations.push_back(std::string("winner: ") + v);
  }
  report.winner_converged = st.converged;
  report.winner_field = st.u;
  report.winner_I = st.history.back().report.I_s_eta;
  report.winner_residual = stationary_residual(st.u, params);
  report.solution = remove_multiplier(st.u, report.winner_residual.lambda, params.p, params.q);
  report.np_residual = stationary_residual(report.solution, params, 1.0).residual;
  report.winner_membership = membership(st.u, profile, mopts,
                                        st.config_track.empty() ? winner_seed
                                                                : st.config_track.back().normalized.config);

  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_pkfld(report.solution, st.t, out_dir + "/solution.pkfld");
    write_pkfld(report.winner_field, st.t, out_dir + "/winner.pkfld");
    write_history_csv(st.history, out_dir + "/winner_run.csv");
    write_config_track_csv(st.config_track, grid, out_dir + "/winner_config_track.csv");

    std::FILE* f = std::fopen((out_dir + "/minimax_report.csv").c_str(), "w");
    if (!f) fail(ErrorCode::io_error, "cannot open minimax_report.csv");
    std::fprintf(f, "index,boundary_of_G,I0,S_estimate,estimate_ok,maintained_until,frozen_at_zero\n");
    for (std::size_t i = 0; i < report.samples.size(); ++i) {
      const GSample& s = report.samples[i];
      std::fprintf(f, "%zu,%d,%.17g,%.17g,%d,%.17g,%d\n", i, s.boundary_of_G ? 1 : 0, s.I0,
                   s.S_estimate, s.estimate_ok ? 1 : 0, s.maintained_until,
                   s.frozen_at_zero ? 1 : 0);
    }
    std::fclose(f);

    f = std::fopen((out_dir + "/certificate.txt").c_str(), "w");
    if (!f) fail(ErrorCode::io_error, "cannot open certificate.txt");
    std::fprintf(f, "k = %d\nl = %d\n", spec.k, spec.l);
    std::fprintf(f, "S_star = %.12g\nreference_S0kl = %.12g\nS0 = %.12g\nrelative_gap = %.6g\n",
                 report.S_star, report.reference, report.S0, report.relative_gap);
    std::fprintf(f, "winner_I = %.12g\nlambda = %.12g\nresidual = %.6g\nnp_residual = %.6g\n",
                 report.winner_I, report.winner_residual.lambda, report.winner_residual.residual,
                 report.np_residual);
    std::fprintf(f, "converged = %d\nis_peak = %d\n", report.winner_converged ? 1 : 0,
                 report.winner_membership.verdict.is_peak ? 1 : 0);
    std::fprintf(f, "peaks:\n%s", serialize_peak_config(report.winner_membership.config).c_str());
    std::fclose(f);
  }
  return report;
}

TrendTable verify_theorem32(const GSpec& spec, const RadialProfile& profile,
                            const std::vector<std::pair<double, Grid>>& eps_grids,
                            FlowParams params, const MinimaxSchedule& schedule,
                            double noise_floor) {
  TrendTable table;
  const double S0 = sobolev_constant(profile).S0;
  const double ref = reference_level(spec.k, spec.l, profile.params.p, profile.params.q, S0);
  for (auto& [eps, grid] : eps_grids) {
    double hmax = grid.n == 2 ? std::max(grid.h[0], grid.h[1]) : grid.h[0];
    if (eps < 5.0 * hmax)
      fail(ErrorCode::invalid_parameters, "grid does not resolve epsilon (need eps >= 5h)");
    FlowParams p = params;
    p.epsilon = eps;
    auto samples = sample_G(spec, grid, profile, eps);
    double best = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (GSample& s : samples) {
      if (s.boundary_of_G) continue;
      try {
        s.S_estimate = estimate_S(s, spec, profile, grid, p, schedule);
        s.estimate_ok = true;
        any = true;
        best = std::max(best, s.S_estimate);
      } catch (const Error&) {
      }
    }
    if (!any) fail(ErrorCode::estimate_failed, "all estimates failed at epsilon");
    table.rows.push_back({eps, best, ref, std::fabs(best - ref) / S0});
  }
  table.monotone = true;
  for (std::size_t i = 1; i < table.rows.size(); ++i)
    if (table.rows[i].relative_gap > table.rows[i - 1].relative_gap + noise_floor)
      table.monotone = false;
  return table;
}

} // namespace peakflow
