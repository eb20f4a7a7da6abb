// peakflow: ground-state / flow / minimax / verify driver.
#include <cstdio>
#include <random>
#include <string>

#include "CLI11.hpp"
#ifdef PEAKFLOW_OPENMP
#include <omp.h>
#endif

#include "peakflow/minimax.hpp"
#include "peakflow/reference.hpp"

using namespace peakflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;
constexpr int kExitDescent = 3;
constexpr int kExitMinimax = 4;
constexpr int kExitVerify = 5;

struct Settings {
  KeyValueConfig cfg;
  std::string out = "out";
  ProblemParams problem;
  double epsilon = 0.1;
  Grid grid;
  FlowParams flow;
  GSpec gspec;
  MinimaxSchedule schedule;
  double gs_tol = 1e-8, gs_rmax = 30.0, gs_h = 1e-3;
  double delta_bar_rel = 0.1;
  double sigma_rel = 1e-4;
  double s_floor = 1e-8;
  bool s_substituted = false;
  long long seed = 1234;
  double snapshot_cadence = 0.0;
};

Settings load_settings(const std::string& config_path, const std::string& out_override) {
  Settings st;
  if (!config_path.empty()) st.cfg = KeyValueConfig::parse_file(config_path);
  KeyValueConfig& c = st.cfg;

  st.problem.n = c.get("problem", "n", 2);
  st.problem.p = c.get("problem", "p", 1.5);
  st.problem.q = c.get("problem", "q", 3.0);
  st.problem.validate();
  st.epsilon = c.get("problem", "epsilon", 0.1);

  double lx = 1.0, ly = 1.0;
  int cx = 64, cy = 64;
  {
    std::string lengths = c.get("domain", "lengths", st.problem.n == 2 ? "1,1" : "1");
    std::string cells = c.get("domain", "cells", st.problem.n == 2 ? "64,64" : "64");
    if (st.problem.n == 2) {
      std::sscanf(lengths.c_str(), "%lg,%lg", &lx, &ly);
      std::sscanf(cells.c_str(), "%d,%d", &cx, &cy);
      st.grid = Grid::make_2d(lx, ly, cx, cy);
    } else {
      std::sscanf(lengths.c_str(), "%lg", &lx);
      std::sscanf(cells.c_str(), "%d", &cx);
      st.grid = Grid::make_1d(lx, cx);
    }
  }

  st.gs_tol = c.get("constants", "gs_tol", 1e-8);
  st.gs_rmax = c.get("constants", "gs_rmax", 30.0);
  st.gs_h = c.get("constants", "gs_h", 1e-3);
  st.sigma_rel = c.get("constants", "sigma_rel", 1e-4);
  st.s_floor = c.get("constants", "s_floor", 1e-8);
  st.delta_bar_rel = c.get("peaks", "delta_bar_rel", 0.1);

  st.flow.p = st.problem.p;
  st.flow.q = st.problem.q;
  st.flow.epsilon = st.epsilon;
  // the paper's s <= e^{-1/eps^4} underflows; a configured floor stands in
  double s_requested = c.get("constants", "s", 1e-8);
  st.flow.s = s_requested;
  if (s_requested < st.s_floor) {
    st.flow.s = st.s_floor;
    st.s_substituted = true;
  }
  st.flow.dt_safety = c.get("flow", "dt_safety", 0.8);
  st.flow.descent_tol = c.get("constants", "descent_tol", 1e-8);
  st.flow.conv_tol = c.get("constants", "conv_tol", 1e-6);
  st.flow.conv_steps = c.get("constants", "conv_steps", 100);

  st.gspec.k = c.get("minimax", "k", 1);
  st.gspec.l = c.get("minimax", "l", 0);
  st.gspec.N = c.get("peaks", "N", 3.0);
  st.gspec.delta_hat = c.get("peaks", "delta_hat", 0.1);
  st.gspec.pos_res = c.get("minimax", "pos_res", 8);
  st.gspec.bpos_res = c.get("minimax", "bpos_res", 0);
  st.gspec.coeff_res = c.get("minimax", "coeff_res", 3);

  st.schedule.estimate_horizon = c.get("minimax", "estimate_horizon", 0.5);
  st.schedule.solve_horizon = c.get("minimax", "solve_horizon", 2.0);
  st.schedule.converge_horizon = c.get("minimax", "converge_horizon", 40.0);
  st.schedule.track_every = c.get("minimax", "track_every", 50);

  st.seed = c.get("io", "seed", 1234);
  st.snapshot_cadence = c.get("io", "snapshot_cadence", 0.0);
  st.out = out_override.empty() ? c.get("io", "out", "out") : out_override;
  return st;
}

// every run directory carries the fully materialized configuration
void write_materialized(const Settings& st, const RadialProfile& profile,
                        const std::string& dir) {
  KeyValueConfig c = st.cfg;
  c.set("problem", "n", st.problem.n);
  c.set("problem", "p", st.problem.p);
  c.set("problem", "q", st.problem.q);
  c.set("problem", "epsilon", st.epsilon);
  if (st.grid.n == 2) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g", st.grid.lengths[0], st.grid.lengths[1]);
    c.set("domain", "lengths", std::string(buf));
    std::snprintf(buf, sizeof(buf), "%d,%d", st.grid.cells[0], st.grid.cells[1]);
    c.set("domain", "cells", std::string(buf));
  } else {
    c.set("domain", "lengths", st.grid.lengths[0]);
    c.set("domain", "cells", st.grid.cells[0]);
  }
  c.set("constants", "gs_tol", st.gs_tol);
  c.set("constants", "gs_rmax", st.gs_rmax);
  c.set("constants", "gs_h", st.gs_h);
  c.set("constants", "sigma_rel", st.sigma_rel);
  c.set("constants", "s", st.flow.s);
  c.set("constants", "s_floor", st.s_floor);
  c.set("constants", "s_substituted", st.s_substituted ? 1 : 0);
  c.set("constants", "sigma_abs", st.sigma_rel * sobolev_constant(profile).S0);
  c.set("constants", "descent_tol", st.flow.descent_tol);
  c.set("constants", "conv_tol", st.flow.conv_tol);
  c.set("constants", "conv_steps", st.flow.conv_steps);
  c.set("peaks", "delta_bar_rel", st.delta_bar_rel);
  c.set("peaks", "delta_hat", st.gspec.delta_hat);
  c.set("peaks", "N", st.gspec.N);
  c.set("flow", "dt_safety", st.flow.dt_safety);
  c.set("minimax", "k", st.gspec.k);
  c.set("minimax", "l", st.gspec.l);
  c.set("minimax", "pos_res", st.gspec.pos_res);
  c.set("minimax", "bpos_res", st.gspec.bpos_res);
  c.set("minimax", "coeff_res", st.gspec.coeff_res);
  c.set("minimax", "estimate_horizon", st.schedule.estimate_horizon);
  c.set("minimax", "solve_horizon", st.schedule.solve_horizon);
  c.set("minimax", "converge_horizon", st.schedule.converge_horizon);
  c.set("minimax", "track_every", (int)st.schedule.track_every);
  c.set("io", "seed", (int)st.seed);
  c.set("io", "out", st.out);
  ensure_dir(dir);
  c.write_file(dir + "/config.txt");
}

RadialProfile ground_state_for(const Settings& st) {
  return find_ground_state(st.problem, st.gs_tol, st.gs_rmax, st.gs_h);
}

int cmd_ground_state(const Settings& st) {
  RadialProfile profile = ground_state_for(st);
  auto sc = sobolev_constant(profile);
  auto dr = fit_decay_rate(profile);
  ensure_dir(st.out);
  export_profile_csv(profile, st.out + "/profile.csv");
  write_materialized(st, profile, st.out);
  if (profile.range_warning)
    std::printf("warning: (n, p, q) outside the standing range 1 < p < n, q < np/(n-p)\n");
  std::printf("beta = %.8f\n", profile.beta);
  std::printf("E_p = %.8f\nM_q = %.8f\nnehari_residual = %.3e\n", profile.E_p, profile.M_q,
              profile.nehari_residual());
  std::printf("S0 = %.8f (quotient form %.8f)\n", sc.S0, sc.quotient);
  std::printf("decay_rate = %.6f (target (1/(p-1))^{1/p} = %.6f)\n", dr.rate, dr.target);
  std::printf("profile -> %s/profile.csv\n", st.out.c_str());
  return kExitOk;
}

int cmd_flow(const Settings& st, const std::string& initial_pkfld) {
  RadialProfile profile = ground_state_for(st);
  FlowParams params = st.flow;
  double S0 = sobolev_constant(profile).S0;
  params.sigma = st.sigma_rel * S0;
  double threshold = st.cfg.get("flow", "threshold", -1.0);
  params.threshold = threshold > 0 ? threshold : -std::numeric_limits<double>::infinity();
  params.eta.alpha = (st.gspec.k + 0.5 * st.gspec.l) * profile.E_p;

  Field initial;
  double t0 = 0.0;
  PeakConfig seed;
  bool have_seed = false;
  if (!initial_pkfld.empty()) {
    PkfldData data = read_pkfld(initial_pkfld);
    initial = data.field;
    t0 = data.t;
    if (initial.epsilon != st.epsilon)
      std::printf("note: snapshot epsilon %.6g overrides config epsilon\n", initial.epsilon);
    params.epsilon = initial.epsilon;
  } else {
    std::string text = st.cfg.get("initial", "peaks", "");
    if (text.empty()) {
      // default: one interior bump at the domain centre
      seed.interior.push_back({0.5 * st.grid.lengths[0],
                               st.grid.n == 2 ? 0.5 * st.grid.lengths[1] : 0.0});
      seed.a.push_back(1.0);
      seed.epsilon = st.epsilon;
    } else {
      for (char& ch : text)
        if (ch == ';') ch = '\n';
      seed = parse_peak_config(text);
      if (seed.epsilon <= 0) seed.epsilon = st.epsilon;
    }
    have_seed = true;
    initial = build_phi(seed, profile, st.grid);
  }

  ensure_dir(st.out);
  write_materialized(st, profile, st.out);

  RunOptions opts;
  opts.t_end = t0 + st.cfg.get("flow", "t_end", 1.0);
  opts.dump_dir = st.out;
  if (have_seed) {
    TrackingOptions tr;
    tr.profile = &profile;
    tr.seed = seed;
    tr.membership = default_membership(st.gspec, profile, params.epsilon);
    tr.membership.deltas.delta_bar = st.delta_bar_rel * profile.beta;
    tr.every = st.schedule.track_every;
    tr.abort_on_loss = std::isfinite(params.threshold);
    opts.tracking = tr;
  }
  std::vector<double> snap_times;
  if (st.snapshot_cadence > 0) {
    opts.snap_every = std::max<long long>(1, (long long)(st.snapshot_cadence /
                                                         (stable_dt(make_flow_state(initial, params), params))));
    opts.snapshot = [&](const FlowState& fs) {
      char name[64];
      std::snprintf(name, sizeof(name), "/snap_%.6f.pkfld", fs.t);
      write_pkfld(fs.u, fs.t, st.out + name);
    };
  }

  FlowState fs = run_flow(initial, params, opts);
  fs.t += t0;

  write_history_csv(fs.history, st.out + "/run.csv");
  write_config_track_csv(fs.config_track, st.grid, st.out + "/config_track.csv");
  write_pkfld(fs.u, fs.t, st.out + "/final.pkfld");
  ResidualReport rr = stationary_residual(fs.u, params);
  std::FILE* meta = std::fopen((st.out + "/meta.txt").c_str(), "w");
  if (meta) {
    std::fprintf(meta, "t_final = %.17g\nsteps = %lld\nfrozen = %d\nfreeze_time = %.17g\n",
                 fs.t, fs.steps, fs.frozen ? 1 : 0, fs.freeze_time);
    std::fprintf(meta, "converged = %d\nresidual = %.6e\nlambda = %.12g\n", fs.converged ? 1 : 0,
                 rr.residual, rr.lambda);
    std::fprintf(meta, "clipped_total = %.6e\nB0 = %.12g\nB_range = [%.12g, %.12g]\n",
                 fs.clipped_total, fs.B0, fs.B_min, fs.B_max);
    std::fprintf(meta, "s = %.12g\nsigma = %.12g\ns_substituted = %d\n", params.s, params.sigma,
                 st.s_substituted ? 1 : 0);
    std::fclose(meta);
  }
  if (fs.frozen && fs.freeze_time == 0.0) std::printf("frozen at t=0\n");
  else if (fs.frozen) std::printf("frozen at t=%.6g\n", fs.freeze_time);
  std::printf("final I_s_eta = %.8f\nresidual = %.3e (lambda = %.8f)\nconverged = %s\n",
              fs.history.back().report.I_s_eta, rr.residual, rr.lambda,
              fs.converged ? "yes" : "no");
  return kExitOk;
}

int cmd_minimax(const Settings& st, const std::string& theorem32_eps) {
  RadialProfile profile = ground_state_for(st);
  FlowParams params = st.flow;
  double S0 = sobolev_constant(profile).S0;
  params.sigma = st.sigma_rel * S0;
  params.eta.alpha = (st.gspec.k + 0.5 * st.gspec.l) * profile.E_p;
  ensure_dir(st.out);
  write_materialized(st, profile, st.out);

  if (!theorem32_eps.empty()) {
    std::vector<std::pair<double, Grid>> eps_grids;
    std::stringstream ss(theorem32_eps);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      double eps = std::stod(tok);
      int cells = std::max(st.grid.cells[0], (int)std::ceil(5.0 * st.grid.lengths[0] / eps));
      Grid g = st.grid.n == 2 ? Grid::make_2d(st.grid.lengths[0], st.grid.lengths[1], cells, cells)
                              : Grid::make_1d(st.grid.lengths[0], cells);
      eps_grids.push_back({eps, g});
    }
    TrendTable table = verify_theorem32(st.gspec, profile, eps_grids, params, st.schedule);
    std::printf("eps        S*            S_{0,k,l}     |gap|/S0\n");
    for (auto& r : table.rows)
      std::printf("%-10.4g %-13.8g %-13.8g %.4f\n", r.epsilon, r.S_star, r.reference,
                  r.relative_gap);
    std::printf("monotone gap decrease: %s\n", table.monotone ? "yes" : "NO");
    return table.monotone ? kExitOk : kExitMinimax;
  }

  MinimaxReport rep = minimax_solve(st.gspec, profile, st.grid, params, st.schedule, st.out);
  std::printf("S* = %.8f  (reference S_{0,%d,%d} = %.8f, gap %.2f%% of S0)\n", rep.S_star,
              st.gspec.k, st.gspec.l, rep.reference, 100.0 * rep.relative_gap);
  std::printf("threshold = %.8f, boundary frozen fraction = %.3f\n", rep.threshold,
              rep.boundary_frozen_fraction);
  std::printf("winner: sample %d, I = %.8f, residual = %.3e, np_residual = %.3e\n", rep.winner,
              rep.winner_I, rep.winner_residual.residual, rep.np_residual);
  std::printf("winner membership: %s; converged: %s\n",
              rep.winner_membership.verdict.is_peak ? "peak" : "NOT A PEAK",
              rep.winner_converged ? "yes" : "no");
  std::printf("traverse violations: %zu, containment violations: %zu\n",
              rep.traverse_violations.size(), rep.containment_violations.size());
  std::printf("certificate -> %s/certificate.txt\n", st.out.c_str());
  if (!rep.traverse_violations.empty() || !rep.containment_violations.empty())
    return kExitMinimax;
  return kExitOk;
}

int cmd_verify(const Settings& st, bool mutate_h, double dt_safety_override) {
  int failures = 0;
  std::mt19937_64 rng(st.seed);
  auto suite = [&](const char* name, bool ok) {
    std::printf("%-28s %s\n", name, ok ? "pass" : "FAIL");
    if (!ok) ++failures;
  };

  { // Nehari + soliton oracle
    ProblemParams pp{1, 2.0, 4.0};
    RadialProfile prof = find_ground_state(pp);
    bool ok = std::fabs(prof.beta - std::sqrt(2.0)) < 1e-4 && prof.nehari_residual() < 1e-3;
    RadialProfile prof2 = find_ground_state(st.problem, st.gs_tol, st.gs_rmax, st.gs_h);
    ok = ok && prof2.nehari_residual() < 1e-3;
    suite("nehari-identity", ok);

    auto dr = fit_decay_rate(prof2);
    bool okd = std::fabs(dr.rate - dr.target) / dr.target < 0.05;
    // weak bound w' + p^{-1/p} w <= tol on the resolved tail
    double a = std::pow(st.problem.p, -1.0 / st.problem.p);
    for (std::size_t i = 0; i < prof2.r_grid.size(); ++i) {
      if (prof2.r_grid[i] > prof2.resolved_r) break;
      if (prof2.w_values[i] < 1e-2 * prof2.beta)
        okd = okd && (prof2.w_prime[i] + a * prof2.w_values[i] <= 1e-6);
    }
    suite("decay-rate", okd);

    // eta seams
    EtaParams ep{(st.gspec.k + 0.5 * st.gspec.l) * prof2.E_p};
    bool oke = true;
    for (double t : {0.5 * ep.alpha, 2.0 * ep.alpha}) {
      auto lo = eta(t - 1e-13 * ep.alpha, ep), hi = eta(t + 1e-13 * ep.alpha, ep);
      oke = oke && std::fabs(lo.value - hi.value) < 1e-10 * ep.alpha &&
            std::fabs(lo.derivative - hi.derivative) < 1e-9;
    }
    oke = oke && std::fabs(eta(3.0 * ep.alpha, ep).value - 2.0 * std::exp(0.5) * ep.alpha) <
                     1e-12 * ep.alpha;
    suite("eta-seams", oke);

    // H Hessian: closed form vs central differences at random admissible points
    bool okh = true;
    std::uniform_real_distribution<double> ud(0.92, 1.08);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> a2{ud(rng), ud(rng)}, b2{ud(rng)};
      for (std::size_t ci = 0; ci < a2.size(); ++ci) {
        double closed = H_partial2(a2, b2, st.problem.p, st.problem.q, ci, false);
        if (mutate_h) closed += 1e-3; // fault injection: the suite must catch this
        double h0 = 1e-4;
        auto Hat = [&](double v) {
          auto aa = a2;
          aa[ci] = v;
          return H_coeff(aa, b2, st.problem.p, st.problem.q);
        };
        double fd = (Hat(a2[ci] + h0) - 2.0 * Hat(a2[ci]) + Hat(a2[ci] - h0)) / (h0 * h0);
        okh = okh && std::fabs(closed - fd) < 1e-6 && closed < 0.0;
      }
    }
    okh = okh && std::fabs(H_second_derivative_at_critical(1.0, 2.0, 4.0) + std::sqrt(2.0)) < 1e-9;
    suite("h-hessian", okh);

    // descent on a rough random field
    {
      Grid g = Grid::make_2d(1.0, 1.0, 64, 64);
      Field u(g, 0.05);
      std::uniform_real_distribution<double> vd(0.2, 1.2);
      for (double& v : u.values) v = vd(rng);
      FlowParams fp;
      fp.p = st.problem.p;
      fp.q = st.problem.q;
      fp.epsilon = 0.05;
      fp.s = st.flow.s;
      fp.eta.alpha = (st.gspec.k + 0.5 * st.gspec.l) * prof2.E_p;
      if (dt_safety_override > 0) fp.dt_safety = dt_safety_override;
      bool okf = true;
      try {
        FlowState fs = make_flow_state(u, fp);
        for (int i = 0; i < 400 && okf; ++i) {
          double before = fs.history.back().report.I_s_eta;
          step(fs, fp, stable_dt(fs, fp));
          okf = fs.history.back().report.I_s_eta - before <= 1e-8;
        }
      } catch (const Error&) {
        okf = false;
      }
      suite("descent", okf);
    }

    // Lemma 3.2 nested-domain monotonicity
    {
      Grid g = Grid::make_2d(1.0, 1.0, 64, 64);
      Field u = sample_on_grid(prof2, {0.5, 0.5}, 0.05, g);
      std::vector<std::uint8_t> m1(g.cell_count(), 0), m2(g.cell_count(), 0);
      for (int j = 0; j < 64; ++j)
        for (int i = 0; i < 64; ++i) {
          double x = g.centre(0, i), y = g.centre(1, j);
          double r = std::hypot(x - 0.5, y - 0.5);
          if (r < 0.3) m1[g.idx(i, j)] = 1;
          if (r < 0.45) m2[g.idx(i, j)] = 1;
        }
      double h1 = functional_on_subdomain(u, m1, 0.1, 0.1, st.problem.p, st.problem.q, 0.0);
      double h2 = functional_on_subdomain(u, m2, 0.1, 0.1, st.problem.p, st.problem.q, 0.0);
      suite("lemma32-monotonicity", h1 <= h2 + 1e-9);
    }

    // mass-centre vs brute-force scan
    {
      Grid g = Grid::make_2d(1.0, 1.0, 128, 128);
      ProfileSampler sampler(prof2);
      bool okc = true;
      std::uniform_real_distribution<double> cd(0.35, 0.65);
      for (int trial = 0; trial < 10 && okc; ++trial) {
        Point c{cd(rng), cd(rng)};
        Field u = sample_on_grid(sampler, c, 0.08, g);
        Point z = interior_mass_centre(u, {c[0] + 0.01, c[1] - 0.01}, 0.08);
        okc = std::hypot(z[0] - c[0], z[1] - c[1]) < g.h[0];
      }
      suite("mass-centre", okc);
    }
  }

  if (failures > 0) {
    std::printf("%d suite(s) failed\n", failures);
    return kExitVerify;
  }
  std::printf("all suites pass\n");
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"peak-function minimax laboratory for the Neumann p-Laplace problem"};
  app.require_subcommand(1);
  app.fallthrough(); // global flags may follow the subcommand

  std::string config_path, out_dir, log_level = "info", initial_pkfld, theorem32;
  int jobs = 0;
  bool mutate_h = false;
  double dt_safety_override = -1.0;
  app.add_option("--config", config_path, "configuration file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--jobs", jobs, "worker threads (default: all cores)");
  app.add_option("--log-level", log_level, "quiet|info|debug");

  CLI::App* gs = app.add_subcommand("ground-state", "shoot the radial ground state");
  CLI::App* fl = app.add_subcommand("flow", "run the descent flow");
  fl->add_option("--initial", initial_pkfld, "resume from a PKFLD snapshot");
  CLI::App* mm = app.add_subcommand("minimax", "run the minimax driver");
  mm->add_option("--verify-theorem32", theorem32, "comma list of epsilon values");
  CLI::App* vf = app.add_subcommand("verify", "run the property suites");
  vf->add_flag("--mutate-h", mutate_h, "fault injection: perturb the H Hessian formula");
  vf->add_option("--dt-safety", dt_safety_override, "override dt safety (2 forces instability)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

#ifdef PEAKFLOW_OPENMP
  if (jobs > 0) omp_set_num_threads(jobs);
#endif

  try {
    Settings st = load_settings(config_path, out_dir);
    if (gs->parsed()) return cmd_ground_state(st);
    if (fl->parsed()) return cmd_flow(st, initial_pkfld);
    if (mm->parsed()) return cmd_minimax(st, theorem32);
    if (vf->parsed()) return cmd_verify(st, mutate_h, dt_safety_override);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.code()) {
      case ErrorCode::config_error:
      case ErrorCode::invalid_parameters:
      case ErrorCode::infeasible_G:
        return kExitConfig;
      case ErrorCode::descent_violation:
        return kExitDescent;
      case ErrorCode::minimax_failed:
      case ErrorCode::estimate_failed:
        return kExitMinimax;
      default:
        return kExitSolver;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitOk;
}
