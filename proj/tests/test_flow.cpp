#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "peakflow/flow.hpp"

using namespace peakflow;

namespace {

struct Fixture {
  RadialProfile prof = find_ground_state({2, 1.5, 3.0});
  ProfileSampler sampler{prof};
};

Fixture& fix() {
  static Fixture f;
  return f;
}

FlowParams params_for(double eps, double s, const RadialProfile& prof, int k = 1, int l = 0) {
  FlowParams fp;
  fp.p = prof.params.p;
  fp.q = prof.params.q;
  fp.epsilon = eps;
  fp.s = s;
  fp.eta.alpha = (k + 0.5 * l) * prof.E_p;
  return fp;
}

} // namespace

TEST_CASE("stable_dt formulas") {
  Grid g = Grid::make_2d(1.0, 1.0, 64, 64);

  SUBCASE("p = 2 constant field: diffusion bound h^2/(2n eps^2)") {
    Field u(g, 0.1, 1.0);
    FlowParams fp;
    fp.p = 2.0;
    fp.q = 4.0;
    fp.epsilon = 0.1;
    fp.s = 123.0; // irrelevant at p = 2
    fp.eta.alpha = 100.0;
    FlowState st = make_flow_state(u, fp);
    double dt = stable_dt(st, fp);
    double diff = g.h[0] * g.h[0] / (2.0 * 2 * 0.01);
    CHECK(dt == doctest::Approx(fp.dt_safety * diff).epsilon(1e-12));
  }

  SUBCASE("coarse grid, p = 2: the reaction term caps dt") {
    Grid gc = Grid::make_2d(1.0, 1.0, 16, 16);
    Field u(gc, 0.05, 1.0);
    FlowParams fp;
    fp.p = 2.0;
    fp.q = 4.0;
    fp.epsilon = 0.05;
    fp.eta.alpha = 400.0;
    FlowState st = make_flow_state(u, fp);
    double lambda = st.history.back().report.lambda;
    double react = 1.0 / ((fp.q - 1) * lambda + (fp.p - 1)); // u = 1
    CHECK(stable_dt(st, fp) == doctest::Approx(fp.dt_safety * react).epsilon(1e-9));
  }

  SUBCASE("p = 1.5 flat region: s_bar^{-1/4} = 100 coefficient") {
    Field u(g, 0.05, 1.0);
    double eps = 0.05;
    double s = 1e-8 / (eps * eps); // s_bar = 1e-8
    FlowParams fp = params_for(eps, s, fix().prof);
    FlowState st = make_flow_state(u, fp);
    double expect = g.h[0] * g.h[0] / (2.0 * 2 * std::pow(eps, 1.5) * 100.0);
    CHECK(stable_dt(st, fp) == doctest::Approx(fp.dt_safety * expect).epsilon(1e-9));
  }

  SUBCASE("halving h quarters the diffusion-limited dt") {
    Field u1(Grid::make_2d(1.0, 1.0, 32, 32), 0.1, 1.0);
    Field u2(Grid::make_2d(1.0, 1.0, 64, 64), 0.1, 1.0);
    FlowParams fp = params_for(0.1, 1e-8, fix().prof);
    double d1 = stable_dt(make_flow_state(u1, fp), fp);
    double d2 = stable_dt(make_flow_state(u2, fp), fp);
    CHECK(d2 == doctest::Approx(0.25 * d1).epsilon(1e-10));
  }
}

TEST_CASE("step-internal report matches evaluate_functional bitwise") {
  auto& f = fix();
  Grid g = Grid::make_2d(1.0, 1.0, 32, 32);
  Field phi = sample_on_grid(f.sampler, {0.5, 0.5}, 0.1, g);
  phi.epsilon = 0.1;
  FlowParams fp = params_for(0.1, 1e-4, f.prof);
  FlowState st = make_flow_state(phi, fp);
  for (int i = 0; i < 5; ++i) step(st, fp, stable_dt(st, fp));
  FunctionalReport ref = evaluate_functional(st.u, fp.functional());
  CHECK(st.history.back().report.A == ref.A);
  CHECK(st.history.back().report.B == ref.B);
  CHECK(st.history.back().report.I_s_eta == ref.I_s_eta);
  CHECK(st.history.back().report.lambda == ref.lambda);
}

TEST_CASE("constant field is a fixed point at s = 0 (p = 2)") {
  Grid g = Grid::make_2d(1.0, 1.0, 32, 32);
  Field u(g, 0.1, 1.0);
  FlowParams fp;
  fp.p = 2.0;
  fp.q = 4.0;
  fp.epsilon = 0.1;
  fp.s = 0.0;
  fp.eta.alpha = 100.0; // A = 100 sits in the linear eta window
  FlowState st = make_flow_state(u, fp);
  for (int i = 0; i < 5; ++i) step(st, fp, stable_dt(st, fp));
  for (double v : st.u.values) CHECK(std::fabs(v - 1.0) < 1e-12);
}

TEST_CASE("constant-field drift equals s_bar^{p/2}") {
  Grid g = Grid::make_2d(1.0, 1.0, 32, 32);
  const double eps = 0.1, p = 1.5, q = 3.0;
  const double s_bar = 1e-8;
  Field u(g, eps, 1.0);
  FlowParams fp;
  fp.p = p;
  fp.q = q;
  fp.epsilon = eps;
  fp.s = s_bar / (eps * eps);
  fp.eta.alpha = 100.0;
  FlowState st = make_flow_state(u, fp);
  while (st.t < 0.5) step(st, fp, std::min(stable_dt(st, fp), 0.5 - st.t));
  double drift = (st.u.values[0] - 1.0) / st.t;
  CHECK(drift == doctest::Approx(std::pow(s_bar, 0.5 * p)).epsilon(0.01));
}

TEST_CASE("descent on rough random fields") {
  auto& f = fix();
  Grid g = Grid::make_2d(1.0, 1.0, 64, 64);
  FlowParams fp = params_for(0.05, 1e-8, f.prof);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> vd(0.1, 1.3);
  for (int trial = 0; trial < 3; ++trial) {
    Field u(g, fp.epsilon);
    for (double& v : u.values) v = vd(rng);
    FlowState st = make_flow_state(u, fp);
    for (int i = 0; i < 300; ++i) {
      double before = st.history.back().report.I_s_eta;
      step(st, fp, stable_dt(st, fp));
      CHECK(st.history.back().report.I_s_eta - before <= 1e-8);
    }
    DescentAudit audit = descent_audit(st, fp);
    CHECK(audit.worst_step_increase <= 1e-8);
  }
}

TEST_CASE("single-bump flow: descent, B envelope, nonnegativity budget") {
  auto& f = fix();
  Grid g = Grid::make_2d(1.0, 1.0, 64, 64);
  const double eps = 0.1;
  Field phi = sample_on_grid(f.sampler, {0.5, 0.5}, eps, g);
  phi.epsilon = eps;
  FlowParams fp = params_for(eps, 1e-4, f.prof);
  RunOptions opts;
  opts.t_end = 0.5;
  FlowState st = run_flow(phi, fp, opts);

  for (std::size_t i = 1; i < st.history.size(); ++i)
    CHECK(st.history[i].report.I_s_eta - st.history[i - 1].report.I_s_eta <= 1e-8);
  CHECK(st.B_min >= 0.5 * st.B0);
  CHECK(st.B_max <= 2.0 * st.B0);

  // the dissipation identity holds within a factor on this smooth run
  DescentAudit audit = descent_audit(st, fp);
  CHECK(audit.ratio_min >= 0.5);
  CHECK(audit.ratio_max <= 2.0);

  double l1 = 0.0;
  for (double v : st.u.values) l1 += v * g.cell_volume();
  for (const HistoryRow& r : st.history) CHECK(r.clipped_mass <= 1e-12 * l1);
}

TEST_CASE("freezing is absorbing and can fire at t = 0") {
  auto& f = fix();
  Grid g = Grid::make_2d(1.0, 1.0, 64, 64);
  const double eps = 0.1;
  Field phi = sample_on_grid(f.sampler, {0.5, 0.5}, eps, g);
  phi.epsilon = eps;
  FlowParams fp = params_for(eps, 1e-4, f.prof);
  double I0 = evaluate_functional(phi, fp.functional()).I_s_eta;

  fp.threshold = I0 + 1.0; // above the initial level: frozen immediately
  RunOptions opts;
  opts.t_end = 0.2;
  FlowState st = run_flow(phi, fp, opts);
  CHECK(st.frozen);
  CHECK(st.freeze_time == 0.0);
  for (std::size_t i = 0; i < phi.values.size(); ++i) CHECK(st.u.values[i] == phi.values[i]);

  fp.threshold = I0 - 1e-4; // slightly below: freezes along the descent
  FlowState st2 = run_flow(phi, fp, opts);
  if (st2.frozen) {
    CHECK(st2.freeze_time > 0.0);
    CHECK(st2.history.back().report.I_s_eta <= fp.threshold);
  }
}

TEST_CASE("halving dt does not worsen the per-step descent defect") {
  auto& f = fix();
  Grid g = Grid::make_2d(1.0, 1.0, 32, 32);
  FlowParams fp = params_for(0.1, 1e-4, f.prof);
  Field phi = sample_on_grid(f.sampler, {0.5, 0.5}, 0.1, g);
  phi.epsilon = 0.1;

  auto worst_with_dt = [&](double scale) {
    FlowState st = make_flow_state(phi, fp);
    double worst = -1e30;
    for (int i = 0; i < 200; ++i) {
      double dt = scale * stable_dt(st, fp);
      double before = st.history.back().report.I_s_eta;
      step(st, fp, dt);
      worst = std::max(worst, st.history.back().report.I_s_eta - before);
    }
    return worst;
  };
  double w1 = worst_with_dt(1.0);
  double w2 = worst_with_dt(0.5);
  if (w1 > 0.0) CHECK(w2 <= 0.5 * w1);
  else CHECK(w2 <= 1e-8);
}

TEST_CASE("remove_multiplier") {
  auto& f = fix();
  Grid g = Grid::make_2d(1.0, 1.0, 64, 64);
  Field u = sample_on_grid(f.sampler, {0.5, 0.5}, 0.1, g);
  u.epsilon = 0.1;

  SUBCASE("identity at lambda = 1") {
    Field v = remove_multiplier(u, 1.0, 2.0, 4.0);
    for (std::size_t i = 0; i < u.values.size(); ++i) CHECK(v.values[i] == u.values[i]);
  }
  SUBCASE("lambda = 2, p = 2, q = 4 scales by sqrt(2)") {
    Field v = remove_multiplier(u, 2.0, 2.0, 4.0);
    for (std::size_t i = 0; i < u.values.size(); ++i)
      CHECK(v.values[i] == doctest::Approx(std::sqrt(2.0) * u.values[i]).epsilon(1e-14));
  }
  SUBCASE("rescaling preserves the stationary residual") {
    FlowParams fp = params_for(0.1, 1e-4, f.prof);
    RunOptions opts;
    opts.t_end = 2.0;
    FlowState st = run_flow(u, fp, opts);
    ResidualReport before = stationary_residual(st.u, fp);
    Field v = remove_multiplier(st.u, before.lambda, fp.p, fp.q);
    ResidualReport after = stationary_residual(v, fp, 1.0);
    CHECK(after.residual <= before.residual + 1e-3);
  }
}

TEST_CASE("constant field residual vanishes (lambda = 1 cancels the reaction)") {
  Grid g = Grid::make_2d(1.0, 1.0, 32, 32);
  Field u(g, 0.1, 1.0);
  FlowParams fp;
  fp.p = 2.0;
  fp.q = 4.0;
  fp.epsilon = 0.1;
  fp.s = 0.0;
  fp.eta.alpha = 100.0;
  ResidualReport rr = stationary_residual(u, fp);
  CHECK(rr.lambda == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rr.residual < 1e-12);
}

TEST_CASE("descent violation aborts with the error code") {
  auto& f = fix();
  Grid g = Grid::make_2d(1.0, 1.0, 32, 32);
  Field phi = sample_on_grid(f.sampler, {0.5, 0.5}, 0.1, g);
  phi.epsilon = 0.1;
  FlowParams fp = params_for(0.1, 1e-4, f.prof);
  FlowState st = make_flow_state(phi, fp);
  double dt = 60.0 * stable_dt(st, fp); // far beyond the stability bound
  bool threw = false;
  try {
    for (int i = 0; i < 50; ++i) step(st, fp, dt);
  } catch (const Error& e) {
    threw = true;
    CHECK((e.code() == ErrorCode::descent_violation || e.code() == ErrorCode::numerical_overflow));
  }
  CHECK(threw);
}
