#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "peakflow/minimax.hpp"

using namespace peakflow;

namespace {

struct Fixture {
  RadialProfile prof = find_ground_state({2, 1.5, 3.0});
  Grid grid = Grid::make_2d(1.0, 1.0, 64, 64);
  double eps = 0.1;

  FlowParams params(int k, int l) const {
    FlowParams fp;
    fp.p = 1.5;
    fp.q = 3.0;
    fp.epsilon = eps;
    fp.s = 1e-4;
    fp.eta.alpha = (k + 0.5 * l) * prof.E_p;
    return fp;
  }
};

Fixture& fix() {
  static Fixture f;
  return f;
}

} // namespace

TEST_CASE("G dimension formula") {
  CHECK(g_dimension({1, 0, 3.0, 0.1, 8, 3}, 2) == 2);
  CHECK(g_dimension({0, 1, 3.0, 0.1, 8, 3}, 2) == 1);
  CHECK(g_dimension({1, 1, 3.0, 0.1, 8, 3}, 2) == 4);
  CHECK(g_dimension({2, 0, 3.0, 0.1, 8, 3}, 2) == 5);
  CHECK(g_dimension({1, 0, 3.0, 0.1, 8, 3}, 1) == 1);
}

TEST_CASE("sample_G lattice structure") {
  auto& f = fix();

  SUBCASE("k=1, l=0: position lattice only, boundary tags at the rim") {
    GSpec spec{1, 0, 3.0, 0.1, 3, 3};
    auto samples = sample_G(spec, f.grid, f.prof, f.eps);
    CHECK(samples.size() == 9); // 3x3 positions, no coefficient axis
    int interior = 0, boundary = 0;
    for (auto& s : samples) {
      CHECK(s.config.k() == 1);
      CHECK(s.config.a[0] == 1.0);
      bool apart = delta_apart(s.config, f.grid, spec.delta(f.eps)).ok;
      CHECK(apart == !s.boundary_of_G);
      (apart ? interior : boundary) += 1;
    }
    CHECK(interior == 1); // centre of a 3x3 lattice over [0.9 delta, 1 - 0.9 delta]
    CHECK(boundary == 8);
  }

  SUBCASE("k=0, l=1: samples on the four edges, corners excluded") {
    GSpec spec{0, 1, 3.0, 0.1, 3, 3};
    auto samples = sample_G(spec, f.grid, f.prof, f.eps);
    CHECK(samples.size() == 12); // 4 edges x 3 arcs
    for (auto& s : samples) {
      CHECK(s.config.l() == 1);
      double len = s.config.boundary[0].edge <= 1 ? f.grid.lengths[1] : f.grid.lengths[0];
      CHECK(s.config.boundary[0].arc > 0.0);
      CHECK(s.config.boundary[0].arc < len);
      CHECK(!s.boundary_of_G); // single boundary peak: apart holds trivially
    }
  }

  SUBCASE("k=2: mean-one coefficient slices") {
    GSpec spec{2, 0, 2.0, 0.1, 4, 3};
    auto samples = sample_G(spec, f.grid, f.prof, 0.05);
    bool saw_offcentre = false;
    for (auto& s : samples) {
      double mean = 0.5 * (s.config.a[0] + s.config.a[1]);
      CHECK(mean == doctest::Approx(1.0).epsilon(1e-12));
      if (s.config.a[0] != s.config.a[1]) saw_offcentre = true;
      for (double a : s.config.a) {
        CHECK(a > 1.0 - spec.delta_hat);
        CHECK(a < 1.0 + spec.delta_hat);
      }
    }
    CHECK(saw_offcentre);
  }

  SUBCASE("infeasible domain") {
    GSpec spec{1, 0, 3.0, 0.1, 3, 3};
    // delta = 0.9 makes Omega_delta empty on the unit square
    CHECK_THROWS_AS(sample_G(spec, f.grid, f.prof, 0.3), Error);
  }
}

TEST_CASE("T_0 is the identity; boundary-of-G seeds stay frozen") {
  auto& f = fix();
  GSpec spec{1, 0, 3.0, 0.1, 3, 3};
  auto samples = sample_G(spec, f.grid, f.prof, f.eps);
  FlowParams fp = f.params(1, 0);
  MinimaxSchedule sched;
  sched.track_every = 40;

  for (auto& s : samples) {
    TrackTResult r0 = track_T(s, spec, f.prof, f.grid, fp, -1e30, 0.0, sched);
    for (int i = 0; i < s.config.k(); ++i) {
      CHECK(r0.config.config.interior[i][0] == s.config.interior[i][0]);
      CHECK(r0.config.config.interior[i][1] == s.config.interior[i][1]);
    }
    if (s.boundary_of_G) {
      TrackTResult rt = track_T(s, spec, f.prof, f.grid, fp, -1e30, 0.05, sched);
      CHECK(rt.frozen);
      CHECK(rt.config.config.interior[0][0] == s.config.interior[0][0]);
    }
  }
}

TEST_CASE("estimate_S on the deep-interior single peak is close to S0") {
  auto& f = fix();
  GSpec spec{1, 0, 3.0, 0.1, 3, 3};
  auto samples = sample_G(spec, f.grid, f.prof, f.eps);
  FlowParams fp = f.params(1, 0);
  MinimaxSchedule sched;
  sched.estimate_horizon = 0.15;
  sched.track_every = 60;

  double S0 = sobolev_constant(f.prof).S0;
  for (auto& s : samples) {
    if (s.boundary_of_G) continue;
    double est = estimate_S(s, spec, f.prof, f.grid, fp, sched);
    CHECK(std::fabs(est - S0) / S0 < 0.03);
    CHECK(est <= evaluate_functional(build_phi(s.config, f.prof, f.grid),
                                     fp.functional()).I_s_eta);
  }
}

TEST_CASE("T_t moves continuously for small t") {
  auto& f = fix();
  GSpec spec{1, 0, 3.0, 0.1, 3, 3};
  auto samples = sample_G(spec, f.grid, f.prof, f.eps);
  FlowParams fp = f.params(1, 0);
  MinimaxSchedule sched;
  sched.track_every = 30;
  for (auto& s : samples) {
    if (s.boundary_of_G) continue;
    TrackTResult r = track_T(s, spec, f.prof, f.grid, fp, -1e30, 0.02, sched);
    CHECK(!r.frozen);
    double move = std::hypot(r.config.config.interior[0][0] - s.config.interior[0][0],
                             r.config.config.interior[0][1] - s.config.interior[0][1]);
    CHECK(move < 0.05 * spec.delta(f.eps));
    CHECK(std::fabs(r.config.config.a[0] - 1.0) < 0.02);
  }
}

TEST_CASE("minimax solve: k=1 smoke test on a coarse grid") {
  auto& f = fix();
  GSpec spec{1, 0, 3.0, 0.1, 3, 3};
  FlowParams fp = f.params(1, 0);
  MinimaxSchedule sched;
  sched.estimate_horizon = 0.15;
  sched.solve_horizon = 0.3;
  sched.converge_horizon = 10.0;
  sched.track_every = 60;

  MinimaxReport rep = minimax_solve(spec, f.prof, f.grid, fp, sched);
  double S0 = rep.S0;
  CHECK(rep.S_star > 0.8 * S0);
  CHECK(rep.S_star < 1.2 * S0);
  CHECK(rep.relative_gap < 0.2);
  CHECK(rep.winner >= 0);
  CHECK(rep.boundary_frozen_fraction == 1.0);
  CHECK(rep.traverse_violations.empty());
  CHECK(rep.containment_violations.empty());
  CHECK(rep.winner_residual.residual < 1e-2);
  CHECK(rep.winner_membership.verdict.is_peak);
  // two-phase stability: the maintained level stays within sigma of S*
  CHECK(std::fabs(rep.S_star - rep.winner_I) < 2.0 * 1e-4 * S0);
  // the winner keeps one interior peak, delta-apart
  CHECK(rep.winner_membership.config.k() == 1);
  CHECK(delta_apart(rep.winner_membership.config, f.grid, spec.delta(f.eps)).ok);
}
