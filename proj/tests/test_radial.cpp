#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "peakflow/radial.hpp"

using namespace peakflow;

namespace {

// closed-form 1d family for p = 2: w(x) = (q/2)^{1/(q-2)} sech^{2/(q-2)}((q-2)x/2)
double soliton_1d(double q, double x) {
  return std::pow(q / 2.0, 1.0 / (q - 2.0)) *
         std::pow(1.0 / std::cosh(0.5 * (q - 2.0) * x), 2.0 / (q - 2.0));
}

} // namespace

TEST_CASE("shot classification matches the first-integral oracle (n=1, p=2, q=4)") {
  ProblemParams pp{1, 2.0, 4.0};
  // beta* = (q/p)^{1/(q-p)} = sqrt(2); above overshoots, below turns up
  auto over = integrate_radial(pp, 2.0, 20.0, 1e-3);
  CHECK(over.classification == ShotClass::crossed_zero);
  auto under = integrate_radial(pp, 1.0, 20.0, 1e-3);
  CHECK(under.classification == ShotClass::turned_up);

  auto exact = integrate_radial(pp, std::sqrt(2.0), 20.0, 1e-3);
  CHECK(exact.classification == ShotClass::decayed);
  double err = 0.0;
  for (std::size_t i = 0; i < exact.r.size(); ++i)
    if (exact.w[i] > 1e-6) err = std::max(err, std::fabs(exact.w[i] - soliton_1d(4.0, exact.r[i])));
  CHECK(err < 1e-4);
}

TEST_CASE("shooting is monotone in beta across the threshold") {
  ProblemParams pp{1, 2.0, 4.0};
  bool seen_crossed = false;
  for (double beta : {1.05, 1.2, 1.35, 1.41, 1.42, 1.5, 1.8, 2.5}) {
    auto rec = integrate_radial(pp, beta, 20.0, 1e-3);
    if (rec.classification == ShotClass::crossed_zero) seen_crossed = true;
    // once a beta crosses, every larger one must cross as well
    if (seen_crossed) CHECK(rec.classification == ShotClass::crossed_zero);
  }
  CHECK(seen_crossed);
}

TEST_CASE("ground state n=1 p=2 q=4: soliton oracle") {
  RadialProfile prof = find_ground_state({1, 2.0, 4.0});
  CHECK(prof.beta == doctest::Approx(std::sqrt(2.0)).epsilon(1e-4));
  CHECK(prof.E_p == doctest::Approx(16.0 / 3.0).epsilon(1e-3));
  CHECK(prof.M_q == doctest::Approx(16.0 / 3.0).epsilon(1e-3));
  CHECK(prof.nehari_residual() < 1e-3);

  auto sc = sobolev_constant(prof);
  CHECK(sc.S0 == doctest::Approx(std::sqrt(16.0 / 3.0)).epsilon(1e-3));
  CHECK(std::fabs(sc.S0 - sc.quotient) / sc.S0 < 1e-3);

  auto dr = fit_decay_rate(prof);
  CHECK(dr.rate == doctest::Approx(1.0).epsilon(0.02));
  CHECK(dr.target == doctest::Approx(1.0));

  // profile invariants
  CHECK(prof.w_values.front() == doctest::Approx(prof.beta));
  CHECK(prof.w_prime.front() == 0.0);
  for (std::size_t i = 1; i < prof.w_values.size(); ++i)
    CHECK(prof.w_values[i] < prof.w_values[i - 1]);
  CHECK(prof.w_values.back() < 1e-6 * prof.beta);
}

TEST_CASE("ground state n=1 p=1.5 q=3: first-integral value of beta") {
  RadialProfile prof = find_ground_state({1, 1.5, 3.0});
  // w(0)^p / p = w(0)^q / q at a turning start: beta = (q/p)^{1/(q-p)}
  CHECK(prof.beta == doctest::Approx(std::pow(2.0, 2.0 / 3.0)).epsilon(1e-3));
  CHECK(prof.nehari_residual() < 1e-3);
}

TEST_CASE("closed-form family p=2, q in {3,4,6}") {
  for (double q : {3.0, 4.0, 6.0}) {
    RadialProfile prof = find_ground_state({1, 2.0, q});
    double err = 0.0;
    for (std::size_t i = 0; i < prof.r_grid.size(); ++i) {
      if (prof.r_grid[i] > prof.resolved_r) break;
      err = std::max(err, std::fabs(prof.w_values[i] - soliton_1d(q, prof.r_grid[i])));
    }
    CAPTURE(q);
    CHECK(err < 1e-3);
  }
}

TEST_CASE("Nehari identity for higher dimensions") {
  for (auto [n, p, q] : {std::tuple{2, 1.5, 3.0}, {3, 2.0, 4.0}, {2, 1.5, 4.0}}) {
    RadialProfile prof = find_ground_state({n, p, q});
    CAPTURE(n);
    CAPTURE(p);
    CAPTURE(q);
    CHECK(prof.nehari_residual() < 1e-3);
  }
}

TEST_CASE("decay rate n=2 p=1.5 q=3 against the cited limit") {
  RadialProfile prof = find_ground_state({2, 1.5, 3.0});
  auto dr = fit_decay_rate(prof);
  CHECK(dr.target == doctest::Approx(std::pow(2.0, 2.0 / 3.0)));
  CHECK(std::fabs(dr.rate - dr.target) / dr.target < 0.05);

  // weak bound: w' + p^{-1/p} w <= 0 (up to tolerance) on the resolved tail
  double a = std::pow(1.5, -1.0 / 1.5);
  for (std::size_t i = 0; i < prof.r_grid.size(); ++i) {
    if (prof.r_grid[i] > prof.resolved_r) break;
    if (prof.w_values[i] < 1e-2 * prof.beta)
      CHECK(prof.w_prime[i] + a * prof.w_values[i] <= 1e-6);
  }
}

TEST_CASE("quotient homogeneity: J(c w) = J(w)") {
  RadialProfile prof = find_ground_state({1, 2.0, 4.0});
  double j0 = sobolev_constant(prof).quotient;
  for (double c : {0.5, 2.0, 10.0}) {
    RadialProfile scaled = prof;
    for (double& v : scaled.w_values) v *= c;
    for (double& v : scaled.w_prime) v *= c;
    auto norms = profile_norms(scaled);
    scaled.E_p = norms.E_p;
    scaled.M_q = norms.M_q;
    double j = sobolev_constant(scaled).quotient;
    CHECK(j == doctest::Approx(j0).epsilon(1e-12));
  }
}

TEST_CASE("parameter validation and bracket errors") {
  CHECK_THROWS_AS(integrate_radial({1, 2.0, 4.0}, -1.0, 20.0, 1e-3), Error);
  CHECK_THROWS_AS(integrate_radial({1, 2.0, 4.0}, 1.0, 20.0, 1.0), Error); // h too big
  CHECK_THROWS_AS(find_ground_state({1, 2.0, 4.0}, 0.5), Error);           // tol out of range
  ProblemParams bad{1, 2.0, 1.5};
  CHECK_THROWS_AS(find_ground_state(bad), Error); // q <= p
  ProblemParams warn{1, 2.0, 4.0};                // p >= n: outside the standing range
  CHECK(warn.outside_standard_range());
  ProblemParams fine{3, 2.0, 4.0};                // q < np/(n-p) = 6
  CHECK(!fine.outside_standard_range());
}

TEST_CASE("sample_on_grid geometry") {
  RadialProfile prof = find_ground_state({2, 1.5, 3.0});
  ProfileSampler sampler(prof);
  Grid g = Grid::make_2d(1.0, 1.0, 128, 128);
  const double eps = 0.05;

  SUBCASE("interior centre: max at the nearest cell, value near beta") {
    Field u = sample_on_grid(sampler, {0.5, 0.5}, eps, g);
    double best = 0.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < u.values.size(); ++i)
      if (u.values[i] > best) {
        best = u.values[i];
        arg = i;
      }
    int bi = (int)(arg % 128), bj = (int)(arg / 128);
    CHECK(std::fabs(g.centre(0, bi) - 0.5) <= 0.5 * g.h[0] + 1e-12);
    CHECK(std::fabs(g.centre(1, bj) - 0.5) <= 0.5 * g.h[1] + 1e-12);
    CHECK(best == doctest::Approx(prof.beta).epsilon(2e-2));
  }

  SUBCASE("edge-centred bump integrates to about half the interior one") {
    Field in = sample_on_grid(sampler, {0.5, 0.5}, eps, g);
    Field ed = sample_on_grid(sampler, {0.5, 0.0}, eps, g);
    double mi = 0.0, me = 0.0;
    for (std::size_t i = 0; i < in.values.size(); ++i) {
      mi += in.values[i];
      me += ed.values[i];
    }
    CHECK(me / mi == doctest::Approx(0.5).epsilon(0.01));
  }

  SUBCASE("bumps 10 eps apart do not talk") {
    CHECK(sampler(10.0) <= std::exp(-3.0) * prof.beta);
    Field a = sample_on_grid(sampler, {0.25, 0.5}, eps, g);
    Field b = sample_on_grid(sampler, {0.75, 0.5}, eps, g);
    double cross = 0.0;
    for (int j = 0; j < 128; ++j)
      for (int i = 0; i < 40; ++i) // cells near the first bump
        cross = std::max(cross, b.at(i, j));
    CHECK(cross <= std::exp(-3.0) * prof.beta);
    (void)a;
  }

  SUBCASE("epsilon must be positive") {
    CHECK_THROWS_AS(sample_on_grid(sampler, {0.5, 0.5}, 0.0, g), Error);
  }
}
