#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "peakflow/operators.hpp"
#include "peakflow/reference.hpp"

using namespace peakflow;

namespace {

Field random_field(const Grid& g, unsigned seed, double lo = 0.0, double hi = 1.0) {
  Field u(g, 0.1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : u.values) v = d(rng);
  return u;
}

} // namespace

TEST_CASE("neumann ghosts mirror the boundary cells") {
  Grid g = Grid::make_2d(1.0, 1.0, 8, 8);
  Field u(g, 0.1);
  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 8; ++i) u.at(i, j) = 10.0 * i + j;
  auto ext = neumann_extend(u);
  auto E = [&](int i, int j) { return ext[(std::size_t)(j + 1) * 10 + (i + 1)]; };
  CHECK(E(-1, 3) == u.at(0, 3));
  CHECK(E(8, 5) == u.at(7, 5));
  CHECK(E(2, -1) == u.at(2, 0));
  CHECK(E(2, 8) == u.at(2, 7));
  CHECK(E(-1, -1) == u.at(0, 0)); // corner mirrored twice

  SUBCASE("constant field: all ghosts equal the constant") {
    Field c(g, 0.1, 3.5);
    auto e = neumann_extend(c);
    for (double v : e) CHECK(v == 3.5);
  }
  SUBCASE("linear in x: zero normal difference across x faces") {
    Field lin(g, 0.1);
    for (int j = 0; j < 8; ++j)
      for (int i = 0; i < 8; ++i) lin.at(i, j) = g.centre(0, i);
    auto e = neumann_extend(lin);
    auto L = [&](int i, int j) { return e[(std::size_t)(j + 1) * 10 + (i + 1)]; };
    CHECK(L(-1, 2) == L(0, 2));
    CHECK(L(8, 2) == L(7, 2));
  }
}

TEST_CASE("p_laplacian_s basics") {
  Grid g = Grid::make_2d(1.0, 1.0, 32, 32);

  SUBCASE("constant field maps to zero") {
    Field u(g, 0.1, 2.0);
    Field out = p_laplacian_s(u, 1.5, 1e-8);
    for (double v : out.values) CHECK(v == 0.0);
  }

  SUBCASE("p = 2 reduces to the 5-point Laplacian for any s_bar") {
    Field u = random_field(g, 11);
    Field a = p_laplacian_s(u, 2.0, 0.0);
    Field b = p_laplacian_s(u, 2.0, 123.0);
    auto ext = neumann_extend(u);
    auto E = [&](int i, int j) { return ext[(std::size_t)(j + 1) * 34 + (i + 1)]; };
    double h2 = g.h[0] * g.h[0];
    for (int j = 0; j < 32; ++j)
      for (int i = 0; i < 32; ++i) {
        double lap = (E(i + 1, j) + E(i - 1, j) + E(i, j + 1) + E(i, j - 1) - 4.0 * E(i, j)) / h2;
        CHECK(a.at(i, j) == doctest::Approx(lap).epsilon(1e-12));
        CHECK(b.at(i, j) == doctest::Approx(lap).epsilon(1e-12));
      }
  }

  SUBCASE("discrete divergence theorem: cell sum vanishes") {
    for (unsigned seed : {1u, 2u, 3u}) {
      Field u = random_field(g, seed);
      Field out = p_laplacian_s(u, 1.5, 1e-6);
      double total = 0.0, scale = 0.0;
      for (double v : out.values) {
        total += v * g.cell_volume();
        scale += std::fabs(v) * g.cell_volume();
      }
      CHECK(std::fabs(total) <= 1e-12 * std::max(scale, 1.0));
    }
  }

  SUBCASE("reflection symmetry") {
    Field u = random_field(g, 4);
    // symmetrize across the x mid-plane, then the operator must commute
    for (int j = 0; j < 32; ++j)
      for (int i = 0; i < 16; ++i) u.at(31 - i, j) = u.at(i, j);
    Field out = p_laplacian_s(u, 1.5, 1e-6);
    for (int j = 0; j < 32; ++j)
      for (int i = 0; i < 16; ++i) CHECK(out.at(i, j) == doctest::Approx(out.at(31 - i, j)));
  }

  SUBCASE("1d analytic oracle: u = x^2, p = 1.5") {
    // div((s + u'^2)^{-1/4} u') with u' = 2x:
    //   d/dx [ (s + 4x^2)^{-1/4} 2x ] = 2 (s + 4x^2)^{-1/4} - 2x^2 (s+4x^2)^{-5/4} * 4
    const double s = 1e-4;
    auto exact = [&](double x) {
      double b = s + 4.0 * x * x;
      return 2.0 * std::pow(b, -0.25) - 8.0 * x * x * std::pow(b, -1.25) * 0.5;
    };
    double prev_err = 0.0;
    for (int cells : {128, 256}) {
      Grid g1 = Grid::make_1d(1.0, cells);
      Field u(g1, 0.1);
      for (int i = 0; i < cells; ++i) u.at(i) = g1.centre(0, i) * g1.centre(0, i);
      Field out = p_laplacian_s(u, 1.5, s);
      double err = 0.0;
      for (int i = cells / 4; i < 3 * cells / 4; ++i)
        err = std::max(err, std::fabs(out.at(i) - exact(g1.centre(0, i))));
      if (prev_err > 0.0) CHECK(err < 0.3 * prev_err); // ~O(h^2)
      prev_err = err;
    }
  }
}

TEST_CASE("integrate") {
  Grid g = Grid::make_2d(1.0, 1.0, 32, 32);

  SUBCASE("constant 2 to the third power on the unit square") {
    Field u(g, 0.1, 2.0);
    CHECK(integrate(u, 3.0) == doctest::Approx(8.0).epsilon(1e-13));
  }

  SUBCASE("linearity over a reflected copy") {
    Field u = random_field(g, 9);
    for (int j = 0; j < 32; ++j)
      for (int i = 0; i < 16; ++i) u.at(31 - i, j) = u.at(i, j);
    double whole = integrate(u, 1.0);
    double half = 0.0;
    for (int j = 0; j < 32; ++j)
      for (int i = 0; i < 16; ++i) half += u.at(i, j) * g.cell_volume();
    CHECK(whole == doctest::Approx(2.0 * half).epsilon(1e-12));
  }

  SUBCASE("midpoint rule is second order on a smooth integrand") {
    double errs[2];
    int k = 0;
    for (int cells : {64, 128}) {
      Grid gg = Grid::make_2d(1.0, 1.0, cells, cells);
      Field u(gg, 0.1);
      for (int j = 0; j < cells; ++j)
        for (int i = 0; i < cells; ++i)
          u.at(i, j) = std::sin(M_PI * gg.centre(0, i)) * std::sin(M_PI * gg.centre(1, j));
      // int_0^1 int_0^1 sin(pi x) sin(pi y) = (2/pi)^2
      errs[k++] = std::fabs(integrate(u, 1.0) - 4.0 / (M_PI * M_PI));
    }
    CHECK(errs[1] < 0.3 * errs[0]);
  }

  SUBCASE("exponent below one is rejected") {
    Field u(g, 0.1, 1.0);
    CHECK_THROWS_AS(integrate(u, 0.5), Error);
  }
}

TEST_CASE("grad_energy_density") {
  Grid g = Grid::make_2d(1.0, 1.0, 32, 32);
  SUBCASE("constant field with s_bar = 0 gives zero") {
    Field u(g, 0.1, 1.0);
    Field d = grad_energy_density(u, 1.5, 0.0);
    for (double v : d.values) CHECK(v == 0.0);
  }
  SUBCASE("constant field with s_bar = sigma gives sigma^{p/2}") {
    Field u(g, 0.1, 1.0);
    Field d = grad_energy_density(u, 1.5, 0.01);
    for (double v : d.values) CHECK(v == doctest::Approx(std::pow(0.01, 0.75)).epsilon(1e-14));
  }
  SUBCASE("interior of a linear slope gives |g|^p") {
    Grid g1 = Grid::make_1d(1.0, 64);
    Field u(g1, 0.1);
    for (int i = 0; i < 64; ++i) u.at(i) = 3.0 * g1.centre(0, i);
    Field d = grad_energy_density(u, 1.5, 0.0);
    for (int i = 1; i < 63; ++i) CHECK(d.at(i) == doctest::Approx(std::pow(3.0, 1.5)).epsilon(1e-12));
  }
}

TEST_CASE("OpenMP kernels agree bitwise with the serial reference") {
  Grid g = Grid::make_2d(1.3, 0.7, 96, 64);
  Field u = random_field(g, 42);

  Field a = p_laplacian_s(u, 1.5, 1e-8);
  Field b = reference::p_laplacian_s(u, 1.5, 1e-8);
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == b.values[i]);

  Field da = grad_energy_density(u, 1.5, 1e-8);
  Field db = reference::grad_energy_density(u, 1.5, 1e-8);
  for (std::size_t i = 0; i < da.values.size(); ++i) CHECK(da.values[i] == db.values[i]);

  CHECK(integrate(u, 3.0) == reference::integrate(u, 3.0));
  CHECK(integrate(u, 1.5) == reference::integrate(u, 1.5));
}

TEST_CASE("diffusion dt bound hits the flat-region coefficient") {
  Grid g = Grid::make_2d(1.0, 1.0, 64, 64);
  Field u(g, 0.05, 1.0); // flat
  const double p = 1.5, s_bar = 1e-8, eps = 0.05;
  double dt = diffusion_dt_bound(u, p, s_bar, eps);
  double c = std::pow(s_bar, 0.5 * (p - 2.0)); // = s_bar^{-1/4} = 100
  double expected = g.h[0] * g.h[0] / (2.0 * 2 * std::pow(eps, p) * c);
  CHECK(dt == doctest::Approx(expected).epsilon(1e-12));
}
