// Timings for the OpenMP grid kernels against the serial reference.
#include <chrono>
#include <functional>
#include <cstdio>
#include <random>

#ifdef PEAKFLOW_OPENMP
#include <omp.h>
#endif

#include "peakflow/reference.hpp"

using namespace peakflow;
using clk = std::chrono::steady_clock;

namespace {

double ms_per_call(int reps, const std::function<void()>& f) {
  f(); // warm up
  auto t0 = clk::now();
  for (int i = 0; i < reps; ++i) f();
  auto t1 = clk::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

double max_diff(const Field& a, const Field& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    m = std::max(m, std::fabs(a.values[i] - b.values[i]));
  return m;
}

} // namespace

int main(int argc, char** argv) {
  int cells = argc > 1 ? std::atoi(argv[1]) : 512;
  int reps = argc > 2 ? std::atoi(argv[2]) : 20;
  const double p = 1.5, s_bar = 1e-8;

  Grid g = Grid::make_2d(1.0, 1.0, cells, cells);
  Field u(g, 0.05);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> vd(0.0, 1.0);
  for (double& v : u.values) v = vd(rng);

#ifdef PEAKFLOW_OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP\n");
#endif
  std::printf("grid %dx%d, p=%.2f, %d reps\n\n", cells, cells, p, reps);
  std::printf("%-22s %10s %10s %9s %12s\n", "kernel", "serial ms", "omp ms", "speedup",
              "max |diff|");

  OperatorWorkspace ws;
  Field out_omp;
  {
    Field out_ser = reference::p_laplacian_s(u, p, s_bar);
    double ts = ms_per_call(reps, [&] { out_ser = reference::p_laplacian_s(u, p, s_bar); });
    double tp = ms_per_call(reps, [&] { p_laplacian_s(u, p, s_bar, out_omp, ws); });
    std::printf("%-22s %10.3f %10.3f %8.2fx %12.3e\n", "p_laplacian_s", ts, tp, ts / tp,
                max_diff(out_ser, out_omp));
  }
  {
    Field out_ser = reference::grad_energy_density(u, p, s_bar);
    double ts = ms_per_call(reps, [&] { out_ser = reference::grad_energy_density(u, p, s_bar); });
    double tp = ms_per_call(reps, [&] { out_omp = grad_energy_density(u, p, s_bar, ws); });
    std::printf("%-22s %10.3f %10.3f %8.2fx %12.3e\n", "grad_energy_density", ts, tp, ts / tp,
                max_diff(out_ser, out_omp));
  }
  {
    double vs = 0.0, vp = 0.0;
    double ts = ms_per_call(reps, [&] { vs = reference::integrate(u, 3.0); });
    double tp = ms_per_call(reps, [&] { vp = integrate(u, 3.0, ws); });
    std::printf("%-22s %10.3f %10.3f %8.2fx %12.3e\n", "integrate (q=3)", ts, tp, ts / tp,
                std::fabs(vs - vp));
  }
  {
    double vs = 0.0, vp = 0.0;
    double ts = ms_per_call(reps, [&] { vs = reference::integrate(u, 1.5); });
    double tp = ms_per_call(reps, [&] { vp = integrate(u, 1.5, ws); });
    std::printf("%-22s %10.3f %10.3f %8.2fx %12.3e\n", "integrate (p=1.5)", ts, tp, ts / tp,
                std::fabs(vs - vp));
  }
  return 0;
}
