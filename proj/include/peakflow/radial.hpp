#ifndef PEAKFLOW_RADIAL_HPP
#define PEAKFLOW_RADIAL_HPP

#include <vector>

#include "peakflow/common.hpp"
#include "peakflow/grid.hpp"

namespace peakflow {

struct ProblemParams {
  int n = 1;      // spatial dimension
  double p = 2.0; // gradient exponent, > 1
  double q = 4.0; // reaction exponent, > p

  void validate() const;
  /// True when the standing assumptions 1 < p < n, q < np/(n-p) fail.
  /// The solver still runs; callers decide whether to warn.
  bool outside_standard_range() const;
};

enum class ShotClass { crossed_zero, turned_up, decayed };

const char* shot_class_name(ShotClass c);

/// One outward integration of the radial equation at a fixed shooting value.
struct ShotRecord {
  ShotClass classification = ShotClass::turned_up;
  double beta = 0.0;
  double h = 0.0;                // sample spacing
  std::vector<double> r;         // 0, h, 2h, ... up to the stopping event
  std::vector<double> w;
  std::vector<double> w_prime;
  double event_r = 0.0;          // radius where the classification fired
};

struct RadialProfile {
  ProblemParams params;
  std::vector<double> r_grid;  // 0 .. r_max, spacing h
  std::vector<double> w_values;
  std::vector<double> w_prime;
  double beta = 0.0;        // w(0)
  double decay_rate = 0.0;  // fitted exponential rate
  double decay_target = 0.0; // (1/(p-1))^{1/p}
  double E_p = 0.0;         // int (|Dw|^p + w^p) over R^n
  double M_q = 0.0;         // int w^q over R^n
  double resolved_r = 0.0;  // last radius produced by the integrator;
                            // beyond it the samples are the fitted tail
  bool range_warning = false;

  double nehari_residual() const { return std::abs(E_p - M_q) / M_q; }
};

/// Integrates |w'|^{p-2}[w'' + (n-1)/(p-1) w'/r] = (w^{p-1} - w^{q-1})/(p-1)
/// from w(0)=beta, w'(0)=0 and classifies the shot.
ShotRecord integrate_radial(const ProblemParams& params, double beta, double r_max, double h);

/// Bisection on beta between a turned_up and a crossed_zero shot, then profile
/// assembly: the final trajectory is truncated where integration noise takes
/// over and extended by the fitted exponential tail out to r_max.
RadialProfile find_ground_state(const ProblemParams& params, double tol = 1e-8,
                                double r_max = 30.0, double h = 1e-3);

/// (E_p, M_q) by composite trapezoid in r^{n-1} dr plus the analytic
/// exponential tail correction beyond r_max.
struct RadialNorms {
  double E_p;
  double M_q;
};
RadialNorms profile_norms(const RadialProfile& profile);

struct SobolevConstant {
  double S0;              // E_p^{1 - p/q}
  double quotient;        // E_p / M_q^{p/q}, the direct Rayleigh quotient
};
SobolevConstant sobolev_constant(const RadialProfile& profile);

struct DecayFit {
  double rate;    // least-squares slope over the tail window
  double target;  // (1/(p-1))^{1/p}
};
DecayFit fit_decay_rate(const RadialProfile& profile);

/// Monotone cubic (Fritsch-Carlson) interpolant of the profile in r with
/// exponential extrapolation beyond the stored grid. Thread-safe once built.
class ProfileSampler {
public:
  explicit ProfileSampler(const RadialProfile& profile);
  double operator()(double r) const;

private:
  std::vector<double> r_, w_, d_; // nodes, values, node slopes
  double h_ = 0.0;
  double tail_rate_ = 0.0;
  double tail_r_ = 0.0, tail_w_ = 0.0;
};

void export_profile_csv(const RadialProfile& profile, const std::string& path);

/// Field with value w(|x - centre| / epsilon) at each cell centre; centres
/// outside Omega are allowed (the restriction to Omega is the sample).
Field sample_on_grid(const ProfileSampler& sampler, Point centre, double epsilon,
                     const Grid& grid);
Field sample_on_grid(const RadialProfile& profile, Point centre, double epsilon,
                     const Grid& grid);

} // namespace peakflow

#endif
