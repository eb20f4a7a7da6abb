#ifndef PEAKFLOW_MINIMAX_HPP
#define PEAKFLOW_MINIMAX_HPP

#include "peakflow/flow.hpp"
#include "peakflow/io.hpp"

namespace peakflow {

struct GSpec {
  int k = 1;
  int l = 0;
  double N = 3.0;         // apart scale delta = N epsilon
  double delta_hat = 0.1; // coefficient box half-width
  int pos_res = 8;        // lattice points per interior position axis
  int bpos_res = 0;       // per boundary edge; 0 means same as pos_res
  int coeff_res = 3;      // lattice points per free coefficient axis

  double delta(double epsilon) const { return N * epsilon; }
};

/// dim G = (n+1) k + n l - 1.
int g_dimension(const GSpec& spec, int n);

MembershipOptions default_membership(const GSpec& spec, const RadialProfile& profile,
                                     double epsilon);

struct GSample {
  PeakConfig config;
  bool boundary_of_G = false;
  double I0 = 0.0;        // I_{s,eta}(phi_Lambda)
  double S_estimate = 0.0;
  bool estimate_ok = false;
  double maintained_until = 0.0; // level-holding duration in the frozen pass
  bool frozen_at_zero = false;
};

struct MinimaxSchedule {
  double estimate_horizon = 0.5;
  double solve_horizon = 2.0;
  double converge_horizon = 40.0;
  long long track_every = 50;
  double tracking_radius_frac = 0.5; // of delta; centre pinning for S(Lambda)
  double converge_s = 0.0; // > 0: the winner convergence runs at this smaller
                           // regularizer (the s -> 0 refinement step); the
                           // sweep phases keep params.s
};

/// Tensor lattice over G: interior positions, per-edge boundary positions,
/// mean-one coefficient slices. Samples violating the delta-apart condition
/// are kept and tagged boundary-of-G.
std::vector<GSample> sample_G(const GSpec& spec, const Grid& grid, const RadialProfile& profile,
                              double epsilon);

/// inf over the flow trajectory of I_{s,eta} while membership holds and the
/// centres stay pinned near the seed configuration.
double estimate_S(const GSample& sample, const GSpec& spec, const RadialProfile& profile,
                  const Grid& grid, FlowParams params, const MinimaxSchedule& schedule);

struct SStarEstimate {
  double S_star = 0.0;
  int argmax = -1;
};
SStarEstimate estimate_S_star(const std::vector<GSample>& samples);

struct TrackTResult {
  NormalizedConfig config;
  bool frozen = false;
};

/// The mapping T_t: run the flow with freezing to time t and re-extract the
/// normalized configuration; identity (frozen) on boundary-of-G seeds.
TrackTResult track_T(const GSample& sample, const GSpec& spec, const RadialProfile& profile,
                     const Grid& grid, FlowParams params, double threshold, double t,
                     const MinimaxSchedule& schedule);

struct MinimaxReport {
  std::vector<GSample> samples;
  double S_star = 0.0;
  int argmax = -1;
  double threshold = 0.0;
  double boundary_frozen_fraction = 0.0;
  int winner = -1;
  Field winner_field;              // converged stationary field (unscaled)
  Field solution;                  // after multiplier removal
  ResidualReport winner_residual;  // of the lambda-form equation
  double np_residual = 0.0;        // lambda removed
  MembershipResult winner_membership;
  bool winner_converged = false;
  double winner_I = 0.0;
  double reference = 0.0; // S_{0,k,l}
  double relative_gap = 0.0;
  double S0 = 0.0;
  std::vector<std::string> traverse_violations;
  std::vector<std::string> containment_violations;
};

/// Steps 1-4: estimate S*, install the freezing threshold, verify the
/// boundary freeze and containment, then drive the longest level-holding
/// sample to a stationary point and certify it.
MinimaxReport minimax_solve(const GSpec& spec, const RadialProfile& profile, const Grid& grid,
                            FlowParams params, const MinimaxSchedule& schedule,
                            const std::string& out_dir = "");

struct TrendRow {
  double epsilon = 0.0;
  double S_star = 0.0;
  double reference = 0.0;
  double relative_gap = 0.0; // |S* - ref| / S0
};

struct TrendTable {
  std::vector<TrendRow> rows;
  bool monotone = false; // gaps decrease along the sequence within the floor
};

/// S* per epsilon against (k + l/2)^{1-p/q} S0; the grids must resolve each
/// epsilon (epsilon >= 5h).
TrendTable verify_theorem32(const GSpec& spec, const RadialProfile& profile,
                            const std::vector<std::pair<double, Grid>>& eps_grids,
                            FlowParams params, const MinimaxSchedule& schedule,
                            double noise_floor = 0.01);

} // namespace peakflow

#endif
