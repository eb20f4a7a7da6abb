#ifndef PEAKFLOW_FLOW_HPP
#define PEAKFLOW_FLOW_HPP

#include <functional>
#include <limits>

#include "peakflow/functionals.hpp"
#include "peakflow/peaks.hpp"

namespace peakflow {

struct FlowParams {
  double p = 2.0;
  double q = 4.0;
  double epsilon = 0.1;
  double s = 1e-8;       // regularizer in the x frame; s_bar = eps^2 s
  double sigma = 0.0;    // freeze margin, recorded with the threshold
  double threshold = -std::numeric_limits<double>::infinity(); // freeze level
  double dt_safety = 0.8;
  EtaParams eta;
  double descent_tol = 1e-8; // per-step I_{s,eta} increase allowance
  double conv_tol = 1e-6;    // |u_t|_inf < conv_tol |u|_inf ...
  int conv_steps = 100;      // ... sustained this many steps

  FunctionalParams functional() const { return {p, q, s, eta}; }
};

struct HistoryRow {
  double t = 0.0;
  double dt = 0.0;
  FunctionalReport report;
  double ut_sq_y = 0.0;     // int (u_t)^2 dy over Omega^eps
  double clipped_mass = 0.0;
  double ut_max_rel = 0.0;  // |u_t|_inf / |u|_inf
};

struct TrackRow {
  double t = 0.0;
  bool frozen = false;
  bool above_threshold = true;
  bool is_peak = false;
  double I_s_eta = 0.0;
  double linf_gap = 0.0;
  NormalizedConfig normalized;
  std::optional<TraverseCondition> band;
};

struct FlowState {
  Field u;
  double t = 0.0;
  bool frozen = false;
  bool converged = false;
  double freeze_time = -1.0;
  long long steps = 0;
  int conv_run = 0;
  double clipped_total = 0.0;
  double B0 = 0.0;
  double B_min = 0.0, B_max = 0.0; // running envelope of B
  std::vector<HistoryRow> history;
  std::vector<TrackRow> config_track;
};

/// Seeds a state with the functional report of the initial field.
FlowState make_flow_state(Field u, const FlowParams& params);

/// dt_safety * min(diffusion bound, reaction bound); pure in the state.
double stable_dt(const FlowState& state, const FlowParams& params);

/// One forward-Euler update u <- u + dt (eps^p Lap_{p,s} u + lambda u^{q-1} - u^{p-1})
/// with lambda from the pre-step field; negatives clipped to zero and logged.
void step(FlowState& state, const FlowParams& params, double dt);

struct TrackingOptions {
  const RadialProfile* profile = nullptr;
  PeakConfig seed;
  MembershipOptions membership;
  long long every = 25;       // steps between membership evaluations
  bool abort_on_loss = true;  // centre loss while unfrozen above threshold
  bool stop_on_loss = false;  // stop stepping when tracking is lost
};

struct RunOptions {
  double t_end = 1.0;
  long long max_steps = std::numeric_limits<long long>::max();
  std::optional<TrackingOptions> tracking;
  std::function<void(const FlowState&)> snapshot;
  long long snap_every = 0;
  std::string dump_dir; // aborts dump final state here when set
  // long runs thin the in-memory history once it exceeds this row count,
  // halving its resolution while always keeping the first and last rows
  std::size_t history_cap = 400000;
};

/// Steps until t_end, convergence, or freezing; runs the membership tracker
/// at its cadence and records the config track.
FlowState run_flow(Field initial, const FlowParams& params, const RunOptions& options);

struct ResidualReport {
  double residual = 0.0; // scale-normalized L2 residual of the stationary eq.
  double lambda = 0.0;
};

/// || eps^p Lap_{p,s} u - u^{p-1} + lambda u^{q-1} ||_2 / || lambda u^{q-1} ||_2.
ResidualReport stationary_residual(const Field& u, const FlowParams& params);
/// Same, with the multiplier fixed by the caller (e.g. after removal).
ResidualReport stationary_residual(const Field& u, const FlowParams& params, double lambda);

/// lambda^{1/(q-p)} u: turns a solution with multiplier lambda of the
/// stationary equation into one with multiplier 1.
Field remove_multiplier(const Field& u, double lambda, double p, double q);

struct DescentAudit {
  double worst_step_increase = -std::numeric_limits<double>::infinity();
  double ratio_min = std::numeric_limits<double>::infinity();  // (-dI/dt) vs
  double ratio_max = 0.0;                                      // p eta'/B^{p/q} int u_t^2
  int rows = 0;
};

/// Worst per-step increase of I_{s,eta} and the measured ratio between the
/// discrete decay rate and the continuum dissipation identity.
DescentAudit descent_audit(const FlowState& state, const FlowParams& params);

/// Outward band crossings (inner edge -> outer edge while unfrozen above
/// threshold) in the recorded config track. Empty means no traverse.
std::vector<std::string> find_outward_traverses(const FlowState& state, const PeakDeltas& deltas,
                                                const Grid& grid);

} // namespace peakflow

#endif
