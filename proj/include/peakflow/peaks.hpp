#ifndef PEAKFLOW_PEAKS_HPP
#define PEAKFLOW_PEAKS_HPP

#include <optional>
#include <string>

#include "peakflow/radial.hpp"

namespace peakflow {

/// Point on the rectangle boundary: edge id + arclength along the edge.
/// 2D edges: 0 x=0, 1 x=Lx, 2 y=0, 3 y=Ly (arc measured along the edge).
/// 1D "edges": 0 the left endpoint, 1 the right endpoint (arc unused).
struct BoundaryPoint {
  int edge = 0;
  double arc = 0.0;
};

Point boundary_to_ambient(const Grid& grid, const BoundaryPoint& bp);
/// Axis tangential to the given edge in 2D (x=const edges -> axis 1).
int edge_tangent_axis(int edge);

struct PeakConfig {
  std::vector<Point> interior;        // p_1..p_k
  std::vector<BoundaryPoint> boundary; // q_1..q_l
  std::vector<double> a;              // interior coefficients
  std::vector<double> b;              // boundary coefficients
  double epsilon = 0.1;

  int k() const { return (int)interior.size(); }
  int l() const { return (int)boundary.size(); }
  void validate(const Grid& grid) const;
};

/// PeakConfig with coefficients divided by their joint mean.
struct NormalizedConfig {
  PeakConfig config;
  double coeff_mean = 1.0;
};
NormalizedConfig normalize(const PeakConfig& config);

struct PeakDeltas {
  double delta;      // = N epsilon, the apart scale
  double delta_bar;  // L-inf gap allowance
  double delta_hat;  // coefficient box half-width
};

enum class TraverseCondition { a, b, c, d, e };
const char* traverse_condition_name(TraverseCondition c);

struct PeakVerdict {
  bool is_peak = false;
  double linf_gap = 0.0;
  double energy = 0.0;           // eps^{-n} int (eps^p |Du|^p + u^p) dx
  double holder_quotient = 0.0;  // discrete C^gamma proxy at scale eps
  bool apart_ok = false;
  bool coeff_ok = false;
  bool gap_ok = false;
  bool energy_ok = false;
  bool centres_ok = false;
  std::optional<TraverseCondition> failing_condition;
  std::string diagnostic;
};

struct DeltaApartResult {
  bool ok = true;
  std::string failing_pair;
};

/// sum a_i w((x-p_i)/eps) + sum b_j w((x-q_j)/eps) sampled on the grid.
Field build_phi(const PeakConfig& config, const RadialProfile& profile, const Grid& grid);
Field build_phi(const PeakConfig& config, const ProfileSampler& sampler, const Grid& grid);

/// The signed half-ball mass difference E_t: cell masses inside the eps ball
/// at z (z[axis] = t), signed by the side of the plane x_axis = t. Sub-cell
/// plane overlap is exact; the ball indicator is ramped over one cell at the
/// rim so E_t is continuous on the lattice. mirror_edge >= 0 adds the even
/// extension across that edge.
double mass_difference_E(const Field& u, Point z, int axis, double t, double eps,
                         int mirror_edge = -1);

/// Root of the half-ball mass difference E_t per axis, bisected over
/// [seed - eps/4, seed + eps/4], axes cycled until the point settles.
Point interior_mass_centre(const Field& u, Point seed, double epsilon);

/// Tangential mass centre on the even extension across the seed's edge.
BoundaryPoint boundary_mass_centre(const Field& u, const BoundaryPoint& seed, double epsilon);

struct FitResult {
  std::vector<double> a;
  std::vector<double> b;
  double residual = 0.0;   // int (u - sum c_i w_i)^2
  double gram_cond = 1.0;
};

/// Unconstrained least squares of u against the bump basis at the given
/// centres (normal equations).
FitResult fit_coefficients(const Field& u, const std::vector<Point>& interior,
                           const std::vector<BoundaryPoint>& boundary,
                           const RadialProfile& profile, double epsilon);

DeltaApartResult delta_apart(const PeakConfig& config, const Grid& grid, double delta);

struct MembershipResult {
  PeakVerdict verdict;
  PeakConfig config;          // recomputed centres, fitted coefficients
  NormalizedConfig normalized;
};

struct MembershipOptions {
  PeakDeltas deltas;
  double energy_cap = 0.0;
  double holder_cap = std::numeric_limits<double>::infinity(); // reported, not asserted
  double holder_gamma = 0.5;
};

/// Full Definition-2.1 check from a seed configuration: recompute mass
/// centres, refit coefficients, and test the gap, apart, coefficient-box and
/// energy conditions; tags the first active traverse band.
MembershipResult membership(const Field& u, const RadialProfile& profile,
                            const MembershipOptions& opts, const PeakConfig& seed);

} // namespace peakflow

#endif
