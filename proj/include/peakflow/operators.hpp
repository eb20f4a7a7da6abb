#ifndef PEAKFLOW_OPERATORS_HPP
#define PEAKFLOW_OPERATORS_HPP

#include "peakflow/grid.hpp"

namespace peakflow {

/// Ghost-extended copy of a field: one mirror cell per face (even extension),
/// corners mirrored twice. Layout (cx+2) x (cy+2), row-major, ghost at 0.
std::vector<double> neumann_extend(const Field& u);

/// Conservative-flux regularized p-Laplacian
///   div( (s_bar + |Du|^2)^{(p-2)/2} Du )
/// with zero-flux Neumann faces. |Du|^2 at a face is the squared normal
/// difference plus the mean of the four adjacent squared tangential
/// differences.
Field p_laplacian_s(const Field& u, double p, double s_bar);

/// Midpoint rule: sum of values^exponent times cell volume. The reduction is
/// a fixed-order pairwise tree, so the result is independent of thread count.
double integrate(const Field& u, double exponent);

/// Cell-centered (s_bar + |Du|^2)^{p/2} from central differences with
/// Neumann ghosts. A pointwise diagnostic density.
Field grad_energy_density(const Field& u, double p, double s_bar);

/// The density the scheme itself integrates: (s_bar + G2_c)^{p/2} with G2_c
/// the per-axis mean of squared face differences. Its cell sum is the discrete
/// Dirichlet energy whose exact gradient is p_laplacian_s (times p), which is
/// what makes the flow monotone in the measured functional.
Field scheme_energy_density(const Field& u, double p, double s_bar);

/// min over faces of h_d^2 / (2 n eps^p c),  c = (s_bar + eps^2 |Du|^2)^{(p-2)/2};
/// the explicit-step diffusion stability bound in the y = x/eps frame.
double diffusion_dt_bound(const Field& u, double p, double s_bar, double epsilon);

/// Scratch buffers reused across repeated operator applications.
struct OperatorWorkspace {
  std::vector<double> ghost;
  std::vector<double> fx, fy;
  std::vector<double> buf;
};

void p_laplacian_s(const Field& u, double p, double s_bar, Field& out, OperatorWorkspace& ws);
double integrate(const Field& u, double exponent, OperatorWorkspace& ws);
Field grad_energy_density(const Field& u, double p, double s_bar, OperatorWorkspace& ws);
Field scheme_energy_density(const Field& u, double p, double s_bar, OperatorWorkspace& ws);

} // namespace peakflow

#endif
