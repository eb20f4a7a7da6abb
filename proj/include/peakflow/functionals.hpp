#ifndef PEAKFLOW_FUNCTIONALS_HPP
#define PEAKFLOW_FUNCTIONALS_HPP

#include "peakflow/grid.hpp"
#include "peakflow/operators.hpp"

namespace peakflow {

/// Cutoff scale alpha = (k + l/2) E_p of the ground state.
struct EtaParams {
  double alpha = 1.0;
};

struct EtaValue {
  double value;
  double derivative;
};

/// C^{1,1} cutoff: exponential below alpha/2 and above 2 alpha, identity in
/// between; value and derivative match at both seams.
EtaValue eta(double t, const EtaParams& params);

struct FunctionalReport {
  double A = 0.0;        // int_{Omega^eps} ((s_bar + |Du|^2)^{p/2} + u^p) dy
  double B = 0.0;        // int_{Omega^eps} u^q dy
  double I_s = 0.0;      // A / B^{p/q}
  double I_s_eta = 0.0;  // eta(A) / B^{p/q}
  double lambda = 0.0;   // eta(A) / (eta'(A) B)
};

struct FunctionalParams {
  double p, q;
  double s = 0.0; // regularizer in the x frame; s_bar = eps^2 s in y
  EtaParams eta;
};

/// Evaluates A, B in the y = x/eps frame via the equivalent eps-weighted
/// x integrals: A = eps^{-n} int (eps^p (s + |Du|^2)^{p/2} + u^p) dx.
FunctionalReport evaluate_functional(const Field& u, const FunctionalParams& params);
FunctionalReport evaluate_functional(const Field& u, const FunctionalParams& params,
                                     OperatorWorkspace& ws);

/// The finite-dimensional coefficient functional
///   H(a, b) = (sum a_i^p + 1/2 sum b_j^p) / (sum a_i^q + 1/2 sum b_j^q)^{p/q}.
double H_coeff(std::span<const double> a, std::span<const double> b, double p, double q);

/// Closed-form second partial of H along one coordinate (weight 1/2 for the
/// boundary block), at an arbitrary admissible point.
double H_partial2(std::span<const double> a, std::span<const double> b, double p, double q,
                  std::size_t index, bool boundary_block);

/// alpha p (p-q) / (alpha+1)^{1+p/q}: the second derivative at a critical
/// coordinate when the remaining coefficient mass is alpha. Negative for all
/// alpha > 0, q > p.
double H_second_derivative_at_critical(double alpha, double p, double q);

/// S_{0,k,l} = (k + l/2)^{1-p/q} S_0.
double reference_level(int k, int l, double p, double q, double S0);

/// (alpha_off + int_mask [(s_bar+|Du|^2)^{p/2} + u^p]) /
/// (beta_off + int_mask u^q)^{p/q}; the h(t) used for the nested-domain
/// monotonicity checks. Plain x-frame integrals; the gradient sees the whole
/// field through its Neumann ghosts.
double functional_on_subdomain(const Field& u, const std::vector<std::uint8_t>& mask,
                               double alpha_off, double beta_off, double p, double q,
                               double s_bar);

} // namespace peakflow

#endif
