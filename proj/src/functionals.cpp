#include "peakflow/functionals.hpp"

#include <cmath>
#include <cstdint>

namespace peakflow {

EtaValue eta(double t, const EtaParams& params) {
  const double a = params.alpha;
  if (t > 2.0 * a) {
    double e = std::exp(t / (2.0 * a) - 1.0);
    return {2.0 * a * e, e};
  }
  if (t < 0.5 * a) {
    double e = std::exp(2.0 * t / a - 1.0);
    return {0.5 * a * e, e};
  }
  return {t, 1.0};
}

FunctionalReport evaluate_functional(const Field& u, const FunctionalParams& params,
                                     OperatorWorkspace& ws) {
  const int n = u.grid.n;
  const double eps = u.epsilon;
  const double eps_n = pow_fast(eps, (double)n);
  const double eps_p = pow_fast(eps, params.p);

  Field density = scheme_energy_density(u, params.p, params.s, ws);
  double grad_term = integrate(density, 1.0, ws);
  double up = integrate(u, params.p, ws);
  double uq = integrate(u, params.q, ws);

  FunctionalReport rep;
  rep.A = (eps_p * grad_term + up) / eps_n;
  rep.B = uq / eps_n;
  if (!(rep.B > 1e-300)) fail(ErrorCode::degenerate_field, "int u^q is at the machine floor");
  double Bpq = std::pow(rep.B, params.p / params.q);
  EtaValue ev = eta(rep.A, params.eta);
  rep.I_s = rep.A / Bpq;
  rep.I_s_eta = ev.value / Bpq;
  rep.lambda = ev.value / (ev.derivative * rep.B);
  return rep;
}

FunctionalReport evaluate_functional(const Field& u, const FunctionalParams& params) {
  OperatorWorkspace ws;
  return evaluate_functional(u, params, ws);
}

double H_coeff(std::span<const double> a, std::span<const double> b, double p, double q) {
  double num = 0.0, den = 0.0;
  for (double v : a) {
    num += pow_fast(v, p);
    den += pow_fast(v, q);
  }
  for (double v : b) {
    num += 0.5 * pow_fast(v, p);
    den += 0.5 * pow_fast(v, q);
  }
  return num / std::pow(den, p / q);
}

double H_partial2(std::span<const double> a, std::span<const double> b, double p, double q,
                  std::size_t index, bool boundary_block) {
  double num = 0.0, den = 0.0;
  for (double v : a) {
    num += pow_fast(v, p);
    den += pow_fast(v, q);
  }
  for (double v : b) {
    num += 0.5 * pow_fast(v, p);
    den += 0.5 * pow_fast(v, q);
  }
  const double c = boundary_block ? 0.5 : 1.0;
  const double t = boundary_block ? b[index] : a[index];
  const double alpha = num - c * pow_fast(t, p); // rest of the numerator
  const double D = den;                          // full denominator base
  const double e = p / q;
  const double Dm = std::pow(D, -e), Dm1 = Dm / D, Dm2 = Dm1 / D;
  return c * p * (p - 1) * pow_fast(t, p - 2) * Dm
       - 2.0 * c * c * p * p * pow_fast(t, p + q - 2) * Dm1
       - c * p * (q - 1) * (alpha + c * pow_fast(t, p)) * pow_fast(t, q - 2) * Dm1
       + c * c * p * (p + q) * (alpha + c * pow_fast(t, p)) * pow_fast(t, 2 * q - 2) * Dm2;
}

double H_second_derivative_at_critical(double alpha, double p, double q) {
  if (!(alpha > 0.0)) fail(ErrorCode::invalid_parameters, "alpha must be positive (needs k+l > 1)");
  return alpha * p * (p - q) / std::pow(alpha + 1.0, 1.0 + p / q);
}

double reference_level(int k, int l, double p, double q, double S0) {
  if (k + l < 1) fail(ErrorCode::invalid_parameters, "need k + l >= 1");
  return std::pow(k + 0.5 * l, 1.0 - p / q) * S0;
}

double functional_on_subdomain(const Field& u, const std::vector<std::uint8_t>& mask,
                               double alpha_off, double beta_off, double p, double q,
                               double s_bar) {
  if (mask.size() != u.values.size())
    fail(ErrorCode::invalid_parameters, "mask size does not match the grid");
  if (alpha_off < 0.0 || beta_off < 0.0)
    fail(ErrorCode::invalid_parameters, "offsets must be nonnegative");
  Field density = scheme_energy_density(u, p, s_bar);
  const double vol = u.grid.cell_volume();
  std::size_t count = 0;
  std::vector<double> nums, dens;
  nums.reserve(mask.size());
  dens.reserve(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    ++count;
    double v = std::max(u.values[i], 0.0);
    nums.push_back(density.values[i] + pow_fast(v, p));
    dens.push_back(pow_fast(v, q));
  }
  if (count == 0) fail(ErrorCode::invalid_parameters, "mask is empty");
  double num = alpha_off + pairwise_sum(nums) * vol;
  double den = beta_off + pairwise_sum(dens) * vol;
  return num / std::pow(den, p / q);
}

} // namespace peakflow
