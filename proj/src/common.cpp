#include "peakflow/common.hpp"

namespace peakflow {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_parameters: return "invalid_parameters";
    case ErrorCode::integration_diverged: return "integration_diverged";
    case ErrorCode::no_ground_state_bracket: return "no_ground_state_bracket";
    case ErrorCode::tail_unresolved: return "tail_unresolved";
    case ErrorCode::resolution_error: return "resolution_error";
    case ErrorCode::numerical_overflow: return "numerical_overflow";
    case ErrorCode::degenerate_field: return "degenerate_field";
    case ErrorCode::centre_not_found: return "centre_not_found";
    case ErrorCode::centre_not_converged: return "centre_not_converged";
    case ErrorCode::corner_excluded: return "corner_excluded";
    case ErrorCode::ill_conditioned_fit: return "ill_conditioned_fit";
    case ErrorCode::descent_violation: return "descent_violation";
    case ErrorCode::peak_tracking_lost: return "peak_tracking_lost";
    case ErrorCode::estimate_failed: return "estimate_failed";
    case ErrorCode::minimax_failed: return "minimax_failed";
    case ErrorCode::infeasible_G: return "infeasible_G";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::config_error: return "config_error";
  }
  return "unknown_error";
}

double pairwise_sum(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

double sphere_surface(int n) {
  switch (n) {
    case 1: return 2.0;
    case 2: return 2.0 * M_PI;
    case 3: return 4.0 * M_PI;
    default: {
      // 2 pi^{n/2} / Gamma(n/2)
      return 2.0 * std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n);
    }
  }
}

} // namespace peakflow
