#ifndef PEAKFLOW_COMMON_HPP
#define PEAKFLOW_COMMON_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace peakflow {

enum class ErrorCode {
  invalid_parameters,
  integration_diverged,
  no_ground_state_bracket,
  tail_unresolved,
  resolution_error,
  numerical_overflow,
  degenerate_field,
  centre_not_found,
  centre_not_converged,
  corner_excluded,
  ill_conditioned_fit,
  descent_violation,
  peak_tracking_lost,
  estimate_failed,
  minimax_failed,
  infeasible_G,
  io_error,
  config_error,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

/// x^e with fast paths for the small integer and half-integer exponents
/// that dominate the p in (1,2], q in (2,6] parameter range. Requires x >= 0
/// for non-integer e.
inline double pow_fast(double x, double e) {
  if (e == 2.0) return x * x;
  if (e == 1.0) return x;
  if (e == 0.5) return std::sqrt(x);
  if (e == 1.5) return x * std::sqrt(x);
  if (e == 3.0) return x * x * x;
  if (e == 0.0) return 1.0;
  if (e == -0.25) return 1.0 / std::sqrt(std::sqrt(x));
  if (e == 0.75) return std::sqrt(x * std::sqrt(x));
  if (e == 0.25) return std::sqrt(std::sqrt(x));
  if (e == 2.5) return x * x * std::sqrt(x);
  if (e == 4.0) { double y = x * x; return y * y; }
  if (e == 5.0) { double y = x * x; return y * y * x; }
  if (e == -0.5) return 1.0 / std::sqrt(x);
  return std::pow(x, e);
}

inline long double pow_fast(long double x, long double e) {
  if (e == 2.0L) return x * x;
  if (e == 1.0L) return x;
  if (e == 0.5L) return sqrtl(x);
  if (e == 1.5L) return x * sqrtl(x);
  if (e == 3.0L) return x * x * x;
  if (e == 2.5L) return x * x * sqrtl(x);
  if (e == 4.0L) { long double y = x * x; return y * y; }
  if (e == 5.0L) { long double y = x * x; return y * y * x; }
  return powl(x, e);
}

/// Fixed-order pairwise tree sum. The reduction order depends only on the
/// buffer length, so results are identical for any thread count upstream.
double pairwise_sum(std::span<const double> v);

/// Surface measure of the unit sphere S^{n-1} in R^n (2, 2*pi, 4*pi, ...).
double sphere_surface(int n);

} // namespace peakflow

#endif
