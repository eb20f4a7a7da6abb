#include "peakflow/radial.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace peakflow {

void ProblemParams::validate() const {
  if (n < 1) fail(ErrorCode::invalid_parameters, "dimension n must be >= 1");
  if (!(p > 1.0)) fail(ErrorCode::invalid_parameters, "p must be > 1");
  if (!(q > p)) fail(ErrorCode::invalid_parameters, "q must be > p");
}

bool ProblemParams::outside_standard_range() const {
  if (!(p < n)) return true;
  return !(q < n * p / (n - p));
}

const char* shot_class_name(ShotClass c) {
  switch (c) {
    case ShotClass::crossed_zero: return "crossed_zero";
    case ShotClass::turned_up: return "turned_up";
    case ShotClass::decayed: return "decayed";
  }
  return "?";
}

namespace {

constexpr int kSubsteps = 8;            // internal substeps per sample step h
constexpr int kStartSamples = 10;       // Picard start covers [0, 10h]
constexpr double kDecayedThreshold = 1e-8;

// The shot is integrated in the (w, m) variables, m = |w'|^{p-2} w', which
// removes the |w'|^{p-2} division:
//   m' = g(w) - (n-1) m / r,   w' = sign(m) |m|^{1/(p-1)},
//   g(w) = w^{p-1} - w^{q-1}.
// State is long double: the bisection drives the bracket to ~1e-18 relative
// and the trajectory can only resolve the tail down to sqrt of the combined
// perturbation (shooting error grows like e^{+r} while w decays like e^{-r}).
struct Shooter {
  int n;
  long double p, q, pm1, qm1, inv_pm1;

  explicit Shooter(const ProblemParams& pp)
      : n(pp.n), p(pp.p), q(pp.q), pm1(pp.p - 1.0L), qm1(pp.q - 1.0L),
        inv_pm1(1.0L / (pp.p - 1.0L)) {}

  // clamped at 0: RK4 stages may probe slightly negative w just before the
  // crossing event fires, and fractional powers must stay finite there
  long double g(long double w) const {
    if (w <= 0.0L) return 0.0L;
    return pow_fast(w, pm1) - pow_fast(w, qm1);
  }

  long double wprime(long double m) const {
    if (m == 0.0L) return 0.0L;
    long double a = pow_fast(fabsl(m), inv_pm1);
    return m > 0 ? a : -a;
  }

  void rhs(long double r, long double w, long double m, long double& dw, long double& dm) const {
    dw = wprime(m);
    dm = g(w) - (n > 1 ? (n - 1) * m / r : 0.0L);
  }

  // Local solution on [0, r0] by Picard iteration of the integral form
  //   m(r) = r^{1-n} int_0^r s^{n-1} g(w) ds,  w(r) = beta + int_0^r w'(m);
  // the s^{n-1} weight absorbs the coordinate singularity at r = 0.
  // fine = grid points per sample interval. Only used for n > 1.
  static constexpr int kStartFine = 32;
  void picard_start(long double beta, long double r0, int fine, std::vector<long double>& ws,
                    std::vector<long double>& ms) const {
    const int M = kStartSamples * fine;
    const long double dr = r0 / M;
    ws.assign(M + 1, beta);
    ms.assign(M + 1, 0.0L);
    for (int iter = 0; iter < 24; ++iter) {
      long double acc = 0.0L;
      for (int i = 1; i <= M; ++i) {
        long double s0 = (i - 1) * dr, s1 = i * dr;
        acc += 0.5L * dr * (powl(s0, n - 1) * g(ws[i - 1]) + powl(s1, n - 1) * g(ws[i]));
        ms[i] = acc / powl(s1, n - 1);
      }
      long double wacc = beta;
      for (int i = 1; i <= M; ++i) {
        wacc += 0.5L * dr * (wprime(ms[i - 1]) + wprime(ms[i]));
        ws[i] = wacc;
      }
    }
  }
};

struct ShotResult {
  ShotClass classification;
  long double w_end, m_end;
  double event_r;
};

// One outward shot. Appends one sample per step h to rec (if non-null),
// starting at r = 0. Event-terminated.
ShotResult shoot(const Shooter& sh, long double beta, double r_max, double h, ShotRecord* rec) {
  const long double hi = (long double)h / kSubsteps;
  const long double decay_floor = kDecayedThreshold * beta;
  const long double a_inf = powl(1.0L / (sh.p - 1.0L), 1.0L / sh.p);
  // An overshoot passes through tiny w on its way to crossing zero, so the
  // decayed event also requires the slope of the decaying branch (|w'| ~ a w);
  // a plunge keeps O(1) momentum there.
  auto on_decay_branch = [&](long double ww, long double mm) {
    return -sh.wprime(mm) <= 3.0L * a_inf * ww;
  };

  long double r = 0.0L, w = beta, m = 0.0L;
  long long sample = 0;

  auto push = [&](long double rr, long double ww, long double mm) {
    if (!rec) return;
    rec->r.push_back((double)rr);
    rec->w.push_back((double)ww);
    rec->w_prime.push_back((double)sh.wprime(mm));
  };
  push(0.0L, beta, 0.0L);

  long double r_start = 0.0L;
  if (sh.n > 1) {
    r_start = kStartSamples * (long double)h;
    // two trapezoid resolutions + Richardson for the handoff state: the
    // start error acts like a shooting-value perturbation and must stay
    // below the RK4 truncation floor
    std::vector<long double> ws, ms, ws2, ms2;
    sh.picard_start(beta, r_start, Shooter::kStartFine, ws, ms);
    sh.picard_start(beta, r_start, 2 * Shooter::kStartFine, ws2, ms2);
    for (int j = 1; j <= kStartSamples; ++j)
      push(j * (long double)h, ws2[j * 2 * Shooter::kStartFine], ms2[j * 2 * Shooter::kStartFine]);
    w = ws2.back() + (ws2.back() - ws.back()) / 3.0L;
    m = ms2.back() + (ms2.back() - ms.back()) / 3.0L;
    r = r_start;
    sample = kStartSamples;
  }

  const long long total_sub = (long long)llround((double)r_max / h) * kSubsteps;
  long long sub = sample * kSubsteps;
  while (sub < total_sub) {
    long double k1w, k1m, k2w, k2m, k3w, k3m, k4w, k4m;
    // for n = 1 the rhs has no r dependence; r > 0 is only needed for n > 1,
    // where integration starts at r_start > 0
    sh.rhs(r > 0 ? r : 1.0L, w, m, k1w, k1m);
    sh.rhs(r + 0.5L * hi, w + 0.5L * hi * k1w, m + 0.5L * hi * k1m, k2w, k2m);
    sh.rhs(r + 0.5L * hi, w + 0.5L * hi * k2w, m + 0.5L * hi * k2m, k3w, k3m);
    sh.rhs(r + hi, w + hi * k3w, m + hi * k3m, k4w, k4m);
    w += hi / 6.0L * (k1w + 2.0L * k2w + 2.0L * k3w + k4w);
    m += hi / 6.0L * (k1m + 2.0L * k2m + 2.0L * k3m + k4m);
    ++sub;
    r = (long double)h * sub / kSubsteps;

    if (!std::isfinite((double)w) || !std::isfinite((double)m))
      fail(ErrorCode::integration_diverged, "non-finite state at r=" + std::to_string((double)r));

    const bool at_sample = (sub % kSubsteps == 0);
    if (at_sample) push(r, w, m);

    if (w <= 0.0L) {
      if (!at_sample) push(r, w, m);
      return {ShotClass::crossed_zero, w, m, (double)r};
    }
    if (m >= 0.0L && sub > sample * kSubsteps + 1 && r > r_start + hi) {
      if (!at_sample) push(r, w, m);
      return {ShotClass::turned_up, w, m, (double)r};
    }
    if (w < decay_floor && m < 0.0L && on_decay_branch(w, m)) {
      if (!at_sample) push(r, w, m);
      return {ShotClass::decayed, w, m, (double)r};
    }
  }

  // No event by r_max. Disambiguate by the tail slope: the decaying branch has
  // -w'/w near (1/(p-1))^{1/p}; an overshoot falls steeper.
  if (w < decay_floor && m < 0.0L && on_decay_branch(w, m))
    return {ShotClass::decayed, w, m, (double)r};
  ShotClass c = (-sh.wprime(m) > a_inf * w) ? ShotClass::crossed_zero : ShotClass::turned_up;
  return {c, w, m, (double)r};
}

DecayFit fit_decay_window(const ProblemParams& params, const std::vector<double>& r,
                          const std::vector<double>& w, double beta, double resolved_r) {
  const double target = std::pow(1.0 / (params.p - 1.0), 1.0 / params.p);
  const double pref = (params.n - 1) / (params.p * (params.p - 1.0));
  std::vector<double> xs, ys;
  for (std::size_t i = 1; i < r.size(); ++i) {
    if (r[i] > resolved_r || w[i] <= 0.0) break;
    if (w[i] < 1e-2 * beta) {
      xs.push_back(r[i]);
      ys.push_back(-std::log(w[i]) - pref * std::log(r[i]));
    }
  }
  if (xs.size() < 50) fail(ErrorCode::tail_unresolved, "decay window has fewer than 50 samples");
  double n = (double)xs.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  return DecayFit{(n * sxy - sx * sy) / (n * sxx - sx * sx), target};
}

} // namespace

ShotRecord integrate_radial(const ProblemParams& params, double beta, double r_max, double h) {
  params.validate();
  if (!(beta > 0.0)) fail(ErrorCode::invalid_parameters, "beta must be positive");
  if (!(h > 0.0) || h > r_max / 100.0) fail(ErrorCode::invalid_parameters, "need h <= r_max/100");
  if (!std::isfinite(std::pow(beta, params.q - 1.0)))
    fail(ErrorCode::invalid_parameters, "beta^{q-1} overflows");

  Shooter sh(params);
  ShotRecord rec;
  rec.beta = beta;
  rec.h = h;
  ShotResult res = shoot(sh, (long double)beta, r_max, h, &rec);
  rec.classification = res.classification;
  rec.event_r = res.event_r;
  return rec;
}

RadialProfile find_ground_state(const ProblemParams& params, double tol, double r_max, double h) {
  params.validate();
  if (!(tol > 0.0) || tol > 1e-3) fail(ErrorCode::invalid_parameters, "tol must be in (0, 1e-3]");
  if (!(h > 0.0) || h > r_max / 100.0) fail(ErrorCode::invalid_parameters, "need h <= r_max/100");

  Shooter sh(params);

  // Doubling search from beta = 1 (which always turns up: w = 1 is the
  // constant solution) until the first crossed_zero shot.
  long double b_lo = 1.0L, b_hi = 0.0L;
  {
    ShotClass c = shoot(sh, 1.0L, r_max, h, nullptr).classification;
    if (c != ShotClass::crossed_zero) {
      for (long double b = 2.0L; b <= 1e3L; b *= 2.0L) {
        c = shoot(sh, b, r_max, h, nullptr).classification;
        if (c == ShotClass::crossed_zero) { b_hi = b; break; }
        b_lo = b;
      }
    } else {
      b_hi = 1.0L; // degenerate; fall through to the standard error below
    }
  }
  if (b_hi == 0.0L || b_hi <= b_lo)
    fail(ErrorCode::no_ground_state_bracket,
         "no turned_up/crossed_zero bracket for beta in [1e-3, 1e3]");

  // Bisect past the requested tolerance down to the long double floor; the
  // final shot resolves the tail only when the bracket is this tight.
  const long double width_goal = std::min((long double)tol, 1e-17L) * 0.5L * (b_lo + b_hi);
  long double beta_hat = 0.5L * (b_lo + b_hi);
  while (b_hi - b_lo > width_goal) {
    long double mid = 0.5L * (b_lo + b_hi);
    if (mid == b_lo || mid == b_hi) break;
    ShotClass c = shoot(sh, mid, r_max, h, nullptr).classification;
    if (c == ShotClass::decayed) { beta_hat = mid; b_lo = b_hi = mid; break; }
    if (c == ShotClass::crossed_zero) b_hi = mid;
    else b_lo = mid;
    beta_hat = 0.5L * (b_lo + b_hi);
  }

  ShotRecord rec;
  rec.beta = (double)beta_hat;
  rec.h = h;
  ShotResult res = shoot(sh, beta_hat, r_max, h, &rec);
  rec.classification = res.classification;

  RadialProfile prof;
  prof.params = params;
  prof.beta = (double)beta_hat;
  prof.range_warning = params.outside_standard_range();

  // Truncate where integration noise takes over. A decayed shot is trusted up
  // to its event; a veering shot is cut back to ~3x its minimum level.
  std::size_t last = rec.r.size() - 1;
  if (rec.classification != ShotClass::decayed) {
    double wmin = *std::min_element(rec.w.begin(), rec.w.end());
    double w_trust = std::max(3.0 * std::max(wmin, 0.0), 1e-12 * prof.beta);
    while (last > 1 && (rec.w[last] < w_trust || rec.w_prime[last] >= 0.0 || rec.w[last] <= 0.0))
      --last;
  }
  prof.resolved_r = rec.r[last];
  if (rec.w[last] > 1e-4 * prof.beta)
    fail(ErrorCode::tail_unresolved,
         "final shot resolves only to w/beta = " + std::to_string(rec.w[last] / prof.beta));

  prof.r_grid.assign(rec.r.begin(), rec.r.begin() + last + 1);
  prof.w_values.assign(rec.w.begin(), rec.w.begin() + last + 1);
  prof.w_prime.assign(rec.w_prime.begin(), rec.w_prime.begin() + last + 1);

  DecayFit fit = fit_decay_window(params, prof.r_grid, prof.w_values, prof.beta, prof.resolved_r);
  prof.decay_rate = fit.rate;
  prof.decay_target = fit.target;

  // Extend by the fitted tail w(r) = w(r_v) (r/r_v)^{-pref} e^{-rate (r - r_v)}
  // on the same spacing out to r_max.
  const double pref = (params.n - 1) / (params.p * (params.p - 1.0));
  const double rv = prof.resolved_r;
  const double wv = prof.w_values.back();
  const std::size_t total = (std::size_t)std::llround(r_max / h);
  for (std::size_t i = prof.r_grid.size(); i <= total; ++i) {
    double r = i * h;
    double w = wv * std::pow(r / rv, -pref) * std::exp(-fit.rate * (r - rv));
    prof.r_grid.push_back(r);
    prof.w_values.push_back(w);
    prof.w_prime.push_back(-(fit.rate + pref / r) * w);
  }

  RadialNorms norms = profile_norms(prof);
  prof.E_p = norms.E_p;
  prof.M_q = norms.M_q;
  return prof;
}

RadialNorms profile_norms(const RadialProfile& profile) {
  const auto& pp = profile.params;
  const double omega = sphere_surface(pp.n);
  const std::size_t n = profile.r_grid.size();
  std::vector<double> fe(n), fm(n);
  for (std::size_t i = 0; i < n; ++i) {
    double r = profile.r_grid[i];
    double rn = pp.n == 1 ? 1.0 : pow_fast(r, (double)(pp.n - 1));
    double w = std::max(profile.w_values[i], 0.0);
    double wp = std::abs(profile.w_prime[i]);
    fe[i] = (pow_fast(wp, pp.p) + pow_fast(w, pp.p)) * rn;
    fm[i] = pow_fast(w, pp.q) * rn;
  }
  double Ep = 0.0, Mq = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    double dr = profile.r_grid[i] - profile.r_grid[i - 1];
    Ep += 0.5 * dr * (fe[i] + fe[i - 1]);
    Mq += 0.5 * dr * (fm[i] + fm[i - 1]);
  }
  // Laplace first-order tail correction: int_{r_max}^inf f ~ f(r_max)/(k a).
  double a = profile.decay_rate > 0 ? profile.decay_rate : profile.decay_target;
  double tail_e = fe[n - 1] / (pp.p * a);
  double tail_m = fm[n - 1] / (pp.q * a);
  if (tail_e > 0.01 * Ep || tail_m > 0.01 * Mq)
    fail(ErrorCode::tail_unresolved, "exponential tail correction exceeds 1% of the integral");
  return RadialNorms{omega * (Ep + tail_e), omega * (Mq + tail_m)};
}

SobolevConstant sobolev_constant(const RadialProfile& profile) {
  const auto& pp = profile.params;
  double S0 = std::pow(profile.E_p, 1.0 - pp.p / pp.q);
  double quotient = profile.E_p / std::pow(profile.M_q, pp.p / pp.q);
  return SobolevConstant{S0, quotient};
}

DecayFit fit_decay_rate(const RadialProfile& profile) {
  return fit_decay_window(profile.params, profile.r_grid, profile.w_values, profile.beta,
                          profile.resolved_r);
}

ProfileSampler::ProfileSampler(const RadialProfile& profile) {
  r_ = profile.r_grid;
  w_ = profile.w_values;
  h_ = r_.size() > 1 ? r_[1] - r_[0] : 1.0;
  tail_r_ = r_.back();
  tail_w_ = std::max(w_.back(), 0.0);
  tail_rate_ = profile.decay_rate > 0 ? profile.decay_rate : profile.decay_target;

  // Fritsch-Carlson monotone slopes (harmonic mean of adjacent secants)
  const std::size_t n = r_.size();
  d_.assign(n, 0.0);
  if (n < 2) return;
  std::vector<double> sec(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) sec[i] = (w_[i + 1] - w_[i]) / (r_[i + 1] - r_[i]);
  d_[0] = sec[0];
  d_[n - 1] = sec[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (sec[i - 1] * sec[i] <= 0.0) d_[i] = 0.0;
    else d_[i] = 2.0 * sec[i - 1] * sec[i] / (sec[i - 1] + sec[i]);
  }
}

double ProfileSampler::operator()(double r) const {
  if (r < 0.0) r = -r;
  if (r >= tail_r_) {
    double v = tail_w_ * std::exp(-tail_rate_ * (r - tail_r_));
    return v > 1e-300 ? v : 0.0;
  }
  std::size_t i = std::min((std::size_t)(r / h_), r_.size() - 2);
  if (r < r_[i] && i > 0) --i;
  if (r > r_[i + 1] && i + 2 < r_.size()) ++i;
  double dr = r_[i + 1] - r_[i];
  double t = (r - r_[i]) / dr;
  double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
  double h10 = t * (1 - t) * (1 - t);
  double h01 = t * t * (3 - 2 * t);
  double h11 = t * t * (t - 1);
  return h00 * w_[i] + h10 * dr * d_[i] + h01 * w_[i + 1] + h11 * dr * d_[i + 1];
}

Field sample_on_grid(const ProfileSampler& sampler, Point centre, double epsilon,
                     const Grid& grid) {
  if (!(epsilon > 0.0)) fail(ErrorCode::invalid_parameters, "epsilon must be positive");
  grid.validate();
  Field out(grid, epsilon);
  const int cx = grid.cells[0];
  const int cy = grid.n == 2 ? grid.cells[1] : 1;
  const bool par = grid.cell_count() >= kOmpMinCells;
#ifdef PEAKFLOW_OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (int j = 0; j < cy; ++j)
    for (int i = 0; i < cx; ++i) {
      double dx = grid.centre(0, i) - centre[0];
      double d2 = dx * dx;
      if (grid.n == 2) {
        double dy = grid.centre(1, j) - centre[1];
        d2 += dy * dy;
      }
      out.values[grid.idx(i, j)] = sampler(std::sqrt(d2) / epsilon);
    }
  return out;
}

Field sample_on_grid(const RadialProfile& profile, Point centre, double epsilon,
                     const Grid& grid) {
  return sample_on_grid(ProfileSampler(profile), centre, epsilon, grid);
}

void export_profile_csv(const RadialProfile& profile, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) fail(ErrorCode::io_error, "cannot open " + path);
  std::fprintf(f, "r,w,w_prime\n");
  for (std::size_t i = 0; i < profile.r_grid.size(); ++i)
    std::fprintf(f, "%.17g,%.17g,%.17g\n", profile.r_grid[i], profile.w_values[i],
                 profile.w_prime[i]);
  std::fclose(f);
}

} // namespace peakflow
