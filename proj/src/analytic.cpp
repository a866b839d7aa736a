#include "clab/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace clab::analytic {

namespace {

// Blocked-fraction cubic and its stationary points.
double cubic(double alpha, double beta) {
  return beta * beta * beta - (1.5 * alpha + 2.0) * beta * beta +
         (1.5 * alpha + 1.0) * beta - alpha;
}

// Smaller critical point of the cubic (its local maximum). The smallest
// root, when it exists, lies in [0, m1] with cubic(alpha, 0) <= 0 and
// cubic(alpha, m1) >= 0, which makes [0, m1] a bisection bracket.
double cubic_local_max(double alpha) {
  const double a = 1.5 * alpha + 2.0;
  const double b = 1.5 * alpha + 1.0;
  const double disc = a * a - 3.0 * b;
  return (a - std::sqrt(disc)) / 3.0;
}

// Solvability 0.0005 past the located fold is granted to absorb the
// rounding in published critical values (0.226 is itself above the fold).
constexpr double kFoldGrace = 5e-4;

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

void SingleClassParams::validate() const {
  if (k < 0) throw InputError("k must be >= 0");
  if (M < 1) throw InputError("M must be >= 1");
  if (D < 1) throw InputError("D must be >= 1");
  if (!(step_time > 0)) throw InputError("step_time must be > 0");
}

void AccessSkew::validate() const {
  if (b < 0 || b > 1) throw InputError("b must be in [0, 1]");
  if (!(c > 0) || !(c < 1)) throw InputError("c must be in (0, 1)");
  if (s < 0 || s > 1) throw InputError("s must be in [0, 1]");
}

void QnSystem::validate() const {
  if (demands.empty()) throw InputError("qn system needs at least one device");
  for (double x : demands)
    if (!(x > 0)) throw InputError("device demands must be > 0");
  if (mpl_max && *mpl_max < 1) throw InputError("mpl_max must be >= 1");
}

void HdamParams::validate() const {
  if (classes.empty()) throw InputError("hdam: no classes");
  if (dbr_sizes.empty()) throw InputError("hdam: no DBRs");
  double fsum = 0;
  for (const auto& c : classes) {
    fsum += c.frequency;
    if (c.lambda < 0) throw InputError("hdam: negative arrival rate");
    if (c.k.size() != dbr_sizes.size() || c.kbar.size() != dbr_sizes.size() ||
        c.s.size() != dbr_sizes.size())
      throw InputError("hdam: per-DBR vectors must match the DBR count");
    for (std::size_t j = 0; j < c.k.size(); ++j) {
      if (c.k[j] < 0 || c.kbar[j] < 0) throw InputError("hdam: negative lock count");
      if (c.kbar[j] > c.k[j] + 1e-12)
        throw InputError("hdam: mean held locks cannot exceed requested locks");
      if (c.s[j] < 0 || c.s[j] > 1) throw InputError("hdam: s must be in [0, 1]");
    }
  }
  if (std::abs(fsum - 1.0) > 1e-9)
    throw InputError("hdam: class frequencies must sum to 1");
  for (double d : dbr_sizes)
    if (d < 1) throw InputError("hdam: DBR sizes must be >= 1");
}

ConflictProbability conflict_probability(const SingleClassParams& p) {
  p.validate();
  const double value = p.k * static_cast<double>(p.M - 1) / (2.0 * p.D);
  if (value > 1.0)
    throw ModelRangeError("conflict probability " + fmt(value) +
                          " > 1: formula outside its validity range");
  return {value, value > kStrainedConflictProbability};
}

double deadlock_probability_2way(const SingleClassParams& p, DeadlockVariant variant) {
  p.validate();
  const double k4 = p.k * p.k * p.k * p.k;
  const double denom = (variant == DeadlockVariant::Original ? 4.0 : 12.0) * p.D * p.D;
  const double value = static_cast<double>(p.M - 1) * k4 / denom;
  if (value > 1.0)
    throw ModelRangeError("deadlock probability " + fmt(value) + " > 1");
  return value;
}

double skew_factor(double b, double c) {
  if (!(c > 0) || !(c < 1)) throw DomainError("skew factor undefined for c in {0, 1}");
  if (b < 0 || b > 1) throw DomainError("b must be in [0, 1]");
  return 1.0 / (b * b / c + (1.0 - b) * (1.0 - b) / (1.0 - c));
}

double share_factor(double s) {
  if (s < 0 || s >= 1) throw DomainError("share factor undefined for s = 1");
  return 1.0 / (1.0 - s * s);
}

double effective_db_size(double D, const AccessSkew& skew) {
  if (D < 1) throw DomainError("D must be >= 1");
  return D * skew_factor(skew.b, skew.c) * share_factor(skew.s);
}

double extrapolate_conflict(double p_c, double lambda, double R,
                            double lambda2, double R2) {
  if (!(p_c > 0) || !(lambda > 0) || !(R > 0) || !(lambda2 > 0) || !(R2 > 0))
    throw DomainError("extrapolate_conflict needs positive inputs");
  const double value = p_c * (lambda2 * R2) / (lambda * R);
  if (value > 1.0)
    throw ModelRangeError("extrapolated conflict probability " + fmt(value) + " > 1");
  return value;
}

double open_qn_response(const QnSystem& q, double lambda) {
  q.validate();
  if (lambda < 0) throw InputError("lambda must be >= 0");
  double r = 0;
  for (double x : q.demands) {
    const double rho = lambda * x;
    if (rho >= 1.0)
      throw SaturationError("device utilization " + fmt(rho) + " >= 1 at lambda " +
                            fmt(lambda));
    r += x / (1.0 - rho);
  }
  return r;
}

double balanced_closed_throughput(long M, long N, double X) {
  if (M < 1 || N < 1 || !(X > 0))
    throw InputError("balanced_closed_throughput needs M >= 1, N >= 1, X > 0");
  return static_cast<double>(M) / (static_cast<double>(N + M - 1) * X);
}

double asymptotic_job_bound(const QnSystem& q) {
  q.validate();
  return 1.0 / *std::max_element(q.demands.begin(), q.demands.end());
}

MplBound min_mpl(long N, double rho) {
  if (N < 1) throw InputError("N must be >= 1");
  if (rho < 0) throw InputError("rho must be >= 0");
  if (rho >= 1.0) throw SaturationError("rho " + fmt(rho) + " >= 1: no finite MPL suffices");
  const double bound = static_cast<double>(N - 1) * rho / (1.0 - rho);
  // Strictly greater integer; the epsilon keeps 4.0-epsilon style rounding
  // artifacts from producing 4 instead of 5.
  long min_admissible = static_cast<long>(std::floor(bound + 1e-9)) + 1;
  min_admissible = std::max(min_admissible, 1L);
  return {bound, min_admissible};
}

double multiclass_extrapolate(std::span<const double> kbar,
                              std::span<const double> lambda_r,
                              std::span<const double> lambda_r2) {
  if (kbar.size() != lambda_r.size() || kbar.size() != lambda_r2.size() || kbar.empty())
    throw InputError("multiclass_extrapolate: mismatched class vectors");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < kbar.size(); ++i) {
    num += kbar[i] * lambda_r2[i];
    den += kbar[i] * lambda_r[i];
  }
  if (den == 0) throw DomainError("multiclass_extrapolate: zero denominator");
  return num / den;
}

std::vector<double> hdam_shared_fractions(const HdamParams& h) {
  h.validate();
  std::vector<double> s_j(h.dbr_sizes.size(), 0.0);
  for (std::size_t j = 0; j < h.dbr_sizes.size(); ++j) {
    double num = 0, den = 0;
    for (const auto& c : h.classes) {
      num += c.frequency * c.k[j] * c.s[j];
      den += c.frequency * c.k[j];
    }
    s_j[j] = den > 0 ? num / den : 0.0;
  }
  return s_j;
}

std::vector<double> hdam_conflict_probability(const HdamParams& h,
                                              std::span<const double> response_times) {
  h.validate();
  if (response_times.size() != h.classes.size())
    throw InputError("hdam_conflict_probability: one response time per class required");
  const auto s_j = hdam_shared_fractions(h);
  std::vector<double> p(h.dbr_sizes.size(), 0.0);
  for (std::size_t j = 0; j < h.dbr_sizes.size(); ++j) {
    if (s_j[j] >= 1.0) {
      double requests = 0;
      for (const auto& c : h.classes) requests += c.frequency * c.k[j];
      if (requests > 0)
        throw DomainError("hdam: all requests to a DBR are shared (s_j = 1)");
    }
    const double d_eff = h.dbr_sizes[j] / (1.0 - s_j[j] * s_j[j]);
    double held = 0;
    for (std::size_t i = 0; i < h.classes.size(); ++i)
      held += h.classes[i].kbar[j] * h.classes[i].lambda * response_times[i];
    p[j] = held / d_eff;
    if (p[j] > 1.0)
      throw ModelRangeError("hdam conflict probability " + fmt(p[j]) + " > 1 in DBR " +
                            std::to_string(j));
  }
  return p;
}

std::vector<double> hdam_rate_scale(const HdamParams& h,
                                    std::span<const double> lambda_r,
                                    std::span<const double> lambda_r2) {
  h.validate();
  if (lambda_r.size() != h.classes.size() || lambda_r2.size() != h.classes.size())
    throw InputError("hdam_rate_scale: one lambda*R product per class required");
  std::vector<double> scale(h.dbr_sizes.size(), 1.0);
  for (std::size_t j = 0; j < h.dbr_sizes.size(); ++j) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < h.classes.size(); ++i) {
      num += h.classes[i].kbar[j] * lambda_r2[i];
      den += h.classes[i].kbar[j] * lambda_r[i];
    }
    if (den == 0) {
      if (num != 0) throw DomainError("hdam_rate_scale: zero denominator in DBR " +
                                      std::to_string(j));
      scale[j] = 1.0;
    } else {
      scale[j] = num / den;
    }
  }
  return scale;
}

double response_time_quadratic(double r, double a) {
  if (!(r > 0)) throw InputError("r must be > 0");
  if (a < 0) throw InputError("a must be >= 0");
  if (a == 0.0) return r;
  const double disc = 1.0 - 4.0 * a * r;
  if (disc < 0)
    throw ThrashingError("4 a r = " + fmt(4.0 * a * r) +
                             " > 1: response model has no real solution",
                         critical_point().alpha_star);
  return (1.0 - std::sqrt(disc)) / (2.0 * a);
}

double solve_cubic_beta(double alpha) {
  if (alpha < 0) throw InputError("alpha must be >= 0");
  if (alpha == 0.0) return 0.0;
  const double m1 = cubic_local_max(alpha);
  if (cubic(alpha, m1) < 0.0) {
    const CriticalPoint& cp = critical_point();
    if (alpha <= cp.alpha_star + kFoldGrace) return m1;  // fold double root
    throw ThrashingError("alpha " + fmt(alpha) + " exceeds the critical value " +
                             fmt(cp.alpha_star) + ": system is in the thrashing regime",
                         cp.alpha_star);
  }
  double lo = 0.0, hi = m1;
  while (hi - lo > 1e-15) {
    const double mid = 0.5 * (lo + hi);
    if (cubic(alpha, mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

const CriticalPoint& critical_point() {
  static const CriticalPoint cp = [] {
    // Largest alpha for which the cubic still has a root below 1: bisection
    // on the sign of the cubic at its local maximum.
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (cubic(mid, cubic_local_max(mid)) >= 0.0)
        lo = mid;
      else
        hi = mid;
    }
    const double alpha_star = lo;
    return CriticalPoint{alpha_star, cubic_local_max(alpha_star)};
  }();
  return cp;
}

double unequal_step_beta(double alpha, double rho_b) {
  if (alpha < 0) throw InputError("alpha must be >= 0");
  if (rho_b < 0 || rho_b >= 1) throw DomainError("rho must be in [0, 1)");
  return alpha * (1.0 + rho_b * (1.0 + rho_b) / (2.0 * (1.0 - rho_b * rho_b)));
}

double unequal_step_beta_fixed_point(double alpha,
                                     const std::function<double(double)>& rho_of_beta,
                                     double tol, int max_iterations) {
  double beta = alpha;
  for (int i = 0; i < max_iterations; ++i) {
    const double next = unequal_step_beta(alpha, rho_of_beta(beta));
    if (std::abs(next - beta) <= tol * std::max(1.0, std::abs(next))) return next;
    beta = next;
  }
  throw NoConvergenceError("unequal-step fixed point did not converge in " +
                           std::to_string(max_iterations) + " iterations");
}

double conflict_ratio_to_rho(double cr) {
  if (cr < 1.0) throw DomainError("conflict ratio must be >= 1");
  return 1.0 - 1.0 / cr;
}

double rho_to_conflict_ratio(double rho) {
  if (rho < 0 || rho >= 1) throw DomainError("rho must be in [0, 1)");
  return 1.0 / (1.0 - rho);
}

double thrashing_load_index(const SingleClassParams& p) {
  p.validate();
  return p.k * p.k * static_cast<double>(p.M) / p.D;
}

}  // namespace clab::analytic
