#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "clab/errors.hpp"

// Closed-form lock-contention models: conflict and deadlock probabilities,
// effective database size under skewed/shared access, open and balanced-closed
// queueing responses, the quadratic and cubic contended-response models, and
// the conflict-ratio identities. All functions are pure.
namespace clab::analytic {

/// Single transaction class issuing k X-lock requests against a database of
/// D objects at concurrency level M, with mean per-step time step_time.
struct SingleClassParams {
  double k = 0;          // lock requests per txn
  long M = 1;            // degree of txn concurrency
  double D = 1;          // database size in lockable objects
  double step_time = 1;  // mean per-step processing time

  void validate() const;
};

/// Hot-set access skew: fraction b of requests go to a fraction c of the
/// database; fraction s of requests are shared-mode.
struct AccessSkew {
  double b = 0;
  double c = 0.5;
  double s = 0;

  void validate() const;
};

/// Open product-form network of single-server devices.
struct QnSystem {
  std::vector<double> demands;       // per-device service demand
  std::optional<long> mpl_max = {};  // memory-imposed MPL ceiling

  void validate() const;
};

/// One class of a heterogeneous (multi-class, multi-region) workload.
struct HdamClass {
  double lambda = 0;          // arrival rate
  double frequency = 0;       // class frequency, sums to 1 across classes
  std::vector<double> k;      // lock requests per DBR
  std::vector<double> kbar;   // mean held locks per DBR
  std::vector<double> s;      // shared fraction of requests per DBR
};

struct HdamParams {
  std::vector<HdamClass> classes;
  std::vector<double> dbr_sizes;  // D_j

  void validate() const;
};

/// Aggregate contention state, as measured or predicted. `normalized_wait`
/// is the first-level wait normalized by response time (1/3 for fixed-size
/// txns, but txn-size dependent in general).
struct ContentionState {
  double alpha = 0;
  double beta = 0;
  double rho_b = 0;
  double cr = 1;
  double normalized_wait = 1.0 / 3.0;
};

struct ConflictProbability {
  double value = 0;
  bool strained = false;  // above the low-contention comfort zone (> 0.1)
};

struct MplBound {
  double bound = 0;          // (N-1) * rho / (1 - rho)
  long min_admissible = 1;   // smallest integer strictly above the bound
};

struct CriticalPoint {
  double alpha_star = 0;
  double beta_star = 0;
};

/// Fraction of blocked txns at which closed-system throughput peaks.
inline constexpr double kPeakThroughputBeta = 0.3;
/// Load index k^2 M / D beyond which the system is prone to thrashing.
inline constexpr double kThrashingLoadIndexLimit = 1.5;
/// Conflict-ratio admission threshold used by adaptive load control.
inline constexpr double kConflictRatioLimit = 1.3;
/// Default normalized first-level wait W1/R for fixed-size txns.
inline constexpr double kDefaultNormalizedWait = 1.0 / 3.0;
/// Conflict probability above which the low-contention models are strained.
inline constexpr double kStrainedConflictProbability = 0.1;

/// P(lock conflict per request) = k (M-1) / (2 D).
/// Throws ModelRangeError when the expression exceeds 1.
ConflictProbability conflict_probability(const SingleClassParams& p);

enum class DeadlockVariant { Original, Modified };

/// P(2-way deadlock per txn): (M-1) k^4 / (4 D^2), or one third of that
/// under the modified argument that the partner must already be blocked.
double deadlock_probability_2way(const SingleClassParams& p,
                                 DeadlockVariant variant = DeadlockVariant::Modified);

/// Multiplier <= 1 shrinking D under hot-set skew: [b^2/c + (1-b)^2/(1-c)]^-1.
double skew_factor(double b, double c);

/// Multiplier >= 1 inflating D under shared-mode mixing: 1 / (1 - s^2).
double share_factor(double s);

/// Effective database size D * skew_factor * share_factor.
double effective_db_size(double D, const AccessSkew& skew);

/// Scale a measured conflict probability to a new arrival rate:
/// p_c' = p_c * (lambda' R') / (lambda R), by Little's result M = lambda R.
double extrapolate_conflict(double p_c, double lambda, double R,
                            double lambda2, double R2);

/// Mean response time of an open product-form network: sum X_n / (1 - rho_n).
double open_qn_response(const QnSystem& q, double lambda);

/// Throughput of a balanced closed network: T(M) = M / ((N + M - 1) X).
double balanced_closed_throughput(long M, long N, double X);

/// Asymptotic job bound 1 / max demand: the closed-system throughput ceiling.
double asymptotic_job_bound(const QnSystem& q);

/// Smallest MPL able to sustain utilization rho on N balanced devices.
MplBound min_mpl(long N, double rho);

/// Multi-class conflict scale factor
/// sum_i kbar_i lambda'_i R'_i / sum_i kbar_i lambda_i R_i.
double multiclass_extrapolate(std::span<const double> kbar,
                              std::span<const double> lambda_r,
                              std::span<const double> lambda_r2);

/// Request-weighted shared fraction per DBR:
/// s_j = sum_i f_i k_ij s_ij / sum_i f_i k_ij.
std::vector<double> hdam_shared_fractions(const HdamParams& h);

/// Per-DBR conflict probability p_c^j = sum_i kbar_ij lambda_i R_i / D_eff^j
/// with D_eff^j = D_j / (1 - s_j^2).
std::vector<double> hdam_conflict_probability(const HdamParams& h,
                                              std::span<const double> response_times);

/// Per-DBR conflict scale factors under changed rates (the multi-DBR analog
/// of extrapolate_conflict).
std::vector<double> hdam_rate_scale(const HdamParams& h,
                                    std::span<const double> lambda_r,
                                    std::span<const double> lambda_r2);

/// Contended response time: the smaller root of a R^2 - R + r = 0.
/// Throws ThrashingError when 4 a r > 1 (no real solution).
double response_time_quadratic(double r, double a);

/// Smallest root in [0,1) of the blocked-fraction cubic
/// beta^3 - (1.5a+2) beta^2 + (1.5a+1) beta - a = 0.
/// Throws ThrashingError past the fold (alpha > alpha*).
double solve_cubic_beta(double alpha);

/// Fold point of the blocked-fraction cubic, located numerically.
/// Matches (0.226, 0.378) to three decimals.
const CriticalPoint& critical_point();

/// Blocked fraction for unequal step times:
/// beta = alpha [1 + rho (1+rho) / (2 (1 - rho^2))].
double unequal_step_beta(double alpha, double rho_b);

/// Fixed-point driver for the unequal-step model: iterates
/// beta -> unequal_step_beta(alpha, rho_of_beta(beta)) until the relative
/// change is below tol. Throws NoConvergenceError past max_iterations.
double unequal_step_beta_fixed_point(double alpha,
                                     const std::function<double(double)>& rho_of_beta,
                                     double tol = 1e-9,
                                     int max_iterations = 10000);

/// rho = 1 - 1/CR and its inverse CR = 1/(1 - rho).
double conflict_ratio_to_rho(double cr);
double rho_to_conflict_ratio(double rho);

/// Thrashing load index k^2 M / D; compare with kThrashingLoadIndexLimit.
double thrashing_load_index(const SingleClassParams& p);

}  // namespace clab::analytic
