#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "clab/report.hpp"
#include "clab/scenario.hpp"

// Command implementations behind the CLI, usable directly from tests.
// Exit codes: 0 ok, 1 input error, 2 model-range/thrashing, 3 validation
// failure.
namespace clab::commands {

/// Closed-form predictions for a scenario.
struct Prediction {
  double k1 = 0;               // mean lock requests per txn
  double mean_plan_time = 0;   // nominal (k+1)-step duration
  std::vector<double> s_j;     // per-DBR shared fraction of requests
  std::vector<double> d_eff;   // per-DBR effective size (skew and share)
  double d_eff_agg = 0;        // request-weighted aggregate effective size
  double mean_concurrency = 0; // M (closed) or lambda * R (open)
  double p_c = 0;              // per-request conflict probability
  std::vector<double> p_c_dbr;
  double alpha = 0;
  double beta = 0;             // NaN when thrashing
  double response = 0;         // contended response time; NaN when thrashing
  double throughput = 0;       // closed-mode prediction; 0 otherwise
  double rho = 0;              // first-order blocked-lock fraction (= beta)
  double cr = 1;
  double deadlock_2way = 0;    // per txn
  double thrashing_index = 0;  // k^2 M / D against 1.5
  double thrashing_margin = 0; // alpha* - alpha
  bool thrashing = false;
  // Queueing-network section, present when the scenario has one.
  struct Qn {
    double lambda = 0;
    double response0 = 0;        // R(lambda), no contention
    double lambda2 = 0;          // extrapolation rate
    double response2 = 0;        // R(lambda2)
    double conflict_scale = 0;   // (lambda2 R2) / (lambda R)
    double ajb = 0;              // asymptotic bound 1/max demand
    double max_utilization = 0;
    analytic::MplBound mpl;
    double closed_throughput = 0;  // T(M) for balanced closed systems
  };
  std::optional<Qn> qn;
};

Prediction predict(const scenario::Scenario& s);

/// Run the scenario's replications (seeds seed..seed+n-1), in parallel up to
/// CONTENTION_LAB_THREADS, merged in seed order.
std::vector<engine::SimReport> run_replications(const scenario::Scenario& s);

int cmd_analyze(const scenario::Scenario& s, std::ostream& out,
                const std::optional<std::filesystem::path>& out_dir);

int cmd_simulate(const scenario::Scenario& s, std::ostream& out,
                 const std::optional<std::filesystem::path>& out_dir);

int cmd_sweep(const scenario::Scenario& s, const std::string& axis,
              const std::vector<std::string>& values, std::ostream& out,
              const std::optional<std::filesystem::path>& out_dir);

int cmd_validate(const scenario::Scenario& s, std::ostream& out,
                 const std::optional<std::filesystem::path>& out_dir);

int cmd_solve(const std::string& what, std::optional<double> alpha,
              std::optional<double> a, std::optional<double> r, std::ostream& out);

/// Validation thresholds (relative unless noted). p_c values come from the
/// agreement criteria; the rest are pinned engineering tolerances.
inline constexpr double kTolPc = 0.10;
inline constexpr double kTolPcDbr = 0.15;
inline constexpr double kTolBeta = 0.25;
inline constexpr double kTolBetaAbs = 0.02;
inline constexpr double kTolResponse = 0.15;
inline constexpr double kTolRhoAbs = 0.05;
inline constexpr double kTolRho = 0.50;

}  // namespace clab::commands
