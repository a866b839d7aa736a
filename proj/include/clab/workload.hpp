#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clab/analytic.hpp"
#include "clab/rng.hpp"

// Heterogeneous workload model: transaction classes issuing lock requests
// against database regions with hot-set skew and a shared-mode mix, plus the
// random plan sampler the simulator consumes.
namespace clab::workload {

enum class LockMode : std::uint8_t { Shared, Exclusive };

enum class StepTimeDist : std::uint8_t { Fixed, Exponential, Empirical };

struct StepTimeSpec {
  StepTimeDist dist = StepTimeDist::Fixed;
  double mean = 1.0;            // Fixed / Exponential
  std::vector<double> values;   // Empirical

  double mean_value() const;
  double draw(Rng& rng) const;
};

/// One database region. Hot-set skew is optional: when `skewed` is false the
/// region is sampled uniformly.
struct DbrSpec {
  std::string id;
  std::uint64_t D = 1;  // number of lockable objects
  bool skewed = false;
  double b = 0;         // fraction of requests to the hot set
  double c = 0.5;       // hot-set fraction of the region

  std::uint64_t hot_set_size() const;
};

struct TxnClassSpec {
  std::string id;
  double frequency = 1.0;
  std::vector<std::uint64_t> k;  // lock requests per DBR
  std::vector<double> s;         // shared fraction per DBR
  StepTimeSpec step_time;
  double restart_speedup = 1.0;  // step-time multiplier on re-execution

  std::uint64_t total_locks() const;
};

struct WorkloadSpec {
  std::vector<TxnClassSpec> classes;
  std::vector<DbrSpec> dbrs;
};

/// One step of a transaction plan: process for `duration`, then (for the
/// first k steps) request one lock. The final step carries no request; the
/// txn commits at its end.
struct PlanStep {
  double duration = 0;
  bool has_lock = false;
  std::uint32_t dbr = 0;
  std::uint64_t object = 0;
  LockMode mode = LockMode::Exclusive;
};

struct TxnPlan {
  std::uint32_t class_index = 0;
  std::vector<PlanStep> steps;

  std::size_t lock_steps() const { return steps.empty() ? 0 : steps.size() - 1; }
  double nominal_duration() const;
};

/// Full invariant check; returns human-readable problems, empty when valid.
std::vector<std::string> validate(const WorkloadSpec& spec);

/// validate() and throw InputError on the first problem list.
void validate_or_throw(const WorkloadSpec& spec);

/// Draw one transaction plan. Class by frequency; per lock step, DBR
/// proportional to k_ij, object by the hot-set rule, mode S with
/// probability s_ij; objects within a plan are distinct (rejection).
TxnPlan sample_txn(const WorkloadSpec& spec, Rng& rng);

/// Mean lock requests per txn, sum_i f_i k_i.
double mean_locks_per_txn(const WorkloadSpec& spec);

/// Build the analytic multi-class model from a workload: per-class rates
/// lambda_i = total_lambda * f_i and mean held locks kbar_ij = k_ij / 2
/// (equal-step holding average).
analytic::HdamParams to_hdam(const WorkloadSpec& spec, double total_lambda);

/// JSON (de)serialization. Parsing is strict: unknown fields are rejected.
WorkloadSpec workload_from_json_text(const std::string& text);
std::string workload_to_json_text(const WorkloadSpec& spec);

}  // namespace clab::workload
