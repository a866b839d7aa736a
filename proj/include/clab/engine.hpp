#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clab/ccpolicy.hpp"
#include "clab/loadctl.hpp"
#include "clab/workload.hpp"

// Deterministic discrete-event transaction simulator: event clock, strict-2PL
// lock table with FCFS queues, eager waits-for deadlock detection, pluggable
// conflict policies and admission controllers, time-weighted metrics.
namespace clab::engine {

using TxnId = ccpolicy::TxnId;

enum class Mode : std::uint8_t { Open, Closed };

struct MultiphaseConfig {
  bool virtual_phase = false;  // run once lock-free to prime the buffer
  bool preclaim = false;       // acquire all locks up front in the locking phase
};

struct SimConfig {
  Mode mode = Mode::Closed;
  double lambda = 0;  // open-mode Poisson arrival rate
  long mpl = 1;       // closed-mode population
  double horizon = 0;
  double warmup = 0;
  std::uint64_t seed = 1;
  ccpolicy::PolicyConfig policy;
  loadctl::LoadControlConfig load_control;
  MultiphaseConfig multiphase;
  bool record_history = false;  // keep committed access traces (tests)
  // Test seam: run exactly these plans as a closed population with no
  // replacements. Empty in normal operation.
  std::vector<workload::TxnPlan> scripted_plans;

  void validate() const;
};

struct AbortCounts {
  long deadlock = 0;
  long policy = 0;
  long load_control = 0;
  long occ_validation = 0;
  long occ_kill = 0;
  long permanent = 0;

  long total() const {
    return deadlock + policy + load_control + occ_validation + occ_kill + permanent;
  }
};

struct ClassReport {
  std::string id;
  long committed = 0;
  double response_mean = 0;
  long requests = 0;
  long conflicts = 0;
  double p_c = 0;
};

struct DbrReport {
  std::string id;
  long requests = 0;
  long conflicts = 0;
  double p_c = 0;
};

/// Post-warmup measurements of one replication.
struct SimReport {
  std::uint64_t seed = 0;
  double horizon = 0;
  double warmup = 0;
  long committed = 0;
  double throughput = 0;
  double response_mean = 0;
  long lock_requests = 0;
  long lock_conflicts = 0;
  double p_c = 0;
  double beta = 0;          // time-average blocked fraction
  double l_bar = 0;         // time-average held locks
  double l_active = 0;      // ... held by active txns
  double l_blocked = 0;     // ... held by blocked txns
  double cr = 1;            // conflict ratio; rho = 1 - 1/cr by construction
  double rho = 0;
  long deadlocks = 0;
  long deadlocks_2way = 0;
  AbortCounts aborts;
  long restarts = 0;
  int max_blocking_level = 0;
  double mean_mpl = 0;         // time-average in-flight txns
  double mean_population = 0;  // including the admission queue
  bool alpha_alarm = false;
  long load_control_bound = -1;  // final feedback bound, when applicable
  std::vector<ClassReport> per_class;
  std::vector<DbrReport> per_dbr;
};

/// Committed access trace for the serializability oracle.
struct TraceAccess {
  std::uint64_t key = 0;
  workload::LockMode mode = workload::LockMode::Exclusive;
  double time = 0;  // grant time (locking) or access time (optimistic)
};

struct TraceTxn {
  TxnId id = -1;
  double commit_time = 0;
  std::vector<TraceAccess> accesses;
};

struct RunTrace {
  std::vector<TraceTxn> committed;
};

inline std::uint64_t make_key(std::uint32_t dbr, std::uint64_t object) {
  return (static_cast<std::uint64_t>(dbr) << 44) | object;
}
inline std::uint32_t key_dbr(std::uint64_t key) {
  return static_cast<std::uint32_t>(key >> 44);
}

/// Run one replication. Deterministic: identical (spec, config) pairs
/// produce identical reports.
SimReport run_simulation(const workload::WorkloadSpec& spec, const SimConfig& config,
                         RunTrace* trace = nullptr);

}  // namespace clab::engine
