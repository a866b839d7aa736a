#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clab/workload.hpp"

// Conflict-resolution policies. Each is a pure decision function over a
// Conflict view; all state mutation happens in the engine.
namespace clab::ccpolicy {

using TxnId = std::int64_t;

enum class PolicyKind : std::uint8_t {
  Blocking,          // general waiting; deadlocks broken by detection
  NoWaiting,         // immediate restart on any conflict
  CautiousWaiting,   // abort when conflicting with a blocked holder
  RunningPriority,   // abort blocked holders in favor of the running requester
  WaitDie,           // older requesters wait, younger die
  WoundWait,         // older requesters wound younger holders
  WaitDepthLimited,  // depth <= 1, abort the lesser-progress txn
  OccDie,            // optimistic, validate at commit, silent restart
  OccKill,           // optimistic, broadcast abort at commit
};

struct RestartDiscipline {
  enum class Kind : std::uint8_t { Immediate, Delayed, RestartWaiting };
  Kind kind = Kind::Delayed;
  // Mean of the exponential restart delay; <= 0 selects the automatic value
  // (mean response time observed so far, else the plan's nominal duration).
  double mean_delay = 0;
};

struct PolicyConfig {
  PolicyKind kind = PolicyKind::Blocking;
  bool symmetric = false;           // RunningPriority variant
  long attempts_limit = -1;         // NoWaiting: < 0 means unlimited
  RestartDiscipline self_restart;   // applied to AbortSelf decisions
  RestartDiscipline victim_restart; // applied to AbortOthers victims and deadlock victims

  bool lock_free() const {
    return kind == PolicyKind::OccDie || kind == PolicyKind::OccKill;
  }
  /// Kinds that never form waits-for cycles; detection runs as a watchdog.
  bool deadlock_free_by_design() const;
  std::string name() const;

  static PolicyConfig make(PolicyKind kind);
};

/// Snapshot of one lock conflict, handed to the policy.
struct Conflict {
  struct Holder {
    TxnId id = -1;
    workload::LockMode mode = workload::LockMode::Exclusive;
    bool blocked = false;
    int blocking_level = 0;
    int locks_held = 0;
    double birth = 0;
  };
  TxnId requester = -1;
  int requester_locks = 0;
  double requester_birth = 0;
  bool requester_has_waiters = false;
  long requester_restarts = 0;
  workload::LockMode mode = workload::LockMode::Exclusive;
  double clock = 0;
  std::vector<Holder> holders;
};

struct PolicyAction {
  enum class Kind : std::uint8_t { Block, AbortSelf, AbortOthers };
  Kind kind = Kind::Block;
  RestartDiscipline restart;   // AbortSelf
  bool permanent = false;      // AbortSelf after the NoWaiting attempts limit
  std::vector<TxnId> victims;  // AbortOthers

  static PolicyAction block() { return {}; }
  static PolicyAction abort_self(RestartDiscipline d, bool perm = false) {
    PolicyAction a;
    a.kind = Kind::AbortSelf;
    a.restart = d;
    a.permanent = perm;
    return a;
  }
  static PolicyAction abort_others(std::vector<TxnId> v) {
    PolicyAction a;
    a.kind = Kind::AbortOthers;
    a.victims = std::move(v);
    return a;
  }
};

/// The policy decision proper. Invoked on every conflicting request, and
/// re-invoked for still-queued txns whenever the holder set of their awaited
/// object changes (so age- and depth-based rules stay enforced as queues
/// move).
PolicyAction decide(const PolicyConfig& policy, const Conflict& c);

/// Age priority: smaller birth timestamp wins; ids break ties.
bool is_older(double birth_a, TxnId a, double birth_b, TxnId b);

PolicyKind policy_kind_from_name(const std::string& name);

}  // namespace clab::ccpolicy
