#include "clab/ccpolicy.hpp"

#include <algorithm>

#include "clab/errors.hpp"

namespace clab::ccpolicy {

bool PolicyConfig::deadlock_free_by_design() const {
  switch (kind) {
    case PolicyKind::NoWaiting:
    case PolicyKind::CautiousWaiting:
    case PolicyKind::WaitDie:
    case PolicyKind::WoundWait:
    case PolicyKind::WaitDepthLimited:
    case PolicyKind::OccDie:
    case PolicyKind::OccKill:
      return true;
    case PolicyKind::RunningPriority:
      return symmetric;
    case PolicyKind::Blocking:
      return false;
  }
  return false;
}

std::string PolicyConfig::name() const {
  switch (kind) {
    case PolicyKind::Blocking: return "blocking";
    case PolicyKind::NoWaiting: return "no_waiting";
    case PolicyKind::CautiousWaiting: return "cautious_waiting";
    case PolicyKind::RunningPriority:
      return symmetric ? "running_priority_symmetric" : "running_priority";
    case PolicyKind::WaitDie: return "wait_die";
    case PolicyKind::WoundWait: return "wound_wait";
    case PolicyKind::WaitDepthLimited: return "wait_depth_limited";
    case PolicyKind::OccDie: return "occ_die";
    case PolicyKind::OccKill: return "occ_kill";
  }
  return "unknown";
}

PolicyConfig PolicyConfig::make(PolicyKind kind) {
  PolicyConfig p;
  p.kind = kind;
  switch (kind) {
    case PolicyKind::Blocking:
      // Deadlock victims re-run right away; the survivor holds the
      // contested lock, so the victim re-queues behind it.
      p.victim_restart = {RestartDiscipline::Kind::Immediate, 0};
      break;
    case PolicyKind::CautiousWaiting:
      p.self_restart = {RestartDiscipline::Kind::RestartWaiting, 0};
      break;
    case PolicyKind::OccDie:
    case PolicyKind::OccKill:
      p.self_restart = {RestartDiscipline::Kind::Immediate, 0};
      p.victim_restart = {RestartDiscipline::Kind::Immediate, 0};
      break;
    default:
      break;  // delayed restarts with the automatic mean
  }
  return p;
}

bool is_older(double birth_a, TxnId a, double birth_b, TxnId b) {
  if (birth_a != birth_b) return birth_a < birth_b;
  return a < b;
}

namespace {

PolicyAction decide_wait_die(const PolicyConfig& p, const Conflict& c) {
  // Older than every holder -> wait; younger than any -> die.
  for (const auto& h : c.holders)
    if (!is_older(c.requester_birth, c.requester, h.birth, h.id))
      return PolicyAction::abort_self(p.self_restart);
  return PolicyAction::block();
}

PolicyAction decide_wound_wait(const PolicyConfig& p, const Conflict& c) {
  // Wound all younger holders; wait for older ones.
  std::vector<TxnId> victims;
  for (const auto& h : c.holders)
    if (is_older(c.requester_birth, c.requester, h.birth, h.id))
      victims.push_back(h.id);
  if (!victims.empty()) return PolicyAction::abort_others(std::move(victims));
  (void)p;
  return PolicyAction::block();
}

PolicyAction decide_wdl(const PolicyConfig& p, const Conflict& c) {
  // Wait depth <= 1. A violating edge pairs the requester with a blocked
  // holder, or (when the requester itself blocks others) with any holder.
  std::vector<TxnId> victims;
  for (const auto& h : c.holders) {
    if (!h.blocked && !c.requester_has_waiters) continue;
    if (h.locks_held > c.requester_locks)
      return PolicyAction::abort_self(p.self_restart);
    victims.push_back(h.id);  // lesser progress, or tie -> non-requester
  }
  if (!victims.empty()) return PolicyAction::abort_others(std::move(victims));
  return PolicyAction::block();
}

}  // namespace

PolicyAction decide(const PolicyConfig& policy, const Conflict& c) {
  switch (policy.kind) {
    case PolicyKind::Blocking:
      return PolicyAction::block();

    case PolicyKind::NoWaiting: {
      const bool permanent = policy.attempts_limit >= 0 &&
                             c.requester_restarts >= policy.attempts_limit;
      return PolicyAction::abort_self(policy.self_restart, permanent);
    }

    case PolicyKind::CautiousWaiting:
      for (const auto& h : c.holders)
        if (h.blocked) return PolicyAction::abort_self(policy.self_restart);
      return PolicyAction::block();

    case PolicyKind::RunningPriority: {
      std::vector<TxnId> victims;
      for (const auto& h : c.holders)
        if (h.blocked) victims.push_back(h.id);
      if (!victims.empty()) return PolicyAction::abort_others(std::move(victims));
      if (policy.symmetric && c.requester_has_waiters)
        return PolicyAction::abort_self(policy.self_restart);
      return PolicyAction::block();
    }

    case PolicyKind::WaitDie:
      return decide_wait_die(policy, c);
    case PolicyKind::WoundWait:
      return decide_wound_wait(policy, c);
    case PolicyKind::WaitDepthLimited:
      return decide_wdl(policy, c);

    case PolicyKind::OccDie:
    case PolicyKind::OccKill:
      break;  // optimistic execution never reaches the lock table
  }
  throw ModelError("decide() called for a lock-free policy");
}

PolicyKind policy_kind_from_name(const std::string& name) {
  if (name == "blocking") return PolicyKind::Blocking;
  if (name == "no_waiting") return PolicyKind::NoWaiting;
  if (name == "cautious_waiting") return PolicyKind::CautiousWaiting;
  if (name == "running_priority") return PolicyKind::RunningPriority;
  if (name == "wait_die") return PolicyKind::WaitDie;
  if (name == "wound_wait") return PolicyKind::WoundWait;
  if (name == "wait_depth_limited" || name == "wdl") return PolicyKind::WaitDepthLimited;
  if (name == "occ_die") return PolicyKind::OccDie;
  if (name == "occ_kill") return PolicyKind::OccKill;
  throw InputError("unknown policy '" + name + "'");
}

}  // namespace clab::ccpolicy
