#include "clab/engine.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "clab/errors.hpp"
#include "clab/rng.hpp"

namespace clab::engine {

using ccpolicy::Conflict;
using ccpolicy::PolicyAction;
using ccpolicy::PolicyKind;
using ccpolicy::RestartDiscipline;
using workload::LockMode;
using workload::PlanStep;
using workload::TxnPlan;

void SimConfig::validate() const {
  if (!(horizon > warmup) || warmup < 0)
    throw InputError("need horizon > warmup >= 0");
  if (mode == Mode::Closed && mpl < 1 && scripted_plans.empty())
    throw InputError("closed mode needs M >= 1");
  if (mode == Mode::Open && lambda < 0) throw InputError("lambda must be >= 0");
  if (policy.victim_restart.kind == RestartDiscipline::Kind::RestartWaiting)
    throw InputError("restart-waiting applies to self-aborts only");
  if (multiphase.preclaim && policy.lock_free())
    throw InputError("preclaiming does not apply to optimistic policies");
  if (multiphase.preclaim &&
      policy.self_restart.kind == RestartDiscipline::Kind::Immediate &&
      policy.kind != PolicyKind::Blocking)
    throw InputError(
        "preclaiming with an immediate self-restart can loop at one instant; "
        "use a delayed or restart-waiting discipline");
  if (load_control.window < 1) throw InputError("load control window must be >= 1");
}

namespace {

enum class TxnState : std::uint8_t {
  Queued,       // in the admission queue
  Active,       // processing a step
  Committing,   // processing the final step
  Blocked,      // waiting in a lock queue
  RestartWait,  // aborted, waiting to re-execute
  Committed,
  Removed,      // permanently aborted
};

bool in_flight_state(TxnState s) {
  return s == TxnState::Active || s == TxnState::Committing ||
         s == TxnState::Blocked || s == TxnState::RestartWait;
}
bool executing_state(TxnState s) {
  return s == TxnState::Active || s == TxnState::Committing;
}

enum class AbortCause : std::uint8_t {
  Deadlock,
  Policy,
  LoadControl,
  OccValidation,
  OccKill,
  Permanent,
};

struct Txn {
  TxnId id = -1;
  std::uint32_t cls = 0;
  TxnPlan plan;
  TxnState state = TxnState::Queued;
  std::size_t step = 0;  // index of the step currently processing
  double submit_time = 0;
  double birth = 0;
  double exec_start = 0;
  double mult = 1.0;  // step-time multiplier of the current execution
  long restart_count = 0;
  int blocking_level = 0;
  std::uint64_t epoch = 0;  // invalidates scheduled events on abort
  int phase = 0;            // 0 plain, 1 virtual (lock-free), 2 locking re-run
  std::vector<std::uint64_t> locks;
  bool has_pending = false;
  std::uint64_t pending_key = 0;
  LockMode pending_mode = LockMode::Exclusive;
  // Optimistic access sets / committed-history trace.
  std::vector<TraceAccess> accesses;
  // Preclaiming.
  bool preclaiming = false;
  bool preclaimed = false;
  std::size_t preclaim_idx = 0;
  std::vector<std::pair<std::uint64_t, LockMode>> preclaim_list;
  // Restart-waiting bookkeeping.
  long waiting_members = 0;
  std::vector<TxnId> notify_on_completion;
  int inflight_pos = -1;
};

struct Event {
  double time = 0;
  std::uint64_t seq = 0;
  enum class Kind : std::uint8_t { Arrival, StepDone, RestartTimer } kind = Kind::Arrival;
  TxnId txn = -1;
  std::uint64_t epoch = 0;
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

struct LockEntry {
  struct Granted {
    TxnId txn;
    LockMode mode;
  };
  std::vector<Granted> granted;
  std::deque<Granted> queue;
};

bool compatible(LockMode mode, const std::vector<LockEntry::Granted>& granted) {
  if (granted.empty()) return true;
  if (mode == LockMode::Exclusive) return false;
  for (const auto& g : granted)
    if (g.mode == LockMode::Exclusive) return false;
  return true;
}

class Simulation {
 public:
  Simulation(const workload::WorkloadSpec& spec, const SimConfig& cfg, RunTrace* trace)
      : spec_(spec),
        cfg_(cfg),
        trace_(trace),
        arrival_rng_(Rng::stream(cfg.seed, 1)),
        plan_rng_(Rng::stream(cfg.seed, 2)),
        restart_rng_(Rng::stream(cfg.seed, 3)),
        controller_(loadctl::LoadController::create(cfg.load_control)) {}

  SimReport run();

 private:
  enum class Acquire : std::uint8_t { Granted, Blocked, RequesterGone };

  // --- time accounting -----------------------------------------------------

  void advance_to(double to) {
    const double from = last_time_;
    if (to <= from) return;
    const double dt = to - from;
    wint_blocked_ += n_blocked_ * dt;
    wint_inflight_ += in_flight_ * dt;
    wint_l_active_ += static_cast<double>(locks_active_) * dt;
    wint_l_blocked_ += static_cast<double>(locks_blocked_) * dt;
    const double a = std::max(from, cfg_.warmup);
    if (to > a) {
      const double d = to - a;
      int_blocked_ += n_blocked_ * d;
      int_inflight_ += in_flight_ * d;
      int_l_active_ += static_cast<double>(locks_active_) * d;
      int_l_blocked_ += static_cast<double>(locks_blocked_) * d;
      int_population_ += static_cast<double>(population_) * d;
    }
    last_time_ = to;
  }

  // --- state buckets -------------------------------------------------------

  void set_state(Txn& t, TxnState s) {
    const TxnState old = t.state;
    if (old == s) return;
    const long held = static_cast<long>(t.locks.size());
    if (old == TxnState::Blocked) {
      --n_blocked_;
      locks_blocked_ -= held;
    } else if (executing_state(old)) {
      locks_active_ -= held;
    }
    if (in_flight_state(old) && !in_flight_state(s)) {
      --in_flight_;
      inflight_remove(t);
    } else if (!in_flight_state(old) && in_flight_state(s)) {
      ++in_flight_;
      inflight_add(t);
    }
    t.state = s;
    if (s == TxnState::Blocked) {
      ++n_blocked_;
      locks_blocked_ += held;
    } else if (executing_state(s)) {
      locks_active_ += held;
    }
  }

  void inflight_add(Txn& t) {
    t.inflight_pos = static_cast<int>(inflight_.size());
    inflight_.push_back(t.id);
  }
  void inflight_remove(Txn& t) {
    const int pos = t.inflight_pos;
    inflight_[pos] = inflight_.back();
    txns_[inflight_[pos]].inflight_pos = pos;
    inflight_.pop_back();
    t.inflight_pos = -1;
  }

  void add_lock(Txn& t, std::uint64_t key) {
    t.locks.push_back(key);
    if (t.state == TxnState::Blocked)
      ++locks_blocked_;
    else
      ++locks_active_;
  }

  void detach_all_locks(Txn& t, std::vector<std::uint64_t>& keys) {
    keys = std::move(t.locks);
    t.locks.clear();
    const long held = static_cast<long>(keys.size());
    if (t.state == TxnState::Blocked)
      locks_blocked_ -= held;
    else if (executing_state(t.state))
      locks_active_ -= held;
    for (std::uint64_t key : keys) {
      auto& g = table_[key].granted;
      g.erase(std::remove_if(g.begin(), g.end(),
                             [&](const LockEntry::Granted& e) { return e.txn == t.id; }),
              g.end());
    }
  }

  // --- helpers -------------------------------------------------------------

  double speedup(const Txn& t) const {
    return spec_.classes[t.cls].restart_speedup;
  }
  bool cc_enabled(const Txn& t) const { return t.phase != 1; }

  bool has_waiters(const Txn& t) const {
    for (std::uint64_t key : t.locks) {
      auto it = table_.find(key);
      if (it != table_.end() && !it->second.queue.empty()) return true;
    }
    return false;
  }

  void schedule(Event::Kind kind, double time, TxnId txn, std::uint64_t epoch) {
    events_.push(Event{time, next_seq_++, kind, txn, epoch});
  }

  // Automatic restart-delay mean: one mean txn residence time, estimated
  // from commits seen so far, else the plan's nominal duration.
  double restart_delay_mean(const Txn& t) const {
    if (commits_all_ > 0) return response_sum_all_ / static_cast<double>(commits_all_);
    return t.plan.nominal_duration();
  }

  Conflict build_conflict(const Txn& t, const LockEntry& entry, LockMode mode) const {
    Conflict c;
    c.requester = t.id;
    c.requester_locks = static_cast<int>(t.locks.size());
    c.requester_birth = t.birth;
    c.requester_has_waiters = has_waiters(t);
    c.requester_restarts = t.restart_count;
    c.mode = mode;
    c.clock = clock_;
    c.holders.reserve(entry.granted.size());
    for (const auto& g : entry.granted) {
      const Txn& h = txns_[g.txn];
      Conflict::Holder hv;
      hv.id = h.id;
      hv.mode = g.mode;
      hv.blocked = h.state == TxnState::Blocked;
      hv.blocking_level = hv.blocked ? h.blocking_level : 0;
      hv.locks_held = static_cast<int>(h.locks.size());
      hv.birth = h.birth;
      c.holders.push_back(hv);
    }
    return c;
  }

  // --- lifecycle -----------------------------------------------------------

  TxnId submit_new(double now) {
    Txn t;
    t.id = static_cast<TxnId>(txns_.size());
    if (!cfg_.scripted_plans.empty()) {
      t.plan = cfg_.scripted_plans[static_cast<std::size_t>(t.id)];
    } else {
      t.plan = workload::sample_txn(spec_, plan_rng_);
    }
    t.cls = t.plan.class_index;
    t.submit_time = t.birth = now;
    t.state = TxnState::Queued;
    txns_.push_back(std::move(t));
    admission_q_.push_back(txns_.back().id);
    ++population_;
    return txns_.back().id;
  }

  void try_admit() {
    while (!admission_q_.empty()) {
      if (cfg_.mode == Mode::Closed && in_flight_ >= closed_target_) break;
      if (!controller_->admit(in_flight_)) break;
      const TxnId id = admission_q_.front();
      admission_q_.pop_front();
      Txn& t = txns_[id];
      t.phase = cfg_.multiphase.virtual_phase ? (t.restart_count > 0 ? 2 : 1) : 0;
      set_state(t, TxnState::Active);
      start_execution(t);
    }
  }

  void start_execution(Txn& t) {
    t.exec_start = clock_;
    t.step = 0;
    t.accesses.clear();
    t.preclaiming = false;
    t.preclaimed = false;
    t.preclaim_idx = 0;
    t.mult = (t.phase == 2 || t.restart_count > 0) ? speedup(t) : 1.0;
    if (cfg_.multiphase.preclaim && cc_enabled(t) && !cfg_.policy.lock_free()) {
      t.preclaim_list.clear();
      for (const auto& s : t.plan.steps)
        if (s.has_lock) t.preclaim_list.emplace_back(make_key(s.dbr, s.object), s.mode);
      std::sort(t.preclaim_list.begin(), t.preclaim_list.end());
      t.preclaiming = true;
      continue_preclaim(t);
      return;
    }
    schedule_current_step(t);
  }

  void restart_execution(Txn& t) {
    if (cfg_.multiphase.virtual_phase) t.phase = 2;
    set_state(t, TxnState::Active);
    start_execution(t);
  }

  void schedule_current_step(Txn& t) {
    if (t.step + 1 == t.plan.steps.size()) set_state(t, TxnState::Committing);
    schedule(Event::Kind::StepDone, clock_ + t.plan.steps[t.step].duration * t.mult,
             t.id, t.epoch);
  }

  void proceed(Txn& t) {
    if (t.step + 1 == t.plan.steps.size()) {
      commit(t);
      return;
    }
    ++t.step;
    schedule_current_step(t);
  }

  void continue_preclaim(Txn& t) {
    while (t.preclaim_idx < t.preclaim_list.size()) {
      const auto [key, mode] = t.preclaim_list[t.preclaim_idx];
      const Acquire r = attempt_acquire(t, key, mode);
      if (r != Acquire::Granted) return;
      ++t.preclaim_idx;
    }
    t.preclaiming = false;
    t.preclaimed = true;
    schedule_current_step(t);
  }

  void resume_after_grant(Txn& t) {
    if (t.preclaiming) {
      ++t.preclaim_idx;
      continue_preclaim(t);
      return;
    }
    proceed(t);
  }

  void record_access(Txn& t, std::uint64_t key, LockMode mode) {
    t.accesses.push_back(TraceAccess{key, mode, clock_});
  }

  void count_request(const Txn& t, std::uint64_t key) {
    ++win_requests_;
    if (clock_ >= cfg_.warmup) {
      ++requests_;
      ++class_requests_[t.cls];
      ++dbr_requests_[key_dbr(key)];
    }
  }
  void count_conflict(const Txn& t, std::uint64_t key) {
    ++win_conflicts_;
    if (clock_ >= cfg_.warmup) {
      ++conflicts_;
      ++class_conflicts_[t.cls];
      ++dbr_conflicts_[key_dbr(key)];
    }
  }

  // --- lock table ----------------------------------------------------------

  void grant_lock(Txn& t, std::uint64_t key, LockMode mode) {
    table_[key].granted.push_back({t.id, mode});
    add_lock(t, key);
    if (cfg_.record_history) record_access(t, key, mode);
  }

  Acquire attempt_acquire(Txn& t, std::uint64_t key, LockMode mode) {
    count_request(t, key);
    const std::uint64_t epoch0 = t.epoch;
    bool counted_conflict = false;
    for (;;) {
      LockEntry& entry = table_[key];
      if (entry.queue.empty() && compatible(mode, entry.granted)) {
        grant_lock(t, key, mode);
        return Acquire::Granted;
      }
      if (!counted_conflict) {
        count_conflict(t, key);
        counted_conflict = true;
      }
      const Conflict c = build_conflict(t, entry, mode);
      const PolicyAction a = ccpolicy::decide(cfg_.policy, c);
      if (a.kind == PolicyAction::Kind::Block) {
        entry.queue.push_back({t.id, mode});
        t.has_pending = true;
        t.pending_key = key;
        t.pending_mode = mode;
        int level = 1;
        for (const auto& h : c.holders) level = std::max(level, h.blocking_level + 1);
        t.blocking_level = level;
        max_blocking_level_ = std::max(max_blocking_level_, level);
        set_state(t, TxnState::Blocked);
        resolve_deadlocks(t.id);
        return (t.epoch == epoch0 && t.state == TxnState::Blocked)
                   ? Acquire::Blocked
                   : Acquire::RequesterGone;
      }
      if (a.kind == PolicyAction::Kind::AbortSelf) {
        std::vector<TxnId> members;
        if (a.restart.kind == RestartDiscipline::Kind::RestartWaiting)
          for (const auto& h : c.holders) members.push_back(h.id);
        do_abort(t.id, a.permanent ? AbortCause::Permanent : AbortCause::Policy,
                 a.restart, a.permanent, members);
        return Acquire::RequesterGone;
      }
      for (const TxnId v : a.victims)
        if (in_flight_state(txns_[v].state))
          do_abort(v, AbortCause::Policy, cfg_.policy.victim_restart, false, {});
      if (t.epoch != epoch0 || !executing_state(t.state)) return Acquire::RequesterGone;
    }
  }

  // Grant the compatible FCFS prefix, then re-run the policy for the txns
  // still queued: holder sets change as queues move, and the age- and
  // depth-based rules must keep holding across those transitions.
  void rescan(std::uint64_t key) {
  restart:
    auto it = table_.find(key);
    if (it == table_.end()) return;
    LockEntry& entry = it->second;
    while (!entry.queue.empty()) {
      const auto head = entry.queue.front();
      if (!compatible(head.mode, entry.granted)) break;
      entry.queue.pop_front();
      Txn& w = txns_[head.txn];
      w.has_pending = false;
      w.blocking_level = 0;
      set_state(w, TxnState::Active);
      grant_lock(w, key, head.mode);
      resume_after_grant(w);
      goto restart;  // the grant may have reshaped any structure
    }
    if (entry.granted.empty() && entry.queue.empty()) {
      table_.erase(it);
      return;
    }
    if (entry.queue.empty() || cfg_.policy.kind == PolicyKind::Blocking) return;
    for (std::size_t i = 0; i < entry.queue.size(); ++i) {
      const auto waiting = entry.queue[i];
      Txn& w = txns_[waiting.txn];
      const Conflict c = build_conflict(w, entry, waiting.mode);
      const PolicyAction a = ccpolicy::decide(cfg_.policy, c);
      if (a.kind == PolicyAction::Kind::Block) continue;
      if (a.kind == PolicyAction::Kind::AbortSelf) {
        std::vector<TxnId> members;
        if (a.restart.kind == RestartDiscipline::Kind::RestartWaiting)
          for (const auto& h : c.holders) members.push_back(h.id);
        do_abort(w.id, a.permanent ? AbortCause::Permanent : AbortCause::Policy,
                 a.restart, a.permanent, members);
        goto restart;
      }
      bool any = false;
      for (const TxnId v : a.victims) {
        if (in_flight_state(txns_[v].state)) {
          do_abort(v, AbortCause::Policy, cfg_.policy.victim_restart, false, {});
          any = true;
        }
      }
      if (any) goto restart;
    }
  }

  // --- deadlock detection --------------------------------------------------

  // Waits-for edges: blocked txn -> each granted holder of its awaited
  // object. Detection is eager (on every block), so the graph is acyclic
  // between events and any new cycle passes through `start`.
  std::vector<TxnId> find_cycle(TxnId start) {
    struct Frame {
      TxnId node;
      std::size_t next = 0;
    };
    std::vector<Frame> stack{{start}};
    std::vector<TxnId> path{start};
    std::unordered_set<TxnId> visited{start};
    while (!stack.empty()) {
      Frame& f = stack.back();
      const Txn& u = txns_[f.node];
      const LockEntry* entry = nullptr;
      if (u.state == TxnState::Blocked) {
        auto it = table_.find(u.pending_key);
        if (it != table_.end()) entry = &it->second;
      }
      if (entry == nullptr || f.next >= entry->granted.size()) {
        stack.pop_back();
        path.pop_back();
        continue;
      }
      const TxnId v = entry->granted[f.next++].txn;
      if (v == start) return path;  // cycle closed
      if (visited.insert(v).second && txns_[v].state == TxnState::Blocked) {
        stack.push_back({v});
        path.push_back(v);
      }
    }
    return {};
  }

  TxnId choose_victim(const std::vector<TxnId>& cycle) const {
    TxnId victim = cycle.front();
    for (const TxnId id : cycle) {
      const Txn& a = txns_[id];
      const Txn& v = txns_[victim];
      if (a.locks.size() != v.locks.size()) {
        if (a.locks.size() < v.locks.size()) victim = id;
      } else if (a.birth != v.birth) {
        if (a.birth > v.birth) victim = id;  // younger
      } else if (a.id > v.id) {
        victim = id;
      }
    }
    return victim;
  }

  void resolve_deadlocks(TxnId start) {
    for (;;) {
      if (txns_[start].state != TxnState::Blocked) return;
      const auto cycle = find_cycle(start);
      if (cycle.empty()) return;
      if (clock_ >= cfg_.warmup) {
        ++deadlocks_;
        if (cycle.size() == 2) ++deadlocks_2way_;
      }
      const TxnId victim = choose_victim(cycle);
      do_abort(victim, AbortCause::Deadlock, cfg_.policy.victim_restart, false, {});
      if (victim == start) return;
    }
  }

  // --- aborts and restarts -------------------------------------------------

  void count_abort(AbortCause cause) {
    if (clock_ < cfg_.warmup) return;
    switch (cause) {
      case AbortCause::Deadlock: ++aborts_.deadlock; break;
      case AbortCause::Policy: ++aborts_.policy; break;
      case AbortCause::LoadControl: ++aborts_.load_control; break;
      case AbortCause::OccValidation: ++aborts_.occ_validation; break;
      case AbortCause::OccKill: ++aborts_.occ_kill; break;
      case AbortCause::Permanent: ++aborts_.permanent; break;
    }
  }

  void flush_completion_waiters(Txn& t) {
    if (t.notify_on_completion.empty()) return;
    const std::vector<TxnId> waiters = std::move(t.notify_on_completion);
    t.notify_on_completion.clear();
    for (const TxnId wid : waiters) {
      Txn& w = txns_[wid];
      if (--w.waiting_members == 0 && w.state == TxnState::RestartWait)
        restart_execution(w);
    }
  }

  void do_abort(TxnId id, AbortCause cause, RestartDiscipline discipline,
                bool permanent, std::vector<TxnId> members) {
    Txn& t = txns_[id];
    assert(executing_state(t.state) || t.state == TxnState::Blocked);
    ++t.epoch;
    count_abort(cause);
    t.accesses.clear();

    std::uint64_t pending_key = 0;
    bool had_pending = false;
    if (t.has_pending) {
      auto& q = table_[t.pending_key].queue;
      q.erase(std::remove_if(q.begin(), q.end(),
                             [&](const LockEntry::Granted& e) { return e.txn == id; }),
              q.end());
      had_pending = true;
      pending_key = t.pending_key;
      t.has_pending = false;
    }
    t.blocking_level = 0;

    std::vector<std::uint64_t> keys;
    detach_all_locks(t, keys);

    if (cause == AbortCause::LoadControl) {
      ++t.restart_count;
      if (clock_ >= cfg_.warmup) ++restarts_;
      set_state(t, TxnState::Queued);
      admission_q_.push_back(id);
    } else if (permanent) {
      set_state(t, TxnState::Removed);
      --population_;
      if (cfg_.mode == Mode::Closed && cfg_.scripted_plans.empty()) submit_new(clock_);
    } else {
      ++t.restart_count;
      if (clock_ >= cfg_.warmup) ++restarts_;
      switch (discipline.kind) {
        case RestartDiscipline::Kind::Immediate:
          restart_execution(t);
          break;
        case RestartDiscipline::Kind::Delayed: {
          set_state(t, TxnState::RestartWait);
          const double mean = discipline.mean_delay > 0 ? discipline.mean_delay
                                                        : restart_delay_mean(t);
          schedule(Event::Kind::RestartTimer, clock_ + restart_rng_.exponential(mean),
                   t.id, t.epoch);
          break;
        }
        case RestartDiscipline::Kind::RestartWaiting: {
          set_state(t, TxnState::RestartWait);
          t.waiting_members = 0;
          for (const TxnId m : members) {
            if (m == id) continue;
            Txn& member = txns_[m];
            if (!in_flight_state(member.state)) continue;
            member.notify_on_completion.push_back(id);
            ++t.waiting_members;
          }
          if (t.waiting_members == 0) restart_execution(t);
          break;
        }
      }
    }

    // Only after the txn is fully detached do the queues move up.
    for (const std::uint64_t key : keys) rescan(key);
    if (had_pending) rescan(pending_key);
    flush_completion_waiters(txns_[id]);
  }

  // --- commit --------------------------------------------------------------

  bool occ_validation_fails(const Txn& t) const {
    for (const auto& [commit_time, writes] : committed_writes_) {
      if (commit_time <= t.exec_start) continue;
      for (const auto& a : t.accesses)
        if (std::binary_search(writes.begin(), writes.end(), a.key)) return true;
    }
    return false;
  }

  void commit(Txn& t) {
    if (t.phase == 1) {
      // Virtual execution finished: re-run with CC at the primed speed.
      t.phase = 2;
      start_execution(t);
      return;
    }

    if (cfg_.policy.kind == PolicyKind::OccDie && occ_validation_fails(t)) {
      do_abort(t.id, AbortCause::OccValidation,
               {RestartDiscipline::Kind::Immediate, 0}, false, {});
      return;
    }

    std::vector<TxnId> kill_victims;
    if (cfg_.policy.kind == PolicyKind::OccKill) {
      std::vector<std::uint64_t> writes;
      for (const auto& a : t.accesses)
        if (a.mode == LockMode::Exclusive) writes.push_back(a.key);
      std::sort(writes.begin(), writes.end());
      if (!writes.empty()) {
        for (const TxnId uid : inflight_) {
          if (uid == t.id) continue;
          const Txn& u = txns_[uid];
          if (!executing_state(u.state)) continue;
          for (const auto& a : u.accesses) {
            if (std::binary_search(writes.begin(), writes.end(), a.key)) {
              kill_victims.push_back(uid);
              break;
            }
          }
        }
        std::sort(kill_victims.begin(), kill_victims.end());
      }
    }

    ++t.epoch;
    ++commits_all_;
    response_sum_all_ += clock_ - t.submit_time;
    if (clock_ >= cfg_.warmup) {
      ++committed_;
      response_sum_ += clock_ - t.submit_time;
      ++class_committed_[t.cls];
      class_response_[t.cls] += clock_ - t.submit_time;
    }
    if (trace_ != nullptr) {
      trace_->committed.push_back(TraceTxn{t.id, clock_, t.accesses});
    }
    if (cfg_.policy.kind == PolicyKind::OccDie) {
      std::vector<std::uint64_t> writes;
      for (const auto& a : t.accesses)
        if (a.mode == LockMode::Exclusive) writes.push_back(a.key);
      if (!writes.empty()) {
        std::sort(writes.begin(), writes.end());
        committed_writes_.emplace_back(clock_, std::move(writes));
      }
      prune_committed_writes();
    }

    std::vector<std::uint64_t> keys;
    detach_all_locks(t, keys);
    set_state(t, TxnState::Committed);
    --population_;
    for (const std::uint64_t key : keys) rescan(key);
    flush_completion_waiters(t);

    for (const TxnId v : kill_victims)
      if (executing_state(txns_[v].state))
        do_abort(v, AbortCause::OccKill, {RestartDiscipline::Kind::Immediate, 0}, false,
                 {});

    if (cfg_.mode == Mode::Closed && cfg_.scripted_plans.empty()) submit_new(clock_);

    ++window_commits_;
    if (window_commits_ >= cfg_.load_control.window) roll_window();
  }

  void prune_committed_writes() {
    double min_start = std::numeric_limits<double>::infinity();
    for (const TxnId uid : inflight_) {
      const Txn& u = txns_[uid];
      if (executing_state(u.state)) min_start = std::min(min_start, u.exec_start);
    }
    std::erase_if(committed_writes_,
                  [&](const auto& e) { return e.first <= min_start; });
  }

  // --- load control --------------------------------------------------------

  void roll_window() {
    const double dt = clock_ - window_start_;
    loadctl::WindowStats ws;
    ws.start = window_start_;
    ws.end = clock_;
    ws.commits = window_commits_;
    if (dt > 0) {
      ws.throughput = static_cast<double>(window_commits_) / dt;
      ws.mean_mpl = wint_inflight_ / dt;
    }
    if (wint_inflight_ > 0) ws.beta = wint_blocked_ / wint_inflight_;
    const double wl = wint_l_active_ + wint_l_blocked_;
    ws.cr = (wl > 0 && wint_l_active_ > 0) ? wl / wint_l_active_ : 1.0;
    if (win_requests_ > 0) ws.p_c = static_cast<double>(win_conflicts_) / win_requests_;
    if (window_commits_ > 0) ws.k1 = static_cast<double>(win_requests_) / window_commits_;
    controller_->on_window(ws);
    window_start_ = clock_;
    window_commits_ = 0;
    win_requests_ = win_conflicts_ = 0;
    wint_blocked_ = wint_inflight_ = wint_l_active_ = wint_l_blocked_ = 0;
  }

  void run_cancellations() {
    if (!controller_->wants_progress_views()) return;
    for (;;) {
      views_.clear();
      for (const TxnId id : inflight_) {
        const Txn& u = txns_[id];
        const double k = static_cast<double>(
            spec_.classes.empty() ? 0 : spec_.classes[u.cls].total_locks());
        const double acquired =
            static_cast<double>(std::max(u.locks.size(), u.accesses.size()));
        loadctl::TxnProgressView v;
        v.id = id;
        v.blocked = u.state == TxnState::Blocked;
        v.progress = k > 0 ? std::min(1.0, acquired / k) : 1.0;
        views_.push_back(v);
      }
      const auto victim = controller_->on_event(views_);
      if (!victim) return;
      Txn& v = txns_[*victim];
      if (v.state != TxnState::Blocked) return;
      do_abort(*victim, AbortCause::LoadControl, {}, false, {});
    }
  }

  // --- event handlers ------------------------------------------------------

  void on_arrival() {
    submit_new(clock_);
    if (cfg_.lambda > 0)
      schedule(Event::Kind::Arrival, clock_ + arrival_rng_.exponential(1.0 / cfg_.lambda),
               -1, 0);
  }

  void on_step_done(const Event& e) {
    Txn& t = txns_[e.txn];
    if (e.epoch != t.epoch || !executing_state(t.state)) return;
    const PlanStep& st = t.plan.steps[t.step];
    if (st.has_lock && cc_enabled(t)) {
      const std::uint64_t key = make_key(st.dbr, st.object);
      if (cfg_.policy.lock_free()) {
        count_request(t, key);
        record_access(t, key, st.mode);
        proceed(t);
        return;
      }
      if (!t.preclaimed) {
        if (attempt_acquire(t, key, st.mode) == Acquire::Granted) proceed(t);
        return;
      }
    }
    proceed(t);
  }

  void on_restart_timer(const Event& e) {
    Txn& t = txns_[e.txn];
    if (e.epoch != t.epoch || t.state != TxnState::RestartWait) return;
    restart_execution(t);
  }

  // --- report --------------------------------------------------------------

  SimReport finalize() {
    SimReport r;
    r.seed = cfg_.seed;
    r.horizon = cfg_.horizon;
    r.warmup = cfg_.warmup;
    const double elapsed = cfg_.horizon - cfg_.warmup;
    r.committed = committed_;
    r.throughput = elapsed > 0 ? static_cast<double>(committed_) / elapsed : 0;
    r.response_mean = committed_ > 0 ? response_sum_ / static_cast<double>(committed_) : 0;
    r.lock_requests = requests_;
    r.lock_conflicts = conflicts_;
    r.p_c = requests_ > 0 ? static_cast<double>(conflicts_) / requests_ : 0;
    r.beta = int_inflight_ > 0 ? int_blocked_ / int_inflight_ : 0;
    if (elapsed > 0) {
      r.l_active = int_l_active_ / elapsed;
      r.l_blocked = int_l_blocked_ / elapsed;
      r.l_bar = r.l_active + r.l_blocked;
    }
    if (r.l_bar > 0) {
      r.rho = r.l_blocked / r.l_bar;
      r.cr = r.l_active > 0 ? r.l_bar / r.l_active : std::numeric_limits<double>::max();
    }
    r.deadlocks = deadlocks_;
    r.deadlocks_2way = deadlocks_2way_;
    r.aborts = aborts_;
    r.restarts = restarts_;
    r.max_blocking_level = max_blocking_level_;
    r.mean_mpl = elapsed > 0 ? int_inflight_ / elapsed : 0;
    r.mean_population = elapsed > 0 ? int_population_ / elapsed : 0;
    r.alpha_alarm = controller_->alpha_alarm();
    r.load_control_bound = controller_->current_bound();
    for (std::size_t i = 0; i < spec_.classes.size(); ++i) {
      ClassReport cr;
      cr.id = spec_.classes[i].id;
      cr.committed = class_committed_[i];
      cr.response_mean =
          cr.committed > 0 ? class_response_[i] / static_cast<double>(cr.committed) : 0;
      cr.requests = class_requests_[i];
      cr.conflicts = class_conflicts_[i];
      cr.p_c = cr.requests > 0 ? static_cast<double>(cr.conflicts) / cr.requests : 0;
      r.per_class.push_back(std::move(cr));
    }
    for (std::size_t j = 0; j < spec_.dbrs.size(); ++j) {
      DbrReport dr;
      dr.id = spec_.dbrs[j].id;
      dr.requests = dbr_requests_[j];
      dr.conflicts = dbr_conflicts_[j];
      dr.p_c = dr.requests > 0 ? static_cast<double>(dr.conflicts) / dr.requests : 0;
      r.per_dbr.push_back(std::move(dr));
    }
    return r;
  }

  // --- members ------------------------------------------------------------

  const workload::WorkloadSpec& spec_;
  const SimConfig& cfg_;
  RunTrace* trace_;
  Rng arrival_rng_;
  Rng plan_rng_;
  Rng restart_rng_;
  std::unique_ptr<loadctl::LoadController> controller_;

  // deque: push_back keeps references to existing txns valid, and nested
  // calls (commit -> replacement submit) do push while holding them.
  std::deque<Txn> txns_;
  std::unordered_map<std::uint64_t, LockEntry> table_;
  std::priority_queue<Event, std::vector<Event>, EventLater> events_;
  std::deque<TxnId> admission_q_;
  std::vector<TxnId> inflight_;
  std::vector<loadctl::TxnProgressView> views_;
  std::vector<std::pair<double, std::vector<std::uint64_t>>> committed_writes_;

  double clock_ = 0;
  double last_time_ = 0;
  std::uint64_t next_seq_ = 0;
  long closed_target_ = 0;

  long in_flight_ = 0;
  long n_blocked_ = 0;
  long locks_active_ = 0;
  long locks_blocked_ = 0;
  long population_ = 0;

  // post-warmup accumulators
  double int_blocked_ = 0, int_inflight_ = 0;
  double int_l_active_ = 0, int_l_blocked_ = 0;
  double int_population_ = 0;
  long committed_ = 0;
  double response_sum_ = 0;
  long requests_ = 0, conflicts_ = 0;
  long deadlocks_ = 0, deadlocks_2way_ = 0;
  AbortCounts aborts_;
  long restarts_ = 0;
  int max_blocking_level_ = 0;
  std::vector<long> class_committed_, class_requests_, class_conflicts_;
  std::vector<double> class_response_;
  std::vector<long> dbr_requests_, dbr_conflicts_;

  // whole-run accumulators (restart delay auto-mean)
  long commits_all_ = 0;
  double response_sum_all_ = 0;

  // window accumulators
  double window_start_ = 0;
  long window_commits_ = 0;
  long win_requests_ = 0, win_conflicts_ = 0;
  double wint_blocked_ = 0, wint_inflight_ = 0;
  double wint_l_active_ = 0, wint_l_blocked_ = 0;
};

SimReport Simulation::run() {
  class_committed_.assign(spec_.classes.size(), 0);
  class_requests_.assign(spec_.classes.size(), 0);
  class_conflicts_.assign(spec_.classes.size(), 0);
  class_response_.assign(spec_.classes.size(), 0.0);
  dbr_requests_.assign(spec_.dbrs.size(), 0);
  dbr_conflicts_.assign(spec_.dbrs.size(), 0);

  if (cfg_.mode == Mode::Closed) {
    closed_target_ = cfg_.scripted_plans.empty()
                         ? cfg_.mpl
                         : static_cast<long>(cfg_.scripted_plans.size());
    for (long i = 0; i < closed_target_; ++i) submit_new(0.0);
  } else if (cfg_.lambda > 0) {
    schedule(Event::Kind::Arrival, arrival_rng_.exponential(1.0 / cfg_.lambda), -1, 0);
  }
  try_admit();

  while (!events_.empty() && events_.top().time <= cfg_.horizon) {
    const Event e = events_.top();
    events_.pop();
    advance_to(e.time);
    clock_ = e.time;
    switch (e.kind) {
      case Event::Kind::Arrival: on_arrival(); break;
      case Event::Kind::StepDone: on_step_done(e); break;
      case Event::Kind::RestartTimer: on_restart_timer(e); break;
    }
    run_cancellations();
    try_admit();
  }
  advance_to(cfg_.horizon);
  clock_ = cfg_.horizon;
  return finalize();
}

}  // namespace

SimReport run_simulation(const workload::WorkloadSpec& spec, const SimConfig& config,
                         RunTrace* trace) {
  config.validate();
  if (config.scripted_plans.empty()) workload::validate_or_throw(spec);
  Simulation sim(spec, config, trace);
  return sim.run();
}

}  // namespace clab::engine
