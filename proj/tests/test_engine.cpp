#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include <doctest.h>

#include "clab/engine.hpp"
#include "clab/report.hpp"
#include "oracles.hpp"

using namespace clab;
using namespace clab::engine;
using test_oracles::exclusive_holds_disjoint;
using test_oracles::precedence_acyclic;
using workload::LockMode;
using workload::PlanStep;
using workload::StepTimeDist;
using workload::TxnPlan;
using workload::WorkloadSpec;

namespace {

WorkloadSpec uniform_spec(std::uint64_t D, std::uint64_t k, double shared = 0.0,
                          double step = 1.0) {
  WorkloadSpec w;
  w.dbrs.push_back({"db", D, false, 0, 0.5});
  workload::TxnClassSpec c;
  c.id = "txn";
  c.frequency = 1.0;
  c.k = {k};
  c.s = {shared};
  c.step_time = {StepTimeDist::Fixed, step, {}};
  w.classes.push_back(c);
  return w;
}

PlanStep lock_step(double d, std::uint64_t obj, LockMode m = LockMode::Exclusive) {
  PlanStep s;
  s.duration = d;
  s.has_lock = true;
  s.dbr = 0;
  s.object = obj;
  s.mode = m;
  return s;
}

PlanStep commit_step(double d) {
  PlanStep s;
  s.duration = d;
  return s;
}

SimConfig scripted_config(std::vector<TxnPlan> plans, double horizon) {
  SimConfig cfg;
  cfg.mode = Mode::Closed;
  cfg.horizon = horizon;
  cfg.warmup = 0;
  cfg.seed = 1;
  cfg.scripted_plans = std::move(plans);
  cfg.record_history = true;
  return cfg;
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("FCFS fairness: shared request behind a queued exclusive waits") {
  std::vector<TxnPlan> plans;
  plans.push_back({0, {lock_step(1.0, 7, LockMode::Shared), commit_step(99.0)}});
  plans.push_back({0, {lock_step(2.0, 7, LockMode::Exclusive), commit_step(1.0)}});
  plans.push_back({0, {lock_step(3.0, 7, LockMode::Shared), commit_step(1.0)}});
  RunTrace trace;
  const auto r = run_simulation(uniform_spec(100, 1), scripted_config(plans, 1000), &trace);
  CHECK(r.committed == 3);
  CHECK(r.lock_conflicts == 2);
  REQUIRE(trace.committed.size() == 3);
  std::map<TxnId, double> commit_at;
  for (const auto& t : trace.committed) commit_at[t.id] = t.commit_time;
  CHECK(commit_at[0] == doctest::Approx(100.0));
  CHECK(commit_at[1] == doctest::Approx(101.0));  // X first, FCFS
  CHECK(commit_at[2] == doctest::Approx(102.0));  // S waited behind the X
}

TEST_CASE("release grants the head and the following shared batch") {
  std::vector<TxnPlan> plans;
  plans.push_back({0, {lock_step(1.0, 7), commit_step(9.0)}});  // X holder
  plans.push_back({0, {lock_step(2.0, 7, LockMode::Shared), commit_step(5.0)}});
  plans.push_back({0, {lock_step(3.0, 7, LockMode::Shared), commit_step(5.0)}});
  plans.push_back({0, {lock_step(4.0, 7, LockMode::Exclusive), commit_step(1.0)}});
  RunTrace trace;
  const auto r = run_simulation(uniform_spec(100, 1), scripted_config(plans, 1000), &trace);
  CHECK(r.committed == 4);
  std::map<TxnId, double> commit_at;
  std::map<TxnId, double> grant_at;
  for (const auto& t : trace.committed) {
    commit_at[t.id] = t.commit_time;
    grant_at[t.id] = t.accesses.at(0).time;
  }
  CHECK(commit_at[0] == doctest::Approx(10.0));
  // Both S granted together at the release, X waits for both.
  CHECK(grant_at[1] == doctest::Approx(10.0));
  CHECK(grant_at[2] == doctest::Approx(10.0));
  CHECK(grant_at[3] == doctest::Approx(15.0));
  CHECK(commit_at[3] == doctest::Approx(16.0));
}

TEST_CASE("two-way deadlock is detected and the younger tie-break applies") {
  std::vector<TxnPlan> plans;
  plans.push_back({0, {lock_step(1.0, 1), lock_step(9.0, 2), commit_step(1.0)}});
  plans.push_back({0, {lock_step(2.0, 2), lock_step(9.0, 1), commit_step(1.0)}});
  RunTrace trace;
  const auto r = run_simulation(uniform_spec(100, 2), scripted_config(plans, 1000), &trace);
  CHECK(r.deadlocks == 1);
  CHECK(r.deadlocks_2way == 1);
  CHECK(r.aborts.deadlock == 1);
  CHECK(r.committed == 2);  // the victim restarts and commits
  CHECK(precedence_acyclic(trace));
}

TEST_CASE("victim is the txn holding fewest locks") {
  std::vector<TxnPlan> plans;
  // T0 acquires a, b then wants c; T1 holds c then wants a.
  plans.push_back({0, {lock_step(1.0, 10), lock_step(1.0, 11), lock_step(8.0, 12),
                       commit_step(1.0)}});
  plans.push_back({0, {lock_step(2.0, 12), lock_step(9.0, 10), commit_step(1.0)}});
  RunTrace trace;
  const auto r = run_simulation(uniform_spec(100, 3), scripted_config(plans, 1000), &trace);
  CHECK(r.deadlocks == 1);
  CHECK(r.committed == 2);
  // T0 (two locks) survives and commits before T1's re-run finishes.
  REQUIRE(trace.committed.size() == 2);
  CHECK(trace.committed[0].id == 0);
}

TEST_CASE("shared-holder deadlock shape from an exclusive request") {
  std::vector<TxnPlan> plans;
  // T0: X(p) then X(o); T1, T2: S(o); T2 then waits on p.
  plans.push_back({0, {lock_step(1.0, 100), lock_step(9.0, 200), commit_step(1.0)}});
  plans.push_back({0, {lock_step(0.5, 200, LockMode::Shared), commit_step(100.0)}});
  plans.push_back({0, {lock_step(0.7, 200, LockMode::Shared), lock_step(1.3, 100),
                       commit_step(1.0)}});
  RunTrace trace;
  const auto r = run_simulation(uniform_spec(1000, 3), scripted_config(plans, 2000), &trace);
  // T0 blocks on the S holders; T2 already waits on T0: a 2-cycle (T0, T2).
  CHECK(r.deadlocks == 1);
  CHECK(r.deadlocks_2way == 1);
  CHECK(r.committed == 3);
  CHECK(precedence_acyclic(trace));
}

TEST_CASE("open mode with zero arrival rate reports zeros") {
  SimConfig cfg;
  cfg.mode = Mode::Open;
  cfg.lambda = 0;
  cfg.horizon = 100;
  cfg.warmup = 10;
  const auto r = run_simulation(uniform_spec(100, 2), cfg);
  CHECK(r.committed == 0);
  CHECK(r.throughput == doctest::Approx(0.0));
  CHECK(r.p_c == doctest::Approx(0.0));
  CHECK(r.cr == doctest::Approx(1.0));
}

TEST_CASE("closed single txn never conflicts") {
  SimConfig cfg;
  cfg.mode = Mode::Closed;
  cfg.mpl = 1;
  cfg.horizon = 500;
  cfg.warmup = 50;
  const auto r = run_simulation(uniform_spec(50, 5), cfg);
  CHECK(r.committed > 0);
  CHECK(r.p_c == doctest::Approx(0.0));
  CHECK(r.beta == doctest::Approx(0.0));
  CHECK(r.deadlocks == 0);
}

TEST_CASE("identical inputs give identical report bytes") {
  SimConfig cfg;
  cfg.mode = Mode::Closed;
  cfg.mpl = 8;
  cfg.horizon = 400;
  cfg.warmup = 40;
  cfg.seed = 12345;
  const auto spec = uniform_spec(60, 6, 0.3);
  const auto a = run_simulation(spec, cfg);
  const auto b = run_simulation(spec, cfg);
  CHECK(report::report_to_json_text(a) == report::report_to_json_text(b));
  CHECK(report::csv_row(a) == report::csv_row(b));
}

TEST_CASE("metric identities hold by construction") {
  SimConfig cfg;
  cfg.mode = Mode::Closed;
  cfg.mpl = 10;
  cfg.horizon = 600;
  cfg.warmup = 60;
  cfg.seed = 3;
  const auto r = run_simulation(uniform_spec(80, 6), cfg);
  CHECK(r.l_bar == doctest::Approx(r.l_active + r.l_blocked).epsilon(1e-12));
  CHECK(r.rho == doctest::Approx(1.0 - 1.0 / r.cr).epsilon(1e-12));
  CHECK(r.beta >= 0.0);
  CHECK(r.beta < 1.0);
  CHECK(r.l_blocked > 0.0);  // contention is present in this setup
}

TEST_CASE("low-contention agreement with the closed-form estimate") {
  // k = 10, M = 11, D = 1000: predicted p_c = 0.05.
  std::vector<double> samples;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SimConfig cfg;
    cfg.mode = Mode::Closed;
    cfg.mpl = 11;
    cfg.horizon = 2500;
    cfg.warmup = 500;
    cfg.seed = seed;
    samples.push_back(run_simulation(uniform_spec(1000, 10), cfg).p_c);
  }
  double mean = 0;
  for (const double v : samples) mean += v;
  mean /= static_cast<double>(samples.size());
  CHECK(std::abs(mean - 0.05) / 0.05 < 0.10);
}

TEST_CASE("little's law holds in open mode") {
  std::vector<double> diff;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    SimConfig cfg;
    cfg.mode = Mode::Open;
    cfg.lambda = 0.05;
    cfg.horizon = 8000;
    cfg.warmup = 1000;
    cfg.seed = seed;
    const auto r = run_simulation(uniform_spec(10000, 2), cfg);
    diff.push_back(r.mean_population - r.throughput * r.response_mean);
  }
  const auto s = report::summarize(diff);
  CHECK(std::abs(s.mean) <= 3.0 * std::max(s.ci95, 1e-3));
}

TEST_CASE("small contentious runs are serializable and exclusive-safe") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SimConfig cfg;
    cfg.mode = Mode::Closed;
    cfg.mpl = 6;
    cfg.horizon = 60;
    cfg.warmup = 0;
    cfg.seed = seed;
    cfg.record_history = true;
    RunTrace trace;
    const auto r = run_simulation(uniform_spec(30, 4, 0.4), cfg, &trace);
    CHECK(r.committed > 0);
    CHECK(precedence_acyclic(trace));
    CHECK(exclusive_holds_disjoint(trace));
  }
}

TEST_CASE("deadlock rate falls roughly fourfold when D doubles") {
  auto deadlock_rate = [](std::uint64_t D) {
    long deadlocks = 0, commits = 0;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      SimConfig cfg;
      cfg.mode = Mode::Closed;
      cfg.mpl = 11;
      cfg.horizon = 4000;
      cfg.warmup = 200;
      cfg.seed = seed;
      const auto r = run_simulation(uniform_spec(D, 10), cfg);
      deadlocks += r.deadlocks_2way;
      commits += r.committed;
    }
    return static_cast<double>(deadlocks) / static_cast<double>(commits);
  };
  const double at_500 = deadlock_rate(500);
  const double at_1000 = deadlock_rate(1000);
  CHECK(at_500 > 0.0);
  CHECK(at_1000 > 0.0);
  const double ratio = at_500 / at_1000;
  CHECK(ratio > 2.0);
  CHECK(ratio < 8.0);
}

}  // TEST_SUITE
