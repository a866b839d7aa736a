#include <algorithm>
#include <cmath>
#include <set>

#include <doctest.h>

#include "clab/workload.hpp"

using namespace clab;
using namespace clab::workload;

namespace {

WorkloadSpec two_class_spec() {
  WorkloadSpec s;
  s.dbrs.push_back({"a", 1000, false, 0, 0.5});
  s.dbrs.push_back({"b", 500, false, 0, 0.5});
  TxnClassSpec c1;
  c1.id = "short";
  c1.frequency = 0.6;
  c1.k = {4, 2};
  c1.s = {0.0, 0.5};
  c1.step_time = {StepTimeDist::Fixed, 1.0, {}};
  s.classes.push_back(c1);
  TxnClassSpec c2;
  c2.id = "long";
  c2.frequency = 0.4;
  c2.k = {10, 0};
  c2.s = {0.25, 0.0};
  c2.step_time = {StepTimeDist::Exponential, 2.0, {}};
  s.classes.push_back(c2);
  return s;
}

WorkloadSpec uniform_spec(std::uint64_t D, std::uint64_t k, double s = 0.0) {
  WorkloadSpec w;
  w.dbrs.push_back({"db", D, false, 0, 0.5});
  TxnClassSpec c;
  c.id = "txn";
  c.frequency = 1.0;
  c.k = {k};
  c.s = {s};
  c.step_time = {StepTimeDist::Fixed, 1.0, {}};
  w.classes.push_back(c);
  return w;
}

}  // namespace

TEST_SUITE("workload") {

TEST_CASE("validation catches the named errors") {
  auto s = two_class_spec();
  CHECK(validate(s).empty());

  auto bad_freq = s;
  bad_freq.classes[0].frequency = 0.5;  // sums to 0.9
  const auto errors = validate(bad_freq);
  REQUIRE_FALSE(errors.empty());
  CHECK(errors[0].find("sum to 1") != std::string::npos);

  auto too_many = s;
  too_many.dbrs[1].D = 40;
  too_many.classes[0].k = {4, 50};
  bool found = false;
  for (const auto& e : validate(too_many))
    found = found || e.find("distinct objects") != std::string::npos;
  CHECK(found);

  auto bad_speedup = s;
  bad_speedup.classes[0].restart_speedup = 1.5;
  CHECK_FALSE(validate(bad_speedup).empty());

  auto full_hot = s;
  full_hot.dbrs[0].skewed = true;
  full_hot.dbrs[0].b = 0.5;
  full_hot.dbrs[0].c = 0.9999;  // ceil(c D) == D but b < 1
  CHECK_FALSE(validate(full_hot).empty());
}

TEST_CASE("sampling is reproducible and well-formed") {
  const auto s = two_class_spec();
  Rng r1 = Rng::stream(42, 2);
  Rng r2 = Rng::stream(42, 2);
  for (int i = 0; i < 200; ++i) {
    const auto p1 = sample_txn(s, r1);
    const auto p2 = sample_txn(s, r2);
    REQUIRE(p1.class_index == p2.class_index);
    REQUIRE(p1.steps.size() == p2.steps.size());
    for (std::size_t j = 0; j < p1.steps.size(); ++j) {
      CHECK(p1.steps[j].duration == p2.steps[j].duration);
      CHECK(p1.steps[j].object == p2.steps[j].object);
      CHECK(p1.steps[j].mode == p2.steps[j].mode);
    }
    // Shape: k lock steps, then one commit step; objects distinct per DBR.
    const auto& cls = s.classes[p1.class_index];
    CHECK(p1.lock_steps() == cls.total_locks());
    CHECK_FALSE(p1.steps.back().has_lock);
    std::set<std::pair<std::uint32_t, std::uint64_t>> seen;
    for (std::size_t j = 0; j + 1 < p1.steps.size(); ++j) {
      REQUIRE(p1.steps[j].has_lock);
      CHECK(seen.insert({p1.steps[j].dbr, p1.steps[j].object}).second);
    }
  }
}

TEST_CASE("mean locks per txn converges") {
  const auto s = two_class_spec();
  const double expected = mean_locks_per_txn(s);  // 0.6*6 + 0.4*10 = 7.6
  CHECK(expected == doctest::Approx(7.6));
  Rng rng = Rng::stream(7, 2);
  const int n = 20000;
  double total = 0;
  for (int i = 0; i < n; ++i) total += static_cast<double>(sample_txn(s, rng).lock_steps());
  const double mean = total / n;
  // Bernoulli mixture of 6 and 10: sd ~ 1.96, CI ~ 4 sd / sqrt(n).
  CHECK(std::abs(mean - expected) < 4.0 * 2.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("all-exclusive classes draw no shared locks") {
  auto s = uniform_spec(100, 5, 0.0);
  Rng rng = Rng::stream(3, 2);
  for (int i = 0; i < 100; ++i) {
    const auto p = sample_txn(s, rng);
    for (std::size_t j = 0; j + 1 < p.steps.size(); ++j)
      CHECK(p.steps[j].mode == LockMode::Exclusive);
  }
}

TEST_CASE("hot-set rule hits the hot set at rate b") {
  WorkloadSpec s = uniform_spec(1000, 1);
  s.dbrs[0].skewed = true;
  s.dbrs[0].b = 0.8;
  s.dbrs[0].c = 0.2;
  const std::uint64_t hot = s.dbrs[0].hot_set_size();
  CHECK(hot == 200);
  Rng rng = Rng::stream(99, 2);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const auto p = sample_txn(s, rng);
    if (p.steps[0].object < hot) ++hits;
  }
  CHECK(std::abs(static_cast<double>(hits) / n - 0.8) < 0.01);
}

TEST_CASE("b equal to c is uniform (chi-square)") {
  WorkloadSpec s = uniform_spec(100, 1);
  s.dbrs[0].skewed = true;
  s.dbrs[0].b = 0.2;
  s.dbrs[0].c = 0.2;  // hot set of 20, same per-object mass as the rest
  Rng rng = Rng::stream(5, 2);
  const int n = 100000;
  std::vector<int> counts(100, 0);
  for (int i = 0; i < n; ++i) ++counts[sample_txn(s, rng).steps[0].object];
  const double expected = n / 100.0;
  double chi2 = 0;
  for (const int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 99 dof: mean 99, sd ~14; 99 + 5 sd ~ 170.
  CHECK(chi2 < 170.0);
}

TEST_CASE("json round trip and strict schema") {
  const auto s = two_class_spec();
  const auto text = workload_to_json_text(s);
  const auto back = workload_from_json_text(text);
  CHECK(workload_to_json_text(back) == text);
  CHECK(back.classes.size() == 2);
  CHECK(back.dbrs[1].D == 500);

  CHECK_THROWS_AS(workload_from_json_text(R"({"classes": [], "dbrs": [], "oops": 1})"),
                  InputError);
  CHECK_THROWS_AS(workload_from_json_text(R"({"dbrs": [{"id": "x", "D": 10, "b": 0.5}],
    "classes": []})"),
                  InputError);  // b without c
  CHECK_THROWS_AS(workload_from_json_text("not json"), InputError);
}

TEST_CASE("hdam bridge carries rates and half-held locks") {
  const auto s = two_class_spec();
  const auto h = to_hdam(s, 0.01);
  CHECK(h.classes.size() == 2);
  CHECK(h.classes[0].lambda == doctest::Approx(0.006));
  CHECK(h.classes[1].lambda == doctest::Approx(0.004));
  CHECK(h.classes[0].kbar[0] == doctest::Approx(2.0));
  CHECK(h.classes[1].kbar[0] == doctest::Approx(5.0));
  CHECK_NOTHROW(h.validate());
}

}  // TEST_SUITE
