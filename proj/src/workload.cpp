#include "clab/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "json_util.hpp"

namespace clab::workload {

using clab::detail::check_known_fields;
using nlohmann::json;

double StepTimeSpec::mean_value() const {
  if (dist == StepTimeDist::Empirical) {
    if (values.empty()) return 0;
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
  }
  return mean;
}

double StepTimeSpec::draw(Rng& rng) const {
  switch (dist) {
    case StepTimeDist::Fixed:
      return mean;
    case StepTimeDist::Exponential:
      return rng.exponential(mean);
    case StepTimeDist::Empirical:
      return values[rng.bounded(values.size())];
  }
  return mean;
}

std::uint64_t DbrSpec::hot_set_size() const {
  return static_cast<std::uint64_t>(
      std::ceil(c * static_cast<double>(D)));
}

std::uint64_t TxnClassSpec::total_locks() const {
  return std::accumulate(k.begin(), k.end(), std::uint64_t{0});
}

double TxnPlan::nominal_duration() const {
  double total = 0;
  for (const auto& s : steps) total += s.duration;
  return total;
}

std::vector<std::string> validate(const WorkloadSpec& spec) {
  std::vector<std::string> errors;
  auto err = [&errors](const std::string& m) { errors.push_back(m); };

  if (spec.classes.empty()) err("workload has no transaction classes");
  if (spec.dbrs.empty()) err("workload has no DBRs");

  for (std::size_t j = 0; j < spec.dbrs.size(); ++j) {
    const auto& d = spec.dbrs[j];
    const std::string where = "dbr '" + d.id + "'";
    if (d.D < 1) err(where + ": D must be >= 1");
    if (d.skewed) {
      if (d.b < 0 || d.b > 1) err(where + ": b must be in [0, 1]");
      if (!(d.c > 0) || !(d.c < 1)) err(where + ": c must be in (0, 1)");
      if (d.b > 0 && d.hot_set_size() < 1) err(where + ": empty hot set with b > 0");
      if (d.b < 1 && d.hot_set_size() >= d.D)
        err(where + ": hot set covers the whole region but b < 1");
    }
  }

  double fsum = 0;
  for (const auto& c : spec.classes) {
    const std::string where = "class '" + c.id + "'";
    fsum += c.frequency;
    if (c.frequency < 0 || c.frequency > 1) err(where + ": frequency must be in [0, 1]");
    if (c.k.size() != spec.dbrs.size())
      err(where + ": k must list one lock count per DBR");
    if (c.s.size() != spec.dbrs.size())
      err(where + ": s must list one shared fraction per DBR");
    for (std::size_t j = 0; j < std::min(c.k.size(), spec.dbrs.size()); ++j) {
      if (c.k[j] > spec.dbrs[j].D)
        err(where + ": cannot request " + std::to_string(c.k[j]) +
            " distinct objects from dbr '" + spec.dbrs[j].id + "' of size " +
            std::to_string(spec.dbrs[j].D));
    }
    for (double s : c.s)
      if (s < 0 || s > 1) err(where + ": shared fractions must be in [0, 1]");
    if (!(c.restart_speedup > 0) || c.restart_speedup > 1)
      err(where + ": restart_speedup must be in (0, 1]");
    if (c.step_time.dist == StepTimeDist::Empirical) {
      if (c.step_time.values.empty())
        err(where + ": empirical step times need at least one value");
      for (double v : c.step_time.values)
        if (!(v > 0)) err(where + ": step times must be > 0");
    } else if (!(c.step_time.mean > 0)) {
      err(where + ": step time mean must be > 0");
    }
  }
  if (!spec.classes.empty() && std::abs(fsum - 1.0) > 1e-9)
    err("class frequencies must sum to 1 (got " + std::to_string(fsum) + ")");
  return errors;
}

void validate_or_throw(const WorkloadSpec& spec) {
  auto errors = validate(spec);
  if (!errors.empty()) {
    std::ostringstream os;
    os << "invalid workload:";
    for (const auto& e : errors) os << "\n  - " << e;
    throw InputError(os.str());
  }
}

namespace {

std::uint64_t draw_object(const DbrSpec& d, Rng& rng) {
  if (!d.skewed) return rng.bounded(d.D);
  const std::uint64_t hot = d.hot_set_size();
  if (rng.bernoulli(d.b)) return rng.bounded(hot);
  return hot + rng.bounded(d.D - hot);
}

}  // namespace

TxnPlan sample_txn(const WorkloadSpec& spec, Rng& rng) {
  // Class by frequency.
  std::uint32_t ci = 0;
  {
    double u = rng.u01();
    double acc = 0;
    for (std::size_t i = 0; i < spec.classes.size(); ++i) {
      acc += spec.classes[i].frequency;
      if (u < acc || i + 1 == spec.classes.size()) {
        ci = static_cast<std::uint32_t>(i);
        break;
      }
    }
  }
  const auto& cls = spec.classes[ci];
  const std::uint64_t total = cls.total_locks();

  TxnPlan plan;
  plan.class_index = ci;
  plan.steps.reserve(total + 1);

  std::vector<std::set<std::uint64_t>> held(spec.dbrs.size());
  for (std::uint64_t n = 0; n < total; ++n) {
    // DBR proportional to k_ij, skipping regions already fully held.
    std::uint32_t dj = 0;
    for (;;) {
      double wsum = 0;
      for (std::size_t j = 0; j < spec.dbrs.size(); ++j)
        if (held[j].size() < spec.dbrs[j].D) wsum += static_cast<double>(cls.k[j]);
      const double u = rng.u01() * wsum;
      double acc = 0;
      for (std::size_t j = 0; j < spec.dbrs.size(); ++j) {
        if (held[j].size() >= spec.dbrs[j].D) continue;
        acc += static_cast<double>(cls.k[j]);
        if (u < acc) {
          dj = static_cast<std::uint32_t>(j);
          break;
        }
      }
      if (held[dj].size() < spec.dbrs[dj].D && cls.k[dj] > 0) break;
    }
    // Distinct object within the plan: rejection on duplicates.
    std::uint64_t obj;
    do {
      obj = draw_object(spec.dbrs[dj], rng);
    } while (held[dj].count(obj) != 0);
    held[dj].insert(obj);

    PlanStep step;
    step.duration = cls.step_time.draw(rng);
    step.has_lock = true;
    step.dbr = dj;
    step.object = obj;
    step.mode = rng.bernoulli(cls.s[dj]) ? LockMode::Shared : LockMode::Exclusive;
    plan.steps.push_back(step);
  }

  PlanStep commit;
  commit.duration = cls.step_time.draw(rng);
  plan.steps.push_back(commit);
  return plan;
}

double mean_locks_per_txn(const WorkloadSpec& spec) {
  double m = 0;
  for (const auto& c : spec.classes)
    m += c.frequency * static_cast<double>(c.total_locks());
  return m;
}

analytic::HdamParams to_hdam(const WorkloadSpec& spec, double total_lambda) {
  analytic::HdamParams h;
  h.dbr_sizes.reserve(spec.dbrs.size());
  for (const auto& d : spec.dbrs) h.dbr_sizes.push_back(static_cast<double>(d.D));
  for (const auto& c : spec.classes) {
    analytic::HdamClass hc;
    hc.frequency = c.frequency;
    hc.lambda = total_lambda * c.frequency;
    for (std::size_t j = 0; j < spec.dbrs.size(); ++j) {
      hc.k.push_back(static_cast<double>(c.k[j]));
      hc.kbar.push_back(static_cast<double>(c.k[j]) / 2.0);
      hc.s.push_back(c.s[j]);
    }
    h.classes.push_back(std::move(hc));
  }
  return h;
}

namespace {

StepTimeSpec step_time_from_json(const json& j) {
  check_known_fields(j, {"dist", "mean", "values"}, "step_time");
  StepTimeSpec st;
  const std::string dist = j.at("dist").get<std::string>();
  if (dist == "fixed")
    st.dist = StepTimeDist::Fixed;
  else if (dist == "exponential")
    st.dist = StepTimeDist::Exponential;
  else if (dist == "empirical")
    st.dist = StepTimeDist::Empirical;
  else
    throw InputError("unknown step_time dist '" + dist + "'");
  if (st.dist == StepTimeDist::Empirical) {
    st.values = j.at("values").get<std::vector<double>>();
    if (j.contains("mean")) throw InputError("empirical step_time takes values, not mean");
  } else {
    st.mean = j.at("mean").get<double>();
    if (j.contains("values")) throw InputError("non-empirical step_time takes mean, not values");
  }
  return st;
}

json step_time_to_json(const StepTimeSpec& st) {
  json j;
  switch (st.dist) {
    case StepTimeDist::Fixed:
      j["dist"] = "fixed";
      j["mean"] = st.mean;
      break;
    case StepTimeDist::Exponential:
      j["dist"] = "exponential";
      j["mean"] = st.mean;
      break;
    case StepTimeDist::Empirical:
      j["dist"] = "empirical";
      j["values"] = st.values;
      break;
  }
  return j;
}

}  // namespace

WorkloadSpec workload_from_json(const json& root) {
  check_known_fields(root, {"classes", "dbrs"}, "workload");
  WorkloadSpec spec;
  for (const auto& dj : root.at("dbrs")) {
    check_known_fields(dj, {"id", "D", "b", "c"}, "dbr");
    DbrSpec d;
    d.id = dj.at("id").get<std::string>();
    d.D = dj.at("D").get<std::uint64_t>();
    if (dj.contains("b") != dj.contains("c"))
      throw InputError("dbr '" + d.id + "': b and c must be given together");
    if (dj.contains("b")) {
      d.skewed = true;
      d.b = dj.at("b").get<double>();
      d.c = dj.at("c").get<double>();
    }
    spec.dbrs.push_back(std::move(d));
  }
  for (const auto& cj : root.at("classes")) {
    check_known_fields(cj, {"id", "frequency", "k", "s", "step_time", "restart_speedup"},
                       "class");
    TxnClassSpec c;
    c.id = cj.at("id").get<std::string>();
    c.frequency = cj.value("frequency", 1.0);
    c.k = cj.at("k").get<std::vector<std::uint64_t>>();
    if (cj.contains("s"))
      c.s = cj.at("s").get<std::vector<double>>();
    else
      c.s.assign(c.k.size(), 0.0);
    if (cj.contains("step_time")) c.step_time = step_time_from_json(cj.at("step_time"));
    c.restart_speedup = cj.value("restart_speedup", 1.0);
    spec.classes.push_back(std::move(c));
  }
  return spec;
}

WorkloadSpec workload_from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("workload JSON parse error: ") + e.what());
  }
  try {
    return workload_from_json(root);
  } catch (const json::exception& e) {
    throw InputError(std::string("workload JSON: ") + e.what());
  }
}

std::string workload_to_json_text(const WorkloadSpec& spec) {
  json root;
  root["dbrs"] = json::array();
  for (const auto& d : spec.dbrs) {
    json dj;
    dj["id"] = d.id;
    dj["D"] = d.D;
    if (d.skewed) {
      dj["b"] = d.b;
      dj["c"] = d.c;
    }
    root["dbrs"].push_back(dj);
  }
  root["classes"] = json::array();
  for (const auto& c : spec.classes) {
    json cj;
    cj["id"] = c.id;
    cj["frequency"] = c.frequency;
    cj["k"] = c.k;
    cj["s"] = c.s;
    cj["step_time"] = step_time_to_json(c.step_time);
    cj["restart_speedup"] = c.restart_speedup;
    root["classes"].push_back(cj);
  }
  return root.dump(2);
}

}  // namespace clab::workload
