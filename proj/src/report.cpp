#include "clab/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace clab::report {

using nlohmann::ordered_json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

std::string csv_header() {
  return "seed,committed,throughput,response_mean,p_c,beta,l_bar,l_active,"
         "l_blocked,cr,rho,deadlocks,deadlocks_2way,aborts_deadlock,aborts_policy,"
         "aborts_load_control,aborts_occ_validation,aborts_occ_kill,aborts_permanent,"
         "restarts,max_blocking_level,mean_mpl,mean_population,alpha_alarm";
}

std::string csv_row(const engine::SimReport& r) {
  std::ostringstream os;
  os << r.seed << ',' << r.committed << ',' << num(r.throughput) << ','
     << num(r.response_mean) << ',' << num(r.p_c) << ',' << num(r.beta) << ','
     << num(r.l_bar) << ',' << num(r.l_active) << ',' << num(r.l_blocked) << ','
     << num(r.cr) << ',' << num(r.rho) << ',' << r.deadlocks << ',' << r.deadlocks_2way
     << ',' << r.aborts.deadlock << ',' << r.aborts.policy << ','
     << r.aborts.load_control << ',' << r.aborts.occ_validation << ','
     << r.aborts.occ_kill << ',' << r.aborts.permanent << ',' << r.restarts << ','
     << r.max_blocking_level << ',' << num(r.mean_mpl) << ','
     << num(r.mean_population) << ',' << (r.alpha_alarm ? 1 : 0);
  return os.str();
}

std::string report_to_json_text(const engine::SimReport& r) {
  ordered_json j;
  j["seed"] = r.seed;
  j["horizon"] = r.horizon;
  j["warmup"] = r.warmup;
  j["committed"] = r.committed;
  j["throughput"] = r.throughput;
  j["response_mean"] = r.response_mean;
  j["lock_requests"] = r.lock_requests;
  j["lock_conflicts"] = r.lock_conflicts;
  j["p_c"] = r.p_c;
  j["beta"] = r.beta;
  j["l_bar"] = r.l_bar;
  j["l_active"] = r.l_active;
  j["l_blocked"] = r.l_blocked;
  j["cr"] = r.cr;
  j["rho"] = r.rho;
  j["deadlocks"] = r.deadlocks;
  j["deadlocks_2way"] = r.deadlocks_2way;
  j["aborts"] = {{"deadlock", r.aborts.deadlock},
                 {"policy", r.aborts.policy},
                 {"load_control", r.aborts.load_control},
                 {"occ_validation", r.aborts.occ_validation},
                 {"occ_kill", r.aborts.occ_kill},
                 {"permanent", r.aborts.permanent}};
  j["restarts"] = r.restarts;
  j["max_blocking_level"] = r.max_blocking_level;
  j["mean_mpl"] = r.mean_mpl;
  j["mean_population"] = r.mean_population;
  j["alpha_alarm"] = r.alpha_alarm;
  if (r.load_control_bound >= 0) j["load_control_bound"] = r.load_control_bound;
  j["per_class"] = ordered_json::array();
  for (const auto& c : r.per_class)
    j["per_class"].push_back({{"id", c.id},
                              {"committed", c.committed},
                              {"response_mean", c.response_mean},
                              {"requests", c.requests},
                              {"conflicts", c.conflicts},
                              {"p_c", c.p_c}});
  j["per_dbr"] = ordered_json::array();
  for (const auto& d : r.per_dbr)
    j["per_dbr"].push_back({{"id", d.id},
                            {"requests", d.requests},
                            {"conflicts", d.conflicts},
                            {"p_c", d.p_c}});
  return j.dump(2);
}

double t_quantile_95(long n) {
  // Two-sided 95% quantiles of Student's t for n-1 dof.
  static constexpr double table[] = {
      12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
      2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
      2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  const long dof = n - 1;
  if (dof < 1) return 0;
  if (dof <= 30) return table[dof - 1];
  return 1.96;
}

MetricSummary summarize(const std::vector<double>& samples) {
  MetricSummary s;
  const long n = static_cast<long>(samples.size());
  if (n == 0) return s;
  double sum = 0;
  for (double v : samples) sum += v;
  s.mean = sum / static_cast<double>(n);
  if (n < 2) return s;
  double ss = 0;
  for (double v : samples) ss += (v - s.mean) * (v - s.mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  s.ci95 = t_quantile_95(n) * sd / std::sqrt(static_cast<double>(n));
  return s;
}

Aggregate aggregate(const std::vector<engine::SimReport>& reports) {
  Aggregate a;
  a.replications = static_cast<long>(reports.size());
  auto collect = [&](auto getter) {
    std::vector<double> v;
    v.reserve(reports.size());
    for (const auto& r : reports) v.push_back(getter(r));
    return summarize(v);
  };
  a.throughput = collect([](const auto& r) { return r.throughput; });
  a.response_mean = collect([](const auto& r) { return r.response_mean; });
  a.p_c = collect([](const auto& r) { return r.p_c; });
  a.beta = collect([](const auto& r) { return r.beta; });
  a.cr = collect([](const auto& r) { return r.cr; });
  a.rho = collect([](const auto& r) { return r.rho; });
  a.l_bar = collect([](const auto& r) { return r.l_bar; });
  a.mean_mpl = collect([](const auto& r) { return r.mean_mpl; });
  a.mean_population = collect([](const auto& r) { return r.mean_population; });
  a.committed = collect([](const auto& r) { return static_cast<double>(r.committed); });
  a.deadlocks = collect([](const auto& r) { return static_cast<double>(r.deadlocks); });
  a.deadlock_rate = collect([](const auto& r) {
    return r.committed > 0 ? static_cast<double>(r.deadlocks) / r.committed : 0.0;
  });
  if (!reports.empty()) {
    const std::size_t dbrs = reports.front().per_dbr.size();
    for (std::size_t j = 0; j < dbrs; ++j)
      a.per_dbr_p_c.push_back(
          collect([j](const auto& r) { return r.per_dbr[j].p_c; }));
  }
  for (const auto& r : reports) {
    a.total_committed += r.committed;
    a.total_deadlocks += r.deadlocks;
    a.max_blocking_level = std::max<long>(a.max_blocking_level, r.max_blocking_level);
    a.any_alpha_alarm = a.any_alpha_alarm || r.alpha_alarm;
  }
  return a;
}

std::string aggregate_to_json_text(const Aggregate& a) {
  ordered_json j;
  j["replications"] = a.replications;
  auto put = [&](const char* name, const MetricSummary& m) {
    j[name] = {{"mean", m.mean}, {"ci95", m.ci95}};
  };
  put("throughput", a.throughput);
  put("response_mean", a.response_mean);
  put("p_c", a.p_c);
  put("beta", a.beta);
  put("cr", a.cr);
  put("rho", a.rho);
  put("l_bar", a.l_bar);
  put("mean_mpl", a.mean_mpl);
  put("mean_population", a.mean_population);
  put("committed", a.committed);
  put("deadlocks", a.deadlocks);
  put("deadlock_rate", a.deadlock_rate);
  j["per_dbr_p_c"] = ordered_json::array();
  for (const auto& m : a.per_dbr_p_c)
    j["per_dbr_p_c"].push_back({{"mean", m.mean}, {"ci95", m.ci95}});
  j["total_committed"] = a.total_committed;
  j["total_deadlocks"] = a.total_deadlocks;
  j["max_blocking_level"] = a.max_blocking_level;
  j["alpha_alarm"] = a.any_alpha_alarm;
  return j.dump(2);
}

}  // namespace clab::report
