#include "clab/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace clab::commands {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

long thread_cap() {
  if (const char* env = std::getenv("CONTENTION_LAB_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<long>(hw) : 4;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

double relative_error(double predicted, double measured) {
  if (std::abs(predicted) < 1e-12 && std::abs(measured) < 1e-12) return 0;
  const double base = std::max(std::abs(predicted), 1e-12);
  return std::abs(measured - predicted) / base;
}

}  // namespace

Prediction predict(const scenario::Scenario& s) {
  using namespace analytic;
  const auto& w = s.workload;
  Prediction p;

  p.k1 = workload::mean_locks_per_txn(w);
  for (const auto& c : w.classes)
    p.mean_plan_time += c.frequency *
                        static_cast<double>(c.total_locks() + 1) *
                        c.step_time.mean_value();

  // Effective DBR sizes: hot-set skew shrinks, shared-mode mixing inflates.
  auto hdam = workload::to_hdam(w, s.mode == engine::Mode::Open ? s.lambda : 0.0);
  p.s_j = hdam_shared_fractions(hdam);
  std::vector<double> request_share(w.dbrs.size(), 0.0);
  for (std::size_t j = 0; j < w.dbrs.size(); ++j) {
    const auto& d = w.dbrs[j];
    double eff = static_cast<double>(d.D);
    if (d.skewed) eff *= skew_factor(d.b, d.c);
    eff *= share_factor(p.s_j[j]);
    p.d_eff.push_back(eff);
    hdam.dbr_sizes[j] = d.skewed ? d.D * skew_factor(d.b, d.c)
                                 : static_cast<double>(d.D);
    double share = 0;
    for (const auto& c : w.classes) share += c.frequency * static_cast<double>(c.k[j]);
    request_share[j] = p.k1 > 0 ? share / p.k1 : 0.0;
  }
  if (p.k1 > 0) {
    double inv = 0;
    for (std::size_t j = 0; j < w.dbrs.size(); ++j)
      inv += request_share[j] * request_share[j] / p.d_eff[j];
    p.d_eff_agg = inv > 0 ? 1.0 / inv : 0.0;
  }

  const double A = s.normalized_wait;

  if (s.qn) {
    Prediction::Qn qn;
    qn.ajb = asymptotic_job_bound(*s.qn);
    const long N = static_cast<long>(s.qn->demands.size());
    const double max_demand = *std::max_element(s.qn->demands.begin(), s.qn->demands.end());
    if (s.mode == engine::Mode::Open) {
      qn.lambda = s.lambda;
      qn.response0 = open_qn_response(*s.qn, s.lambda);
      qn.lambda2 = s.lambda * s.lambda_factor;
      qn.response2 = open_qn_response(*s.qn, qn.lambda2);
      qn.conflict_scale = (qn.lambda2 * qn.response2) / (qn.lambda * qn.response0);
      qn.max_utilization = s.lambda * max_demand;
      qn.mpl = min_mpl(N, qn.max_utilization);
    } else {
      const bool balanced =
          std::all_of(s.qn->demands.begin(), s.qn->demands.end(),
                      [&](double x) { return std::abs(x - max_demand) < 1e-12; });
      if (balanced) qn.closed_throughput = balanced_closed_throughput(s.mpl, N, max_demand);
      qn.max_utilization = balanced ? qn.closed_throughput * max_demand : 0.0;
    }
    p.qn = qn;
  }

  if (s.mode == engine::Mode::Closed) {
    p.mean_concurrency = static_cast<double>(s.mpl);
    if (p.k1 > 0 && p.d_eff_agg > 0)
      p.p_c = p.k1 * static_cast<double>(s.mpl - 1) / (2.0 * p.d_eff_agg);
    for (std::size_t j = 0; j < w.dbrs.size(); ++j) {
      double kbar_j = 0;
      for (const auto& c : w.classes)
        kbar_j += c.frequency * static_cast<double>(c.k[j]) / 2.0;
      p.p_c_dbr.push_back(static_cast<double>(s.mpl - 1) * kbar_j / p.d_eff[j]);
    }
    p.alpha = p.k1 * p.p_c * A;
    const double r = p.mean_plan_time;
    try {
      p.beta = solve_cubic_beta(p.alpha);
      p.response = r / (1.0 - p.beta);
      p.throughput = static_cast<double>(s.mpl) * (1.0 - p.beta) / r;
    } catch (const ThrashingError&) {
      p.thrashing = true;
      p.beta = kNaN;
      p.response = kNaN;
    }
  } else {
    // Open system: base response from the QN (or the nominal plan time under
    // the infinite-resource simplification), then the contended response from
    // the quadratic model, self-consistent with Little's result.
    // With a shared QN every class sees the same hardware response; under the
    // infinite-resource simplification each class's base response is its own
    // nominal plan time, and contention stretches all of them by R / r.
    const bool shared_qn = p.qn && p.qn->response0 > 0;
    const double r = shared_qn ? p.qn->response0 : p.mean_plan_time;
    std::vector<double> response_weight(w.classes.size(), 1.0);
    if (!shared_qn && p.mean_plan_time > 0)
      for (std::size_t i = 0; i < w.classes.size(); ++i)
        response_weight[i] = static_cast<double>(w.classes[i].total_locks() + 1) *
                             w.classes[i].step_time.mean_value() / p.mean_plan_time;
    double g = 0;  // conflict pressure per unit aggregate response time
    for (std::size_t j = 0; j < w.dbrs.size(); ++j) {
      double held_rate = 0;
      for (std::size_t i = 0; i < w.classes.size(); ++i)
        held_rate +=
            hdam.classes[i].kbar[j] * hdam.classes[i].lambda * response_weight[i];
      g += request_share[j] * held_rate / p.d_eff[j];
    }
    const double a = p.k1 * A * g;
    try {
      p.response = response_time_quadratic(r, a);
      p.alpha = a * p.response;
    } catch (const ThrashingError&) {
      p.thrashing = true;
      p.alpha = a > 0 ? 2.0 * a * r : 0.0;  // value at the fold of the quadratic
      p.response = kNaN;
    }
    if (!p.thrashing) {
      try {
        p.beta = solve_cubic_beta(p.alpha);
      } catch (const ThrashingError&) {
        p.thrashing = true;
        p.beta = kNaN;
      }
    } else {
      p.beta = kNaN;
    }
    const double R = std::isnan(p.response) ? r : p.response;
    p.mean_concurrency = s.lambda * R;
    if (p.k1 > 0) {
      std::vector<double> responses(w.classes.size(), R);
      for (std::size_t i = 0; i < w.classes.size(); ++i) responses[i] *= response_weight[i];
      p.p_c_dbr = hdam_conflict_probability(hdam, responses);
      p.p_c = 0;
      for (std::size_t j = 0; j < w.dbrs.size(); ++j)
        p.p_c += request_share[j] * p.p_c_dbr[j];
      if (p.thrashing) p.alpha = p.k1 * p.p_c * A;
    }
  }

  if (!p.thrashing && p.alpha > critical_point().alpha_star) p.thrashing = true;
  p.thrashing_margin = critical_point().alpha_star - p.alpha;
  if (!std::isnan(p.beta)) {
    p.rho = p.beta;
    p.cr = p.beta < 1.0 ? rho_to_conflict_ratio(std::min(p.beta, 0.999999)) : kNaN;
  } else {
    p.rho = kNaN;
    p.cr = kNaN;
  }
  if (p.d_eff_agg > 0) {
    SingleClassParams sc;
    sc.k = p.k1;
    sc.M = std::max<long>(1, std::lround(std::ceil(p.mean_concurrency)));
    sc.D = p.d_eff_agg;
    sc.step_time = 1;
    p.thrashing_index = thrashing_load_index(sc);
    const double m_others = s.mode == engine::Mode::Closed
                                ? static_cast<double>(s.mpl - 1)
                                : p.mean_concurrency;
    const double k4 = p.k1 * p.k1 * p.k1 * p.k1;
    p.deadlock_2way = m_others * k4 / (12.0 * p.d_eff_agg * p.d_eff_agg);
  }
  return p;
}

std::vector<engine::SimReport> run_replications(const scenario::Scenario& s) {
  const long n = s.replications;
  std::vector<engine::SimReport> reports(static_cast<std::size_t>(n));
  const long workers = std::min(thread_cap(), n);
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::atomic<long> next{0};
  auto work = [&] {
    for (;;) {
      const long i = next.fetch_add(1);
      if (i >= n) return;
      try {
        auto cfg = scenario::sim_config(s, s.seed + static_cast<std::uint64_t>(i));
        reports[static_cast<std::size_t>(i)] = engine::run_simulation(s.workload, cfg);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (long i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return reports;
}

namespace {

ordered_json prediction_to_json(const Prediction& p) {
  ordered_json j;
  j["k1"] = p.k1;
  j["mean_plan_time"] = p.mean_plan_time;
  j["mean_concurrency"] = p.mean_concurrency;
  j["d_eff"] = p.d_eff;
  j["d_eff_aggregate"] = p.d_eff_agg;
  j["s_j"] = p.s_j;
  j["p_c"] = p.p_c;
  j["p_c_dbr"] = p.p_c_dbr;
  j["alpha"] = p.alpha;
  j["alpha_star"] = analytic::critical_point().alpha_star;
  j["thrashing_margin"] = p.thrashing_margin;
  j["thrashing"] = p.thrashing;
  j["thrashing_index"] = p.thrashing_index;
  j["beta"] = std::isnan(p.beta) ? ordered_json() : ordered_json(p.beta);
  j["response"] = std::isnan(p.response) ? ordered_json() : ordered_json(p.response);
  j["throughput"] = p.throughput;
  j["rho"] = std::isnan(p.rho) ? ordered_json() : ordered_json(p.rho);
  j["cr"] = std::isnan(p.cr) ? ordered_json() : ordered_json(p.cr);
  j["deadlock_2way"] = p.deadlock_2way;
  if (p.qn) {
    ordered_json q;
    q["ajb"] = p.qn->ajb;
    if (p.qn->lambda > 0) {
      q["lambda"] = p.qn->lambda;
      q["response"] = p.qn->response0;
      q["lambda_extrapolated"] = p.qn->lambda2;
      q["response_extrapolated"] = p.qn->response2;
      q["conflict_scale"] = p.qn->conflict_scale;
      q["max_utilization"] = p.qn->max_utilization;
      q["min_mpl_bound"] = p.qn->mpl.bound;
      q["min_mpl"] = p.qn->mpl.min_admissible;
    }
    if (p.qn->closed_throughput > 0) q["closed_throughput"] = p.qn->closed_throughput;
    j["qn"] = q;
  }
  return j;
}

void print_prediction(const Prediction& p, std::ostream& out) {
  out << "analytic prediction\n";
  out << "  K1 (locks/txn)        " << p.k1 << "\n";
  out << "  nominal plan time     " << p.mean_plan_time << "\n";
  out << "  mean concurrency      " << p.mean_concurrency << "\n";
  out << "  D_eff aggregate       " << p.d_eff_agg << "\n";
  for (std::size_t j = 0; j < p.d_eff.size(); ++j)
    out << "  dbr[" << j << "]  s_j=" << p.s_j[j] << "  D_eff=" << p.d_eff[j]
        << "  p_c=" << (j < p.p_c_dbr.size() ? p.p_c_dbr[j] : 0.0) << "\n";
  out << "  p_c                   " << p.p_c << "\n";
  out << "  alpha                 " << p.alpha << "  (alpha* = "
      << analytic::critical_point().alpha_star << ")\n";
  out << "  thrashing margin      " << p.thrashing_margin << "\n";
  out << "  thrashing index       " << p.thrashing_index << "  (limit "
      << analytic::kThrashingLoadIndexLimit << ")\n";
  if (p.thrashing) {
    out << "  THRASHING: alpha exceeds alpha* = "
        << analytic::critical_point().alpha_star
        << "; no stable blocked-fraction solution\n";
  } else {
    out << "  beta                  " << p.beta << "\n";
    out << "  response              " << p.response << "\n";
    if (p.throughput > 0) out << "  throughput            " << p.throughput << "\n";
    out << "  rho (first order)     " << p.rho << "  CR " << p.cr << "\n";
  }
  out << "  P(2-way deadlock)     " << p.deadlock_2way << "\n";
  if (p.qn) {
    out << "queueing network\n";
    out << "  AJB                   " << p.qn->ajb << "\n";
    if (p.qn->lambda > 0) {
      out << "  R(lambda)             " << p.qn->response0 << "\n";
      out << "  R(lambda')            " << p.qn->response2 << "  at lambda' = "
          << p.qn->lambda2 << "\n";
      out << "  conflict scale        " << p.qn->conflict_scale << "\n";
      out << "  max utilization       " << p.qn->max_utilization << "\n";
      out << "  min MPL               " << p.qn->mpl.min_admissible << "  (bound "
          << p.qn->mpl.bound << ")\n";
    }
    if (p.qn->closed_throughput > 0)
      out << "  T(M)                  " << p.qn->closed_throughput << "\n";
  }
}

}  // namespace

int cmd_analyze(const scenario::Scenario& s, std::ostream& out,
                const std::optional<fs::path>& out_dir) {
  Prediction p;
  try {
    p = predict(s);
  } catch (const SaturationError& e) {
    out << "saturated: " << e.what() << "\n";
    return 2;
  }
  print_prediction(p, out);
  if (out_dir) {
    fs::create_directories(*out_dir);
    write_file(*out_dir / "analyze.json", prediction_to_json(p).dump(2) + "\n");
  }
  return p.thrashing ? 2 : 0;
}

int cmd_simulate(const scenario::Scenario& s, std::ostream& out,
                 const std::optional<fs::path>& out_dir) {
  const auto reports = run_replications(s);
  const auto agg = report::aggregate(reports);
  std::ostringstream csv;
  csv << report::csv_header() << "\n";
  for (const auto& r : reports) csv << report::csv_row(r) << "\n";
  if (out_dir) {
    fs::create_directories(*out_dir);
    write_file(*out_dir / "replications.csv", csv.str());
    write_file(*out_dir / "aggregate.json", report::aggregate_to_json_text(agg) + "\n");
  }
  out << "replications " << agg.replications << ", committed " << agg.total_committed
      << "\n";
  out << "  throughput  " << agg.throughput.mean << " +- " << agg.throughput.ci95 << "\n";
  out << "  response    " << agg.response_mean.mean << " +- " << agg.response_mean.ci95
      << "\n";
  out << "  p_c         " << agg.p_c.mean << " +- " << agg.p_c.ci95 << "\n";
  out << "  beta        " << agg.beta.mean << " +- " << agg.beta.ci95 << "\n";
  out << "  cr          " << agg.cr.mean << "  rho " << agg.rho.mean << "\n";
  out << "  deadlocks   " << agg.total_deadlocks << "\n";
  return 0;
}

namespace {

scenario::Scenario scenario_with_axis(const scenario::Scenario& base,
                                      const std::string& axis, const std::string& value) {
  scenario::Scenario s = base;
  auto as_double = [&] {
    try {
      return std::stod(value);
    } catch (...) {
      throw InputError("axis value '" + value + "' is not a number");
    }
  };
  if (axis == "lambda") {
    if (s.mode != engine::Mode::Open) throw InputError("lambda axis needs open mode");
    s.lambda = as_double();
  } else if (axis == "M") {
    if (s.mode != engine::Mode::Closed) throw InputError("M axis needs closed mode");
    s.mpl = static_cast<long>(as_double());
  } else if (axis == "k") {
    if (s.workload.dbrs.size() != 1)
      throw InputError("k axis supports single-DBR workloads");
    const auto k = static_cast<std::uint64_t>(as_double());
    for (auto& c : s.workload.classes) c.k[0] = k;
  } else if (axis == "D") {
    if (s.workload.dbrs.size() != 1)
      throw InputError("D axis supports single-DBR workloads");
    s.workload.dbrs[0].D = static_cast<std::uint64_t>(as_double());
  } else if (axis == "policy") {
    s.policy = ccpolicy::PolicyConfig::make(ccpolicy::policy_kind_from_name(value));
  } else {
    throw InputError("unknown sweep axis '" + axis + "'");
  }
  s.validate();
  return s;
}

}  // namespace

int cmd_sweep(const scenario::Scenario& s, const std::string& axis,
              const std::vector<std::string>& values, std::ostream& out,
              const std::optional<fs::path>& out_dir) {
  if (values.empty()) throw InputError("sweep needs at least one axis value");
  std::ostringstream csv;
  csv << "axis,value,replications,committed_mean,throughput_mean,throughput_ci95,"
         "response_mean,response_ci95,p_c_mean,p_c_ci95,beta_mean,beta_ci95,"
         "cr_mean,cr_ci95,rho_mean,rho_ci95,deadlock_rate_mean,mean_mpl_mean\n";
  for (const auto& value : values) {
    const auto sv = scenario_with_axis(s, axis, value);
    const auto agg = report::aggregate(run_replications(sv));
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%s,%s,%ld,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,"
                  "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                  axis.c_str(), value.c_str(), agg.replications, agg.committed.mean,
                  agg.throughput.mean, agg.throughput.ci95, agg.response_mean.mean,
                  agg.response_mean.ci95, agg.p_c.mean, agg.p_c.ci95, agg.beta.mean,
                  agg.beta.ci95, agg.cr.mean, agg.cr.ci95, agg.rho.mean, agg.rho.ci95,
                  agg.deadlock_rate.mean, agg.mean_mpl.mean);
    csv << buf;
  }
  out << csv.str();
  if (out_dir) {
    fs::create_directories(*out_dir);
    write_file(*out_dir / "sweep.csv", csv.str());
  }
  return 0;
}

int cmd_validate(const scenario::Scenario& s, std::ostream& out,
                 const std::optional<fs::path>& out_dir) {
  const Prediction p = predict(s);
  const auto reports = run_replications(s);
  const auto agg = report::aggregate(reports);

  struct Row {
    std::string quantity;
    double predicted;
    double measured;
    double ci;
    double rel_err;
    bool pass;
  };
  std::vector<Row> rows;
  auto add = [&](const std::string& q, double pred, const report::MetricSummary& m,
                 double tol, double abs_tol = 0.0, bool check_ci = false) {
    Row row;
    row.quantity = q;
    row.predicted = pred;
    row.measured = m.mean;
    row.ci = m.ci95;
    row.rel_err = relative_error(pred, m.mean);
    row.pass = row.rel_err <= tol || std::abs(m.mean - pred) <= abs_tol;
    if (check_ci && m.ci95 > 0 && std::abs(m.mean - pred) > m.ci95) row.pass = false;
    rows.push_back(row);
    return row.pass;
  };

  add("p_c", p.p_c, agg.p_c, kTolPc, 0.0, true);
  for (std::size_t j = 0; j < p.p_c_dbr.size(); ++j)
    add("p_c[" + s.workload.dbrs[j].id + "]", p.p_c_dbr[j], agg.per_dbr_p_c[j],
        kTolPcDbr);
  if (!std::isnan(p.beta)) add("beta", p.beta, agg.beta, kTolBeta, kTolBetaAbs);
  if (!std::isnan(p.response)) add("R", p.response, agg.response_mean, kTolResponse);
  if (!std::isnan(p.rho)) add("rho", p.rho, agg.rho, kTolRho, kTolRhoAbs);

  bool all_pass = true;
  out << std::left << std::setw(16) << "quantity" << std::right << std::setw(14)
      << "analytic" << std::setw(14) << "simulated" << std::setw(12) << "ci95"
      << std::setw(10) << "rel_err" << "  verdict\n";
  ordered_json jrows = ordered_json::array();
  for (const auto& r : rows) {
    all_pass = all_pass && r.pass;
    out << std::left << std::setw(16) << r.quantity << std::right << std::setw(14)
        << r.predicted << std::setw(14) << r.measured << std::setw(12) << r.ci
        << std::setw(10) << std::setprecision(3) << r.rel_err
        << std::setprecision(6) << (r.pass ? "  PASS" : "  FAIL") << "\n";
    jrows.push_back({{"quantity", r.quantity},
                     {"analytic", r.predicted},
                     {"simulated", r.measured},
                     {"ci95", r.ci},
                     {"rel_err", r.rel_err},
                     {"pass", r.pass}});
  }
  if (out_dir) {
    fs::create_directories(*out_dir);
    ordered_json doc;
    doc["rows"] = jrows;
    doc["pass"] = all_pass;
    write_file(*out_dir / "validate.json", doc.dump(2) + "\n");
  }
  return all_pass ? 0 : 3;
}

int cmd_solve(const std::string& what, std::optional<double> alpha,
              std::optional<double> a, std::optional<double> r, std::ostream& out) {
  out << std::setprecision(12);
  if (what == "cubic") {
    if (!alpha) throw InputError("solve cubic needs --alpha");
    out << analytic::solve_cubic_beta(*alpha) << "\n";
    return 0;
  }
  if (what == "quadratic") {
    if (!a || !r) throw InputError("solve quadratic needs --a and --r");
    out << analytic::response_time_quadratic(*r, *a) << "\n";
    return 0;
  }
  if (what == "critical") {
    const auto cp = analytic::critical_point();
    out << cp.alpha_star << " " << cp.beta_star << "\n";
    return 0;
  }
  throw InputError("solve expects cubic, quadratic, or critical");
}

}  // namespace clab::commands
