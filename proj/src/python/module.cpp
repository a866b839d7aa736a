#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "clab/analytic.hpp"
#include "clab/commands.hpp"
#include "clab/engine.hpp"
#include "clab/report.hpp"
#include "clab/scenario.hpp"

namespace py = pybind11;
using namespace clab;

namespace {

// Scenario-level entry points operate on JSON text so the python side stays
// schema-identical with the CLI.
std::string run_scenario_json(const std::string& scenario_text) {
  const auto s = scenario::scenario_from_json_text(scenario_text);
  const auto reports = commands::run_replications(s);
  return report::aggregate_to_json_text(report::aggregate(reports));
}

std::string simulate_one_json(const std::string& scenario_text, std::uint64_t seed) {
  const auto s = scenario::scenario_from_json_text(scenario_text);
  const auto r = engine::run_simulation(s.workload, scenario::sim_config(s, seed));
  return report::report_to_json_text(r);
}

std::string analyze_scenario_json(const std::string& scenario_text) {
  const auto s = scenario::scenario_from_json_text(scenario_text);
  std::ostringstream sink;
  commands::cmd_analyze(s, sink, std::nullopt);
  return sink.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Lock-contention models and a deterministic transaction simulator";

  py::register_exception<ModelRangeError>(m, "ModelRangeError");
  py::register_exception<DomainError>(m, "DomainError");
  py::register_exception<SaturationError>(m, "SaturationError");
  py::register_exception<ThrashingError>(m, "ThrashingError");
  py::register_exception<NoConvergenceError>(m, "NoConvergenceError");
  py::register_exception<InputError>(m, "InputError");

  m.def(
      "conflict_probability",
      [](double k, long M, double D) {
        const auto p = analytic::conflict_probability({k, M, D, 1.0});
        return py::make_tuple(p.value, p.strained);
      },
      py::arg("k"), py::arg("M"), py::arg("D"),
      "P(lock conflict per request) = k (M-1) / (2 D); returns (value, strained)");

  m.def(
      "deadlock_probability_2way",
      [](double k, long M, double D, const std::string& variant) {
        return analytic::deadlock_probability_2way(
            {k, M, D, 1.0}, variant == "original"
                                ? analytic::DeadlockVariant::Original
                                : analytic::DeadlockVariant::Modified);
      },
      py::arg("k"), py::arg("M"), py::arg("D"), py::arg("variant") = "modified");

  m.def(
      "effective_db_size",
      [](double D, double b, double c, double s) {
        return analytic::effective_db_size(D, {b, c, s});
      },
      py::arg("D"), py::arg("b"), py::arg("c"), py::arg("s") = 0.0);
  m.def("skew_factor", &analytic::skew_factor, py::arg("b"), py::arg("c"));
  m.def("share_factor", &analytic::share_factor, py::arg("s"));

  m.def("extrapolate_conflict", &analytic::extrapolate_conflict, py::arg("p_c"),
        py::arg("lambda_"), py::arg("R"), py::arg("lambda2"), py::arg("R2"));

  m.def(
      "open_qn_response",
      [](const std::vector<double>& demands, double lambda) {
        return analytic::open_qn_response({demands, {}}, lambda);
      },
      py::arg("demands"), py::arg("lambda_"));
  m.def("balanced_closed_throughput", &analytic::balanced_closed_throughput,
        py::arg("M"), py::arg("N"), py::arg("X"));
  m.def(
      "asymptotic_job_bound",
      [](const std::vector<double>& demands) {
        return analytic::asymptotic_job_bound({demands, {}});
      },
      py::arg("demands"));
  m.def(
      "min_mpl",
      [](long N, double rho) {
        const auto b = analytic::min_mpl(N, rho);
        return py::make_tuple(b.bound, b.min_admissible);
      },
      py::arg("N"), py::arg("rho"), "returns (bound, smallest admissible integer)");

  m.def("response_time_quadratic", &analytic::response_time_quadratic, py::arg("r"),
        py::arg("a"));
  m.def("solve_cubic_beta", &analytic::solve_cubic_beta, py::arg("alpha"));
  m.def("critical_point", [] {
    const auto cp = analytic::critical_point();
    return py::make_tuple(cp.alpha_star, cp.beta_star);
  });
  m.def("unequal_step_beta", &analytic::unequal_step_beta, py::arg("alpha"),
        py::arg("rho"));
  m.def("conflict_ratio_to_rho", &analytic::conflict_ratio_to_rho, py::arg("cr"));
  m.def("rho_to_conflict_ratio", &analytic::rho_to_conflict_ratio, py::arg("rho"));
  m.def(
      "thrashing_load_index",
      [](double k, long M, double D) {
        return analytic::thrashing_load_index({k, M, D, 1.0});
      },
      py::arg("k"), py::arg("M"), py::arg("D"));

  m.attr("PEAK_THROUGHPUT_BETA") = analytic::kPeakThroughputBeta;
  m.attr("THRASHING_LOAD_INDEX_LIMIT") = analytic::kThrashingLoadIndexLimit;
  m.attr("CONFLICT_RATIO_LIMIT") = analytic::kConflictRatioLimit;

  m.def("run_scenario", &run_scenario_json, py::arg("scenario_json"),
        "Run all replications of a scenario document; returns the aggregate "
        "report as JSON text");
  m.def("simulate_one", &simulate_one_json, py::arg("scenario_json"), py::arg("seed"),
        "Run a single replication; returns the SimReport as JSON text");
  m.def("analyze_scenario", &analyze_scenario_json, py::arg("scenario_json"),
        "Evaluate the closed-form models for a scenario; returns the text table");
}
