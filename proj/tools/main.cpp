#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clab/commands.hpp"
#include "clab/errors.hpp"
#include "clab/scenario.hpp"

namespace {

namespace fs = std::filesystem;

struct CommonOpts {
  std::string scenario_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<long> replications;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool need_scenario = true) {
  auto* s = cmd->add_option("--scenario", o.scenario_path, "scenario JSON file");
  if (need_scenario) s->required();
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--seed", [&o](const CLI::results_t& r) {
    o.seed = std::stoull(r[0]);
    return true;
  }, "override the scenario base seed");
  cmd->add_option("--replications", [&o](const CLI::results_t& r) {
    o.replications = std::stol(r[0]);
    return true;
  }, "override the scenario replication count");
}

clab::scenario::Scenario load(const CommonOpts& o) {
  auto s = clab::scenario::load_scenario_file(o.scenario_path);
  if (o.seed) s.seed = *o.seed;
  if (o.replications) s.replications = *o.replications;
  s.validate();
  return s;
}

std::optional<fs::path> out_dir(const CommonOpts& o) {
  if (o.out_dir.empty()) return std::nullopt;
  return fs::path(o.out_dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contention-lab: analytic lock-contention models and a "
               "deterministic transaction-processing simulator"};
  app.require_subcommand(1);

  CommonOpts analyze_opts, simulate_opts, sweep_opts, validate_opts;
  std::string sweep_axis;
  std::vector<std::string> sweep_values;
  std::string solve_what;
  std::optional<double> solve_alpha, solve_a, solve_r;

  auto* analyze = app.add_subcommand("analyze", "evaluate the closed-form models");
  add_common(analyze, analyze_opts);

  auto* simulate = app.add_subcommand("simulate", "run replicated simulations");
  add_common(simulate, simulate_opts);

  auto* sweep = app.add_subcommand("sweep", "sweep one axis, one CSV row per value");
  add_common(sweep, sweep_opts);
  sweep->add_option("--axis", sweep_axis, "lambda | M | k | D | policy")->required();
  sweep->add_option("--values", sweep_values, "comma-separated axis values")
      ->required()
      ->delimiter(',');

  auto* validate = app.add_subcommand("validate", "analytic-vs-simulated comparison");
  add_common(validate, validate_opts);

  auto* solve = app.add_subcommand("solve", "root solvers: cubic | quadratic | critical");
  solve->add_option("what", solve_what, "cubic | quadratic | critical")->required();
  solve->add_option("--alpha", [&](const CLI::results_t& r) {
    solve_alpha = std::stod(r[0]);
    return true;
  }, "contention intensity (cubic)");
  solve->add_option("--a", [&](const CLI::results_t& r) {
    solve_a = std::stod(r[0]);
    return true;
  }, "contention coefficient (quadratic)");
  solve->add_option("--r", [&](const CLI::results_t& r) {
    solve_r = std::stod(r[0]);
    return true;
  }, "base response time (quadratic)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed())
      return clab::commands::cmd_analyze(load(analyze_opts), std::cout,
                                         out_dir(analyze_opts));
    if (simulate->parsed())
      return clab::commands::cmd_simulate(load(simulate_opts), std::cout,
                                          out_dir(simulate_opts));
    if (sweep->parsed())
      return clab::commands::cmd_sweep(load(sweep_opts), sweep_axis, sweep_values,
                                       std::cout, out_dir(sweep_opts));
    if (validate->parsed())
      return clab::commands::cmd_validate(load(validate_opts), std::cout,
                                          out_dir(validate_opts));
    if (solve->parsed())
      return clab::commands::cmd_solve(solve_what, solve_alpha, solve_a, solve_r,
                                       std::cout);
  } catch (const clab::ThrashingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const clab::ModelRangeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const clab::SaturationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const clab::ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
