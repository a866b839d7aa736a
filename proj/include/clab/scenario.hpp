#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "clab/analytic.hpp"
#include "clab/engine.hpp"

// Scenario files: one JSON document naming the workload, the operating mode,
// the conflict policy, the admission controller, and the run lengths.
namespace clab::scenario {

struct Scenario {
  workload::WorkloadSpec workload;
  engine::Mode mode = engine::Mode::Closed;
  double lambda = 0;  // open mode
  long mpl = 1;       // closed mode
  ccpolicy::PolicyConfig policy;
  loadctl::LoadControlConfig load_control;
  engine::MultiphaseConfig multiphase;
  double horizon = 0;
  double warmup = 0;
  long replications = 1;
  std::uint64_t seed = 1;
  std::optional<analytic::QnSystem> qn;
  // Analysis knobs.
  double lambda_factor = 2.0;                          // rate multiplier for extrapolation
  double normalized_wait = analytic::kDefaultNormalizedWait;  // A = W1/R

  void validate() const;
};

/// Parse a scenario document. `base_dir` resolves a relative workload_file.
Scenario scenario_from_json_text(const std::string& text,
                                 const std::filesystem::path& base_dir = ".");

Scenario load_scenario_file(const std::filesystem::path& path);

std::string scenario_to_json_text(const Scenario& s);

/// Engine configuration for one replication of this scenario.
engine::SimConfig sim_config(const Scenario& s, std::uint64_t seed);

}  // namespace clab::scenario
