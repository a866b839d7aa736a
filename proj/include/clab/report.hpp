#pragma once

#include <string>
#include <vector>

#include "clab/engine.hpp"

// SimReport serialization (JSON, one CSV row) and replication aggregation
// with t-distribution confidence intervals.
namespace clab::report {

/// Stable CSV column set; header first, documented in the README.
std::string csv_header();
std::string csv_row(const engine::SimReport& r);

std::string report_to_json_text(const engine::SimReport& r);

struct MetricSummary {
  double mean = 0;
  double ci95 = 0;  // half-width; 0 with a single replication
};

/// Two-sided 95% t quantile for n samples (n - 1 dof).
double t_quantile_95(long n);

MetricSummary summarize(const std::vector<double>& samples);

struct Aggregate {
  long replications = 0;
  MetricSummary throughput;
  MetricSummary response_mean;
  MetricSummary p_c;
  MetricSummary beta;
  MetricSummary cr;
  MetricSummary rho;
  MetricSummary l_bar;
  MetricSummary mean_mpl;
  MetricSummary mean_population;
  MetricSummary committed;
  MetricSummary deadlocks;
  MetricSummary deadlock_rate;  // deadlocks per commit
  std::vector<MetricSummary> per_dbr_p_c;
  long total_committed = 0;
  long total_deadlocks = 0;
  long max_blocking_level = 0;
  bool any_alpha_alarm = false;
};

Aggregate aggregate(const std::vector<engine::SimReport>& reports);

std::string aggregate_to_json_text(const Aggregate& a);

}  // namespace clab::report
