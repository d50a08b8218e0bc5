#pragma once

#include <string>

#include "pdsf/config.hpp"
#include "pdsf/report.hpp"

// Monte Carlo experiment drivers. Every experiment is a pure function of the
// resolved config: per-trial fields use seeds derived from (field.seed, trial
// index), and reductions run in trial order, so reruns are byte-identical at
// any worker count.

namespace pdsf {

// Dispatches on cfg["experiment"]; writes NDJSON dumps (when the experiment
// produces them) into out_dir. Throws std::invalid_argument for unknown
// experiments or invalid parameter combinations.
ExperimentReport run_experiment(const RunConfig& cfg, const std::string& out_dir);

ExperimentReport run_forest(const RunConfig& cfg, const std::string& out_dir);
ExperimentReport run_coalesce(const RunConfig& cfg);
ExperimentReport run_renewals(const RunConfig& cfg);
ExperimentReport run_increments(const RunConfig& cfg);
ExperimentReport run_donsker(const RunConfig& cfg);
ExperimentReport run_treeness(const RunConfig& cfg);
ExperimentReport run_foster(const RunConfig& cfg);
ExperimentReport run_coupling(const RunConfig& cfg);
ExperimentReport run_dual(const RunConfig& cfg, const std::string& out_dir);
ExperimentReport run_eta(const RunConfig& cfg);
ExperimentReport run_dump_paths(const RunConfig& cfg, const std::string& out_dir);

}  // namespace pdsf
