#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "fmpc/config.hpp"
#include "fmpc/feasibility.hpp"
#include "fmpc/funnel.hpp"
#include "fmpc/systems.hpp"

namespace fmpc {

struct RunSummary {
  std::string label;
  bool feasible = false;      // run completed with the error strictly inside the funnel
  bool halted_early = false;
  double min_margin = 0.0;
  double max_input_norm = 0.0;
  double final_error_norm = 0.0;
  double input_energy = 0.0;  // integral of |u|^2 over the run
  double wall_time_seconds = 0.0;
  std::string config_hash;
  std::string output_dir;
  std::string note;
};

// Builders shared by the command line tool and the tests.
DynamicalSystem make_system(const ExperimentConfig& cfg);
FunnelSpec make_funnel(const ExperimentConfig& cfg);
ReferenceSignal make_reference(const ExperimentConfig& cfg);

// Runs the configured controller, writing trace.csv, steps.csv (MPC
// schemes), summary.txt, error_funnel.svg and input.svg into the output
// directory. Precedence for the directory: explicit override argument,
// then the FMPC_OUTPUT_DIR environment variable, then the config value.
RunSummary run_experiment(const ExperimentConfig& cfg, const std::string& output_dir_override = "",
                          std::ostream* log = nullptr);

// Runs each config (all must share model, funnel, reference and horizon
// blocks), writes per-run outputs plus overlay plots and a metrics
// table under output_dir.
std::vector<RunSummary> compare_experiments(const std::vector<ExperimentConfig>& cfgs,
                                            const std::string& output_dir_override = "",
                                            std::ostream* log = nullptr);

// Evaluates the input-budget certificate selected by the config's
// [bound] mode, printing an aligned report plus a machine-readable CSV
// row to out.
FeasibilityBound compute_bound_from_config(const ExperimentConfig& cfg, std::ostream& out);

std::string list_models_text();

}  // namespace fmpc
