#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fmpc/experiment.hpp"

namespace {

// 0 = feasible, 1 = error, 2 = ran but infeasible.
constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kInfeasible = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"funnel model predictive control experiment runner"};
  app.require_subcommand(1);
  app.fallthrough();  // parent options may follow the subcommand

  std::string output_dir;
  app.add_option("--output-dir", output_dir,
                 "write outputs here (overrides FMPC_OUTPUT_DIR and the config)");

  std::string run_config;
  auto* run_cmd = app.add_subcommand("run", "run one experiment config");
  run_cmd->add_option("config", run_config, "config file")->required();

  std::vector<std::string> compare_configs;
  auto* compare_cmd =
      app.add_subcommand("compare", "run several configs sharing model/funnel/reference/horizon");
  compare_cmd->add_option("configs", compare_configs, "config files")
      ->required()
      ->expected(-2);

  std::string bound_config;
  auto* bound_cmd = app.add_subcommand("compute-bound", "evaluate the input-budget certificate");
  bound_cmd->add_option("config", bound_config, "config file")->required();

  auto* list_cmd = app.add_subcommand("list-models", "describe available models and blocks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      const fmpc::RunSummary summary =
          fmpc::run_experiment(fmpc::load_config_file(run_config), output_dir, &std::cout);
      return summary.feasible ? kOk : kInfeasible;
    }
    if (compare_cmd->parsed()) {
      std::vector<fmpc::ExperimentConfig> cfgs;
      cfgs.reserve(compare_configs.size());
      for (const auto& path : compare_configs) cfgs.push_back(fmpc::load_config_file(path));
      const auto summaries = fmpc::compare_experiments(cfgs, output_dir, &std::cout);
      for (const auto& s : summaries)
        if (!s.feasible) return kInfeasible;
      return kOk;
    }
    if (bound_cmd->parsed()) {
      fmpc::compute_bound_from_config(fmpc::load_config_file(bound_config), std::cout);
      return kOk;
    }
    if (list_cmd->parsed()) {
      std::cout << fmpc::list_models_text();
      return kOk;
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kError;
  }
  return kError;
}
