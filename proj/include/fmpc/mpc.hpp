#pragma once

#include <Eigen/Dense>
#include <ostream>
#include <string>
#include <vector>

#include "fmpc/ocp.hpp"
#include "fmpc/trace.hpp"

namespace fmpc {

enum class Scheme { fmpc, classical };

struct MpcConfig {
  double delta = 0.0;        // time shift between solves
  double horizon_T = 0.0;    // prediction horizon, >= delta
  double sim_end = 0.0;      // absolute end of the closed-loop run
  double control_step = 0.0; // width of one piecewise-constant interval
  double bound_m = 0.0;
  Scheme scheme = Scheme::fmpc;
  CostConfig cost;
  IntegratorConfig integrator;
  SolverConfig solver;
};

struct MpcStep {
  int index = 0;
  double t_hat = 0.0;
  OcpSolution solution;
  double applied_min_margin = 0.0;  // over the applied segment's nodes
};

struct MpcRunReport {
  SimulationTrace trace;  // concatenation of all applied segments
  std::vector<MpcStep> per_step;
  bool feasible_throughout = false;  // every per-step cost finite
  bool halted_early = false;
  std::string halt_reason;
  double min_funnel_margin = 0.0;
  double max_input_norm = 0.0;
  double t0 = 0.0;
  double delta = 0.0;
  double control_step = 0.0;
};

// Receding-horizon loop: measure, solve on [t_hat, t_hat + T], apply the
// first delta of the minimizer, shift. Warm starts are the shifted
// previous solution; the very first funnel-scheme solve is seeded by
// simulating the matching funnel feedback and sampling it on the control
// grid. The initial state must lie strictly inside the funnel at t0.
// Under the funnel scheme an infinite per-step cost halts the loop and
// clears feasible_throughout; the classical scheme keeps running and
// violations show up as negative margins.
MpcRunReport run(const DynamicalSystem& sys, const FunnelSpec& funnel,
                 const ReferenceSignal& yref, const Eigen::VectorXd& x0, double t0,
                 const MpcConfig& cfg);

// Applied input as a function of time: constant on each control interval
// of each applied segment, taking the newly applied value at segment
// boundaries (t0 + k*delta maps to segment k). Clamps to the final value
// at the trace end; throws outside the simulated span.
Eigen::VectorXd applied_feedback_value(const MpcRunReport& report, double t);

// Columns: step, t_hat, ocp_cost, ocp_iterations, converged, max_u_norm,
// min_margin. An infinite cost is written as the literal inf.
void write_step_csv(const MpcRunReport& report, std::ostream& out);
void write_step_csv_file(const MpcRunReport& report, const std::string& path);

}  // namespace fmpc
