#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "fmpc/funnel.hpp"
#include "fmpc/stage_cost.hpp"
#include "fmpc/systems.hpp"
#include "fmpc/time_grid.hpp"

namespace fmpc {

enum class CostKind { funnel, quadratic_constrained };

struct SolverConfig {
  int max_iterations = 200;
  double gradient_tol = 1e-6;
  double step_tol = 1e-12;
  double fd_step_scale = 1e-6;   // forward-difference step 1e-6*(1+|u|)
  double armijo_sigma = 1e-4;
  double backtrack_factor = 0.5;
  double alpha_min = 1e-18;
  double alpha_max = 1e6;
  int max_restore_iterations = 100;
};

// Finite-horizon optimal control problem over piecewise-constant inputs
// on control_grid, each interval value constrained to the Euclidean ball
// of radius bound_m.
struct OcpProblem {
  DynamicalSystem sys;
  FunnelSpec funnel;
  ReferenceSignal yref;
  Eigen::VectorXd x_hat;   // state measured at control_grid.t_start
  TimeGrid control_grid;
  double bound_m = 0.0;
  CostKind cost_kind = CostKind::funnel;
  CostConfig cost;
  IntegratorConfig integrator;
  SolverConfig solver;

  CostValue cost_of(const ControlTrajectory& u) const;
};

struct OcpSolution {
  ControlTrajectory u_star;
  CostValue cost;          // recomputed through cost_of at return
  CostValue initial_cost;  // cost of the supplied warm start
  int iterations = 0;
  bool converged = false;
  std::string termination;  // gradient_tolerance | step_tolerance |
                            // max_iterations | line_search_stalled |
                            // restoration_failed
  int cost_evaluations = 0;
  std::string diagnostics;
};

// Projected gradient descent with Armijo backtracking along the
// projection arc. Gradients come from forward differences (backward near
// the barrier); a trial with infinite cost is treated as a failed
// backtracking step. Descent is monotone, so cost <= initial_cost always
// holds. An infeasible warm start goes through feasibility restoration
// first; if that fails the solution reports converged = false and keeps
// the best iterate seen.
OcpSolution solve(const OcpProblem& problem,
                  std::optional<ControlTrajectory> warm_start = std::nullopt);

// Minimizes a softened barrier (guard clamped, escapes penalized by
// remaining horizon) until the true cost turns finite. When descent from
// u_init stalls while still infeasible, restarts once from the funnel
// feedback seed. Best effort: the result may still be infeasible.
ControlTrajectory feasibility_restore(const OcpProblem& problem, ControlTrajectory u_init,
                                      int* cost_evaluations = nullptr);

// Simulates the funnel feedback matching the plant's relative degree
// from x_hat and samples its input at the control nodes: zeros from the
// first non-finite sample on, clamped to the input bound. Seeds the
// first receding-horizon solve and restarts stalled restoration. Throws
// when no funnel feedback fits the plant.
ControlTrajectory funnel_feedback_seed(const OcpProblem& problem);

enum class WarmStartFill { hold_last, zero };

// Receding-horizon shift: drops delta worth of leading intervals, moves
// the grid window by delta and pads the tail per fill. delta must be an
// integer multiple of the control step.
ControlTrajectory shift_warm_start(const ControlTrajectory& prev, double delta,
                                   WarmStartFill fill);

}  // namespace fmpc
