#include "fmpc/ocp.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "fmpc/funnel_controller.hpp"
#include "fmpc/ode.hpp"

namespace fmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-interval Euclidean-ball projection.
void project_onto_bound(ControlTrajectory& u) { u.clamp_to_bound(); }

ControlTrajectory with_stacked(const ControlTrajectory& proto, const Eigen::VectorXd& flat) {
  ControlTrajectory out = proto;
  out.assign_stacked(flat);
  return out;
}

// FD probes may sit slightly outside the input ball; lift the bound for
// the probe copy so validation does not reject them.
ControlTrajectory unbounded_copy(const ControlTrajectory& u) {
  ControlTrajectory out = u;
  out.bound_m = kInf;
  return out;
}

// Softened objective used by feasibility restoration. Clamping the
// barrier gap at the guard alone would make violated nodes a flat
// plateau, so a quadratic hinge on the violation depth keeps the
// gradient pointing back into the funnel; an escape is scored by how
// much horizon is lost, so descent first pushes the escape time out.
double relaxed_cost(const OcpProblem& p, const ControlTrajectory& u) {
  constexpr double kViolationPressure = 1e6;
  const IntegrationResult result = integrate_open_loop(p.sys, p.x_hat, u, p.integrator);
  if (!result.ok())
    return 1e12 * (1.0 + (p.control_grid.t_end - result.escape->time));
  const SimulationTrace& trace = result.trace;
  double acc = 0.0;
  const double h = p.control_grid.step() / p.integrator.substeps_per_interval;
  for (int j = 0; j < trace.size(); ++j) {
    const double phi = p.funnel.eval_phi(trace.t[j]);
    const double err2 = (trace.y[j] - p.yref.eval_yref(trace.t[j])).squaredNorm();
    const double gap = 1.0 - phi * phi * err2;
    const double clamped = std::max(p.cost.epsilon_guard, gap);
    const double depth = std::max(0.0, p.cost.epsilon_guard - gap);
    const double w = 1.0 / clamped - 1.0 + kViolationPressure * depth * depth;
    const bool edge = (j == 0 || j + 1 == trace.size());
    acc += (edge ? 0.5 : 1.0) * w * h;
  }
  for (const auto& uk : u.values) acc += p.cost.lambda_u * uk.squaredNorm() * u.grid.step();
  return acc;
}

Eigen::VectorXd relaxed_gradient(const OcpProblem& p, const ControlTrajectory& u, double base,
                                 int& evals) {
  const Eigen::VectorXd flat = u.stacked();
  const double h = p.solver.fd_step_scale * (1.0 + flat.norm());
  Eigen::VectorXd grad(flat.size());
  ControlTrajectory probe = unbounded_copy(u);
  for (long i = 0; i < flat.size(); ++i) {
    Eigen::VectorXd pert = flat;
    pert(i) += h;
    probe.assign_stacked(pert);
    ++evals;
    grad(i) = (relaxed_cost(p, probe) - base) / h;
  }
  return grad;
}

// Projected descent on relaxed_cost from u (already inside the bound).
// Stops as soon as the true objective turns finite, on stall, or at the
// restoration iteration cap. Returns the final iterate.
ControlTrajectory relaxed_descent(const OcpProblem& problem, ControlTrajectory u, int& evals) {
  double r = relaxed_cost(problem, u);
  ++evals;
  double alpha = 1.0;
  for (int it = 0; it < problem.solver.max_restore_iterations; ++it) {
    ++evals;
    if (!problem.cost_of(u).is_infinite) break;  // true objective is finite, done
    const Eigen::VectorXd grad = relaxed_gradient(problem, u, r, evals);
    const Eigen::VectorXd flat = u.stacked();
    alpha = std::min(alpha * 4.0, problem.solver.alpha_max);
    bool accepted = false;
    while (alpha >= problem.solver.alpha_min) {
      ControlTrajectory trial = with_stacked(u, flat - alpha * grad);
      project_onto_bound(trial);
      const double r_trial = relaxed_cost(problem, trial);
      ++evals;
      const double moved2 = (trial.stacked() - flat).squaredNorm();
      if (r_trial <= r - problem.solver.armijo_sigma / alpha * moved2 && moved2 > 0.0) {
        u = trial;
        r = r_trial;
        accepted = true;
        break;
      }
      alpha *= problem.solver.backtrack_factor;
    }
    if (!accepted) break;
  }
  return u;
}

// Restoration iterate score: how late the first funnel violation sits
// (later is better, +inf when the true cost is finite), relaxed cost as
// the tie-break. Ranking by onset keeps a repair from trading a late
// violation for an earlier one, which would be strictly harder to fix.
struct RepairScore {
  double onset = 0.0;
  double relaxed = 0.0;
};

RepairScore repair_score(const OcpProblem& p, const ControlTrajectory& u, int& evals) {
  evals += 2;
  const CostValue cv = p.cost_of(u);
  RepairScore s;
  s.onset = cv.is_infinite ? cv.first_violation_time.value_or(p.control_grid.t_start)
                           : std::numeric_limits<double>::infinity();
  s.relaxed = relaxed_cost(p, u);
  return s;
}

bool repair_better(const RepairScore& a, const RepairScore& b) {
  if (a.onset != b.onset) return a.onset > b.onset;
  return a.relaxed < b.relaxed;
}

// Cyclic single-interval repairs, tail first. Interval k only influences
// t >= node(k), so late intervals can mend the latest broken stretch
// with no risk to the healthy prefix; the full-gradient descent above
// lacks that causality and stalls whenever fixing the tail requires
// pressing an earlier squeeze. Trial moves run a two-sided step ladder
// along the interval's relaxed-gradient block and are accepted by
// repair_better, returning as soon as the true cost turns finite.
ControlTrajectory coordinate_repair(const OcpProblem& problem, ControlTrajectory u, int& evals) {
  RepairScore cur = repair_score(problem, u, evals);
  const int n = u.grid.n_intervals;
  const int dim = u.input_dim();
  for (int pass = 0; pass < 12 && std::isfinite(cur.onset); ++pass) {
    bool improved = false;
    for (int k = n - 1; k >= 0 && std::isfinite(cur.onset); --k) {
      if (problem.control_grid.node(k) > cur.onset) continue;  // cannot reach the violation
      const double h = problem.solver.fd_step_scale * (1.0 + u.stacked().norm());
      ControlTrajectory probe = unbounded_copy(u);
      Eigen::VectorXd block(dim);
      for (int c = 0; c < dim; ++c) {
        probe.values[k](c) += h;
        ++evals;
        block(c) = (relaxed_cost(problem, probe) - cur.relaxed) / h;
        probe.values[k](c) = u.values[k](c);
      }
      if (!block.allFinite() || !(block.norm() > 0.0)) block = Eigen::VectorXd::Ones(dim);
      const Eigen::VectorXd dir = block / block.norm();
      for (double step = problem.bound_m / 32.0; step > problem.bound_m / 16384.0; step /= 4.0) {
        for (double sign : {-1.0, 1.0}) {
          ControlTrajectory trial = u;
          trial.values[k] += sign * step * dir;
          project_onto_bound(trial);
          const RepairScore sc = repair_score(problem, trial, evals);
          if (repair_better(sc, cur)) {
            u = trial;
            cur = sc;
            improved = true;
          }
        }
      }
    }
    if (!improved) break;
  }
  return u;
}

}  // namespace

CostValue OcpProblem::cost_of(const ControlTrajectory& u) const {
  if (cost_kind == CostKind::funnel)
    return horizon_cost(sys, x_hat, u, funnel, yref, cost, integrator);
  return horizon_cost_constrained(sys, x_hat, u, funnel, yref, cost, integrator);
}

ControlTrajectory funnel_feedback_seed(const OcpProblem& problem) {
  const DynamicalSystem& sys = problem.sys;
  ControlTrajectory seed =
      ControlTrajectory::zero(problem.control_grid, sys.io_dim, problem.bound_m);
  int degree = sys.relative_degree;
  if (degree < 1 || degree > 3) degree = 1;
  const FunnelFeedback fb = make_funnel_feedback(sys, degree, problem.funnel, problem.yref);
  const IntegrationResult sim =
      integrate_closed_loop(sys, problem.x_hat, fb.as_law(), problem.control_grid,
                            problem.integrator);
  const int sub = problem.integrator.substeps_per_interval;
  for (int k = 0; k < problem.control_grid.n_intervals; ++k) {
    const int node = k * sub;
    if (node < sim.trace.size() && sim.trace.u[node].allFinite())
      seed.values[k] = sim.trace.u[node];
    else
      break;  // singular or escaped; keep zeros from here on
  }
  seed.clamp_to_bound();
  return seed;
}

ControlTrajectory feasibility_restore(const OcpProblem& problem, ControlTrajectory u_init,
                                      int* cost_evaluations) {
  int evals = 0;
  auto is_infeasible = [&](const ControlTrajectory& c) {
    ++evals;
    return problem.cost_of(c).is_infinite;
  };
  // Surgical repair first: a shifted warm start replays a feasible
  // prediction and breaks only in the padded tail, which single-interval
  // moves fix without touching the rest. Full descent covers the broadly
  // infeasible leftovers.
  auto restore_chain = [&](ControlTrajectory c) {
    c = coordinate_repair(problem, c, evals);
    if (!is_infeasible(c)) return c;
    c = relaxed_descent(problem, c, evals);
    if (is_infeasible(c)) c = coordinate_repair(problem, c, evals);
    return c;
  };

  ControlTrajectory u = u_init;
  project_onto_bound(u);
  u = restore_chain(u);

  // Descent from the warm start can end pinned against one funnel wall
  // with the violation at the other. The funnel feedback seed chases the
  // funnel center by construction, which restarts on the open side.
  if (is_infeasible(u)) {
    try {
      ControlTrajectory seed = funnel_feedback_seed(problem);
      if (is_infeasible(seed)) seed = restore_chain(seed);
      if (!is_infeasible(seed)) {
        u = seed;
      } else if (repair_better(repair_score(problem, seed, evals),
                               repair_score(problem, u, evals))) {
        u = seed;
      }
    } catch (const std::exception&) {
      // no funnel feedback for this plant; keep the descent iterate
    }
  }
  if (cost_evaluations) *cost_evaluations += evals;
  return u;
}

OcpSolution solve(const OcpProblem& problem, std::optional<ControlTrajectory> warm_start) {
  const TimeGrid& grid = problem.control_grid;
  if (problem.x_hat.size() != problem.sys.state_dim)
    throw std::invalid_argument("ocp::solve: state dimension mismatch");
  if (!(problem.bound_m > 0.0))
    throw std::invalid_argument("ocp::solve: input bound must be positive");

  ControlTrajectory u;
  if (warm_start) {
    u = *warm_start;
    if (u.grid.n_intervals != grid.n_intervals ||
        std::abs(u.grid.t_start - grid.t_start) > 1e-9 * std::max(1.0, std::abs(grid.t_start)) ||
        std::abs(u.grid.t_end - grid.t_end) > 1e-9 * std::max(1.0, std::abs(grid.t_end)))
      throw std::invalid_argument("ocp::solve: warm start grid does not match problem grid");
    u.grid = grid;
    u.bound_m = problem.bound_m;
    project_onto_bound(u);
  } else {
    u = ControlTrajectory::zero(grid, problem.sys.io_dim, problem.bound_m);
  }

  OcpSolution sol;
  int evals = 0;
  auto eval_cost = [&](const ControlTrajectory& c) {
    ++evals;
    return problem.cost_of(c);
  };

  CostValue f = eval_cost(u);
  sol.initial_cost = f;
  std::ostringstream diag;

  if (f.is_infinite) {
    u = feasibility_restore(problem, u, &evals);
    f = eval_cost(u);
    diag << "warm start infeasible, restoration " << (f.is_infinite ? "failed" : "succeeded")
         << "; ";
    if (f.is_infinite) {
      sol.u_star = u;
      sol.cost = f;
      sol.converged = false;
      sol.termination = "restoration_failed";
      sol.cost_evaluations = evals;
      sol.diagnostics = diag.str();
      return sol;
    }
  }

  const SolverConfig& sc = problem.solver;
  double alpha = 1.0;
  int it = 0;
  std::string termination = "max_iterations";
  bool converged = false;

  ControlTrajectory probe = unbounded_copy(u);
  for (it = 0; it < sc.max_iterations; ++it) {
    // Forward-difference gradient, backward when the forward probe falls
    // outside the feasible cost region.
    const Eigen::VectorXd flat = u.stacked();
    const double hfd = sc.fd_step_scale * (1.0 + flat.norm());
    Eigen::VectorXd grad(flat.size());
    for (long i = 0; i < flat.size(); ++i) {
      Eigen::VectorXd pert = flat;
      pert(i) += hfd;
      probe.assign_stacked(pert);
      const CostValue fwd = eval_cost(probe);
      if (!fwd.is_infinite) {
        grad(i) = (fwd.value - f.value) / hfd;
        continue;
      }
      pert(i) = flat(i) - hfd;
      probe.assign_stacked(pert);
      const CostValue bwd = eval_cost(probe);
      grad(i) = bwd.is_infinite ? 0.0 : (f.value - bwd.value) / hfd;
    }

    // Projected-gradient stationarity at unit step. Scaled by the iterate,
    // not the cost: the projected displacement is capped by the feasible
    // set's diameter, so a cost-relative threshold would fire spuriously
    // whenever the cost is huge (deep penalty values dwarf any step).
    ControlTrajectory station = with_stacked(u, flat - grad);
    project_onto_bound(station);
    const double pg = (station.stacked() - flat).norm();
    if (pg <= sc.gradient_tol * (1.0 + flat.norm())) {
      converged = true;
      termination = "gradient_tolerance";
      break;
    }

    // Backtracking along the projection arc; infinite trial cost is a
    // plain rejection.
    alpha = std::min(alpha * 4.0, sc.alpha_max);
    bool accepted = false;
    ControlTrajectory trial;
    CostValue f_trial;
    double moved = 0.0;
    while (alpha >= sc.alpha_min) {
      trial = with_stacked(u, flat - alpha * grad);
      project_onto_bound(trial);
      const Eigen::VectorXd step_vec = trial.stacked() - flat;
      const double moved2 = step_vec.squaredNorm();
      if (moved2 > 0.0) {
        f_trial = eval_cost(trial);
        if (!f_trial.is_infinite &&
            f_trial.value <= f.value - sc.armijo_sigma / alpha * moved2) {
          accepted = true;
          moved = std::sqrt(moved2);
          break;
        }
      }
      alpha *= sc.backtrack_factor;
    }
    if (!accepted) {
      termination = "line_search_stalled";
      break;
    }
    u = trial;
    f = f_trial;
    if (moved <= sc.step_tol * (1.0 + u.stacked().norm())) {
      converged = true;
      termination = "step_tolerance";
      ++it;
      break;
    }
  }

  sol.u_star = u;
  sol.cost = problem.cost_of(sol.u_star);  // recompute; bitwise equal to f
  ++evals;
  sol.iterations = it;
  sol.converged = converged;
  sol.termination = termination;
  sol.cost_evaluations = evals;
  diag << "terminated by " << termination << " after " << it << " iterations, " << evals
       << " cost evaluations";
  sol.diagnostics = diag.str();
  return sol;
}

ControlTrajectory shift_warm_start(const ControlTrajectory& prev, double delta,
                                   WarmStartFill fill) {
  prev.validate();
  const double step = prev.grid.step();
  const double ratio = delta / step;
  const long shift = std::lround(ratio);
  if (shift < 0 || std::abs(ratio - static_cast<double>(shift)) > 1e-6)
    throw std::invalid_argument(
        "shift_warm_start: delta must be a non-negative integer multiple of the control step");
  if (shift > prev.grid.n_intervals)
    throw std::invalid_argument("shift_warm_start: delta exceeds the previous horizon");

  ControlTrajectory out;
  out.grid = TimeGrid(prev.grid.t_start + delta, prev.grid.t_end + delta, prev.grid.n_intervals);
  out.bound_m = prev.bound_m;
  out.values.reserve(prev.values.size());
  for (size_t k = shift; k < prev.values.size(); ++k) out.values.push_back(prev.values[k]);
  const Eigen::VectorXd pad = (fill == WarmStartFill::hold_last && !prev.values.empty())
                                  ? prev.values.back()
                                  : Eigen::VectorXd::Zero(prev.input_dim());
  while (static_cast<int>(out.values.size()) < out.grid.n_intervals) out.values.push_back(pad);
  out.validate();
  return out;
}

}  // namespace fmpc
