#include "fmpc/mpc.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "fmpc/ode.hpp"

namespace fmpc {

namespace {

long checked_multiple(double value, double step, const char* what) {
  const double ratio = value / step;
  const long n = std::lround(ratio);
  if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-6 * std::max(1.0, std::abs(ratio))) {
    std::ostringstream msg;
    msg << "mpc: " << what << " (" << value << ") must be a positive integer multiple of the "
        << "control step (" << step << ")";
    throw std::invalid_argument(msg.str());
  }
  return n;
}

}  // namespace

MpcRunReport run(const DynamicalSystem& sys, const FunnelSpec& funnel,
                 const ReferenceSignal& yref, const Eigen::VectorXd& x0, double t0,
                 const MpcConfig& cfg) {
  if (!(cfg.control_step > 0.0)) throw std::invalid_argument("mpc: control_step must be positive");
  if (!(cfg.sim_end > t0)) throw std::invalid_argument("mpc: sim_end must exceed t0");
  if (cfg.horizon_T + 1e-12 < cfg.delta)
    throw std::invalid_argument("mpc: horizon_T must be at least delta");
  const long n_delta = checked_multiple(cfg.delta, cfg.control_step, "delta");
  const long n_horizon = checked_multiple(cfg.horizon_T, cfg.control_step, "horizon_T");
  checked_multiple(cfg.sim_end - t0, cfg.control_step, "simulated span");

  const Eigen::VectorXd e0 = sys.eval_h(x0) - yref.eval_yref(t0);
  const double level0 = funnel.eval_phi(t0) * e0.norm();
  if (!(level0 < 1.0)) {
    std::ostringstream msg;
    msg << "mpc: initial error lies outside the funnel, phi(t0)*|e(t0)| = " << level0
        << " (needs to be < 1)";
    throw std::invalid_argument(msg.str());
  }

  MpcRunReport report;
  report.t0 = t0;
  report.delta = cfg.delta;
  report.control_step = cfg.control_step;

  Eigen::VectorXd x_hat = x0;
  std::optional<ControlTrajectory> prev;
  bool all_finite = true;
  const double span = cfg.sim_end - t0;

  for (int step_index = 0;; ++step_index) {
    const double t_hat = t0 + step_index * cfg.delta;
    if (t_hat >= cfg.sim_end - 1e-9 * std::max(1.0, span)) break;

    OcpProblem problem;
    problem.sys = sys;
    problem.funnel = funnel;
    problem.yref = yref;
    problem.x_hat = x_hat;
    problem.control_grid = TimeGrid(t_hat, t_hat + cfg.horizon_T, static_cast<int>(n_horizon));
    problem.bound_m = cfg.bound_m;
    problem.cost_kind =
        (cfg.scheme == Scheme::fmpc) ? CostKind::funnel : CostKind::quadratic_constrained;
    problem.cost = cfg.cost;
    problem.integrator = cfg.integrator;
    problem.solver = cfg.solver;

    // The very first funnel-scheme solve is seeded by the funnel feedback
    // sampled at the control nodes; later solves shift the previous
    // minimizer. Zero seed if the feedback cannot be built.
    std::optional<ControlTrajectory> warm;
    if (prev) {
      warm = shift_warm_start(*prev, cfg.delta, WarmStartFill::hold_last);
    } else if (cfg.scheme == Scheme::fmpc) {
      try {
        warm = funnel_feedback_seed(problem);
      } catch (const std::exception&) {
        warm.reset();
      }
    }

    MpcStep rec;
    rec.index = step_index;
    rec.t_hat = t_hat;
    rec.solution = solve(problem, warm);
    rec.applied_min_margin = std::numeric_limits<double>::quiet_NaN();

    if (rec.solution.cost.is_infinite) {
      all_finite = false;
      std::ostringstream why;
      why << "optimal control problem at t = " << t_hat << " has no finite-cost solution ("
          << rec.solution.termination << ")";
      report.halt_reason = why.str();
      report.per_step.push_back(std::move(rec));
      report.halted_early = true;
      break;
    }

    // Apply the first delta of the minimizer (shorter near sim_end).
    const double seg_end = std::min(t_hat + cfg.delta, cfg.sim_end);
    const long n_apply = std::lround((seg_end - t_hat) / cfg.control_step);
    ControlTrajectory applied;
    applied.grid = TimeGrid(t_hat, seg_end, static_cast<int>(n_apply));
    applied.bound_m = cfg.bound_m;
    applied.values.assign(rec.solution.u_star.values.begin(),
                          rec.solution.u_star.values.begin() + n_apply);
    const IntegrationResult seg = integrate_open_loop(sys, x_hat, applied, cfg.integrator);

    SimulationTrace seg_trace = seg.trace;
    seg_trace.annotate(&yref, &funnel);
    rec.applied_min_margin =
        seg_trace.size() > 0 ? seg_trace.min_funnel_margin() : std::numeric_limits<double>::quiet_NaN();

    if (report.trace.size() == 0)
      report.trace = seg_trace;
    else
      report.trace.append(seg_trace);

    if (!seg.ok()) {
      all_finite = false;
      report.per_step.push_back(std::move(rec));
      report.halted_early = true;
      std::ostringstream why;
      why << "applied segment escaped at t = " << seg.escape->time << " ("
          << to_string(seg.escape->reason) << ")";
      report.halt_reason = why.str();
      break;
    }

    x_hat = seg.trace.x.back();
    prev = rec.solution.u_star;
    report.per_step.push_back(std::move(rec));
  }

  report.feasible_throughout = all_finite && !report.halted_early;
  if (report.trace.size() > 0) {
    report.min_funnel_margin = report.trace.min_funnel_margin();
    report.max_input_norm = report.trace.max_input_norm();
  }
  return report;
}

Eigen::VectorXd applied_feedback_value(const MpcRunReport& report, double t) {
  if (report.per_step.empty() || report.trace.size() == 0)
    throw std::logic_error("applied_feedback_value: empty run");
  const double t_end = report.trace.t.back();
  const double tol = 1e-9 * std::max(1.0, std::abs(t_end));
  if (t < report.t0 - tol || t > t_end + tol)
    throw std::out_of_range("applied_feedback_value: time outside the simulated span");

  // Segment index, taking the newly applied value at shift boundaries.
  int seg = static_cast<int>(std::floor((t - report.t0) / report.delta));
  const int last = static_cast<int>(report.per_step.size()) - 1;
  seg = std::max(0, std::min(seg, last));
  while (seg + 1 <= last && t >= report.t0 + (seg + 1) * report.delta) ++seg;
  while (seg > 0 && t < report.t0 + seg * report.delta) --seg;

  // Only the applied slice of each solution is visible here: the last
  // step's horizon extends past the trace end, and a halted step may
  // have applied nothing at all.
  const auto applied_count = [&](int k) {
    const double seg_end = std::min(report.t0 + (k + 1) * report.delta, t_end);
    return static_cast<int>(
        std::lround((seg_end - report.per_step[k].t_hat) / report.control_step));
  };
  while (seg > 0 && applied_count(seg) == 0) --seg;

  const ControlTrajectory& u = report.per_step[seg].solution.u_star;
  int iv = u.grid.interval_of(std::min(t, t_end));
  const int applied = applied_count(seg);
  if (applied > 0 && iv >= applied) iv = applied - 1;
  return u.values[iv];
}

void write_step_csv(const MpcRunReport& report, std::ostream& out) {
  out << "step,t_hat,ocp_cost,ocp_iterations,converged,max_u_norm,min_margin\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (const auto& s : report.per_step) {
    out << s.index << ',';
    put(s.t_hat);
    out << ',';
    if (s.solution.cost.is_infinite)
      out << "inf";
    else
      put(s.solution.cost.value);
    out << ',' << s.solution.iterations << ',' << (s.solution.converged ? 1 : 0) << ',';
    double max_u = 0.0;
    for (const auto& v : s.solution.u_star.values) max_u = std::max(max_u, v.norm());
    put(max_u);
    out << ',';
    put(s.applied_min_margin);
    out << '\n';
  }
}

void write_step_csv_file(const MpcRunReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_step_csv_file: cannot open " + path);
  write_step_csv(report, out);
}

}  // namespace fmpc
