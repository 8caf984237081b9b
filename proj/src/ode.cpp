#include "fmpc/ode.hpp"

#include <cmath>
#include <stdexcept>

namespace fmpc {

namespace {

struct StageFailure {
  EscapeReason reason;
  std::string detail;
};

// One classical RK4 step of size h from (t, x). Throws StageFailure when
// a derivative or feedback evaluation cannot be completed.
template <typename InputFn>
Eigen::VectorXd rk4_step(const DynamicalSystem& sys, double t, const Eigen::VectorXd& x, double h,
                         InputFn&& input) {
  auto deriv = [&](double ts, const Eigen::VectorXd& xs) -> Eigen::VectorXd {
    Eigen::VectorXd us;
    try {
      us = input(ts, xs);
    } catch (const std::domain_error& e) {
      throw StageFailure{EscapeReason::feedback_singularity, e.what()};
    }
    if (!us.allFinite())
      throw StageFailure{EscapeReason::feedback_singularity, "non-finite feedback value"};
    Eigen::VectorXd dx;
    try {
      dx = sys.eval_f(xs) + sys.eval_g(xs) * us;
    } catch (const std::domain_error& e) {
      throw StageFailure{EscapeReason::non_finite_derivative, e.what()};
    }
    if (!dx.allFinite())
      throw StageFailure{EscapeReason::non_finite_derivative, "non-finite derivative value"};
    return dx;
  };
  const Eigen::VectorXd k1 = deriv(t, x);
  const Eigen::VectorXd k2 = deriv(t + 0.5 * h, x + (0.5 * h) * k1);
  const Eigen::VectorXd k3 = deriv(t + 0.5 * h, x + (0.5 * h) * k2);
  const Eigen::VectorXd k4 = deriv(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Shared driver. InputFn is queried at RK stage points; NodeFn runs once
// per substep node (before the step from it) so held inputs can refresh;
// RecordFn supplies the input column value at a node.
template <typename InputFn, typename NodeFn, typename RecordFn>
IntegrationResult integrate_core(const DynamicalSystem& sys, const Eigen::VectorXd& x0,
                                 const TimeGrid& grid, const IntegratorConfig& cfg,
                                 InputFn&& input, NodeFn&& on_node, RecordFn&& record_input) {
  if (x0.size() != sys.state_dim)
    throw std::invalid_argument("integrate: initial state dimension mismatch");
  if (!x0.allFinite()) throw std::invalid_argument("integrate: non-finite initial state");
  if (cfg.substeps_per_interval < 1)
    throw std::invalid_argument("integrate: need at least one substep per interval");
  if (!(cfg.blowup_norm > 0.0)) throw std::invalid_argument("integrate: blowup_norm must be positive");

  IntegrationResult result;
  SimulationTrace& trace = result.trace;
  const int sub = cfg.substeps_per_interval;
  const double h = grid.step() / sub;

  Eigen::VectorXd x = x0;
  double t = grid.node(0);

  auto push_node = [&](double tn, const Eigen::VectorXd& xn) {
    on_node(tn, xn);
    trace.t.push_back(tn);
    trace.x.push_back(xn);
    trace.y.push_back(sys.eval_h(xn));
    trace.u.push_back(record_input(tn, xn));
  };

  auto escape_at = [&](double te, const Eigen::VectorXd& xe, EscapeReason reason,
                       std::string detail) {
    result.escape = EscapeReport{te, xe, reason, std::move(detail)};
  };

  push_node(t, x);
  if (x.norm() > cfg.blowup_norm) {
    escape_at(t, x, EscapeReason::state_norm_blowup, "initial state beyond blowup norm");
    return result;
  }

  for (int k = 0; k < grid.n_intervals && !result.escape; ++k) {
    const double t_base = grid.node(k);
    for (int j = 0; j < sub; ++j) {
      // End of the final substep is the next control node exactly.
      const double t_next = (j + 1 == sub) ? grid.node(k + 1) : t_base + (j + 1) * h;
      Eigen::VectorXd x_next;
      try {
        x_next = rk4_step(sys, t, x, h, input);
      } catch (const StageFailure& f) {
        escape_at(t, x, f.reason, f.detail);
        return result;
      }
      if (!x_next.allFinite() || x_next.norm() > cfg.blowup_norm) {
        // Bisect the step length to localize the norm crossing.
        double lo = 0.0, hi = h;
        Eigen::VectorXd x_lo = x;
        for (int iter = 0; iter < 60 && hi - lo > 1e-12 * h; ++iter) {
          const double mid = 0.5 * (lo + hi);
          Eigen::VectorXd x_mid;
          try {
            x_mid = rk4_step(sys, t, x, mid, input);
          } catch (const StageFailure&) {
            hi = mid;
            continue;
          }
          if (!x_mid.allFinite() || x_mid.norm() > cfg.blowup_norm) {
            hi = mid;
          } else {
            lo = mid;
            x_lo = x_mid;
          }
        }
        escape_at(t + lo, x_lo, EscapeReason::state_norm_blowup,
                  "state norm crossed blowup threshold");
        return result;
      }
      t = t_next;
      x = x_next;
      push_node(t, x);
    }
  }
  return result;
}

}  // namespace

IntegrationResult integrate_open_loop(const DynamicalSystem& sys, const Eigen::VectorXd& x0,
                                      const ControlTrajectory& u, const IntegratorConfig& cfg) {
  u.validate();
  if (u.input_dim() != sys.io_dim)
    throw std::invalid_argument("integrate_open_loop: input dimension mismatch");
  const TimeGrid& grid = u.grid;
  int current = 0;
  auto input = [&](double, const Eigen::VectorXd&) -> Eigen::VectorXd { return u.values[current]; };
  auto on_node = [&](double tn, const Eigen::VectorXd&) {
    if (tn < grid.t_end) current = grid.interval_of(tn);
  };
  auto record = [&](double, const Eigen::VectorXd&) -> Eigen::VectorXd { return u.values[current]; };
  return integrate_core(sys, x0, grid, cfg, input, on_node, record);
}

IntegrationResult integrate_closed_loop(const DynamicalSystem& sys, const Eigen::VectorXd& x0,
                                        const FeedbackLaw& feedback, const TimeGrid& horizon,
                                        const IntegratorConfig& cfg) {
  if (!feedback.eval) throw std::invalid_argument("integrate_closed_loop: feedback.eval not set");
  auto input = [&](double ts, const Eigen::VectorXd& xs) -> Eigen::VectorXd {
    return feedback.eval(ts, xs);
  };
  auto on_node = [&](double tn, const Eigen::VectorXd& xn) {
    if (feedback.on_node) feedback.on_node(tn, xn);
  };
  auto record = [&](double tn, const Eigen::VectorXd& xn) -> Eigen::VectorXd {
    Eigen::VectorXd v = feedback.eval(tn, xn);
    return v;
  };
  return integrate_core(sys, x0, horizon, cfg, input, on_node, record);
}

}  // namespace fmpc
