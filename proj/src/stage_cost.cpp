#include "fmpc/stage_cost.hpp"

#include <cmath>
#include <stdexcept>

#include "fmpc/ode.hpp"

namespace fmpc {

namespace {

void check_cost_config(const CostConfig& cfg) {
  if (!(cfg.lambda_u >= 0.0)) throw std::invalid_argument("cost: lambda_u must be >= 0");
  if (!(cfg.epsilon_guard > 0.0) || !(cfg.epsilon_guard < 1.0))
    throw std::invalid_argument("cost: epsilon_guard must lie in (0,1)");
}

// Integral of the node samples w over the uniform substep grid.
double quadrature_sum(const std::vector<double>& w, double h, Quadrature rule) {
  double acc = 0.0;
  if (rule == Quadrature::trapezoid) {
    for (size_t j = 0; j + 1 < w.size(); ++j) acc += 0.5 * (w[j] + w[j + 1]);
  } else {
    for (size_t j = 0; j + 1 < w.size(); ++j) acc += w[j];
  }
  return acc * h;
}

// The input signal is constant on each control interval, so its
// contribution integrates exactly; only the error term needs quadrature.
double input_term(const ControlTrajectory& u, double lambda_u) {
  double acc = 0.0;
  for (const auto& uk : u.values) acc += uk.squaredNorm();
  return lambda_u * acc * u.grid.step();
}

}  // namespace

double quadratic_stage(const Eigen::VectorXd& e, const Eigen::VectorXd& u, double lambda_u) {
  return e.squaredNorm() + lambda_u * u.squaredNorm();
}

CostValue funnel_stage(double phi_t, const Eigen::VectorXd& e, const Eigen::VectorXd& u,
                       const CostConfig& cfg) {
  check_cost_config(cfg);
  const double gap = 1.0 - phi_t * phi_t * e.squaredNorm();
  if (gap < cfg.epsilon_guard) return CostValue::infinity();
  return CostValue::finite(1.0 / gap - 1.0 + cfg.lambda_u * u.squaredNorm());
}

CostValue horizon_cost(const DynamicalSystem& sys, const Eigen::VectorXd& x0,
                       const ControlTrajectory& u, const FunnelSpec& funnel,
                       const ReferenceSignal& yref, const CostConfig& cost_cfg,
                       const IntegratorConfig& int_cfg) {
  check_cost_config(cost_cfg);
  const IntegrationResult result = integrate_open_loop(sys, x0, u, int_cfg);
  if (!result.ok()) return CostValue::infinity(result.escape->time);

  const SimulationTrace& trace = result.trace;
  std::vector<double> w(trace.size());
  for (int j = 0; j < trace.size(); ++j) {
    const double phi = funnel.eval_phi(trace.t[j]);
    const double err2 = (trace.y[j] - yref.eval_yref(trace.t[j])).squaredNorm();
    const double gap = 1.0 - phi * phi * err2;
    if (gap < cost_cfg.epsilon_guard) return CostValue::infinity(trace.t[j]);
    w[j] = 1.0 / gap - 1.0;
  }
  const double h = u.grid.step() / int_cfg.substeps_per_interval;
  const double value = quadrature_sum(w, h, cost_cfg.quadrature) + input_term(u, cost_cfg.lambda_u);
  return CostValue::finite(value);
}

CostValue horizon_cost_constrained(const DynamicalSystem& sys, const Eigen::VectorXd& x0,
                                   const ControlTrajectory& u, const FunnelSpec& funnel,
                                   const ReferenceSignal& yref, const CostConfig& cost_cfg,
                                   const IntegratorConfig& int_cfg) {
  check_cost_config(cost_cfg);
  if (!(cost_cfg.penalty_weight >= 0.0))
    throw std::invalid_argument("cost: penalty_weight must be >= 0");
  const IntegrationResult result = integrate_open_loop(sys, x0, u, int_cfg);
  if (!result.ok()) return CostValue::infinity(result.escape->time);

  const SimulationTrace& trace = result.trace;
  std::vector<double> w(trace.size());
  std::optional<double> first_violation;
  for (int j = 0; j < trace.size(); ++j) {
    const double err = (trace.y[j] - yref.eval_yref(trace.t[j])).norm();
    const double psi = funnel.eval_psi(trace.t[j]);
    const double overshoot = std::max(0.0, err - psi);
    if (overshoot > 0.0 && !first_violation) first_violation = trace.t[j];
    w[j] = err * err + cost_cfg.penalty_weight * overshoot * overshoot;
  }
  const double h = u.grid.step() / int_cfg.substeps_per_interval;
  const double value = quadrature_sum(w, h, cost_cfg.quadrature) + input_term(u, cost_cfg.lambda_u);
  if (first_violation) return CostValue::finite(value, *first_violation);
  return CostValue::finite(value);
}

}  // namespace fmpc
