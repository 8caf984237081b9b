#pragma once

#include <Eigen/Dense>
#include <optional>

#include "fmpc/funnel.hpp"
#include "fmpc/systems.hpp"
#include "fmpc/time_grid.hpp"

namespace fmpc {

enum class Quadrature { rectangle, trapezoid };

struct CostConfig {
  double lambda_u = 0.0;               // input weight, >= 0
  Quadrature quadrature = Quadrature::trapezoid;
  double epsilon_guard = 1e-9;         // barrier guard, in (0,1)
  double penalty_weight = 1e6;         // constrained objective only
};

// Extended-real cost. Infinity is carried as a tag, never as a floating
// special, so optimizer branches stay deterministic. boundary_hit() is
// true exactly when the value is infinite.
struct CostValue {
  double value = 0.0;
  bool is_infinite = false;
  std::optional<double> first_violation_time;

  static CostValue finite(double v) { return {v, false, std::nullopt}; }
  static CostValue finite(double v, double violation_t) { return {v, false, violation_t}; }
  static CostValue infinity() { return {0.0, true, std::nullopt}; }
  static CostValue infinity(double violation_t) { return {0.0, true, violation_t}; }

  bool boundary_hit() const { return is_infinite; }

  // Total order with every finite value below infinity.
  bool operator<(const CostValue& o) const {
    if (is_infinite) return false;
    if (o.is_infinite) return true;
    return value < o.value;
  }
  bool operator<=(const CostValue& o) const { return !(o < *this); }
};

// |e|^2 + lambda_u |u|^2
double quadratic_stage(const Eigen::VectorXd& e, const Eigen::VectorXd& u, double lambda_u);

// 1/(1 - phi^2 |e|^2) - 1 + lambda_u |u|^2, infinite once the barrier
// term 1 - phi^2 |e|^2 drops below epsilon_guard.
CostValue funnel_stage(double phi_t, const Eigen::VectorXd& e, const Eigen::VectorXd& u,
                       const CostConfig& cfg);

// Integrates the barrier stage cost along the open-loop solution, using
// the configured quadrature on the integrator's substep grid for the
// error term. The input term is piecewise constant and is integrated
// exactly. Returns infinity with the first violation time if the
// trajectory escapes or any node reaches the barrier guard.
CostValue horizon_cost(const DynamicalSystem& sys, const Eigen::VectorXd& x0,
                       const ControlTrajectory& u, const FunnelSpec& funnel,
                       const ReferenceSignal& yref, const CostConfig& cost_cfg,
                       const IntegratorConfig& int_cfg);

// Quadratic tracking cost plus penalty_weight * integral of
// max(0, |e| - psi)^2: the output constraint as a soft penalty. Finite
// whenever the trajectory stays finite; a funnel violation is recorded
// in first_violation_time without making the value infinite.
CostValue horizon_cost_constrained(const DynamicalSystem& sys, const Eigen::VectorXd& x0,
                                   const ControlTrajectory& u, const FunnelSpec& funnel,
                                   const ReferenceSignal& yref, const CostConfig& cost_cfg,
                                   const IntegratorConfig& int_cfg);

}  // namespace fmpc
