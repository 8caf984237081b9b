#pragma once

#include <Eigen/Dense>
#include <functional>

#include "fmpc/systems.hpp"
#include "fmpc/time_grid.hpp"
#include "fmpc/trace.hpp"

namespace fmpc {

// State feedback u = law(t, x). eval is called at every Runge-Kutta
// stage and must be pure. on_node, when set, is called once per substep
// node before the step is taken; sample-and-hold laws use it to refresh
// their held value, so one FeedbackLaw instance must not be shared
// between concurrent integrations.
struct FeedbackLaw {
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> eval;
  std::function<void(double, const Eigen::VectorXd&)> on_node;
};

// Classical fixed-step fourth-order Runge-Kutta over the control grid.
// Substeps never straddle a control-interval boundary, so piecewise
// constant inputs are integrated without smearing their jumps.
// Escape handling: if the state norm crosses cfg.blowup_norm the
// offending substep is bisected to localize the escape time; a
// non-finite or throwing derivative evaluation aborts at the current
// node.
IntegrationResult integrate_open_loop(const DynamicalSystem& sys, const Eigen::VectorXd& x0,
                                      const ControlTrajectory& u, const IntegratorConfig& cfg);

// Same scheme with u = feedback(t, x). A non-finite feedback value stops
// the run with reason feedback_singularity.
IntegrationResult integrate_closed_loop(const DynamicalSystem& sys, const Eigen::VectorXd& x0,
                                        const FeedbackLaw& feedback, const TimeGrid& horizon,
                                        const IntegratorConfig& cfg);

}  // namespace fmpc
