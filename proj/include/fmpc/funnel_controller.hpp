#pragma once

#include <Eigen/Dense>

#include "fmpc/funnel.hpp"
#include "fmpc/ode.hpp"
#include "fmpc/systems.hpp"

namespace fmpc {

// Model-free funnel feedback laws. Each returns NaN once a saturation
// argument leaves its domain; the integrator reports that as a feedback
// singularity rather than continuing with a meaningless value.

// u = -e / (1 - phi^2 |e|^2), for relative degree one.
Eigen::VectorXd feedback_deg1(double phi_t, const Eigen::VectorXd& e);

// Scalar output, relative degree two:
//   w = phi e' + a(phi^2 e^2) phi e,  u = -a(w^2) w,  a(s) = 1/(1-s).
double feedback_deg2(double phi_t, double e, double e_dot);

// Scalar output, relative degree three, with g(s) = s/(1-s^2):
//   w = phi e'' + g(phi e' + g(phi e)),  u = -g(w).
double feedback_deg3(double phi_t, double e, double e_dot, double e_ddot);

struct ErrorState {
  double e = 0.0;
  double e_dot = 0.0;
  double e_ddot = 0.0;
};

// Funnel feedback bound to a plant. Degree one needs only the output
// map. Degrees two and three require a scalar-output linear realization
// whose relative degree matches, so the error derivatives follow
// exactly from the model (e' = C A x - yref', e'' = C A^2 x - yref'');
// no numeric differentiation is involved.
struct FunnelFeedback {
  int degree = 1;
  FunnelSpec funnel;
  ReferenceSignal yref;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> output_of;       // degree 1
  std::function<ErrorState(double, const Eigen::VectorXd&)> error_chain;  // degrees 2, 3

  Eigen::VectorXd eval(double t, const Eigen::VectorXd& x) const;
  FeedbackLaw as_law() const;
};

FunnelFeedback make_funnel_feedback(const DynamicalSystem& sys, int degree,
                                    const FunnelSpec& funnel, const ReferenceSignal& yref);

// Zero-order hold: the wrapped law is re-evaluated at the first substep
// node at or past each multiple of sample_dt (counted from t_origin) and
// held in between, emulating a digital controller. The returned law owns
// a mutable held-value cell, so it must not be shared between
// concurrent integrations; create a fresh wrapper per run.
FeedbackLaw sampled_hold(FeedbackLaw inner, double sample_dt, double t_origin);

}  // namespace fmpc
