#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

namespace fmpc {

// Time-varying performance boundary. phi is the funnel function
// (bounded, bounded derivative, inf phi > 0); psi = 1/phi is the radius
// the tracking error must stay below. An error e is inside the funnel
// at time t when phi(t)*|e| < 1, i.e. |e| < psi(t).
struct FunnelSpec {
  std::function<double(double)> eval_phi;
  std::function<double(double)> eval_phi_dot;
  std::function<double(double)> eval_psi;
  std::function<double(double)> eval_psi_dot;
  double inf_phi = 0.0;
  double sup_phi = 0.0;      // sup_t phi(t)
  double sup_phi_dot = 0.0;  // sup_t |phi'(t)|
  double sup_psi = 0.0;      // sup_t psi(t)
  double sup_psi_dot = 0.0;  // sup_t |psi'(t)|
  std::string label;
};

// psi(t) = a*exp(-b*t) + c, so the radius shrinks from a+c to c.
// Requires a >= 0, b >= 0, c > 0.
FunnelSpec exponential_funnel(double a, double b, double c);

// psi(t) = radius for all t. Requires radius > 0.
FunnelSpec constant_funnel(double radius);

// phi(t)*|e| < 1 (strict) or <= 1 (non-strict).
bool in_funnel(const FunnelSpec& funnel, double t, const Eigen::VectorXd& e, bool strict = true);

// psi(t) - |e|; positive inside the funnel.
double funnel_margin(const FunnelSpec& funnel, double t, const Eigen::VectorXd& e);

// Output reference with derivatives. The second derivative is consumed
// by the third-order error feedback; families without curvature return
// zero there.
struct ReferenceSignal {
  int dim = 1;
  std::function<Eigen::VectorXd(double)> eval_yref;
  std::function<Eigen::VectorXd(double)> eval_yref_dot;
  std::function<Eigen::VectorXd(double)> eval_yref_ddot;
  double sup_norm = 0.0;      // sup_t |yref(t)|
  double sup_norm_dot = 0.0;  // sup_t |yref'(t)|
  std::string label;
};

ReferenceSignal constant_reference(const Eigen::VectorXd& value);
ReferenceSignal constant_reference(double value);

// yref(t) = amplitude*cos(frequency*t), scalar.
ReferenceSignal cosine_reference(double amplitude, double frequency);

}  // namespace fmpc
