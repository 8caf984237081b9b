#include "fmpc/funnel.hpp"

#include <cmath>
#include <stdexcept>

namespace fmpc {

FunnelSpec exponential_funnel(double a, double b, double c) {
  if (!(a >= 0.0) || !(b >= 0.0) || !(c > 0.0))
    throw std::invalid_argument("exponential_funnel: need a >= 0, b >= 0, c > 0");
  FunnelSpec f;
  f.eval_psi = [a, b, c](double t) { return a * std::exp(-b * t) + c; };
  f.eval_psi_dot = [a, b](double t) { return -a * b * std::exp(-b * t); };
  f.eval_phi = [a, b, c](double t) { return 1.0 / (a * std::exp(-b * t) + c); };
  f.eval_phi_dot = [a, b, c](double t) {
    const double psi = a * std::exp(-b * t) + c;
    return a * b * std::exp(-b * t) / (psi * psi);
  };
  f.inf_phi = 1.0 / (a + c);
  f.sup_phi = 1.0 / c;
  f.sup_psi = a + c;
  f.sup_psi_dot = a * b;
  // |phi'| peaks where a e^{-bt} = c (at b/(4c)), or at t = 0 when the
  // decaying part already starts below c.
  f.sup_phi_dot = (a > c) ? b / (4.0 * c) : a * b / ((a + c) * (a + c));
  f.label = "exponential";
  return f;
}

FunnelSpec constant_funnel(double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("constant_funnel: radius must be positive");
  FunnelSpec f;
  f.eval_psi = [radius](double) { return radius; };
  f.eval_psi_dot = [](double) { return 0.0; };
  f.eval_phi = [radius](double) { return 1.0 / radius; };
  f.eval_phi_dot = [](double) { return 0.0; };
  f.inf_phi = 1.0 / radius;
  f.sup_phi = 1.0 / radius;
  f.sup_psi = radius;
  f.sup_psi_dot = 0.0;
  f.sup_phi_dot = 0.0;
  f.label = "constant";
  return f;
}

bool in_funnel(const FunnelSpec& funnel, double t, const Eigen::VectorXd& e, bool strict) {
  const double v = funnel.eval_phi(t) * e.norm();
  return strict ? v < 1.0 : v <= 1.0;
}

double funnel_margin(const FunnelSpec& funnel, double t, const Eigen::VectorXd& e) {
  return funnel.eval_psi(t) - e.norm();
}

ReferenceSignal constant_reference(const Eigen::VectorXd& value) {
  ReferenceSignal r;
  r.dim = static_cast<int>(value.size());
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(value.size());
  r.eval_yref = [value](double) { return value; };
  r.eval_yref_dot = [zero](double) { return zero; };
  r.eval_yref_ddot = [zero](double) { return zero; };
  r.sup_norm = value.norm();
  r.sup_norm_dot = 0.0;
  r.label = "constant";
  return r;
}

ReferenceSignal constant_reference(double value) {
  Eigen::VectorXd v(1);
  v << value;
  return constant_reference(v);
}

ReferenceSignal cosine_reference(double amplitude, double frequency) {
  ReferenceSignal r;
  r.dim = 1;
  r.eval_yref = [amplitude, frequency](double t) {
    Eigen::VectorXd v(1);
    v << amplitude * std::cos(frequency * t);
    return v;
  };
  r.eval_yref_dot = [amplitude, frequency](double t) {
    Eigen::VectorXd v(1);
    v << -amplitude * frequency * std::sin(frequency * t);
    return v;
  };
  r.eval_yref_ddot = [amplitude, frequency](double t) {
    Eigen::VectorXd v(1);
    v << -amplitude * frequency * frequency * std::cos(frequency * t);
    return v;
  };
  r.sup_norm = std::abs(amplitude);
  r.sup_norm_dot = std::abs(amplitude * frequency);
  r.label = "cosine";
  return r;
}

}  // namespace fmpc
