#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fmpc {

// Control-affine plant x' = f(x) + g(x) u, y = h(x) with as many inputs
// as outputs. All callbacks must be pure; evaluation outside a model's
// domain throws std::domain_error.
struct DynamicalSystem {
  int state_dim = 0;
  int io_dim = 0;  // input dimension == output dimension

  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval_f;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> eval_g;           // n x m
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval_h;           // m
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> eval_h_jacobian;  // m x n

  std::string label;

  // Populated by constructors that build the plant from matrices;
  // enables exact output-derivative chains for higher-order feedback.
  struct LinearRealization {
    Eigen::MatrixXd a, b, c;
  };
  std::optional<LinearRealization> linear;

  // Reported by constructors that know it; 0 means not determined.
  int relative_degree = 0;

  Eigen::VectorXd xdot(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
};

// x' = Ax + Bu, y = Cx. Relative degree is determined by the first k
// with C A^(k-1) B invertible (0 if none up to state_dim). When
// require_relative_degree_one is set and C*B is singular, throws with a
// remedy hint instead.
DynamicalSystem linear_system(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const Eigen::MatrixXd& c,
                              bool require_relative_degree_one = false);

// Coordinates z = Vx = (y, eta) splitting a linear plant into
//   y'   = a1 y + a2 eta + gamma u
//   eta' = a3 y + a4 eta
// gamma = C*B must be invertible. The eta rows of V annihilate B, so no
// direct input term appears in the internal dynamics.
struct ByrnesIsidoriData {
  Eigen::MatrixXd a1;           // m x m
  Eigen::MatrixXd a2;           // m x (n-m)
  Eigen::MatrixXd a3;           // (n-m) x m
  Eigen::MatrixXd a4;           // (n-m) x (n-m)
  Eigen::MatrixXd gamma;        // m x m, invertible
  Eigen::MatrixXd transform_v;  // n x n, z = V x
};

ByrnesIsidoriData byrnes_isidori_decompose(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                           const Eigen::MatrixXd& c);

// Plant already written in output/internal coordinates:
//   y'   = p(y, eta) + gamma(y, eta) u
//   eta' = q(y, eta)
struct BifSystem {
  int m = 0;
  int eta_dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> eval_p;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> eval_q;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> eval_gamma;
  std::string label;
};

BifSystem bif_from_linear(const ByrnesIsidoriData& data);

// State z = (y, eta), f = (p, q), g = [gamma; 0], h = y. Useful for
// simulating a decomposed plant directly.
DynamicalSystem bif_to_system(const BifSystem& bif);

// Continuous stirred-tank reactor with an exothermic reaction.
// State (y, x1, x2): temperature, reactant and product concentrations.
// y' = b*r - q*y + u, x1' = c1*r + d*(x1_in - x1), x2' = c2*r + d*(x2_in - x2)
// with Arrhenius rate r = k0*exp(-k1/y)*x1. Output is y, so the
// high-frequency gain is identically 1. Temperature must stay positive;
// evaluation at y <= 0 throws std::domain_error.
struct ReactorParams {
  double b = 209.2;
  double c1 = -1.0;
  double c2 = 1.0;
  double k0 = 72004899337.38588;  // exp(25)
  double k1 = 8700.0;
  double d = 1.1;
  double q = 1.25;
  double x1_in = 1.0;
  double x2_in = 0.0;
};

DynamicalSystem exothermic_reactor(const ReactorParams& params = {});
BifSystem exothermic_reactor_bif(const ReactorParams& params = {});

// Mass m2 sliding on a car of mass m1, coupled by a spring-damper (k, d)
// on a ramp inclined by theta. Output is the horizontal position of the
// mass. theta in (0, pi/2) gives relative degree 2; theta = 0 gives 3.
// Requires theta in [0, pi/2), positive masses, positive k and d.
DynamicalSystem mass_on_car(double theta, double m1, double m2, double k, double d);

// Invertibility sweep of the high-frequency gain h'(x) g(x).
struct HighFrequencyGainProbe {
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> eval_gamma;
  double min_singular_value_seen = 0.0;
  double tolerance = 1e-10;
  bool invertible_everywhere = false;
  std::optional<Eigen::VectorXd> failing_point;
};

HighFrequencyGainProbe probe_relative_degree_one(const DynamicalSystem& sys,
                                                 const std::vector<Eigen::VectorXd>& points,
                                                 double tolerance = 1e-10);

}  // namespace fmpc
