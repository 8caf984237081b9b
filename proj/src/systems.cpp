#include "fmpc/systems.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fmpc {

namespace {

// Smallest singular value; the invertibility test used throughout.
double min_singular_value(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues().minCoeff();
}

int detect_relative_degree(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                           const Eigen::MatrixXd& c, double tol = 1e-10) {
  Eigen::MatrixXd ca = c;
  const double scale = std::max(1.0, c.norm() * b.norm());
  for (int k = 1; k <= a.rows(); ++k) {
    Eigen::MatrixXd markov = ca * b;  // C A^{k-1} B
    if (min_singular_value(markov) > tol * scale) return k;
    ca = ca * a;
  }
  return 0;
}

}  // namespace

Eigen::VectorXd DynamicalSystem::xdot(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  return eval_f(x) + eval_g(x) * u;
}

DynamicalSystem linear_system(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const Eigen::MatrixXd& c, bool require_relative_degree_one) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.cols());
  if (a.cols() != n) throw std::invalid_argument("linear_system: A must be square");
  if (b.rows() != n) throw std::invalid_argument("linear_system: B row count must match A");
  if (c.cols() != n || c.rows() != m)
    throw std::invalid_argument("linear_system: C must be m x n with m = input dimension");

  if (require_relative_degree_one) {
    const Eigen::MatrixXd cb = c * b;
    if (min_singular_value(cb) <= 1e-10 * std::max(1.0, c.norm() * b.norm()))
      throw std::invalid_argument(
          "linear_system: C*B is singular, so the output has no direct input coupling; "
          "drop the relative-degree-one requirement or change C/B");
  }

  DynamicalSystem sys;
  sys.state_dim = n;
  sys.io_dim = m;
  sys.eval_f = [a](const Eigen::VectorXd& x) -> Eigen::VectorXd { return a * x; };
  sys.eval_g = [b](const Eigen::VectorXd&) -> Eigen::MatrixXd { return b; };
  sys.eval_h = [c](const Eigen::VectorXd& x) -> Eigen::VectorXd { return c * x; };
  sys.eval_h_jacobian = [c](const Eigen::VectorXd&) -> Eigen::MatrixXd { return c; };
  sys.linear = DynamicalSystem::LinearRealization{a, b, c};
  sys.relative_degree = detect_relative_degree(a, b, c);
  sys.label = "linear";
  return sys;
}

ByrnesIsidoriData byrnes_isidori_decompose(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                           const Eigen::MatrixXd& c) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.cols());
  if (a.cols() != n || b.rows() != n || c.cols() != n || c.rows() != m)
    throw std::invalid_argument("byrnes_isidori_decompose: dimension mismatch");

  const Eigen::MatrixXd gamma = c * b;
  if (min_singular_value(gamma) <= 1e-10 * std::max(1.0, c.norm() * b.norm()))
    throw std::invalid_argument("byrnes_isidori_decompose: C*B singular (relative degree > 1)");

  Eigen::MatrixXd v(n, n);
  v.topRows(m) = c;
  if (n > m) {
    // Rows spanning ker(B^T): the left singular vectors beyond rank m.
    // N B = 0 keeps the input out of the internal dynamics.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeFullU);
    Eigen::MatrixXd nrows = svd.matrixU().rightCols(n - m).transpose();
    // Pin the sign of each kernel row so equal inputs give equal output.
    for (int i = 0; i < nrows.rows(); ++i) {
      for (int j = 0; j < nrows.cols(); ++j) {
        if (std::abs(nrows(i, j)) > 1e-12) {
          if (nrows(i, j) < 0.0) nrows.row(i) = -nrows.row(i);
          break;
        }
      }
    }
    v.bottomRows(n - m) = nrows;
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(v);
  if (!lu.isInvertible())
    throw std::invalid_argument("byrnes_isidori_decompose: transform is singular");
  const Eigen::MatrixXd a_z = v * a * lu.inverse();

  ByrnesIsidoriData data;
  data.gamma = gamma;
  data.transform_v = v;
  data.a1 = a_z.topLeftCorner(m, m);
  data.a2 = a_z.topRightCorner(m, n - m);
  data.a3 = a_z.bottomLeftCorner(n - m, m);
  data.a4 = a_z.bottomRightCorner(n - m, n - m);
  return data;
}

BifSystem bif_from_linear(const ByrnesIsidoriData& data) {
  BifSystem bif;
  bif.m = static_cast<int>(data.a1.rows());
  bif.eta_dim = static_cast<int>(data.a4.rows());
  const Eigen::MatrixXd a1 = data.a1, a2 = data.a2, a3 = data.a3, a4 = data.a4, g = data.gamma;
  bif.eval_p = [a1, a2](const Eigen::VectorXd& y, const Eigen::VectorXd& eta) -> Eigen::VectorXd {
    return a1 * y + a2 * eta;
  };
  bif.eval_q = [a3, a4](const Eigen::VectorXd& y, const Eigen::VectorXd& eta) -> Eigen::VectorXd {
    return a3 * y + a4 * eta;
  };
  bif.eval_gamma = [g](const Eigen::VectorXd&, const Eigen::VectorXd&) -> Eigen::MatrixXd {
    return g;
  };
  bif.label = "linear";
  return bif;
}

DynamicalSystem bif_to_system(const BifSystem& bif) {
  const int m = bif.m;
  const int n = bif.m + bif.eta_dim;
  DynamicalSystem sys;
  sys.state_dim = n;
  sys.io_dim = m;
  auto p = bif.eval_p;
  auto q = bif.eval_q;
  auto g = bif.eval_gamma;
  sys.eval_f = [p, q, m, n](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    Eigen::VectorXd out(n);
    out.head(m) = p(z.head(m), z.tail(n - m));
    out.tail(n - m) = q(z.head(m), z.tail(n - m));
    return out;
  };
  sys.eval_g = [g, m, n](const Eigen::VectorXd& z) -> Eigen::MatrixXd {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, m);
    out.topRows(m) = g(z.head(m), z.tail(n - m));
    return out;
  };
  sys.eval_h = [m](const Eigen::VectorXd& z) -> Eigen::VectorXd { return z.head(m); };
  sys.eval_h_jacobian = [m, n](const Eigen::VectorXd&) -> Eigen::MatrixXd {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(m, n);
    j.leftCols(m).setIdentity();
    return j;
  };
  sys.relative_degree = 1;
  sys.label = bif.label.empty() ? "bif" : bif.label;
  return sys;
}

namespace {

double arrhenius_rate(const ReactorParams& p, double y, double x1) {
  if (!(y > 0.0)) {
    std::ostringstream msg;
    msg << "exothermic_reactor: temperature " << y << " outside domain (must be positive)";
    throw std::domain_error(msg.str());
  }
  return p.k0 * std::exp(-p.k1 / y) * x1;
}

}  // namespace

DynamicalSystem exothermic_reactor(const ReactorParams& params) {
  DynamicalSystem sys;
  sys.state_dim = 3;
  sys.io_dim = 1;
  sys.eval_f = [params](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const double y = x(0), x1 = x(1), x2 = x(2);
    const double r = arrhenius_rate(params, y, x1);
    Eigen::VectorXd f(3);
    f(0) = params.b * r - params.q * y;
    f(1) = params.c1 * r + params.d * (params.x1_in - x1);
    f(2) = params.c2 * r + params.d * (params.x2_in - x2);
    return f;
  };
  sys.eval_g = [](const Eigen::VectorXd&) -> Eigen::MatrixXd {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 1);
    g(0, 0) = 1.0;
    return g;
  };
  sys.eval_h = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x.head(1); };
  sys.eval_h_jacobian = [](const Eigen::VectorXd&) -> Eigen::MatrixXd {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(1, 3);
    j(0, 0) = 1.0;
    return j;
  };
  sys.relative_degree = 1;  // h' g = 1 identically
  sys.label = "exothermic_reactor";
  return sys;
}

BifSystem exothermic_reactor_bif(const ReactorParams& params) {
  BifSystem bif;
  bif.m = 1;
  bif.eta_dim = 2;
  bif.eval_p = [params](const Eigen::VectorXd& y, const Eigen::VectorXd& eta) -> Eigen::VectorXd {
    const double r = arrhenius_rate(params, y(0), eta(0));
    Eigen::VectorXd p(1);
    p(0) = params.b * r - params.q * y(0);
    return p;
  };
  bif.eval_q = [params](const Eigen::VectorXd& y, const Eigen::VectorXd& eta) -> Eigen::VectorXd {
    const double r = arrhenius_rate(params, y(0), eta(0));
    Eigen::VectorXd q(2);
    q(0) = params.c1 * r + params.d * (params.x1_in - eta(0));
    q(1) = params.c2 * r + params.d * (params.x2_in - eta(1));
    return q;
  };
  bif.eval_gamma = [](const Eigen::VectorXd&, const Eigen::VectorXd&) -> Eigen::MatrixXd {
    return Eigen::MatrixXd::Identity(1, 1);
  };
  bif.label = "exothermic_reactor";
  return bif;
}

DynamicalSystem mass_on_car(double theta, double m1, double m2, double k, double d) {
  if (!(theta >= 0.0) || !(theta < M_PI / 2.0))
    throw std::invalid_argument("mass_on_car: theta must lie in [0, pi/2)");
  if (!(m1 > 0.0) || !(m2 > 0.0) || !(k > 0.0) || !(d > 0.0))
    throw std::invalid_argument("mass_on_car: masses, stiffness and damping must be positive");

  const double s = std::sin(theta), co = std::cos(theta);
  const double mu = m2 * (m1 + m2 * s * s);
  const double mu1 = m1 / mu;
  const double mu2 = m2 / mu;

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
  a(0, 1) = 1.0;
  a(1, 2) = mu2 * k * co;
  a(1, 3) = mu2 * d * co;
  a(2, 3) = 1.0;
  a(3, 2) = -(mu1 + mu2) * k;
  a(3, 3) = -(mu1 + mu2) * d;

  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(4, 1);
  b(1, 0) = mu2;
  b(3, 0) = -mu2 * co;

  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(1, 4);
  c(0, 0) = 1.0;
  c(0, 2) = co;

  DynamicalSystem sys = linear_system(a, b, c);
  sys.label = "mass_on_car";
  // C B = 0 for every ramp angle; C A B = mu2 sin^2(theta) drives the
  // split between the two cases, C A^2 B = d mu1 mu2 cos^2(theta).
  sys.relative_degree = (theta > 0.0) ? 2 : 3;
  return sys;
}

HighFrequencyGainProbe probe_relative_degree_one(const DynamicalSystem& sys,
                                                 const std::vector<Eigen::VectorXd>& points,
                                                 double tolerance) {
  if (points.empty())
    throw std::invalid_argument("probe_relative_degree_one: need at least one sample point");
  HighFrequencyGainProbe probe;
  probe.tolerance = tolerance;
  auto hj = sys.eval_h_jacobian;
  auto g = sys.eval_g;
  probe.eval_gamma = [hj, g](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    return hj(x) * g(x);
  };
  probe.min_singular_value_seen = std::numeric_limits<double>::infinity();
  probe.invertible_everywhere = true;
  for (const auto& x : points) {
    const double sv = min_singular_value(probe.eval_gamma(x));
    if (sv < probe.min_singular_value_seen) probe.min_singular_value_seen = sv;
    if (sv <= tolerance && probe.invertible_everywhere) {
      probe.invertible_everywhere = false;
      probe.failing_point = x;
    }
  }
  return probe;
}

}  // namespace fmpc
