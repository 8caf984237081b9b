#include "fmpc/feasibility.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace fmpc {

namespace {

constexpr int kHaltonPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};

double radical_inverse(long index, int base) {
  double result = 0.0;
  double digit_weight = 1.0 / base;
  while (index > 0) {
    result += (index % base) * digit_weight;
    index /= base;
    digit_weight /= base;
  }
  return result;
}

std::string format_point(const Eigen::VectorXd& v) {
  std::ostringstream out;
  out << '(';
  for (int i = 0; i < v.size(); ++i) {
    if (i) out << ", ";
    out << v[i];
  }
  out << ')';
  return out.str();
}

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return m.jacobiSvd().singularValues()[0];
}

// |gamma^-1| in the 2-norm; throws when gamma is not safely invertible.
double inverse_norm_or_throw(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& at) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gamma);
  const auto& sv = svd.singularValues();
  const double smax = sv[0];
  const double smin = sv[sv.size() - 1];
  if (!(smin > 1e-12 * std::max(1.0, smax))) {
    throw std::domain_error("feasibility bound: high-frequency gain is numerically singular at " +
                            format_point(at));
  }
  return 1.0 / smin;
}

}  // namespace

std::string BoxSet::describe() const {
  std::ostringstream out;
  for (int i = 0; i < lo.size(); ++i) {
    if (i) out << " x ";
    out << '[' << lo[i] << ", " << hi[i] << ']';
  }
  return out.str();
}

FeasibilityBound bound_general(const BifSystem& bif, const FunnelSpec& funnel,
                               const ReferenceSignal& yref, const BoxSet& box, int samples,
                               double safety) {
  const int dim = bif.m + bif.eta_dim;
  if (box.lo.size() != dim || box.hi.size() != dim)
    throw std::invalid_argument("bound_general: box dimension does not match m + eta_dim");
  for (int i = 0; i < dim; ++i)
    if (!(box.lo[i] <= box.hi[i]))
      throw std::invalid_argument("bound_general: box has lo > hi in coordinate " +
                                  std::to_string(i));
  if (dim > 10) throw std::invalid_argument("bound_general: more than 10 box dimensions");
  if (samples < 1) throw std::invalid_argument("bound_general: samples must be positive");
  if (!(safety >= 1.0)) throw std::invalid_argument("bound_general: safety factor must be >= 1");

  double p_max = 0.0;
  double g_max = 0.0;
  auto visit = [&](const Eigen::VectorXd& z) {
    const Eigen::VectorXd y = z.head(bif.m);
    const Eigen::VectorXd eta = z.tail(bif.eta_dim);
    p_max = std::max(p_max, bif.eval_p(y, eta).norm());
    g_max = std::max(g_max, inverse_norm_or_throw(bif.eval_gamma(y, eta), z));
  };

  visit(0.5 * (box.lo + box.hi));
  // Corners catch the exact maximum when p is affine and gamma constant.
  for (long mask = 0; mask < (1L << dim); ++mask) {
    Eigen::VectorXd z(dim);
    for (int i = 0; i < dim; ++i) z[i] = (mask >> i) & 1 ? box.hi[i] : box.lo[i];
    visit(z);
  }
  for (long k = 1; k <= samples; ++k) {
    Eigen::VectorXd z(dim);
    for (int i = 0; i < dim; ++i)
      z[i] = box.lo[i] + radical_inverse(k, kHaltonPrimes[i]) * (box.hi[i] - box.lo[i]);
    visit(z);
  }

  FeasibilityBound bound;
  bound.p_max = p_max;
  bound.g_max = g_max;
  bound.psi_dot_sup = funnel.sup_psi_dot;
  bound.yref_dot_sup = yref.sup_norm_dot;
  bound.safety_factor = safety;
  bound.compact_set_descriptor = box.describe();
  bound.m_value = safety * g_max * (p_max + funnel.sup_psi_dot + yref.sup_norm_dot);
  return bound;
}

FeasibilityBound bound_linear(const ByrnesIsidoriData& bif, const FunnelSpec& funnel,
                              const ReferenceSignal& yref, double eta0_radius,
                              std::optional<std::pair<double, double>> alpha_beta,
                              double t_check) {
  if (!(eta0_radius >= 0.0)) throw std::invalid_argument("bound_linear: eta0_radius must be >= 0");
  if (!(t_check > 0.0)) throw std::invalid_argument("bound_linear: t_check must be positive");

  const int eta_dim = static_cast<int>(bif.a4.rows());
  const double n_a1 = spectral_norm(bif.a1);
  const double n_a2 = spectral_norm(bif.a2);
  const double n_a3 = spectral_norm(bif.a3);
  const double g_inv = inverse_norm_or_throw(bif.gamma, Eigen::VectorXd::Zero(0));

  double alpha = 0.0;
  double beta = 0.0;
  if (eta_dim > 0) {
    const Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::MatrixXd>(bif.a4).eigenvalues();
    const double abscissa = eig.real().maxCoeff();
    if (!(abscissa < 0.0)) {
      std::ostringstream msg;
      msg << "bound_linear: internal dynamics must be exponentially stable, spectral abscissa = "
          << abscissa;
      throw std::invalid_argument(msg.str());
    }

    const int n_check = 2000;
    if (alpha_beta) {
      alpha = alpha_beta->first;
      beta = alpha_beta->second;
      if (!(alpha > 0.0) || !(beta > 0.0))
        throw std::invalid_argument("bound_linear: alpha and beta must be positive");
    } else {
      // Back off from the spectral abscissa so t -> e^(alpha t)|exp(a4 t)|
      // decays, then read beta off the sampled transient.
      alpha = 0.9 * (-abscissa);
      double peak = 1.0;  // t = 0 gives the identity
      for (int i = 1; i <= n_check; ++i) {
        const double t = t_check * i / n_check;
        peak = std::max(peak, std::exp(alpha * t) * spectral_norm((bif.a4 * t).exp().eval()));
      }
      beta = peak * (1.0 + 1e-6);
    }

    for (int i = 0; i <= n_check; ++i) {
      const double t = t_check * i / n_check;
      const double norm_t = spectral_norm((bif.a4 * t).exp().eval());
      if (norm_t > beta * std::exp(-alpha * t) * (1.0 + 1e-9) + 1e-12) {
        std::ostringstream msg;
        msg << "bound_linear: decay estimate fails at t = " << t << ": |exp(a4 t)| = " << norm_t
            << " > " << beta * std::exp(-alpha * t);
        throw std::invalid_argument(msg.str());
      }
    }
  }

  const double output_level = funnel.sup_psi + yref.sup_norm;
  const double coupling = eta_dim > 0 ? (beta / alpha) * n_a2 * n_a3 : 0.0;
  const double transient = eta_dim > 0 ? beta * n_a2 * eta0_radius : 0.0;
  const double p_max = (n_a1 + coupling) * output_level + transient;

  FeasibilityBound bound;
  bound.p_max = p_max;
  bound.g_max = g_inv;
  bound.psi_dot_sup = funnel.sup_psi_dot;
  bound.yref_dot_sup = yref.sup_norm_dot;
  bound.safety_factor = 1.0;
  bound.alpha = alpha;
  bound.beta = beta;
  {
    std::ostringstream desc;
    desc << "funnel tube, |eta(0)| <= " << eta0_radius;
    bound.compact_set_descriptor = desc.str();
  }
  bound.m_value = g_inv * (p_max + funnel.sup_psi_dot + yref.sup_norm_dot);
  return bound;
}

CounterexampleCertificate counterexample_eta0(double m_bound, double horizon) {
  if (!(m_bound >= 0.0)) throw std::invalid_argument("counterexample_eta0: m_bound must be >= 0");
  if (!(horizon > 0.0)) throw std::invalid_argument("counterexample_eta0: horizon must be positive");

  Eigen::MatrixXd a(2, 2), b(2, 1), c(1, 2);
  a << 0, 1, 0, 0;
  b << 1, 0;
  c << 1, 0;

  CounterexampleCertificate cert;
  cert.sys = linear_system(a, b, c);
  cert.sys.label = "integrator with constant internal drift";
  cert.eta0 = m_bound + 2.0 / horizon;
  cert.m_bound = m_bound;
  cert.horizon = horizon;
  cert.x0 = Eigen::VectorXd::Zero(2);
  cert.x0[1] = cert.eta0;
  // y(T) = eta0*T + integral of u >= (m + 2/T)*T - m*T = 2.
  cert.error_lower_bound_at_horizon = 2.0;
  return cert;
}

FeedbackLaw constructed_feedback(const BifSystem& bif, const FunnelSpec& funnel,
                                 const ReferenceSignal& yref, double t0,
                                 const Eigen::VectorXd& e0) {
  if (e0.size() != bif.m)
    throw std::invalid_argument("constructed_feedback: e0 dimension does not match the output");
  const double phi0 = funnel.eval_phi(t0);
  if (!(phi0 * e0.norm() < 1.0))
    throw std::invalid_argument("constructed_feedback: e0 must start strictly inside the funnel");

  FeedbackLaw law;
  law.eval = [bif, funnel, yref, phi0, e0](double t, const Eigen::VectorXd& z) {
    const Eigen::VectorXd y = z.head(bif.m);
    const Eigen::VectorXd eta = z.tail(z.size() - bif.m);
    const Eigen::VectorXd rhs =
        -bif.eval_p(y, eta) + phi0 * funnel.eval_psi_dot(t) * e0 + yref.eval_yref_dot(t);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(bif.eval_gamma(y, eta));
    if (!lu.isInvertible())
      throw std::domain_error("constructed feedback: high-frequency gain singular at " +
                              format_point(z));
    return Eigen::VectorXd(lu.solve(rhs));
  };
  return law;
}

}  // namespace fmpc
