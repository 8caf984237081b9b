#include "fmpc/funnel_controller.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace fmpc {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// a(s) = 1/(1-s) on s < 1.
double sat_recip(double s) { return 1.0 / (1.0 - s); }

// g(s) = s/(1-s^2) on |s| < 1.
double sat_odd(double s) { return s / (1.0 - s * s); }

}  // namespace

Eigen::VectorXd feedback_deg1(double phi_t, const Eigen::VectorXd& e) {
  const double gap = 1.0 - phi_t * phi_t * e.squaredNorm();
  if (!(gap > 0.0) || !std::isfinite(gap))
    return Eigen::VectorXd::Constant(e.size(), kNan);
  return -e / gap;
}

double feedback_deg2(double phi_t, double e, double e_dot) {
  const double s1 = phi_t * phi_t * e * e;
  if (!(s1 < 1.0)) return kNan;
  const double w = phi_t * e_dot + sat_recip(s1) * phi_t * e;
  const double s2 = w * w;
  if (!(s2 < 1.0)) return kNan;
  return -sat_recip(s2) * w;
}

double feedback_deg3(double phi_t, double e, double e_dot, double e_ddot) {
  const double s1 = phi_t * e;
  if (!(std::abs(s1) < 1.0)) return kNan;
  const double inner = phi_t * e_dot + sat_odd(s1);
  if (!(std::abs(inner) < 1.0)) return kNan;
  const double w = phi_t * e_ddot + sat_odd(inner);
  if (!(std::abs(w) < 1.0)) return kNan;
  return -sat_odd(w);
}

Eigen::VectorXd FunnelFeedback::eval(double t, const Eigen::VectorXd& x) const {
  const double phi = funnel.eval_phi(t);
  if (degree == 1) {
    const Eigen::VectorXd e = output_of(x) - yref.eval_yref(t);
    return feedback_deg1(phi, e);
  }
  const ErrorState err = error_chain(t, x);
  Eigen::VectorXd u(1);
  u(0) = (degree == 2) ? feedback_deg2(phi, err.e, err.e_dot)
                       : feedback_deg3(phi, err.e, err.e_dot, err.e_ddot);
  return u;
}

FeedbackLaw FunnelFeedback::as_law() const {
  FunnelFeedback copy = *this;
  FeedbackLaw law;
  law.eval = [copy](double t, const Eigen::VectorXd& x) { return copy.eval(t, x); };
  return law;
}

FunnelFeedback make_funnel_feedback(const DynamicalSystem& sys, int degree,
                                    const FunnelSpec& funnel, const ReferenceSignal& yref) {
  if (degree < 1 || degree > 3)
    throw std::invalid_argument("make_funnel_feedback: degree must be 1, 2 or 3");
  FunnelFeedback fb;
  fb.degree = degree;
  fb.funnel = funnel;
  fb.yref = yref;
  if (degree == 1) {
    auto h = sys.eval_h;
    fb.output_of = [h](const Eigen::VectorXd& x) { return h(x); };
    return fb;
  }
  if (sys.io_dim != 1)
    throw std::invalid_argument("make_funnel_feedback: degrees 2 and 3 need a scalar output");
  if (!sys.linear)
    throw std::invalid_argument(
        "make_funnel_feedback: degrees 2 and 3 need a linear realization for exact error "
        "derivatives");
  if (sys.relative_degree != degree)
    throw std::invalid_argument(
        "make_funnel_feedback: feedback degree must match the plant's relative degree, "
        "otherwise the error derivatives would involve the input");

  // Relative degree >= 2 makes CB = 0 (and CAB = 0 at degree 3), so the
  // error derivatives below are exact along any input signal.
  const Eigen::RowVectorXd c = sys.linear->c.row(0);
  const Eigen::RowVectorXd ca = c * sys.linear->a;
  const Eigen::RowVectorXd ca2 = ca * sys.linear->a;
  ReferenceSignal ref = yref;
  fb.error_chain = [c, ca, ca2, ref](double t, const Eigen::VectorXd& x) {
    ErrorState err;
    err.e = c.dot(x) - ref.eval_yref(t)(0);
    err.e_dot = ca.dot(x) - ref.eval_yref_dot(t)(0);
    err.e_ddot = ca2.dot(x) - ref.eval_yref_ddot(t)(0);
    return err;
  };
  return fb;
}

FeedbackLaw sampled_hold(FeedbackLaw inner, double sample_dt, double t_origin) {
  if (!(sample_dt > 0.0)) throw std::invalid_argument("sampled_hold: sample_dt must be positive");
  struct HoldState {
    long index = std::numeric_limits<long>::min();
    Eigen::VectorXd held;
  };
  auto state = std::make_shared<HoldState>();
  FeedbackLaw law;
  law.on_node = [inner, state, sample_dt, t_origin](double t, const Eigen::VectorXd& x) {
    if (inner.on_node) inner.on_node(t, x);
    const long idx = static_cast<long>(std::floor((t - t_origin) / sample_dt + 1e-9));
    if (idx > state->index) {
      state->index = idx;
      state->held = inner.eval(t, x);
    }
  };
  law.eval = [state](double, const Eigen::VectorXd&) -> Eigen::VectorXd {
    if (state->index == std::numeric_limits<long>::min())
      throw std::domain_error("sampled_hold: evaluated before the first node refresh");
    return state->held;
  };
  return law;
}

}  // namespace fmpc
