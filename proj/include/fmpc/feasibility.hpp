#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>

#include "fmpc/funnel.hpp"
#include "fmpc/ode.hpp"
#include "fmpc/systems.hpp"

namespace fmpc {

// Input budget certificate: any bound M >= g_max*(p_max + psi_dot_sup +
// yref_dot_sup) admits a feedback that keeps the error inside the funnel
// for initial data in the certified compact set.
struct FeasibilityBound {
  double m_value = 0.0;
  double p_max = 0.0;          // max |p| over the set
  double g_max = 0.0;          // max |gamma^-1| (spectral norm) over the set
  double psi_dot_sup = 0.0;
  double yref_dot_sup = 0.0;
  double safety_factor = 1.0;
  std::string compact_set_descriptor;
  // Linear path only: validated decay estimate |exp(a4 t)| <= beta e^(-alpha t).
  double alpha = 0.0;
  double beta = 0.0;
};

// Axis-aligned box over the stacked (y, eta) coordinates.
struct BoxSet {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  std::string describe() const;
};

// Deterministic maximization of |p| and |gamma^-1| over the box using a
// Halton low-discrepancy sweep plus the box corners and center, then
// m_value = safety * g_max * (p_max + sup|psi'| + sup|yref'|).
// Throws if gamma is numerically singular anywhere, naming the point.
FeasibilityBound bound_general(const BifSystem& bif, const FunnelSpec& funnel,
                               const ReferenceSignal& yref, const BoxSet& box,
                               int samples = 10000, double safety = 1.1);

// Closed-form budget for linear plants in output/internal coordinates:
//   M = |G^-1| ( (|a1| + (beta/alpha)|a2||a3|) (sup psi + sup|yref|)
//                + beta |a2| eta0_radius + sup|psi'| + sup|yref'| )
// with operator 2-norms. Requires a4 Hurwitz. The decay pair
// (alpha, beta) is taken from the argument or estimated from the
// spectral abscissa and a sampled transient bound, and is always
// validated by sampling |exp(a4 t)| <= beta e^(-alpha t) on [0, t_check].
FeasibilityBound bound_linear(const ByrnesIsidoriData& bif, const FunnelSpec& funnel,
                              const ReferenceSignal& yref, double eta0_radius,
                              std::optional<std::pair<double, double>> alpha_beta = std::nullopt,
                              double t_check = 20.0);

// No input budget is ever sufficient for all initial internal states:
// for y' = eta + u, eta' = 0 under |u| <= m_bound, the internal value
// eta0 = m_bound + 2/horizon forces |e(horizon)| >= 2 from y0 = 0, which
// lies outside every funnel of radius <= 1 at that time.
struct CounterexampleCertificate {
  DynamicalSystem sys;     // 2-state: y' = eta + u, eta' = 0
  Eigen::VectorXd x0;      // (0, eta0)
  double eta0 = 0.0;
  double m_bound = 0.0;
  double horizon = 0.0;
  double error_lower_bound_at_horizon = 2.0;
};

CounterexampleCertificate counterexample_eta0(double m_bound, double horizon);

// The feedback behind the bound: u = gamma^-1(-p + phi(t0) e0 psi'(t)
// + yref'(t)) on the (y, eta) state, which steers the error along
// phi(t0)|e0| psi(t), a strict copy of the shrinking radius.
FeedbackLaw constructed_feedback(const BifSystem& bif, const FunnelSpec& funnel,
                                 const ReferenceSignal& yref, double t0,
                                 const Eigen::VectorXd& e0);

}  // namespace fmpc
