#include "fmpc/ode.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "fmpc/funnel.hpp"
#include "fmpc/trace.hpp"
#include "test_util.hpp"

using fmpc::constant_funnel;
using fmpc::constant_reference;
using fmpc::ControlTrajectory;
using fmpc::DynamicalSystem;
using fmpc::EscapeReason;
using fmpc::FeedbackLaw;
using fmpc::integrate_closed_loop;
using fmpc::integrate_open_loop;
using fmpc::IntegratorConfig;
using fmpc::SimulationTrace;
using fmpc::TimeGrid;
using fmpc::write_trace_csv;
using testutil::vec1;
using testutil::vec2;

namespace {

// Scalar plant x' = f(x) + g_gain*u, y = x.
DynamicalSystem scalar_plant(std::function<double(double)> f, double g_gain) {
  DynamicalSystem sys;
  sys.state_dim = 1;
  sys.io_dim = 1;
  sys.eval_f = [f](const Eigen::VectorXd& x) { return vec1(f(x[0])); };
  sys.eval_g = [g_gain](const Eigen::VectorXd&) {
    Eigen::MatrixXd g(1, 1);
    g << g_gain;
    return g;
  };
  sys.eval_h = [](const Eigen::VectorXd& x) { return x; };
  sys.eval_h_jacobian = [](const Eigen::VectorXd&) {
    Eigen::MatrixXd j(1, 1);
    j << 1.0;
    return j;
  };
  sys.label = "scalar";
  return sys;
}

DynamicalSystem integrator_plant() {
  return scalar_plant([](double) { return 0.0; }, 1.0);
}

IntegratorConfig substeps(int n) {
  IntegratorConfig cfg;
  cfg.substeps_per_interval = n;
  return cfg;
}

}  // namespace

TEST_SUITE("ode") {

TEST_CASE("quadrature of a cubic in time is exact") {
  // State (x, tau) with x' = tau^3: the Runge-Kutta weights reduce to
  // Simpson's rule, which integrates cubics without error.
  DynamicalSystem sys;
  sys.state_dim = 2;
  sys.io_dim = 1;
  sys.eval_f = [](const Eigen::VectorXd& x) { return vec2(x[1] * x[1] * x[1], 1.0); };
  sys.eval_g = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(2, 1); };
  sys.eval_h = [](const Eigen::VectorXd& x) { return vec1(x[0]); };

  const TimeGrid grid(0.0, 1.0, 1);
  const auto u = ControlTrajectory::zero(grid, 1, 1.0);
  const auto res = integrate_open_loop(sys, vec2(0.0, 0.0), u, substeps(10));
  REQUIRE(res.ok());
  CHECK(std::abs(res.trace.x.back()[0] - 0.25) <= 1e-14);
}

TEST_CASE("fourth-order convergence on exponential decay") {
  const auto sys = scalar_plant([](double x) { return -x; }, 0.0);
  const TimeGrid grid(0.0, 1.0, 1);
  const auto u = ControlTrajectory::zero(grid, 1, 1.0);
  const double exact = std::exp(-1.0);

  double err[4];
  int n = 10;
  for (int i = 0; i < 4; ++i, n *= 2) {
    const auto res = integrate_open_loop(sys, vec1(1.0), u, substeps(n));
    REQUIRE(res.ok());
    err[i] = std::abs(res.trace.x.back()[0] - exact);
  }
  CHECK(err[0] == doctest::Approx(3.332410561e-7).epsilon(1e-6));
  for (int i = 0; i < 3; ++i) {
    const double ratio = err[i] / err[i + 1];
    CHECK(ratio >= 14.0);
    CHECK(ratio <= 18.0);
  }
}

TEST_CASE("open and closed loop agree bit for bit on a constant input") {
  const auto sys = integrator_plant();
  const TimeGrid grid(0.0, 1.5, 3);
  const auto u = ControlTrajectory::constant(grid, vec1(0.7), 1.0);
  const auto open = integrate_open_loop(sys, vec1(0.2), u, substeps(20));

  FeedbackLaw law;
  law.eval = [](double, const Eigen::VectorXd&) { return vec1(0.7); };
  const auto closed = integrate_closed_loop(sys, vec1(0.2), law, grid, substeps(20));

  REQUIRE(open.ok());
  REQUIRE(closed.ok());
  REQUIRE(open.trace.size() == closed.trace.size());
  for (int j = 0; j < open.trace.size(); ++j) {
    CHECK(open.trace.t[j] == closed.trace.t[j]);
    CHECK(open.trace.x[j][0] == closed.trace.x[j][0]);
    CHECK(open.trace.u[j][0] == closed.trace.u[j][0]);
  }
}

TEST_CASE("control jumps land on substep boundaries, never smeared") {
  const auto sys = integrator_plant();
  const TimeGrid grid(0.0, 1.0, 2);
  ControlTrajectory u = ControlTrajectory::zero(grid, 1, 2.0);
  u.values[1] = vec1(1.0);
  const auto res = integrate_open_loop(sys, vec1(0.0), u, substeps(4));
  REQUIRE(res.ok());
  const auto& tr = res.trace;
  REQUIRE(tr.size() == 9);

  // Substep nodes hit the control nodes exactly.
  CHECK(tr.t[0] == grid.node(0));
  CHECK(tr.t[4] == grid.node(1));
  CHECK(tr.t[8] == grid.node(2));

  // h = 0.125 is a power of two, so the quadrature is exact: nothing
  // moves during the first interval and the second adds exactly 0.5.
  for (int j = 0; j <= 4; ++j) CHECK(tr.x[j][0] == 0.0);
  CHECK(tr.x.back()[0] == 0.5);

  // Input column switches at the node, final node repeats the last value.
  CHECK(tr.u[3][0] == 0.0);
  CHECK(tr.u[4][0] == 1.0);
  CHECK(tr.u[8][0] == 1.0);
}

TEST_CASE("state blowup is bisected to the crossing") {
  const auto sys = scalar_plant([](double x) { return x * x; }, 0.0);
  const TimeGrid grid(0.0, 2.0, 2);
  const auto u = ControlTrajectory::zero(grid, 1, 1.0);
  IntegratorConfig cfg = substeps(100);
  cfg.blowup_norm = 1e6;
  const auto res = integrate_open_loop(sys, vec1(1.0), u, cfg);
  REQUIRE_FALSE(res.ok());
  CHECK(res.escape->reason == EscapeReason::state_norm_blowup);
  CHECK(res.escape->detail == "state norm crossed blowup threshold");
  // x(t) = 1/(1-t) crosses 1e6 just below t = 1; the discrete solution
  // lags the singularity slightly, so allow a little overshoot.
  CHECK(res.escape->time >= 0.9);
  CHECK(res.escape->time <= 1.05);
  CHECK(res.escape->last_state.norm() == doctest::Approx(1e6).epsilon(1e-6));
  CHECK(res.trace.t.back() <= res.escape->time);
  CHECK(fmpc::to_string(res.escape->reason) == "state norm blowup");
}

TEST_CASE("initial state beyond the blowup norm escapes immediately") {
  const auto sys = integrator_plant();
  const TimeGrid grid(0.0, 1.0, 1);
  const auto u = ControlTrajectory::zero(grid, 1, 1.0);
  IntegratorConfig cfg = substeps(10);
  cfg.blowup_norm = 1.0;
  const auto res = integrate_open_loop(sys, vec1(5.0), u, cfg);
  REQUIRE_FALSE(res.ok());
  CHECK(res.escape->time == 0.0);
  CHECK(res.trace.size() == 1);
  CHECK(res.escape->detail == "initial state beyond blowup norm");
}

TEST_CASE("non-finite feedback stops at the current node") {
  const auto sys = integrator_plant();
  const TimeGrid grid(0.0, 1.0, 1);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  FeedbackLaw law;
  law.eval = [nan](double t, const Eigen::VectorXd&) { return vec1(t >= 0.5 ? nan : 1.0); };
  const auto res = integrate_closed_loop(sys, vec1(0.0), law, grid, substeps(100));
  REQUIRE_FALSE(res.ok());
  CHECK(res.escape->reason == EscapeReason::feedback_singularity);
  CHECK(res.escape->detail == "non-finite feedback value");
  // The poisoned stage is reached from the node one step earlier.
  CHECK(res.escape->time >= 0.5 - 0.01 - 1e-12);
  CHECK(res.escape->time < 0.5);
  CHECK(fmpc::to_string(res.escape->reason) == "feedback singularity");
}

TEST_CASE("throwing feedback carries its message into the report") {
  const auto sys = integrator_plant();
  const TimeGrid grid(0.0, 1.0, 1);
  FeedbackLaw law;
  law.eval = [](double t, const Eigen::VectorXd&) -> Eigen::VectorXd {
    if (t >= 0.5) throw std::domain_error("gain exploded");
    return vec1(1.0);
  };
  const auto res = integrate_closed_loop(sys, vec1(0.0), law, grid, substeps(50));
  REQUIRE_FALSE(res.ok());
  CHECK(res.escape->reason == EscapeReason::feedback_singularity);
  CHECK(res.escape->detail == "gain exploded");
}

TEST_CASE("throwing vector field reports a derivative failure") {
  const auto sys = scalar_plant(
      [](double x) -> double {
        if (x > 0.5) throw std::domain_error("left the chart");
        return 1.0;
      },
      0.0);
  const TimeGrid grid(0.0, 1.0, 1);
  const auto u = ControlTrajectory::zero(grid, 1, 1.0);
  const auto res = integrate_open_loop(sys, vec1(0.0), u, substeps(50));
  REQUIRE_FALSE(res.ok());
  CHECK(res.escape->reason == EscapeReason::non_finite_derivative);
  CHECK(res.escape->detail == "left the chart");
  CHECK(res.escape->time == doctest::Approx(0.5).epsilon(0.1));
  CHECK(fmpc::to_string(res.escape->reason) == "non-finite derivative");
}

TEST_CASE("argument validation") {
  const auto sys = integrator_plant();
  const TimeGrid grid(0.0, 1.0, 1);
  const auto u1 = ControlTrajectory::zero(grid, 1, 1.0);
  CHECK_THROWS_AS(integrate_open_loop(sys, vec2(0.0, 0.0), u1, substeps(10)),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      integrate_open_loop(sys, vec1(std::numeric_limits<double>::quiet_NaN()), u1, substeps(10)),
      std::invalid_argument);
  CHECK_THROWS_AS(integrate_open_loop(sys, vec1(0.0), u1, substeps(0)), std::invalid_argument);
  IntegratorConfig bad = substeps(10);
  bad.blowup_norm = -1.0;
  CHECK_THROWS_AS(integrate_open_loop(sys, vec1(0.0), u1, bad), std::invalid_argument);
  const auto u2 = ControlTrajectory::zero(grid, 2, 1.0);
  CHECK_THROWS_AS(integrate_open_loop(sys, vec1(0.0), u2, substeps(10)), std::invalid_argument);
  FeedbackLaw empty;
  CHECK_THROWS_AS(integrate_closed_loop(sys, vec1(0.0), empty, grid, substeps(10)),
                  std::invalid_argument);
}

TEST_CASE("appending a continuation keeps one node per time") {
  const auto sys = integrator_plant();
  const TimeGrid first(0.0, 1.0, 2);
  const TimeGrid second(1.0, 2.0, 2);
  auto a = integrate_open_loop(sys, vec1(0.0), ControlTrajectory::constant(first, vec1(0.3), 1.0),
                               substeps(5));
  const auto b = integrate_open_loop(sys, a.trace.x.back(),
                                     ControlTrajectory::constant(second, vec1(0.9), 1.0),
                                     substeps(5));
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  const int seam = a.trace.size() - 1;
  a.trace.append(b.trace);
  CHECK(a.trace.size() == 21);
  CHECK(a.trace.t.back() == 2.0);
  for (int j = 1; j < a.trace.size(); ++j) CHECK(a.trace.t[j] > a.trace.t[j - 1]);
  // The seam node takes the incoming input value.
  CHECK(a.trace.u[seam][0] == 0.9);
  CHECK(a.trace.u[seam - 1][0] == 0.3);

  // A trace ending at 0.5 cannot be continued by one starting at 1.0.
  const TimeGrid half(0.0, 0.5, 2);
  auto c = integrate_open_loop(sys, vec1(0.0), ControlTrajectory::constant(half, vec1(0.1), 1.0),
                               substeps(5));
  CHECK_THROWS_AS(c.trace.append(b.trace), std::invalid_argument);
}

TEST_CASE("annotation fills reference and funnel columns") {
  const auto sys = integrator_plant();
  const TimeGrid grid(0.0, 1.0, 2);
  auto res = integrate_open_loop(sys, vec1(0.4), ControlTrajectory::constant(grid, vec1(0.5), 1.0),
                                 substeps(10));
  REQUIRE(res.ok());

  CHECK_FALSE(res.trace.annotated());
  CHECK_THROWS_AS(res.trace.min_funnel_margin(), std::logic_error);

  const auto ref = constant_reference(1.0);
  const auto fun = constant_funnel(2.0);
  res.trace.annotate(&ref, &fun);
  REQUIRE(res.trace.annotated());

  double min_margin = 1e300, max_u = 0.0;
  for (int j = 0; j < res.trace.size(); ++j) {
    CHECK(res.trace.yref[j][0] == 1.0);
    CHECK(res.trace.funnel_radius[j] == 2.0);
    const double err = std::abs(res.trace.y[j][0] - 1.0);
    CHECK(res.trace.err_norm[j] == doctest::Approx(err).epsilon(1e-15));
    min_margin = std::min(min_margin, 2.0 - err);
    max_u = std::max(max_u, std::abs(res.trace.u[j][0]));
  }
  CHECK(res.trace.min_funnel_margin() == doctest::Approx(min_margin).epsilon(1e-15));
  CHECK(res.trace.max_input_norm() == doctest::Approx(max_u).epsilon(1e-15));
}

TEST_CASE("trace csv layout") {
  const auto sys = integrator_plant();
  const TimeGrid grid(0.0, 1.0, 1);
  auto res = integrate_open_loop(sys, vec1(1.0 / 3.0),
                                 ControlTrajectory::constant(grid, vec1(0.25), 1.0), substeps(4));
  REQUIRE(res.ok());
  const auto ref = constant_reference(0.0);
  const auto fun = constant_funnel(1.0);
  res.trace.annotate(&ref, &fun);

  std::ostringstream out;
  write_trace_csv(res.trace, out);
  std::istringstream in(out.str());
  std::string header;
  REQUIRE(std::getline(in, header));
  CHECK(header == "t,x_1,y_1,u_1,yref_1,err_norm,funnel_radius");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == res.trace.size());

  // Values are printed with round-trip precision.
  std::istringstream again(out.str());
  std::getline(again, line);   // header
  std::getline(again, line);   // first node
  const auto comma = line.find(',');
  const auto second = line.find(',', comma + 1);
  const double x_back = std::stod(line.substr(comma + 1, second - comma - 1));
  CHECK(x_back == 1.0 / 3.0);
}

}  // TEST_SUITE
