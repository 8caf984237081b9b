#include "fmpc/systems.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "fmpc/ode.hpp"
#include "fmpc/time_grid.hpp"
#include "test_util.hpp"

using fmpc::bif_from_linear;
using fmpc::bif_to_system;
using fmpc::byrnes_isidori_decompose;
using fmpc::ControlTrajectory;
using fmpc::DynamicalSystem;
using fmpc::exothermic_reactor;
using fmpc::exothermic_reactor_bif;
using fmpc::integrate_open_loop;
using fmpc::IntegratorConfig;
using fmpc::linear_system;
using fmpc::mass_on_car;
using fmpc::probe_relative_degree_one;
using fmpc::ReactorParams;
using fmpc::TimeGrid;
using testutil::Lcg;
using testutil::vec1;
using testutil::vec2;
using testutil::vec3;
using testutil::vec4;

TEST_SUITE("systems") {

TEST_CASE("reactor drift at the cold-start state") {
  const auto sys = exothermic_reactor();
  CHECK(sys.state_dim == 3);
  CHECK(sys.io_dim == 1);
  CHECK(sys.relative_degree == 1);
  CHECK_FALSE(sys.linear.has_value());

  const Eigen::VectorXd x = vec3(270.0, 0.02, 0.9);
  const Eigen::VectorXd f = sys.eval_f(x);
  CHECK(f[0] == doctest::Approx(-337.49694493526112).epsilon(1e-14));
  CHECK(f[1] == doctest::Approx(1.0779853964400627).epsilon(1e-14));
  CHECK(f[2] == doctest::Approx(-0.9899853964400627).epsilon(1e-14));

  // Input enters the temperature equation only, with unit gain.
  const Eigen::MatrixXd g = sys.eval_g(x);
  CHECK(g.rows() == 3);
  CHECK(g.cols() == 1);
  CHECK(g(0, 0) == 1.0);
  CHECK(g(1, 0) == 0.0);
  CHECK(g(2, 0) == 0.0);
  const Eigen::VectorXd xd = sys.xdot(x, vec1(10.0));
  CHECK(xd[0] == doctest::Approx(f[0] + 10.0).epsilon(1e-15));
  CHECK(xd[1] == f[1]);

  CHECK(sys.eval_h(x)[0] == 270.0);
  const Eigen::MatrixXd hj = sys.eval_h_jacobian(x);
  CHECK(hj(0, 0) == 1.0);
  CHECK(hj(0, 1) == 0.0);
  CHECK(hj(0, 2) == 0.0);
}

TEST_CASE("reactor rejects nonpositive temperature") {
  const auto sys = exothermic_reactor();
  CHECK_THROWS_AS(sys.eval_f(vec3(0.0, 0.5, 0.5)), std::domain_error);
  CHECK_THROWS_AS(sys.eval_f(vec3(-5.0, 0.5, 0.5)), std::domain_error);
  CHECK_NOTHROW(sys.eval_f(vec3(1e-6, 0.5, 0.5)));
}

TEST_CASE("reactor parameter overrides reach the vector field") {
  // k1 = 0 turns the Arrhenius factor into k0, making the field exact:
  // r = 2*0.5 = 1, f = (3*1 - 1*2, -1 + 0, 1 + 0).
  ReactorParams p;
  p.b = 3.0;
  p.c1 = -1.0;
  p.c2 = 1.0;
  p.k0 = 2.0;
  p.k1 = 0.0;
  p.d = 0.0;
  p.q = 1.0;
  const auto sys = exothermic_reactor(p);
  const Eigen::VectorXd f = sys.eval_f(vec3(2.0, 0.5, 0.25));
  CHECK(f[0] == 1.0);
  CHECK(f[1] == -1.0);
  CHECK(f[2] == 1.0);
}

TEST_CASE("reactor output/internal split matches the full model") {
  const auto sys = exothermic_reactor();
  const auto bif = exothermic_reactor_bif();
  CHECK(bif.m == 1);
  CHECK(bif.eta_dim == 2);
  const Eigen::VectorXd y = vec1(270.0);
  const Eigen::VectorXd eta = vec2(0.02, 0.9);
  const Eigen::VectorXd f = sys.eval_f(vec3(270.0, 0.02, 0.9));
  CHECK(bif.eval_p(y, eta)[0] == doctest::Approx(f[0]).epsilon(1e-15));
  CHECK(bif.eval_q(y, eta)[0] == doctest::Approx(f[1]).epsilon(1e-15));
  CHECK(bif.eval_q(y, eta)[1] == doctest::Approx(f[2]).epsilon(1e-15));
  CHECK(bif.eval_gamma(y, eta)(0, 0) == 1.0);
}

TEST_CASE("mass on car matrices for a quarter-pi ramp") {
  const double theta = std::numbers::pi / 4.0;
  const auto sys = mass_on_car(theta, 4.0, 1.0, 2.0, 1.0);
  CHECK(sys.state_dim == 4);
  CHECK(sys.io_dim == 1);
  CHECK(sys.relative_degree == 2);
  REQUIRE(sys.linear.has_value());

  const auto& [a, b, c] = *sys.linear;
  CHECK(a(0, 1) == 1.0);
  CHECK(a(2, 3) == 1.0);
  CHECK(a(1, 2) == doctest::Approx(0.31426968052735446).epsilon(1e-15));
  CHECK(a(1, 3) == doctest::Approx(0.15713484026367723).epsilon(1e-15));
  CHECK(a(3, 2) == doctest::Approx(-2.2222222222222222).epsilon(1e-15));
  CHECK(a(3, 3) == doctest::Approx(-1.1111111111111111).epsilon(1e-15));
  CHECK(a.row(0).squaredNorm() == 1.0);  // no other couplings
  CHECK(a.row(2).squaredNorm() == 1.0);

  CHECK(b(0, 0) == 0.0);
  CHECK(b(1, 0) == doctest::Approx(0.22222222222222222).epsilon(1e-15));
  CHECK(b(2, 0) == 0.0);
  CHECK(b(3, 0) == doctest::Approx(-0.15713484026367723).epsilon(1e-15));

  CHECK(c(0, 0) == 1.0);
  CHECK(c(0, 1) == 0.0);
  CHECK(c(0, 2) == doctest::Approx(std::cos(theta)).epsilon(1e-15));
  CHECK(c(0, 3) == 0.0);

  // Markov chain: C B = 0, C A B = sin^2(theta)/mu nonzero.
  CHECK((c * b)(0, 0) == 0.0);
  CHECK((c * a * b)(0, 0) == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
}

TEST_CASE("flat ramp pushes the input one derivative deeper") {
  const auto sys = mass_on_car(0.0, 4.0, 1.0, 2.0, 1.0);
  CHECK(sys.relative_degree == 3);
  const auto& [a, b, c] = *sys.linear;
  CHECK((c * b)(0, 0) == 0.0);
  CHECK((c * a * b)(0, 0) == 0.0);
  CHECK((c * a * a * b)(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("mass on car parameter validation") {
  const double half_pi = std::numbers::pi / 2.0;
  CHECK_THROWS_AS(mass_on_car(-0.1, 4.0, 1.0, 2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(mass_on_car(half_pi, 4.0, 1.0, 2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(mass_on_car(0.5, 0.0, 1.0, 2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(mass_on_car(0.5, 4.0, -1.0, 2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(mass_on_car(0.5, 4.0, 1.0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(mass_on_car(0.5, 4.0, 1.0, 2.0, 0.0), std::invalid_argument);
}

TEST_CASE("linear system relative degree detection") {
  Eigen::MatrixXd a1(1, 1), b1(1, 1), c1(1, 1);
  a1 << 0.0;
  b1 << 1.0;
  c1 << 1.0;
  CHECK(linear_system(a1, b1, c1).relative_degree == 1);

  Eigen::MatrixXd a2(2, 2), b2(2, 1), c2(1, 2);
  a2 << 0.0, 1.0, 0.0, 0.0;
  b2 << 0.0, 1.0;
  c2 << 1.0, 0.0;
  const auto dbl = linear_system(a2, b2, c2);
  CHECK(dbl.relative_degree == 2);

  CHECK_THROWS_WITH_AS(linear_system(a2, b2, c2, true), doctest::Contains("singular"),
                       std::invalid_argument);
}

TEST_CASE("normal form of a hand-picked two-state plant") {
  Eigen::MatrixXd a(2, 2), b(2, 1), c(1, 2);
  a << 1.0, 2.0, 3.0, 4.0;
  b << 1.0, 0.0;
  c << 1.0, 0.0;
  const auto d = byrnes_isidori_decompose(a, b, c);
  CHECK(d.a1(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(d.a2(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(d.a3(0, 0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(d.a4(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK((d.gamma - c * b).norm() == 0.0);
  CHECK((d.transform_v - Eigen::MatrixXd::Identity(2, 2)).norm() <= 1e-14);
}

TEST_CASE("normal form blocks reproduce the original dynamics") {
  Lcg rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd a(3, 3), b(3, 1), c(1, 3);
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < 3; ++i) b(i, 0) = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < 3; ++i) c(0, i) = rng.uniform(-1.0, 1.0);
    if (std::abs((c * b)(0, 0)) < 0.1) continue;  // keep the gain well conditioned

    const auto d = byrnes_isidori_decompose(a, b, c);
    // Stacked blocks act on z = Vx exactly as A acts on x.
    Eigen::MatrixXd az(3, 3);
    az.topLeftCorner(1, 1) = d.a1;
    az.topRightCorner(1, 2) = d.a2;
    az.bottomLeftCorner(2, 1) = d.a3;
    az.bottomRightCorner(2, 2) = d.a4;
    CHECK((az * d.transform_v - d.transform_v * a).norm() <= 1e-12);
    // Internal rows of V annihilate B: no direct input feedthrough.
    CHECK((d.transform_v.bottomRows(2) * b).norm() <= 1e-13);
    CHECK((d.transform_v.topRows(1) - c).norm() == 0.0);
  }
}

TEST_CASE("decomposed plant simulates like the original") {
  Eigen::MatrixXd a(2, 2), b(2, 1), c(1, 2);
  a << 0.0, 1.0, -2.0, -3.0;
  b << 0.0, 1.0;
  c << 0.0, 1.0;  // output = velocity, C*B = 1
  const auto sys = linear_system(a, b, c);
  const auto d = byrnes_isidori_decompose(a, b, c);
  const auto zsys = bif_to_system(bif_from_linear(d));
  CHECK(zsys.state_dim == 2);
  CHECK(zsys.io_dim == 1);

  const TimeGrid grid(0.0, 2.0, 4);
  Lcg rng(32);
  ControlTrajectory u = ControlTrajectory::zero(grid, 1, 10.0);
  for (auto& v : u.values) v = vec1(rng.uniform(-1.0, 1.0));

  const Eigen::VectorXd x0 = vec2(0.3, -0.2);
  const Eigen::VectorXd z0 = d.transform_v * x0;
  IntegratorConfig icfg;
  icfg.substeps_per_interval = 25;
  const auto rx = integrate_open_loop(sys, x0, u, icfg);
  const auto rz = integrate_open_loop(zsys, z0, u, icfg);
  REQUIRE(rx.ok());
  REQUIRE(rz.ok());
  REQUIRE(rx.trace.size() == rz.trace.size());
  double sup = 0.0;
  for (int j = 0; j < rx.trace.size(); ++j)
    sup = std::max(sup, (rx.trace.y[j] - rz.trace.y[j]).norm());
  CHECK(sup <= 1e-8);
}

TEST_CASE("decomposed plant structure") {
  Eigen::MatrixXd a(2, 2), b(2, 1), c(1, 2);
  a << 1.0, 2.0, 3.0, 4.0;
  b << 2.0, 0.0;
  c << 1.0, 0.0;
  const auto zsys = bif_to_system(bif_from_linear(byrnes_isidori_decompose(a, b, c)));
  const Eigen::VectorXd z = vec2(0.5, -1.5);
  CHECK(zsys.eval_h(z)[0] == 0.5);
  const Eigen::MatrixXd g = zsys.eval_g(z);
  CHECK(g(0, 0) == 2.0);  // gamma = C*B
  CHECK(g(1, 0) == 0.0);
}

TEST_CASE("gain probe over state samples") {
  const auto reactor = exothermic_reactor();
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(vec3(240.0 + 10.0 * i, 0.1, 0.2));
  const auto probe = probe_relative_degree_one(reactor, pts);
  CHECK(probe.invertible_everywhere);
  CHECK(probe.min_singular_value_seen == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_FALSE(probe.failing_point.has_value());

  // Higher relative degree means a singular gain at every point.
  const auto car = mass_on_car(std::numbers::pi / 4.0, 4.0, 1.0, 2.0, 1.0);
  std::vector<Eigen::VectorXd> car_pts = {vec4(0.1, 0.2, 0.3, 0.4), vec4(0.0, 0.0, 0.0, 0.0)};
  const auto bad = probe_relative_degree_one(car, car_pts);
  CHECK_FALSE(bad.invertible_everywhere);
  REQUIRE(bad.failing_point.has_value());
  CHECK((*bad.failing_point - car_pts[0]).norm() == 0.0);
}

}  // TEST_SUITE
