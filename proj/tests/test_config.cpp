#include "fmpc/config.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "test_util.hpp"

using fmpc::config_hash;
using fmpc::ExperimentConfig;
using fmpc::load_config_file;
using fmpc::parse_config;
using fmpc::serialize_config;
using testutil::vec1;
using testutil::vec2;

namespace {

const char* kFullText = R"(# Demo tracking run.
[model]
name = linear
a = 0 1; 0 -1
b = 1; 0
c = 1 0
x0 = 0.25 -0.5

[funnel]
type = exponential
a = 3
b = 1.5
c = 0.5

[reference]
type = cosine
amplitude = 0.75
frequency = 2

[controller]
type = fmpc
degree = 1

[horizon]
t0 = 0
sim_end = 2
horizon_T = 0.5
delta = 0.1
control_step = 0.05

[cost]
lambda_u = 0.25
penalty_weight = 500000
epsilon_guard = 1e-08
quadrature = trapezoid

[bound]
m = 12.5
mode = linear
eta0_radius = 2
alpha = 0.9
beta = 1.5
t_check = 15

[integrator]
substeps = 40
blowup = 1e7

[output]
dir = out/demo_tracking
)";

ExperimentConfig valid_mpc_config() {
  ExperimentConfig cfg;
  cfg.model.name = "linear";
  cfg.model.x0 = vec2(0.0, 0.0);
  cfg.funnel.type = "constant";
  cfg.funnel.radius = 1.0;
  cfg.reference.type = "constant";
  cfg.reference.value = vec1(0.0);
  cfg.controller.type = "fmpc";
  cfg.horizon.t0 = 0.0;
  cfg.horizon.sim_end = 1.0;
  cfg.horizon.horizon_T = 0.2;
  cfg.horizon.delta = 0.1;
  cfg.horizon.control_step = 0.05;
  cfg.cost.lambda_u = 1.0;
  cfg.bound.m = 5.0;
  return cfg;
}

// Reference FNV-1a, kept separate from the library so a drifting
// constant on either side breaks the comparison below.
std::string fnv1a_hex(const std::string& text) {
  std::uint64_t hash = 14695981039346656037ull;
  for (const unsigned char ch : text) {
    hash ^= ch;
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("a full experiment file parses field by field") {
  const ExperimentConfig cfg = parse_config(kFullText, "demo");
  CHECK(cfg.label == "demo");
  CHECK(cfg.model.name == "linear");
  REQUIRE(cfg.model.a.has_value());
  REQUIRE(cfg.model.b.has_value());
  REQUIRE(cfg.model.c.has_value());
  CHECK(cfg.model.a->rows() == 2);
  CHECK(cfg.model.a->cols() == 2);
  CHECK((*cfg.model.a)(0, 1) == 1.0);
  CHECK((*cfg.model.a)(1, 1) == -1.0);
  CHECK(cfg.model.b->rows() == 2);
  CHECK(cfg.model.b->cols() == 1);
  CHECK(cfg.model.c->rows() == 1);
  CHECK(cfg.model.c->cols() == 2);
  REQUIRE(cfg.model.x0.size() == 2);
  CHECK(cfg.model.x0[0] == 0.25);
  CHECK(cfg.model.x0[1] == -0.5);

  CHECK(cfg.funnel.type == "exponential");
  CHECK(cfg.funnel.a == 3.0);
  CHECK(cfg.funnel.b == 1.5);
  CHECK(cfg.funnel.c == 0.5);

  CHECK(cfg.reference.type == "cosine");
  CHECK(cfg.reference.amplitude == 0.75);
  CHECK(cfg.reference.frequency == 2.0);

  CHECK(cfg.controller.type == "fmpc");
  CHECK(cfg.controller.degree == 1);
  CHECK_FALSE(cfg.controller.sample_dt.has_value());

  CHECK(cfg.horizon.t0 == 0.0);
  CHECK(cfg.horizon.sim_end == 2.0);
  CHECK(cfg.horizon.horizon_T == 0.5);
  CHECK(cfg.horizon.delta == 0.1);
  CHECK(cfg.horizon.control_step == 0.05);

  CHECK(cfg.cost.lambda_u == 0.25);
  CHECK(cfg.cost.penalty_weight == 500000.0);
  CHECK(cfg.cost.epsilon_guard == 1e-8);
  CHECK(cfg.cost.quadrature == "trapezoid");

  CHECK(cfg.bound.m == 12.5);
  CHECK(cfg.bound.mode == "linear");
  CHECK(cfg.bound.eta0_radius == 2.0);
  REQUIRE(cfg.bound.alpha.has_value());
  REQUIRE(cfg.bound.beta.has_value());
  CHECK(*cfg.bound.alpha == 0.9);
  CHECK(*cfg.bound.beta == 1.5);
  CHECK(cfg.bound.t_check == 15.0);

  CHECK(cfg.integrator.substeps == 40);
  CHECK(cfg.integrator.blowup == 1e7);
  CHECK(cfg.output_dir == "out/demo_tracking");

  CHECK_NOTHROW(cfg.validate_for_run());
}

TEST_CASE("serialization is a fixed point and round-trips values") {
  ExperimentConfig cfg = valid_mpc_config();
  cfg.cost.lambda_u = 1.0 / 3.0;
  cfg.cost.epsilon_guard = 1e-9;
  cfg.horizon.control_step = 0.1;
  cfg.horizon.delta = 0.1;
  cfg.horizon.horizon_T = 0.30000000000000004;  // 3 * 0.1
  cfg.model.params["theta"] = 0.7853981633974483;

  const std::string s1 = serialize_config(cfg);
  const ExperimentConfig back = parse_config(s1, cfg.label);
  const std::string s2 = serialize_config(back);
  CHECK(s2 == s1);

  CHECK(back.cost.lambda_u == cfg.cost.lambda_u);
  CHECK(back.cost.epsilon_guard == cfg.cost.epsilon_guard);
  CHECK(back.horizon.horizon_T == cfg.horizon.horizon_T);
  CHECK(back.model.params.at("theta") == cfg.model.params.at("theta"));

  // The bundled-style text is reproduced canonically too.
  const ExperimentConfig demo = parse_config(kFullText, "demo");
  const std::string d1 = serialize_config(demo);
  CHECK(serialize_config(parse_config(d1, "demo")) == d1);
}

TEST_CASE("comments blank lines and spacing do not change the meaning") {
  const char* messy =
      "  [funnel]  # section\r\n"
      "\r\n"
      "   type=constant\r\n"
      "radius =  2   # half-width\n"
      "[controller]\n"
      "type = fmpc\n";
  const char* clean =
      "[funnel]\n"
      "type = constant\n"
      "radius = 2\n"
      "[controller]\n"
      "type = fmpc\n";
  const ExperimentConfig a = parse_config(messy, "a");
  const ExperimentConfig b = parse_config(clean, "b");
  CHECK(a.funnel.type == "constant");
  CHECK(a.funnel.radius == 2.0);
  CHECK(serialize_config(a) == serialize_config(b));
  // The label is not part of the canonical form, so the hash matches too.
  CHECK(config_hash(a) == config_hash(b));
}

TEST_CASE("model section treats unknown keys as named parameters") {
  const ExperimentConfig cfg = parse_config(
      "[model]\n"
      "name = mass_on_car\n"
      "zeta = 4\n"
      "alpha = 2\n"
      "x0 = 0 0 0 0\n",
      "p");
  CHECK(cfg.model.params.at("zeta") == 4.0);
  CHECK(cfg.model.params.at("alpha") == 2.0);

  // Parameters are serialized in sorted order, after the name.
  const std::string text = serialize_config(cfg);
  const auto pos_name = text.find("name = mass_on_car");
  const auto pos_alpha = text.find("alpha = 2");
  const auto pos_zeta = text.find("zeta = 4");
  REQUIRE(pos_name != std::string::npos);
  REQUIRE(pos_alpha != std::string::npos);
  REQUIRE(pos_zeta != std::string::npos);
  CHECK(pos_name < pos_alpha);
  CHECK(pos_alpha < pos_zeta);

  CHECK_THROWS_WITH_AS(parse_config("[model]\nsolver = fast\n", "p"),
                       doctest::Contains("value of 'solver' is not a number: 'fast'"),
                       std::invalid_argument);
}

TEST_CASE("parse errors carry the label and line number") {
  using doctest::Contains;
  using std::invalid_argument;
  CHECK_THROWS_WITH_AS(parse_config("[plots]\n", "bad"), Contains("bad:1: unknown section [plots]"),
                       invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("[Model]\n", "bad"), Contains("unknown section [Model]"),
                       invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("\n[model\n", "bad"),
                       Contains("bad:2: unterminated section header: '[model'"), invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("[model]\nnoequals\n", "bad"),
                       Contains("bad:2: expected 'key = value': 'noequals'"), invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("[model]\n = 5\n", "bad"), Contains("bad:2: empty key"),
                       invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("[funnel]\na = \n", "bad"),
                       Contains("bad:2: empty value for 'a'"), invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("x = 1\n", "bad"),
                       Contains("bad:1: 'x' appears before any [section]"), invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("[funnel]\na = abc\n", "bad"),
                       Contains("bad:2: value of 'a' is not a number: 'abc'"), invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("[integrator]\nsubsteps = 2.5\n", "bad"),
                       Contains("bad:2: value of 'substeps' is not an integer: '2.5'"),
                       invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("[model]\na = 1 2; 3\n", "bad"),
                       Contains("bad:2: matrix 'a' has rows of unequal length"), invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("[model]\na = 1 2;;3 4\n", "bad"),
                       Contains("bad:2: value of 'a' is empty"), invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("[funnel]\nzzz = 1\n", "bad"),
                       Contains("bad:2: unknown funnel key 'zzz'"), invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("[horizon]\nzzz = 1\n", "bad"),
                       Contains("unknown horizon key 'zzz'"), invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("[output]\nzzz = a\n", "bad"),
                       Contains("unknown output key 'zzz'"), invalid_argument);
}

TEST_CASE("file loading uses the stem as the label") {
  const std::string path = "test_config_stem_check.cfg";
  {
    std::ofstream out(path);
    out << "[funnel]\ntype = constant\nradius = 3\n";
  }
  const ExperimentConfig cfg = load_config_file(path);
  CHECK(cfg.label == "test_config_stem_check");
  CHECK(cfg.funnel.radius == 3.0);
  std::remove(path.c_str());

  CHECK_THROWS_WITH_AS(load_config_file("no_such_file_here.cfg"),
                       doctest::Contains("cannot open config file: no_such_file_here.cfg"),
                       std::runtime_error);
}

TEST_CASE("duplicate keys keep the last value") {
  const ExperimentConfig cfg = parse_config("[funnel]\nradius = 1\nradius = 2\n", "p");
  CHECK(cfg.funnel.radius == 2.0);
}

TEST_CASE("hash is FNV-1a of the canonical text") {
  // Pin the reference implementation to published FNV-1a vectors first.
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("hello") == "a430d84680aabd0b");

  const ExperimentConfig cfg = parse_config(kFullText, "demo");
  const std::string hash = config_hash(cfg);
  CHECK(hash.size() == 16);
  CHECK(hash.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(hash == fnv1a_hex(serialize_config(cfg)));
  CHECK(config_hash(cfg) == hash);

  ExperimentConfig tweaked = cfg;
  tweaked.cost.lambda_u = 0.26;
  CHECK(config_hash(tweaked) != hash);
}

TEST_CASE("run validation names the offending field") {
  using doctest::Contains;
  using std::invalid_argument;
  CHECK_NOTHROW(valid_mpc_config().validate_for_run());

  auto broken = [](auto mutate) {
    ExperimentConfig cfg = valid_mpc_config();
    mutate(cfg);
    return cfg;
  };
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.model.name.clear(); }).validate_for_run(),
                       Contains("model.name is missing"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.model.x0.resize(0); }).validate_for_run(),
                       Contains("model.x0 is missing"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.funnel.type = "conical"; }).validate_for_run(),
                       Contains("funnel.type"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.reference.type = "ramp"; }).validate_for_run(),
                       Contains("reference.type"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.controller.type = "pid"; }).validate_for_run(),
                       Contains("controller.type"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.controller.degree = 4; }).validate_for_run(),
                       Contains("controller.degree"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.controller.sample_dt = 0.0; }).validate_for_run(),
                       Contains("sample_dt"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.horizon.control_step = 0.0; }).validate_for_run(),
                       Contains("control_step must be positive"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.horizon.sim_end = 0.0; }).validate_for_run(),
                       Contains("sim_end must exceed"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.horizon.delta = 0.0; }).validate_for_run(),
                       Contains("delta must be positive"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.horizon.horizon_T = 0.05; }).validate_for_run(),
                       Contains("horizon_T must be at least"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.horizon.delta = 0.12; }).validate_for_run(),
                       Contains("delta must be an integer multiple"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.horizon.horizon_T = 0.23; }).validate_for_run(),
                       Contains("horizon_T must be an integer multiple"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.horizon.sim_end = 1.03; }).validate_for_run(),
                       Contains("sim_end - horizon.t0 must be an integer multiple"),
                       invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.cost.lambda_u = -1.0; }).validate_for_run(),
                       Contains("lambda_u"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.cost.penalty_weight = 0.0; }).validate_for_run(),
                       Contains("penalty_weight"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.cost.epsilon_guard = 1.0; }).validate_for_run(),
                       Contains("epsilon_guard"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.cost.quadrature = "simpson"; }).validate_for_run(),
                       Contains("quadrature"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.bound.m = 0.0; }).validate_for_run(),
                       Contains("bound.m must be positive for MPC runs"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.integrator.substeps = 0; }).validate_for_run(),
                       Contains("substeps"), invalid_argument);
  CHECK_THROWS_WITH_AS(broken([](auto& c) { c.integrator.blowup = 0.0; }).validate_for_run(),
                       Contains("blowup"), invalid_argument);

  // A funnel-controller run needs no receding-horizon fields and no
  // input budget.
  ExperimentConfig fc = valid_mpc_config();
  fc.controller.type = "funnel_controller";
  fc.horizon.delta = 0.0;
  fc.horizon.horizon_T = 0.0;
  fc.bound.m = 0.0;
  CHECK_NOTHROW(fc.validate_for_run());
}

TEST_CASE("general bound sections round trip") {
  const char* text =
      "[bound]\n"
      "m = 600\n"
      "mode = general\n"
      "y_lo = 235.6\n"
      "y_hi = 438.6\n"
      "eta_lo = 0 0\n"
      "eta_hi = 1 1\n"
      "samples = 10000\n"
      "safety = 1.1\n";
  const ExperimentConfig cfg = parse_config(text, "p");
  CHECK(cfg.bound.mode == "general");
  REQUIRE(cfg.bound.y_lo.size() == 1);
  REQUIRE(cfg.bound.eta_lo.size() == 2);
  CHECK(cfg.bound.y_lo[0] == 235.6);
  CHECK(cfg.bound.eta_hi[1] == 1.0);
  CHECK(cfg.bound.samples == 10000);
  CHECK(cfg.bound.safety == 1.1);

  const std::string s1 = serialize_config(cfg);
  CHECK(s1.find("mode = general") != std::string::npos);
  CHECK(s1.find("eta_lo = 0 0") != std::string::npos);
  CHECK(serialize_config(parse_config(s1, "p")) == s1);
}

}  // TEST_SUITE
