#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace fmpc {

// Experiment description parsed from the sectioned key = value format
// documented in the README. parse and serialize round-trip:
// serialize(parse(text)) is a fixed point.

struct ModelConfig {
  std::string name;  // exothermic_reactor | mass_on_car | linear
  std::map<std::string, double> params;
  std::optional<Eigen::MatrixXd> a, b, c;  // linear: raw matrices
  Eigen::VectorXd x0;
};

struct FunnelConfig {
  std::string type;  // exponential | constant
  double a = 0.0, b = 0.0, c = 0.0;
  double radius = 0.0;
};

struct ReferenceConfig {
  std::string type;  // constant | cosine
  Eigen::VectorXd value;
  double amplitude = 0.0, frequency = 0.0;
};

struct ControllerConfig {
  std::string type = "fmpc";  // fmpc | classical_mpc | funnel_controller
  int degree = 1;
  std::optional<double> sample_dt;
};

struct HorizonConfig {
  double t0 = 0.0;
  double sim_end = 0.0;
  double horizon_T = 0.0;
  double delta = 0.0;
  double control_step = 0.0;
};

struct CostSection {
  double lambda_u = 0.0;
  double penalty_weight = 1e6;
  double epsilon_guard = 1e-9;
  std::string quadrature = "trapezoid";
};

struct BoundSection {
  double m = 0.0;
  std::string mode;  // linear | general (compute-bound only)
  Eigen::VectorXd y_lo, y_hi, eta_lo, eta_hi;
  double eta0_radius = 0.0;
  std::optional<double> alpha, beta;
  int samples = 10000;
  double safety = 1.1;
  double t_check = 20.0;
};

struct IntegratorSection {
  int substeps = 10;
  double blowup = 1e9;
};

struct ExperimentConfig {
  std::string label;  // file stem; used for run directories and legends
  ModelConfig model;
  FunnelConfig funnel;
  ReferenceConfig reference;
  ControllerConfig controller;
  HorizonConfig horizon;
  CostSection cost;
  BoundSection bound;
  IntegratorSection integrator;
  std::string output_dir;

  // Cross-field checks needed before a run: positive spans, delta and
  // horizon_T integer multiples of control_step, horizon_T >= delta.
  // Throws std::invalid_argument naming the offending fields.
  void validate_for_run() const;
};

ExperimentConfig parse_config(const std::string& text, const std::string& label = "config");
ExperimentConfig load_config_file(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

// FNV-1a over the canonical serialization, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace fmpc
