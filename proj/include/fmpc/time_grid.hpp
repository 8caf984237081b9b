#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

namespace fmpc {

// Uniform partition of [t_start, t_end] into n_intervals pieces.
// Nodes are always formed as t_start + k*step so that repeated grid
// construction and node lookup agree to the last bit.
struct TimeGrid {
  double t_start = 0.0;
  double t_end = 1.0;
  int n_intervals = 1;

  TimeGrid() = default;
  TimeGrid(double t0, double t1, int n);

  double span() const { return t_end - t_start; }
  double step() const { return (t_end - t_start) / n_intervals; }

  // k in [0, n_intervals]; node(n_intervals) returns t_end exactly.
  double node(int k) const;

  // Index of the interval [node(k), node(k+1)) containing t,
  // clamped to [0, n_intervals-1]. node(k) maps to k.
  int interval_of(double t) const;

  std::vector<double> nodes() const;

  bool operator==(const TimeGrid&) const = default;
};

// Piecewise-constant input signal: values[k] acts on [node(k), node(k+1)).
// Every value must satisfy |values[k]|_2 <= bound_m.
struct ControlTrajectory {
  TimeGrid grid;
  std::vector<Eigen::VectorXd> values;
  double bound_m = std::numeric_limits<double>::infinity();

  ControlTrajectory() = default;
  ControlTrajectory(TimeGrid g, std::vector<Eigen::VectorXd> vals, double bound);

  static ControlTrajectory constant(const TimeGrid& g, const Eigen::VectorXd& u, double bound);
  static ControlTrajectory zero(const TimeGrid& g, int input_dim, double bound);

  int input_dim() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }
  const Eigen::VectorXd& value_at(double t) const { return values[grid.interval_of(t)]; }

  // Scales any value with |v| > bound_m back onto the ball boundary.
  void clamp_to_bound();

  // Throws if sizes are inconsistent or a value exceeds bound_m
  // beyond roundoff.
  void validate() const;

  // Stacked copy (interval-major) and its inverse, used by the solver.
  Eigen::VectorXd stacked() const;
  void assign_stacked(const Eigen::VectorXd& flat);
};

struct IntegratorConfig {
  int substeps_per_interval = 10;
  double blowup_norm = 1e9;
};

}  // namespace fmpc
