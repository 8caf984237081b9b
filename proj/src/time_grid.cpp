#include "fmpc/time_grid.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fmpc {

TimeGrid::TimeGrid(double t0, double t1, int n) : t_start(t0), t_end(t1), n_intervals(n) {
  if (!(std::isfinite(t0) && std::isfinite(t1)) || !(t1 > t0))
    throw std::invalid_argument("TimeGrid: need finite t_start < t_end");
  if (n < 1) throw std::invalid_argument("TimeGrid: need at least one interval");
}

double TimeGrid::node(int k) const {
  if (k < 0 || k > n_intervals) throw std::out_of_range("TimeGrid::node: index out of range");
  if (k == n_intervals) return t_end;
  return t_start + k * step();
}

int TimeGrid::interval_of(double t) const {
  int k = static_cast<int>(std::floor((t - t_start) / step()));
  if (k < 0) k = 0;
  if (k > n_intervals - 1) k = n_intervals - 1;
  // floor can land one off when t sits on a node; settle against the
  // same node arithmetic used everywhere else.
  while (k + 1 <= n_intervals - 1 && t >= node(k + 1)) ++k;
  while (k > 0 && t < node(k)) --k;
  return k;
}

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> out(n_intervals + 1);
  for (int k = 0; k <= n_intervals; ++k) out[k] = node(k);
  return out;
}

ControlTrajectory::ControlTrajectory(TimeGrid g, std::vector<Eigen::VectorXd> vals, double bound)
    : grid(g), values(std::move(vals)), bound_m(bound) {
  validate();
}

ControlTrajectory ControlTrajectory::constant(const TimeGrid& g, const Eigen::VectorXd& u,
                                              double bound) {
  ControlTrajectory traj;
  traj.grid = g;
  traj.bound_m = bound;
  traj.values.assign(g.n_intervals, u);
  traj.validate();
  return traj;
}

ControlTrajectory ControlTrajectory::zero(const TimeGrid& g, int input_dim, double bound) {
  return constant(g, Eigen::VectorXd::Zero(input_dim), bound);
}

void ControlTrajectory::clamp_to_bound() {
  for (auto& v : values) {
    double n = v.norm();
    if (n > bound_m) v *= bound_m / n;
  }
}

void ControlTrajectory::validate() const {
  if (static_cast<int>(values.size()) != grid.n_intervals)
    throw std::invalid_argument("ControlTrajectory: one value per grid interval required");
  if (!(bound_m > 0.0)) throw std::invalid_argument("ControlTrajectory: bound_m must be positive");
  const double slack = bound_m * 1e-12 + 1e-15;
  for (size_t k = 0; k < values.size(); ++k) {
    if (values[k].size() != values.front().size())
      throw std::invalid_argument("ControlTrajectory: inconsistent input dimension");
    if (!values[k].allFinite())
      throw std::invalid_argument("ControlTrajectory: non-finite input value");
    if (values[k].norm() > bound_m + slack) {
      std::ostringstream msg;
      msg << "ControlTrajectory: |u[" << k << "]| = " << values[k].norm() << " exceeds bound "
          << bound_m;
      throw std::invalid_argument(msg.str());
    }
  }
}

Eigen::VectorXd ControlTrajectory::stacked() const {
  const int m = input_dim();
  Eigen::VectorXd flat(static_cast<long>(m) * grid.n_intervals);
  for (int k = 0; k < grid.n_intervals; ++k) flat.segment(k * m, m) = values[k];
  return flat;
}

void ControlTrajectory::assign_stacked(const Eigen::VectorXd& flat) {
  const int m = input_dim();
  if (flat.size() != static_cast<long>(m) * grid.n_intervals)
    throw std::invalid_argument("ControlTrajectory: stacked size mismatch");
  for (int k = 0; k < grid.n_intervals; ++k) values[k] = flat.segment(k * m, m);
}

}  // namespace fmpc
