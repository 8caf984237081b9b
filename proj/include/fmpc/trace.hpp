#pragma once

#include <Eigen/Dense>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fmpc/funnel.hpp"

namespace fmpc {

enum class EscapeReason {
  state_norm_blowup,
  non_finite_derivative,
  feedback_singularity,
};

std::string to_string(EscapeReason reason);

// Produced when an integration cannot be continued: the state norm
// crossed the blow-up threshold, a derivative evaluation failed, or a
// feedback law returned a non-finite value.
struct EscapeReport {
  double time = 0.0;
  Eigen::VectorXd last_state;  // last finite state reached
  EscapeReason reason = EscapeReason::state_norm_blowup;
  std::string detail;
};

// Sampled solution, one row per integrator substep node. The input
// column holds the value active on [t_j, t_{j+1}) (repeated at the final
// node). Reference and funnel columns are filled by annotate() and stay
// empty otherwise.
struct SimulationTrace {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> y;
  std::vector<Eigen::VectorXd> u;
  std::vector<Eigen::VectorXd> yref;
  std::vector<double> err_norm;
  std::vector<double> funnel_radius;

  int size() const { return static_cast<int>(t.size()); }
  bool annotated() const { return !err_norm.empty(); }

  // Fills yref/err_norm/funnel_radius columns. Either pointer may be
  // null to leave its columns empty.
  void annotate(const ReferenceSignal* ref, const FunnelSpec* funnel);

  // Smallest psi(t_j) - |e_j| over the trace; requires annotate().
  double min_funnel_margin() const;
  double max_input_norm() const;

  // Appends another trace that starts where this one ends (first node of
  // `next` is dropped; its time must match the current end node).
  void append(const SimulationTrace& next, double tol = 1e-9);
};

struct IntegrationResult {
  SimulationTrace trace;  // nodes reached before any escape
  std::optional<EscapeReport> escape;
  bool ok() const { return !escape.has_value(); }
};

// Columns: t, x_1..x_n, y_1..y_m, u_1..u_m, yref_1..yref_m, err_norm,
// funnel_radius. Values are printed with round-trip precision;
// unannotated columns are left blank.
void write_trace_csv(const SimulationTrace& trace, std::ostream& out);
void write_trace_csv_file(const SimulationTrace& trace, const std::string& path);

}  // namespace fmpc
