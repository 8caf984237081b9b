#include "fmpc/trace.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace fmpc {

std::string to_string(EscapeReason reason) {
  switch (reason) {
    case EscapeReason::state_norm_blowup: return "state norm blowup";
    case EscapeReason::non_finite_derivative: return "non-finite derivative";
    case EscapeReason::feedback_singularity: return "feedback singularity";
  }
  return "unknown";
}

void SimulationTrace::annotate(const ReferenceSignal* ref, const FunnelSpec* funnel) {
  const int n = size();
  if (ref != nullptr) {
    yref.resize(n);
    err_norm.resize(n);
    for (int i = 0; i < n; ++i) {
      yref[i] = ref->eval_yref(t[i]);
      err_norm[i] = (y[i] - yref[i]).norm();
    }
  }
  if (funnel != nullptr) {
    funnel_radius.resize(n);
    for (int i = 0; i < n; ++i) funnel_radius[i] = funnel->eval_psi(t[i]);
  }
}

double SimulationTrace::min_funnel_margin() const {
  if (err_norm.empty() || funnel_radius.empty())
    throw std::logic_error("SimulationTrace: margin requires annotated trace");
  double margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < size(); ++i) margin = std::min(margin, funnel_radius[i] - err_norm[i]);
  return margin;
}

double SimulationTrace::max_input_norm() const {
  double nmax = 0.0;
  for (const auto& ui : u) nmax = std::max(nmax, ui.norm());
  return nmax;
}

void SimulationTrace::append(const SimulationTrace& next, double tol) {
  if (next.size() == 0) return;
  if (size() == 0) {
    *this = next;
    return;
  }
  if (std::abs(next.t.front() - t.back()) > tol)
    throw std::invalid_argument("SimulationTrace::append: segment does not start at trace end");
  const size_t seam = u.size() - 1;
  for (int i = 1; i < next.size(); ++i) {
    t.push_back(next.t[i]);
    x.push_back(next.x[i]);
    y.push_back(next.y[i]);
    u.push_back(next.u[i]);
    if (!next.yref.empty()) yref.push_back(next.yref[i]);
    if (!next.err_norm.empty()) err_norm.push_back(next.err_norm[i]);
    if (!next.funnel_radius.empty()) funnel_radius.push_back(next.funnel_radius[i]);
  }
  // The seam node keeps the newly applied input value.
  if (!next.u.empty()) u[seam] = next.u[0];
}

namespace {

void print_value(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

void print_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (long i = 0; i < v.size(); ++i) {
    out << ',';
    print_value(out, v(i));
  }
}

}  // namespace

void write_trace_csv(const SimulationTrace& trace, std::ostream& out) {
  if (trace.size() == 0) throw std::invalid_argument("write_trace_csv: empty trace");
  const long n = trace.x.front().size();
  const long m = trace.y.front().size();
  out << "t";
  for (long i = 1; i <= n; ++i) out << ",x_" << i;
  for (long i = 1; i <= m; ++i) out << ",y_" << i;
  for (long i = 1; i <= m; ++i) out << ",u_" << i;
  for (long i = 1; i <= m; ++i) out << ",yref_" << i;
  out << ",err_norm,funnel_radius\n";
  for (int row = 0; row < trace.size(); ++row) {
    print_value(out, trace.t[row]);
    print_vector(out, trace.x[row]);
    print_vector(out, trace.y[row]);
    print_vector(out, trace.u[row]);
    if (!trace.yref.empty()) {
      print_vector(out, trace.yref[row]);
      out << ',';
      print_value(out, trace.err_norm[row]);
    } else {
      for (long i = 0; i < m; ++i) out << ',';
      out << ',';
    }
    out << ',';
    if (!trace.funnel_radius.empty()) print_value(out, trace.funnel_radius[row]);
    out << '\n';
  }
}

void write_trace_csv_file(const SimulationTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace_csv_file: cannot open " + path);
  write_trace_csv(trace, out);
}

}  // namespace fmpc
