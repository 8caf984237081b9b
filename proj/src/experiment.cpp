#include "fmpc/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "fmpc/funnel_controller.hpp"
#include "fmpc/mpc.hpp"
#include "fmpc/ode.hpp"
#include "fmpc/svg_plot.hpp"

namespace fmpc {

namespace {

void reject_unknown_params(const ModelConfig& model, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : model.params) {
    bool known = false;
    for (const char* name : allowed)
      if (key == name) known = true;
    if (!known)
      throw std::invalid_argument("config: model '" + model.name + "' has no parameter '" + key +
                                  "'");
  }
}

double require_param(const ModelConfig& model, const std::string& key) {
  const auto it = model.params.find(key);
  if (it == model.params.end())
    throw std::invalid_argument("config: model '" + model.name + "' needs parameter '" + key +
                                "'");
  return it->second;
}

ReactorParams reactor_params_from(const ModelConfig& model) {
  ReactorParams p;
  auto get = [&](const char* key, double fallback) {
    const auto it = model.params.find(key);
    return it == model.params.end() ? fallback : it->second;
  };
  p.b = get("b", p.b);
  p.c1 = get("c1", p.c1);
  p.c2 = get("c2", p.c2);
  p.k0 = get("k0", p.k0);
  p.k1 = get("k1", p.k1);
  p.d = get("d", p.d);
  p.q = get("q", p.q);
  p.x1_in = get("x1_in", p.x1_in);
  p.x2_in = get("x2_in", p.x2_in);
  return p;
}

CostConfig make_cost_config(const ExperimentConfig& cfg) {
  CostConfig cost;
  cost.lambda_u = cfg.cost.lambda_u;
  cost.quadrature =
      cfg.cost.quadrature == "rectangle" ? Quadrature::rectangle : Quadrature::trapezoid;
  cost.epsilon_guard = cfg.cost.epsilon_guard;
  cost.penalty_weight = cfg.cost.penalty_weight;
  return cost;
}

IntegratorConfig make_integrator_config(const ExperimentConfig& cfg) {
  IntegratorConfig out;
  out.substeps_per_interval = cfg.integrator.substeps;
  out.blowup_norm = cfg.integrator.blowup;
  return out;
}

std::string resolve_output_dir(const ExperimentConfig& cfg, const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (const char* env = std::getenv("FMPC_OUTPUT_DIR"); env && *env) {
    return std::string(env) + "/" + cfg.label;
  }
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return "out/" + cfg.label;
}

std::string format_g(double v, int precision = 9) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
  return buf;
}

const char* palette(size_t i) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  return kColors[i % 6];
}

// Signed scalar error when the output is one-dimensional, |e| otherwise.
std::vector<double> error_track(const SimulationTrace& trace, int io_dim) {
  std::vector<double> out(trace.t.size());
  for (size_t i = 0; i < trace.t.size(); ++i) {
    if (io_dim == 1 && !trace.yref.empty())
      out[i] = trace.y[i][0] - trace.yref[i][0];
    else
      out[i] = trace.err_norm.empty() ? trace.y[i].norm() : trace.err_norm[i];
  }
  return out;
}

std::vector<double> input_track(const SimulationTrace& trace, int io_dim) {
  std::vector<double> out(trace.t.size());
  for (size_t i = 0; i < trace.t.size(); ++i)
    out[i] = io_dim == 1 ? trace.u[i][0] : trace.u[i].norm();
  return out;
}

void write_error_funnel_svg(const SimulationTrace& trace, int io_dim, const std::string& title,
                            const std::string& path) {
  LinePlot plot;
  plot.title = title;
  plot.xlabel = "t";
  plot.ylabel = io_dim == 1 ? "tracking error e(t)" : "|e(t)|";

  PlotSeries boundary;
  boundary.name = "funnel boundary";
  boundary.color = "#d62728";
  boundary.dashed = true;
  boundary.x = trace.t;
  boundary.y = trace.funnel_radius;
  PlotSeries err;
  err.name = "error";
  err.x = trace.t;
  err.y = error_track(trace, io_dim);
  plot.add(err);
  plot.add(boundary);
  if (io_dim == 1) {
    PlotSeries lower = boundary;
    lower.name = "";
    for (double& v : lower.y) v = -v;
    plot.add(lower);
  }
  plot.write_svg_file(path);
}

void write_input_svg(const SimulationTrace& trace, int io_dim, double bound_m,
                     const std::string& title, const std::string& path) {
  LinePlot plot;
  plot.title = title;
  plot.xlabel = "t";
  plot.ylabel = io_dim == 1 ? "u(t)" : "|u(t)|";
  PlotSeries u;
  u.name = "input";
  u.x = trace.t;
  u.y = input_track(trace, io_dim);
  plot.add(u);
  if (bound_m > 0.0 && std::isfinite(bound_m)) {
    PlotSeries hi;
    hi.name = "input budget";
    hi.color = "#777777";
    hi.dashed = true;
    hi.x = {trace.t.front(), trace.t.back()};
    hi.y = {bound_m, bound_m};
    plot.add(hi);
    if (io_dim == 1) {
      PlotSeries lo = hi;
      lo.name = "";
      lo.y = {-bound_m, -bound_m};
      plot.add(lo);
    }
  }
  plot.write_svg_file(path);
}

struct RunResult {
  RunSummary summary;
  SimulationTrace trace;
  int io_dim = 1;
};

RunResult run_experiment_impl(const ExperimentConfig& cfg, const std::string& output_dir_override,
                              std::ostream* log) {
  cfg.validate_for_run();

  const DynamicalSystem sys = make_system(cfg);
  const FunnelSpec funnel = make_funnel(cfg);
  const ReferenceSignal yref = make_reference(cfg);

  if (cfg.model.x0.size() != sys.state_dim)
    throw std::invalid_argument("config: model.x0 has " + std::to_string(cfg.model.x0.size()) +
                                " entries but the model state has " +
                                std::to_string(sys.state_dim));
  if (yref.dim != sys.io_dim)
    throw std::invalid_argument("config: reference dimension " + std::to_string(yref.dim) +
                                " does not match the model output dimension " +
                                std::to_string(sys.io_dim));

  const std::string out_dir = resolve_output_dir(cfg, output_dir_override);
  std::filesystem::create_directories(out_dir);

  RunResult result;
  result.io_dim = sys.io_dim;
  RunSummary& summary = result.summary;
  summary.label = cfg.label;
  summary.config_hash = config_hash(cfg);
  summary.output_dir = out_dir;

  const auto wall_start = std::chrono::steady_clock::now();
  const bool is_mpc = cfg.controller.type == "fmpc" || cfg.controller.type == "classical_mpc";

  if (is_mpc) {
    MpcConfig mpc_cfg;
    mpc_cfg.delta = cfg.horizon.delta;
    mpc_cfg.horizon_T = cfg.horizon.horizon_T;
    mpc_cfg.sim_end = cfg.horizon.sim_end;
    mpc_cfg.control_step = cfg.horizon.control_step;
    mpc_cfg.bound_m = cfg.bound.m;
    mpc_cfg.scheme = cfg.controller.type == "fmpc" ? Scheme::fmpc : Scheme::classical;
    mpc_cfg.cost = make_cost_config(cfg);
    mpc_cfg.integrator = make_integrator_config(cfg);

    const MpcRunReport report = run(sys, funnel, yref, cfg.model.x0, cfg.horizon.t0, mpc_cfg);
    result.trace = report.trace;
    summary.halted_early = report.halted_early;
    summary.min_margin = report.min_funnel_margin;
    summary.max_input_norm = report.max_input_norm;
    summary.feasible = report.feasible_throughout && report.min_funnel_margin > 0.0;
    summary.note = report.halt_reason;
    write_step_csv_file(report, out_dir + "/steps.csv");
  } else {
    const FunnelFeedback fb = make_funnel_feedback(sys, cfg.controller.degree, funnel, yref);
    FeedbackLaw law = fb.as_law();
    if (cfg.controller.sample_dt)
      law = sampled_hold(law, *cfg.controller.sample_dt, cfg.horizon.t0);

    const double span = cfg.horizon.sim_end - cfg.horizon.t0;
    const int n = static_cast<int>(std::lround(span / cfg.horizon.control_step));
    const TimeGrid grid(cfg.horizon.t0, cfg.horizon.sim_end, std::max(1, n));
    const IntegrationResult sim =
        integrate_closed_loop(sys, cfg.model.x0, law, grid, make_integrator_config(cfg));

    result.trace = sim.trace;
    result.trace.annotate(&yref, &funnel);
    summary.halted_early = !sim.ok();
    if (sim.escape) {
      std::ostringstream note;
      note << "escape at t = " << sim.escape->time << " (" << to_string(sim.escape->reason)
           << ")";
      summary.note = note.str();
    }
    if (result.trace.size() > 0) {
      summary.min_margin = result.trace.min_funnel_margin();
      summary.max_input_norm = result.trace.max_input_norm();
    }
    summary.feasible = sim.ok() && summary.min_margin > 0.0;
  }

  const SimulationTrace& trace = result.trace;
  if (trace.size() > 0) {
    summary.final_error_norm = trace.err_norm.back();
    for (int i = 0; i + 1 < trace.size(); ++i)
      summary.input_energy += trace.u[i].squaredNorm() * (trace.t[i + 1] - trace.t[i]);
  }
  summary.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();

  write_trace_csv_file(trace, out_dir + "/trace.csv");
  write_error_funnel_svg(trace, sys.io_dim, cfg.label + ": tracking error", out_dir + "/error_funnel.svg");
  write_input_svg(trace, sys.io_dim, cfg.bound.m, cfg.label + ": input", out_dir + "/input.svg");

  {
    std::ofstream sum(out_dir + "/summary.txt");
    sum << "label            = " << summary.label << '\n';
    sum << "controller       = " << cfg.controller.type << '\n';
    sum << "feasible         = " << (summary.feasible ? "yes" : "no") << '\n';
    sum << "halted_early     = " << (summary.halted_early ? "yes" : "no") << '\n';
    sum << "min_margin       = " << format_g(summary.min_margin, 17) << '\n';
    sum << "max_input_norm   = " << format_g(summary.max_input_norm, 17) << '\n';
    sum << "final_error_norm = " << format_g(summary.final_error_norm, 17) << '\n';
    sum << "input_energy     = " << format_g(summary.input_energy, 17) << '\n';
    sum << "wall_time_s      = " << format_g(summary.wall_time_seconds, 6) << '\n';
    sum << "config_hash      = " << summary.config_hash << '\n';
    if (!summary.note.empty()) sum << "note             = " << summary.note << '\n';
  }

  if (log) {
    *log << summary.label << ": " << (summary.feasible ? "feasible" : "infeasible")
         << ", min margin " << format_g(summary.min_margin) << ", max |u| "
         << format_g(summary.max_input_norm) << ", wrote " << out_dir << '\n';
  }
  return result;
}

// Serialization of the blocks a comparison must agree on.
std::string comparison_basis(const ExperimentConfig& cfg) {
  ExperimentConfig basis;
  basis.model = cfg.model;
  basis.funnel = cfg.funnel;
  basis.reference = cfg.reference;
  basis.horizon = cfg.horizon;
  return serialize_config(basis);
}

}  // namespace

DynamicalSystem make_system(const ExperimentConfig& cfg) {
  const ModelConfig& model = cfg.model;
  if (model.name == "exothermic_reactor") {
    reject_unknown_params(model, {"b", "c1", "c2", "k0", "k1", "d", "q", "x1_in", "x2_in"});
    return exothermic_reactor(reactor_params_from(model));
  }
  if (model.name == "mass_on_car") {
    reject_unknown_params(model, {"theta", "m1", "m2", "k", "d"});
    return mass_on_car(require_param(model, "theta"), require_param(model, "m1"),
                       require_param(model, "m2"), require_param(model, "k"),
                       require_param(model, "d"));
  }
  if (model.name == "linear") {
    reject_unknown_params(model, {});
    if (!model.a || !model.b || !model.c)
      throw std::invalid_argument("config: linear model needs matrices a, b and c");
    return linear_system(*model.a, *model.b, *model.c);
  }
  throw std::invalid_argument("config: unknown model '" + model.name +
                              "' (see the list-models command)");
}

FunnelSpec make_funnel(const ExperimentConfig& cfg) {
  if (cfg.funnel.type == "exponential")
    return exponential_funnel(cfg.funnel.a, cfg.funnel.b, cfg.funnel.c);
  if (cfg.funnel.type == "constant") return constant_funnel(cfg.funnel.radius);
  throw std::invalid_argument("config: unknown funnel type '" + cfg.funnel.type + "'");
}

ReferenceSignal make_reference(const ExperimentConfig& cfg) {
  if (cfg.reference.type == "constant") {
    if (cfg.reference.value.size() == 0)
      throw std::invalid_argument("config: constant reference needs 'value'");
    return constant_reference(cfg.reference.value);
  }
  if (cfg.reference.type == "cosine")
    return cosine_reference(cfg.reference.amplitude, cfg.reference.frequency);
  throw std::invalid_argument("config: unknown reference type '" + cfg.reference.type + "'");
}

RunSummary run_experiment(const ExperimentConfig& cfg, const std::string& output_dir_override,
                          std::ostream* log) {
  return run_experiment_impl(cfg, output_dir_override, log).summary;
}

std::vector<RunSummary> compare_experiments(const std::vector<ExperimentConfig>& cfgs,
                                            const std::string& output_dir_override,
                                            std::ostream* log) {
  if (cfgs.empty()) throw std::invalid_argument("compare: no configs given");

  const std::string basis = comparison_basis(cfgs.front());
  for (const auto& cfg : cfgs) {
    if (comparison_basis(cfg) != basis)
      throw std::invalid_argument("compare: config '" + cfg.label +
                                  "' does not share the model/funnel/reference/horizon blocks "
                                  "with '" +
                                  cfgs.front().label + "'");
  }

  std::string base_dir = output_dir_override;
  if (base_dir.empty()) {
    if (const char* env = std::getenv("FMPC_OUTPUT_DIR"); env && *env)
      base_dir = env;
    else if (!cfgs.front().output_dir.empty())
      base_dir = cfgs.front().output_dir + "_compare";
    else
      base_dir = "out/compare";
  }
  std::filesystem::create_directories(base_dir);

  std::vector<RunResult> results;
  results.reserve(cfgs.size());
  for (const auto& cfg : cfgs)
    results.push_back(run_experiment_impl(cfg, base_dir + "/" + cfg.label, log));

  const int io_dim = results.front().io_dim;

  LinePlot err_plot;
  err_plot.title = "tracking error";
  err_plot.xlabel = "t";
  err_plot.ylabel = io_dim == 1 ? "e(t)" : "|e(t)|";
  LinePlot input_plot;
  input_plot.title = "control input";
  input_plot.xlabel = "t";
  input_plot.ylabel = io_dim == 1 ? "u(t)" : "|u(t)|";

  for (size_t i = 0; i < results.size(); ++i) {
    const SimulationTrace& trace = results[i].trace;
    PlotSeries err;
    err.name = cfgs[i].label;
    err.color = palette(i);
    err.x = trace.t;
    err.y = error_track(trace, io_dim);
    err_plot.add(err);

    PlotSeries input;
    input.name = cfgs[i].label;
    input.color = palette(i);
    input.x = trace.t;
    input.y = input_track(trace, io_dim);
    input_plot.add(input);
  }
  {
    const SimulationTrace& trace = results.front().trace;
    PlotSeries boundary;
    boundary.name = "funnel boundary";
    boundary.color = "#333333";
    boundary.dashed = true;
    boundary.x = trace.t;
    boundary.y = trace.funnel_radius;
    err_plot.add(boundary);
    if (io_dim == 1) {
      PlotSeries lower = boundary;
      lower.name = "";
      for (double& v : lower.y) v = -v;
      err_plot.add(lower);
    }
  }
  err_plot.write_svg_file(base_dir + "/error_overlay.svg");
  input_plot.write_svg_file(base_dir + "/input_overlay.svg");

  std::ostringstream table;
  table << std::left << std::setw(28) << "run" << std::right << std::setw(10) << "feasible"
        << std::setw(16) << "min_margin" << std::setw(14) << "max_|u|" << std::setw(16)
        << "input_energy" << std::setw(12) << "wall_s" << '\n';
  std::vector<RunSummary> summaries;
  summaries.reserve(results.size());
  for (const auto& r : results) {
    const RunSummary& s = r.summary;
    table << std::left << std::setw(28) << s.label << std::right << std::setw(10)
          << (s.feasible ? "yes" : "no") << std::setw(16) << format_g(s.min_margin, 6)
          << std::setw(14) << format_g(s.max_input_norm, 6) << std::setw(16)
          << format_g(s.input_energy, 6) << std::setw(12) << format_g(s.wall_time_seconds, 4)
          << '\n';
    summaries.push_back(s);
  }
  std::ofstream(base_dir + "/metrics.txt") << table.str();
  if (log) *log << table.str();
  return summaries;
}

FeasibilityBound compute_bound_from_config(const ExperimentConfig& cfg, std::ostream& out) {
  const FunnelSpec funnel = make_funnel(cfg);
  const ReferenceSignal yref = make_reference(cfg);
  const BoundSection& bnd = cfg.bound;

  FeasibilityBound bound;
  if (bnd.mode == "linear") {
    const DynamicalSystem sys = make_system(cfg);
    if (!sys.linear)
      throw std::invalid_argument("compute-bound: mode 'linear' needs a linear model");
    const ByrnesIsidoriData data =
        byrnes_isidori_decompose(sys.linear->a, sys.linear->b, sys.linear->c);
    std::optional<std::pair<double, double>> alpha_beta;
    if (bnd.alpha && bnd.beta) alpha_beta = std::make_pair(*bnd.alpha, *bnd.beta);
    bound = bound_linear(data, funnel, yref, bnd.eta0_radius, alpha_beta, bnd.t_check);
  } else if (bnd.mode == "general") {
    BifSystem bif;
    if (cfg.model.name == "exothermic_reactor") {
      reject_unknown_params(cfg.model, {"b", "c1", "c2", "k0", "k1", "d", "q", "x1_in", "x2_in"});
      bif = exothermic_reactor_bif(reactor_params_from(cfg.model));
    } else {
      const DynamicalSystem sys = make_system(cfg);
      if (!sys.linear)
        throw std::invalid_argument(
            "compute-bound: mode 'general' needs the reactor or a linear model");
      bif = bif_from_linear(byrnes_isidori_decompose(sys.linear->a, sys.linear->b, sys.linear->c));
    }
    BoxSet box;
    const long dim = bnd.y_lo.size() + bnd.eta_lo.size();
    box.lo.resize(dim);
    box.hi.resize(dim);
    if (bnd.y_lo.size() != bnd.y_hi.size() || bnd.eta_lo.size() != bnd.eta_hi.size())
      throw std::invalid_argument("compute-bound: box lo/hi sizes differ");
    box.lo << bnd.y_lo, bnd.eta_lo;
    box.hi << bnd.y_hi, bnd.eta_hi;
    bound = bound_general(bif, funnel, yref, box, bnd.samples, bnd.safety);
  } else {
    throw std::invalid_argument("config: bound.mode must be 'linear' or 'general', got '" +
                                bnd.mode + "'");
  }

  out << "input budget certificate (" << bnd.mode << " path)\n";
  auto line = [&](const char* name, double v) {
    out << "  " << std::left << std::setw(14) << name << "= " << format_g(v, 17) << '\n';
  };
  line("m_value", bound.m_value);
  line("p_max", bound.p_max);
  line("g_max", bound.g_max);
  line("psi_dot_sup", bound.psi_dot_sup);
  line("yref_dot_sup", bound.yref_dot_sup);
  line("safety", bound.safety_factor);
  if (bnd.mode == "linear") {
    line("alpha", bound.alpha);
    line("beta", bound.beta);
  }
  out << "  " << std::left << std::setw(14) << "set" << "= " << bound.compact_set_descriptor
      << '\n';
  out << "mode,m_value,p_max,g_max,psi_dot_sup,yref_dot_sup,safety,alpha,beta\n";
  out << bnd.mode << ',' << format_g(bound.m_value, 17) << ',' << format_g(bound.p_max, 17) << ','
      << format_g(bound.g_max, 17) << ',' << format_g(bound.psi_dot_sup, 17) << ','
      << format_g(bound.yref_dot_sup, 17) << ',' << format_g(bound.safety_factor, 17) << ','
      << format_g(bound.alpha, 17) << ',' << format_g(bound.beta, 17) << '\n';
  return bound;
}

std::string list_models_text() {
  return
      "models:\n"
      "  exothermic_reactor   3-state stirred-tank reactor, output = temperature.\n"
      "                       parameters (defaults): b=209.2, c1=-1, c2=1, k0=exp(25),\n"
      "                       k1=8700, d=1.1, q=1.25, x1_in=1, x2_in=0. Relative degree 1.\n"
      "  mass_on_car          4-state mass-spring-damper on a car, output = horizontal\n"
      "                       mass position. parameters: theta (ramp angle, [0, pi/2)),\n"
      "                       m1, m2, k, d. Relative degree 2 for theta > 0, 3 for theta = 0.\n"
      "  linear               x' = Ax + Bu, y = Cx from raw matrices a, b, c\n"
      "                       (rows separated by ';').\n"
      "funnels:\n"
      "  exponential          radius a*exp(-b*t) + c\n"
      "  constant             radius fixed\n"
      "references:\n"
      "  constant             value (vector)\n"
      "  cosine               amplitude*cos(frequency*t), scalar\n"
      "controllers:\n"
      "  fmpc                 receding-horizon MPC with the funnel barrier cost\n"
      "  classical_mpc        receding-horizon MPC with quadratic cost + output penalty\n"
      "  funnel_controller    model-free funnel feedback, degree 1, 2 or 3;\n"
      "                       optional sample_dt for zero-order-hold sampling\n";
}

}  // namespace fmpc
