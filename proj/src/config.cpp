#include "fmpc/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace fmpc {

namespace {

std::string trim(const std::string& s) {
  const auto from = s.find_first_not_of(" \t\r\n");
  if (from == std::string::npos) return "";
  const auto to = s.find_last_not_of(" \t\r\n");
  return s.substr(from, to - from + 1);
}

[[noreturn]] void fail(const std::string& label, int line, const std::string& message) {
  std::ostringstream out;
  out << label << ':' << line << ": " << message;
  throw std::invalid_argument(out.str());
}

double parse_double(const std::string& label, int line, const std::string& key,
                    const std::string& value) {
  try {
    size_t used = 0;
    const double v = std::stod(value, &used);
    if (trim(value.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  fail(label, line, "value of '" + key + "' is not a number: '" + value + "'");
}

int parse_int(const std::string& label, int line, const std::string& key,
              const std::string& value) {
  const double v = parse_double(label, line, key, value);
  const int n = static_cast<int>(std::lround(v));
  if (v != static_cast<double>(n))
    fail(label, line, "value of '" + key + "' is not an integer: '" + value + "'");
  return n;
}

Eigen::VectorXd parse_vector(const std::string& label, int line, const std::string& key,
                             const std::string& value) {
  std::istringstream in(value);
  std::vector<double> entries;
  std::string tok;
  while (in >> tok) entries.push_back(parse_double(label, line, key, tok));
  if (entries.empty()) fail(label, line, "value of '" + key + "' is empty");
  return Eigen::Map<Eigen::VectorXd>(entries.data(), static_cast<long>(entries.size()));
}

// Rows separated by ';', entries by whitespace.
Eigen::MatrixXd parse_matrix(const std::string& label, int line, const std::string& key,
                             const std::string& value) {
  std::vector<Eigen::VectorXd> rows;
  size_t pos = 0;
  while (pos <= value.size()) {
    const size_t semi = value.find(';', pos);
    const std::string row = value.substr(pos, semi == std::string::npos ? semi : semi - pos);
    rows.push_back(parse_vector(label, line, key, row));
    if (semi == std::string::npos) break;
    pos = semi + 1;
  }
  Eigen::MatrixXd m(static_cast<long>(rows.size()), rows[0].size());
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols())
      fail(label, line, "matrix '" + key + "' has rows of unequal length");
    m.row(static_cast<long>(r)) = rows[r];
  }
  return m;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_vector(const Eigen::VectorXd& v) {
  std::string out;
  for (long i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += format_double(v[i]);
  }
  return out;
}

std::string format_matrix(const Eigen::MatrixXd& m) {
  std::string out;
  for (long r = 0; r < m.rows(); ++r) {
    if (r) out += "; ";
    out += format_vector(m.row(r).transpose());
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& label) {
  ExperimentConfig cfg;
  cfg.label = label;

  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(label, line_no, "unterminated section header: '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "model" && section != "funnel" && section != "reference" &&
          section != "controller" && section != "horizon" && section != "cost" &&
          section != "bound" && section != "integrator" && section != "output")
        fail(label, line_no, "unknown section [" + section + "]");
      continue;
    }

    const size_t eq = line.find('=');
    if (eq == std::string::npos) fail(label, line_no, "expected 'key = value': '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(label, line_no, "empty key");
    if (value.empty()) fail(label, line_no, "empty value for '" + key + "'");
    if (section.empty()) fail(label, line_no, "'" + key + "' appears before any [section]");

    auto num = [&] { return parse_double(label, line_no, key, value); };
    auto integer = [&] { return parse_int(label, line_no, key, value); };
    auto vec = [&] { return parse_vector(label, line_no, key, value); };

    if (section == "model") {
      if (key == "name")
        cfg.model.name = value;
      else if (key == "x0")
        cfg.model.x0 = vec();
      else if (key == "a")
        cfg.model.a = parse_matrix(label, line_no, key, value);
      else if (key == "b")
        cfg.model.b = parse_matrix(label, line_no, key, value);
      else if (key == "c")
        cfg.model.c = parse_matrix(label, line_no, key, value);
      else
        cfg.model.params[key] = num();
    } else if (section == "funnel") {
      if (key == "type")
        cfg.funnel.type = value;
      else if (key == "a")
        cfg.funnel.a = num();
      else if (key == "b")
        cfg.funnel.b = num();
      else if (key == "c")
        cfg.funnel.c = num();
      else if (key == "radius")
        cfg.funnel.radius = num();
      else
        fail(label, line_no, "unknown funnel key '" + key + "'");
    } else if (section == "reference") {
      if (key == "type")
        cfg.reference.type = value;
      else if (key == "value")
        cfg.reference.value = vec();
      else if (key == "amplitude")
        cfg.reference.amplitude = num();
      else if (key == "frequency")
        cfg.reference.frequency = num();
      else
        fail(label, line_no, "unknown reference key '" + key + "'");
    } else if (section == "controller") {
      if (key == "type")
        cfg.controller.type = value;
      else if (key == "degree")
        cfg.controller.degree = integer();
      else if (key == "sample_dt")
        cfg.controller.sample_dt = num();
      else
        fail(label, line_no, "unknown controller key '" + key + "'");
    } else if (section == "horizon") {
      if (key == "t0")
        cfg.horizon.t0 = num();
      else if (key == "sim_end")
        cfg.horizon.sim_end = num();
      else if (key == "horizon_T")
        cfg.horizon.horizon_T = num();
      else if (key == "delta")
        cfg.horizon.delta = num();
      else if (key == "control_step")
        cfg.horizon.control_step = num();
      else
        fail(label, line_no, "unknown horizon key '" + key + "'");
    } else if (section == "cost") {
      if (key == "lambda_u")
        cfg.cost.lambda_u = num();
      else if (key == "penalty_weight")
        cfg.cost.penalty_weight = num();
      else if (key == "epsilon_guard")
        cfg.cost.epsilon_guard = num();
      else if (key == "quadrature")
        cfg.cost.quadrature = value;
      else
        fail(label, line_no, "unknown cost key '" + key + "'");
    } else if (section == "bound") {
      if (key == "m")
        cfg.bound.m = num();
      else if (key == "mode")
        cfg.bound.mode = value;
      else if (key == "y_lo")
        cfg.bound.y_lo = vec();
      else if (key == "y_hi")
        cfg.bound.y_hi = vec();
      else if (key == "eta_lo")
        cfg.bound.eta_lo = vec();
      else if (key == "eta_hi")
        cfg.bound.eta_hi = vec();
      else if (key == "eta0_radius")
        cfg.bound.eta0_radius = num();
      else if (key == "alpha")
        cfg.bound.alpha = num();
      else if (key == "beta")
        cfg.bound.beta = num();
      else if (key == "samples")
        cfg.bound.samples = integer();
      else if (key == "safety")
        cfg.bound.safety = num();
      else if (key == "t_check")
        cfg.bound.t_check = num();
      else
        fail(label, line_no, "unknown bound key '" + key + "'");
    } else if (section == "integrator") {
      if (key == "substeps")
        cfg.integrator.substeps = integer();
      else if (key == "blowup")
        cfg.integrator.blowup = num();
      else
        fail(label, line_no, "unknown integrator key '" + key + "'");
    } else {  // output
      if (key == "dir")
        cfg.output_dir = value;
      else
        fail(label, line_no, "unknown output key '" + key + "'");
    }
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();

  // Label = file stem.
  size_t start = path.find_last_of("/\\");
  start = (start == std::string::npos) ? 0 : start + 1;
  size_t end = path.rfind('.');
  if (end == std::string::npos || end <= start) end = path.size();
  return parse_config(buffer.str(), path.substr(start, end - start));
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;

  out << "[model]\n";
  if (!cfg.model.name.empty()) out << "name = " << cfg.model.name << '\n';
  for (const auto& [key, value] : cfg.model.params)
    out << key << " = " << format_double(value) << '\n';
  if (cfg.model.a) out << "a = " << format_matrix(*cfg.model.a) << '\n';
  if (cfg.model.b) out << "b = " << format_matrix(*cfg.model.b) << '\n';
  if (cfg.model.c) out << "c = " << format_matrix(*cfg.model.c) << '\n';
  if (cfg.model.x0.size() > 0) out << "x0 = " << format_vector(cfg.model.x0) << '\n';

  out << "\n[funnel]\n";
  if (!cfg.funnel.type.empty()) out << "type = " << cfg.funnel.type << '\n';
  if (cfg.funnel.type == "constant") {
    out << "radius = " << format_double(cfg.funnel.radius) << '\n';
  } else if (!cfg.funnel.type.empty()) {
    out << "a = " << format_double(cfg.funnel.a) << '\n';
    out << "b = " << format_double(cfg.funnel.b) << '\n';
    out << "c = " << format_double(cfg.funnel.c) << '\n';
  }

  out << "\n[reference]\n";
  if (!cfg.reference.type.empty()) out << "type = " << cfg.reference.type << '\n';
  if (cfg.reference.type == "cosine") {
    out << "amplitude = " << format_double(cfg.reference.amplitude) << '\n';
    out << "frequency = " << format_double(cfg.reference.frequency) << '\n';
  } else if (cfg.reference.value.size() > 0) {
    out << "value = " << format_vector(cfg.reference.value) << '\n';
  }

  out << "\n[controller]\n";
  out << "type = " << cfg.controller.type << '\n';
  out << "degree = " << cfg.controller.degree << '\n';
  if (cfg.controller.sample_dt) out << "sample_dt = " << format_double(*cfg.controller.sample_dt) << '\n';

  out << "\n[horizon]\n";
  out << "t0 = " << format_double(cfg.horizon.t0) << '\n';
  out << "sim_end = " << format_double(cfg.horizon.sim_end) << '\n';
  out << "horizon_T = " << format_double(cfg.horizon.horizon_T) << '\n';
  out << "delta = " << format_double(cfg.horizon.delta) << '\n';
  out << "control_step = " << format_double(cfg.horizon.control_step) << '\n';

  out << "\n[cost]\n";
  out << "lambda_u = " << format_double(cfg.cost.lambda_u) << '\n';
  out << "penalty_weight = " << format_double(cfg.cost.penalty_weight) << '\n';
  out << "epsilon_guard = " << format_double(cfg.cost.epsilon_guard) << '\n';
  out << "quadrature = " << cfg.cost.quadrature << '\n';

  out << "\n[bound]\n";
  out << "m = " << format_double(cfg.bound.m) << '\n';
  if (!cfg.bound.mode.empty()) {
    out << "mode = " << cfg.bound.mode << '\n';
    if (cfg.bound.mode == "general") {
      if (cfg.bound.y_lo.size() > 0) out << "y_lo = " << format_vector(cfg.bound.y_lo) << '\n';
      if (cfg.bound.y_hi.size() > 0) out << "y_hi = " << format_vector(cfg.bound.y_hi) << '\n';
      if (cfg.bound.eta_lo.size() > 0) out << "eta_lo = " << format_vector(cfg.bound.eta_lo) << '\n';
      if (cfg.bound.eta_hi.size() > 0) out << "eta_hi = " << format_vector(cfg.bound.eta_hi) << '\n';
      out << "samples = " << cfg.bound.samples << '\n';
      out << "safety = " << format_double(cfg.bound.safety) << '\n';
    } else {
      out << "eta0_radius = " << format_double(cfg.bound.eta0_radius) << '\n';
      if (cfg.bound.alpha) out << "alpha = " << format_double(*cfg.bound.alpha) << '\n';
      if (cfg.bound.beta) out << "beta = " << format_double(*cfg.bound.beta) << '\n';
      out << "t_check = " << format_double(cfg.bound.t_check) << '\n';
    }
  }

  out << "\n[integrator]\n";
  out << "substeps = " << cfg.integrator.substeps << '\n';
  out << "blowup = " << format_double(cfg.integrator.blowup) << '\n';

  if (!cfg.output_dir.empty()) {
    out << "\n[output]\n";
    out << "dir = " << cfg.output_dir << '\n';
  }
  return out.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = serialize_config(cfg);
  // FNV-1a, 64-bit.
  uint64_t hash = 14695981039346656037ull;
  for (const unsigned char ch : text) {
    hash ^= ch;
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

void ExperimentConfig::validate_for_run() const {
  auto complain = [](const std::string& message) { throw std::invalid_argument(message); };

  if (model.name.empty()) complain("config: model.name is missing");
  if (model.x0.size() == 0) complain("config: model.x0 is missing");

  if (funnel.type != "exponential" && funnel.type != "constant")
    complain("config: funnel.type must be 'exponential' or 'constant', got '" + funnel.type + "'");
  if (reference.type != "constant" && reference.type != "cosine")
    complain("config: reference.type must be 'constant' or 'cosine', got '" + reference.type + "'");

  const bool is_mpc = controller.type == "fmpc" || controller.type == "classical_mpc";
  if (!is_mpc && controller.type != "funnel_controller")
    complain("config: controller.type must be fmpc, classical_mpc or funnel_controller, got '" +
             controller.type + "'");
  if (controller.degree < 1 || controller.degree > 3)
    complain("config: controller.degree must be 1, 2 or 3");
  if (controller.sample_dt && !(*controller.sample_dt > 0.0))
    complain("config: controller.sample_dt must be positive");

  if (!(horizon.control_step > 0.0)) complain("config: horizon.control_step must be positive");
  if (!(horizon.sim_end > horizon.t0)) complain("config: horizon.sim_end must exceed horizon.t0");

  auto is_multiple = [&](double v) {
    const double ratio = v / horizon.control_step;
    const long n = std::lround(ratio);
    return n >= 1 && std::abs(ratio - static_cast<double>(n)) <= 1e-6 * std::max(1.0, std::abs(ratio));
  };
  if (is_mpc) {
    if (!(horizon.delta > 0.0)) complain("config: horizon.delta must be positive");
    if (horizon.horizon_T + 1e-12 < horizon.delta)
      complain("config: horizon.horizon_T must be at least horizon.delta");
    if (!is_multiple(horizon.delta))
      complain("config: horizon.delta must be an integer multiple of horizon.control_step");
    if (!is_multiple(horizon.horizon_T))
      complain("config: horizon.horizon_T must be an integer multiple of horizon.control_step");
    if (!is_multiple(horizon.sim_end - horizon.t0))
      complain(
          "config: horizon.sim_end - horizon.t0 must be an integer multiple of "
          "horizon.control_step");
  }

  if (!(cost.lambda_u >= 0.0)) complain("config: cost.lambda_u must be >= 0");
  if (!(cost.penalty_weight > 0.0)) complain("config: cost.penalty_weight must be positive");
  if (!(cost.epsilon_guard > 0.0 && cost.epsilon_guard < 1.0))
    complain("config: cost.epsilon_guard must lie in (0, 1)");
  if (cost.quadrature != "rectangle" && cost.quadrature != "trapezoid")
    complain("config: cost.quadrature must be 'rectangle' or 'trapezoid'");

  if (is_mpc && !(bound.m > 0.0)) complain("config: bound.m must be positive for MPC runs");

  if (integrator.substeps < 1) complain("config: integrator.substeps must be >= 1");
  if (!(integrator.blowup > 0.0)) complain("config: integrator.blowup must be positive");
}

}  // namespace fmpc
