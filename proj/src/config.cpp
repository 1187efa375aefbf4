#include "config.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace fplo {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& v, int line, const std::string& key) {
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    fail(line, "invalid number '" + v + "' for key '" + key + "'");
  }
}

int parse_int(const std::string& v, int line, const std::string& key) {
  try {
    size_t used = 0;
    const int i = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return i;
  } catch (...) {
    fail(line, "invalid integer '" + v + "' for key '" + key + "'");
  }
}

std::vector<std::string> split_ws(const std::string& v) {
  std::istringstream ss(v);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

CoefficientForm parse_form(const std::string& v, int line, const std::string& key) {
  const auto parts = split_ws(v);
  if (parts.size() != 3)
    fail(line, "key '" + key + "' needs three numbers: c0 c2 p");
  CoefficientForm f;
  f.c0 = parse_double(parts[0], line, key);
  f.c2 = parse_double(parts[1], line, key);
  f.p = parse_double(parts[2], line, key);
  return f;
}

bool parse_bool(const std::string& v, int line, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(line, "invalid boolean '" + v + "' for key '" + key + "'");
}

void apply_preset_defaults(StudyConfig& c) {
  switch (c.preset) {
    case 1:
      c.axis = SweepAxis::Resolution;
      c.sweep = {8, 16, 32};
      c.resolution = 16;
      c.order = 5;
      c.delta_eps = 1e-2;
      break;
    case 2:
      c.axis = SweepAxis::Order;
      c.sweep = {1, 3, 5};
      c.resolution = 64;
      c.order = 5;
      c.delta_eps = 1e-2;
      break;
    case 3:
      c.axis = SweepAxis::DeltaEps;
      c.sweep = {2, 4, 8, 16, 32};
      c.resolution = 64;
      c.order = 5;
      c.delta_eps = 1e-2;
      break;
    default:
      break;
  }
}

void apply_key(StudyConfig& c, const std::string& key, const std::string& value,
               int line) {
  if (key == "preset") {
    c.preset = parse_int(value, line, key);
    if (c.preset < 0 || c.preset > 3) fail(line, "preset must be 0..3");
  } else if (key == "reading") {
    if (value == "eps-power") c.reading = Test3Reading::EpsPower;
    else if (value == "euler") c.reading = Test3Reading::EulerConstant;
    else fail(line, "reading must be 'eps-power' or 'euler'");
  } else if (key == "stopping") {
    c.stopping = parse_form(value, line, key);
  } else if (key == "transport") {
    c.transport = parse_form(value, line, key);
  } else if (key == "g1") {
    c.magnetic[0] = parse_form(value, line, key);
  } else if (key == "g2") {
    c.magnetic[1] = parse_form(value, line, key);
  } else if (key == "g3") {
    c.magnetic[2] = parse_form(value, line, key);
  } else if (key == "f") {
    if (value != "2-eps" && value != "1-exp(eps-2)")
      fail(line, "f must be '2-eps' or '1-exp(eps-2)'");
    c.energy_profile = value;
  } else if (key == "n_max") {
    c.n_max = parse_int(value, line, key);
    if (c.n_max < 0) fail(line, "n_max must be >= 0");
  } else if (key == "sweep") {
    if (value == "h") c.axis = SweepAxis::Resolution;
    else if (value == "N") c.axis = SweepAxis::Order;
    else if (value == "deps") c.axis = SweepAxis::DeltaEps;
    else fail(line, "sweep must be one of h, N, deps");
  } else if (key == "sweep_values") {
    c.sweep.clear();
    for (const auto& tok : split_ws(value))
      c.sweep.push_back(parse_int(tok, line, key));
    if (c.sweep.empty()) fail(line, "sweep_values must not be empty");
  } else if (key == "resolution") {
    c.resolution = parse_int(value, line, key);
  } else if (key == "order") {
    c.order = parse_int(value, line, key);
  } else if (key == "delta_eps") {
    c.delta_eps = parse_double(value, line, key);
  } else if (key == "eps_min") {
    c.eps_min = parse_double(value, line, key);
  } else if (key == "eps_max") {
    c.eps_max = parse_double(value, line, key);
  } else if (key == "domain") {
    const auto parts = split_ws(value);
    if (parts.size() != 4) fail(line, "domain needs: xmin xmax ymin ymax");
    c.domain.xmin = parse_double(parts[0], line, key);
    c.domain.xmax = parse_double(parts[1], line, key);
    c.domain.ymin = parse_double(parts[2], line, key);
    c.domain.ymax = parse_double(parts[3], line, key);
  } else if (key == "solver") {
    if (value == "schur-bicgstab") c.strategy = SolveStrategy::SchurIterative;
    else if (value == "schur-lu") c.strategy = SolveStrategy::SchurDirect;
    else if (value == "monolithic-lu") c.strategy = SolveStrategy::MonolithicDirect;
    else fail(line, "solver must be schur-bicgstab, schur-lu or monolithic-lu");
  } else if (key == "rhs_projection") {
    if (value == "quadrature") c.rhs_projection = RhsProjection::Quadrature;
    else if (value == "interpolation") c.rhs_projection = RhsProjection::Interpolation;
    else fail(line, "rhs_projection must be quadrature or interpolation");
  } else if (key == "solver_rtol") {
    c.solver_rtol = parse_double(value, line, key);
    if (!(c.solver_rtol > 0)) fail(line, "solver_rtol must be positive");
  } else if (key == "solver_max_iterations") {
    c.solver_max_iterations = parse_int(value, line, key);
    if (c.solver_max_iterations < 1) fail(line, "solver_max_iterations must be >= 1");
  } else if (key == "out") {
    c.out_dir = value;
  } else if (key == "format") {
    if (value == "csv") c.format = ReportFormat::Csv;
    else if (value == "md") c.format = ReportFormat::Markdown;
    else fail(line, "format must be csv or md");
  } else if (key == "checkpoint") {
    c.checkpoint_path = value;
  } else if (key == "checkpoint_format") {
    if (value == "binary") c.checkpoint_format = CheckpointFormat::Binary;
    else if (value == "csv") c.checkpoint_format = CheckpointFormat::Csv;
    else fail(line, "checkpoint_format must be binary or csv");
  } else if (key == "deterministic") {
    c.deterministic = parse_bool(value, line, key);
  } else if (key == "threads") {
    c.threads = parse_int(value, line, key);
    if (c.threads < 1) fail(line, "threads must be >= 1");
  } else {
    fail(line, "unknown key '" + key + "'");
  }
}

void validate(const StudyConfig& c) {
  auto reject = [](const std::string& what) { throw ConfigError("config: " + what); };

  if (c.preset < 0 || c.preset > 3) reject("preset must be 0..3");
  if (!(c.eps_min < c.eps_max)) reject("energy interval is empty");
  if (c.domain.degenerate()) reject("domain is degenerate");
  for (double bound : {c.domain.xmin, c.domain.xmax, c.domain.ymin, c.domain.ymax})
    if (std::abs(std::sin(M_PI * bound)) > 1e-9)
      reject("domain bounds must be integers so the manufactured spatial "
             "profile vanishes on the boundary");
  if (c.resolution < 1) reject("resolution must be >= 1");
  if (c.order < 1 || c.order % 2 == 0)
    reject("order N=" + std::to_string(c.order) +
           " rejected: the moment order must be odd so that streaming maps the "
           "even space into the odd space");
  if (c.sweep.empty()) reject("sweep_values must not be empty");
  for (size_t i = 1; i < c.sweep.size(); ++i)
    if (c.sweep[i] <= c.sweep[i - 1]) reject("sweep values must increase strictly");
  for (int v : c.sweep) {
    if (v < 1) reject("sweep values must be positive");
    if (c.axis == SweepAxis::Order && v % 2 == 0)
      reject("sweep value N=" + std::to_string(v) +
             " rejected: the moment order must be odd so that streaming maps "
             "the even space into the odd space");
  }
  if (c.axis != SweepAxis::DeltaEps)
    steps_for(c.eps_min, c.eps_max, c.delta_eps);
  else
    for (int v : c.sweep) steps_for(c.eps_min, c.eps_max, 1.0 / v);
  if (c.preset == 0 && c.n_max < 0) reject("n_max must be >= 0");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_form(const CoefficientForm& f) {
  return format_double(f.c0) + " " + format_double(f.c2) + " " + format_double(f.p);
}

}  // namespace

int steps_for(double eps_min, double eps_max, double delta_eps) {
  if (!(delta_eps > 0)) throw ConfigError("config: delta_eps must be positive");
  const double ratio = (eps_max - eps_min) / delta_eps;
  const int steps = static_cast<int>(std::lround(ratio));
  if (steps < 1 || std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio))
    throw ConfigError(
        "config: the energy interval must be an integer number of steps of "
        "delta_eps");
  return steps;
}

StudyConfig parse_config(const std::string& text) {
  // first pass: collect pairs with line numbers
  std::vector<std::tuple<int, std::string, std::string>> pairs;
  std::istringstream stream(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(line_no, "missing key");
    if (value.empty()) fail(line_no, "missing value for key '" + key + "'");
    pairs.emplace_back(line_no, key, value);
  }

  StudyConfig config;
  // the preset decides the knob defaults; explicit keys override afterwards
  for (const auto& [ln, key, value] : pairs)
    if (key == "preset") apply_key(config, key, value, ln);
  apply_preset_defaults(config);
  for (const auto& [ln, key, value] : pairs)
    if (key != "preset") apply_key(config, key, value, ln);

  validate(config);
  return config;
}

void finalize_config(StudyConfig& config, bool preset_defaults) {
  if (preset_defaults) apply_preset_defaults(config);
  validate(config);
}

void apply_config_key(StudyConfig& config, const std::string& key,
                      const std::string& value) {
  apply_key(config, trim(key), trim(value), 0);
}

std::string render_config(const StudyConfig& c) {
  std::ostringstream os;
  os << "preset = " << c.preset << "\n";
  os << "reading = "
     << (c.reading == Test3Reading::EpsPower ? "eps-power" : "euler") << "\n";
  if (c.preset == 0) {
    os << "stopping = " << format_form(c.stopping) << "\n";
    os << "transport = " << format_form(c.transport) << "\n";
    os << "g1 = " << format_form(c.magnetic[0]) << "\n";
    os << "g2 = " << format_form(c.magnetic[1]) << "\n";
    os << "g3 = " << format_form(c.magnetic[2]) << "\n";
    os << "f = " << c.energy_profile << "\n";
    os << "n_max = " << c.n_max << "\n";
  }
  os << "sweep = "
     << (c.axis == SweepAxis::Resolution ? "h"
         : c.axis == SweepAxis::Order    ? "N"
                                         : "deps")
     << "\n";
  os << "sweep_values =";
  for (int v : c.sweep) os << " " << v;
  os << "\n";
  os << "resolution = " << c.resolution << "\n";
  os << "order = " << c.order << "\n";
  os << "delta_eps = " << format_double(c.delta_eps) << "\n";
  os << "eps_min = " << format_double(c.eps_min) << "\n";
  os << "eps_max = " << format_double(c.eps_max) << "\n";
  os << "domain = " << format_double(c.domain.xmin) << " "
     << format_double(c.domain.xmax) << " " << format_double(c.domain.ymin) << " "
     << format_double(c.domain.ymax) << "\n";
  os << "solver = "
     << (c.strategy == SolveStrategy::SchurIterative    ? "schur-bicgstab"
         : c.strategy == SolveStrategy::SchurDirect     ? "schur-lu"
                                                        : "monolithic-lu")
     << "\n";
  os << "rhs_projection = "
     << (c.rhs_projection == RhsProjection::Quadrature ? "quadrature"
                                                       : "interpolation")
     << "\n";
  os << "solver_rtol = " << format_double(c.solver_rtol) << "\n";
  os << "solver_max_iterations = " << c.solver_max_iterations << "\n";
  os << "out = " << c.out_dir << "\n";
  os << "format = " << (c.format == ReportFormat::Csv ? "csv" : "md") << "\n";
  if (!c.checkpoint_path.empty()) {
    os << "checkpoint = " << c.checkpoint_path << "\n";
    os << "checkpoint_format = "
       << (c.checkpoint_format == CheckpointFormat::Binary ? "binary" : "csv")
       << "\n";
  }
  os << "deterministic = " << (c.deterministic ? "true" : "false") << "\n";
  os << "threads = " << c.threads << "\n";
  return os.str();
}

ManufacturedCase case_from_config(const StudyConfig& config) {
  if (config.preset != 0) {
    ManufacturedCase c = preset(config.preset, config.reading);
    c.domain = config.domain;
    c.eps_min = config.eps_min;
    c.eps_max = config.eps_max;
    if (std::abs(c.f(c.eps_max)) > 1e-14)
      throw ConfigError("config: the energy profile must vanish at eps_max");
    return c;
  }

  ManufacturedCase c;
  c.name = "custom";
  c.n_max = config.n_max;
  c.domain = config.domain;
  c.eps_min = config.eps_min;
  c.eps_max = config.eps_max;
  c.default_resolution = config.resolution;
  c.default_order = config.order;
  c.default_delta_eps = config.delta_eps;

  if (config.energy_profile == "2-eps") {
    c.f = [](double eps) { return 2.0 - eps; };
    c.f_prime = [](double) { return -1.0; };
  } else {
    c.f = [](double eps) { return 1.0 - std::exp(eps - 2.0); };
    c.f_prime = [](double eps) { return -std::exp(eps - 2.0); };
  }

  auto field = [](const CoefficientForm& f) -> ScalarField {
    return [f](double x, double y, double eps) {
      return (f.c0 + f.c2 * (x * x + y * y)) * std::pow(eps, f.p);
    };
  };
  c.coeffs.stopping = field(config.stopping);
  c.coeffs.transport = field(config.transport);
  for (int i = 0; i < 3; ++i) c.coeffs.magnetic[i] = field(config.magnetic[i]);
  const CoefficientForm s = config.stopping;
  c.stopping_eps_derivative = [s](double x, double y, double eps) {
    if (s.p == 0.0) return 0.0;
    return (s.c0 + s.c2 * (x * x + y * y)) * s.p * std::pow(eps, s.p - 1.0);
  };

  c.chi = [](double x, double y) { return std::sin(M_PI * x) * std::sin(M_PI * y); };
  c.grad_chi = [](double x, double y) {
    return Eigen::Vector2d(M_PI * std::cos(M_PI * x) * std::sin(M_PI * y),
                           M_PI * std::sin(M_PI * x) * std::cos(M_PI * y));
  };
  if (std::abs(c.f(c.eps_max)) > 1e-14)
    throw ConfigError("config: the energy profile must vanish at eps_max");
  return c;
}

}  // namespace fplo
