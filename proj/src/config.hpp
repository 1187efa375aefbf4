#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "mms.hpp"
#include "system.hpp"

namespace fplo {

enum class SweepAxis { Resolution, Order, DeltaEps };
enum class ReportFormat { Csv, Markdown };

/// Whitelisted coefficient expression (c0 + c2 (x^2 + y^2)) * eps^p; this
/// family covers every test case without a general expression parser.
struct CoefficientForm {
  double c0 = 1.0;
  double c2 = 0.0;
  double p = 0.0;
};

/// Declarative description of one convergence study.
struct StudyConfig {
  // case selection: preset 1..3, or 0 for a custom case below
  int preset = 1;
  Test3Reading reading = Test3Reading::EpsPower;

  // custom case (preset = 0)
  CoefficientForm stopping{1.0, 0.0, 0.0};
  CoefficientForm transport{1.0, 0.0, 0.0};
  std::array<CoefficientForm, 3> magnetic{
      CoefficientForm{0.0, 0.0, 0.0}, CoefficientForm{0.0, 0.0, 0.0},
      CoefficientForm{0.0, 0.0, 0.0}};
  std::string energy_profile = "2-eps";  // "2-eps" or "1-exp(eps-2)"
  int n_max = 2;

  // sweep and fixed knobs
  SweepAxis axis = SweepAxis::Resolution;
  std::vector<int> sweep;  // values of 1/h, N, or 1/deps
  int resolution = 16;
  int order = 5;
  double delta_eps = 1e-2;
  double eps_min = 1.0;
  double eps_max = 2.0;
  Rect domain{-1.0, 1.0, -1.0, 1.0};

  // solver
  SolveStrategy strategy = SolveStrategy::SchurIterative;
  double solver_rtol = 1e-10;
  int solver_max_iterations = 2000;
  RhsProjection rhs_projection = RhsProjection::Quadrature;

  // output and execution
  std::string out_dir = ".";
  ReportFormat format = ReportFormat::Csv;
  std::string checkpoint_path;  // empty: no trajectory checkpoints
  CheckpointFormat checkpoint_format = CheckpointFormat::Binary;
  bool deterministic = true;
  int threads = 1;
};

/// Parse failure with a line/field diagnostic.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses "key = value" text (# comments allowed) into a validated config
/// with defaults filled. Unknown keys, even orders and malformed values are
/// rejected with the offending line.
StudyConfig parse_config(const std::string& text);

/// Renders a config as parseable text; parse_config(render_config(c))
/// reproduces c.
std::string render_config(const StudyConfig& config);

/// Applies a single key/value pair (same grammar as parse_config lines).
/// Syntax errors throw ConfigError; cross-field validation is deferred.
void apply_config_key(StudyConfig& config, const std::string& key,
                      const std::string& value);

/// Fills preset-dependent defaults (knobs and sweep) and validates; called
/// by parse_config, or directly on hand-built configs.
void finalize_config(StudyConfig& config, bool apply_preset_defaults);

/// Case construction: preset cases by id, or the custom case assembled from
/// the whitelisted coefficient forms.
ManufacturedCase case_from_config(const StudyConfig& config);

/// Number of energy steps implied by delta_eps; throws unless the interval
/// is an integer multiple.
int steps_for(double eps_min, double eps_max, double delta_eps);

}  // namespace fplo
