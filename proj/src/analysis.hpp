#pragma once

#include <string>
#include <vector>

#include "config.hpp"
#include "mms.hpp"
#include "system.hpp"

namespace fplo {

/// Error quantities of one run: maxima over all energy nodes of the even
/// and odd L2 errors and of the combined streaming norm
/// E+ = sqrt(max_m(|s.grad_r e+|^2 + |e+|^2)).
struct ErrorRecord {
  double e_plus = 0.0;
  double e_minus = 0.0;
  double e_stream = 0.0;  // E+, always >= e_plus
};

/// Estimated order of convergence: log(coarse/fine) / log(knob_ratio).
/// knob_ratio = 2 recovers the log2 form for halved steps.
double eoc(double coarse_error, double fine_error, double knob_ratio = 2.0);

/// Streaming comparison of a discrete trajectory against the manufactured
/// solution. All chi-dependent cell moments are integrated once with a
/// degree-6 triangle rule; per step the cost is linear in cells.
class ErrorAccumulator {
 public:
  ErrorAccumulator(const ManufacturedCase& c, const Mesh2D& mesh,
                   const SphericalBasis& basis);

  /// Feed the field at energy node m (any order; visitor-compatible).
  void accumulate(double eps, const PhaseSpaceField& field);

  ErrorRecord record() const;

 private:
  const ManufacturedCase* case_;
  const Mesh2D* mesh_;
  const SphericalBasis* basis_;
  ExactExpansion expansion_;

  struct CellTable {
    double area;
    double ic, icc;             // chi, chi^2
    Eigen::Vector3d icphi;      // chi * phi_a
    Eigen::Matrix3d elem;       // phi_a phi_b
    double ia, ib;              // d_x chi, d_y chi
    double iaa, ibb, iab;       // squared and mixed gradient moments
    Eigen::Matrix<double, 2, 3> grads;  // P1 gradients
  };
  std::vector<CellTable> cells_;
  double chi_sq_total_ = 0.0;
  double a0_sq_ = 0.0, b0_sq_ = 0.0, a0b0_ = 0.0;

  double max_even_sq_ = 0.0, max_odd_sq_ = 0.0, max_combined_sq_ = 0.0;
};

/// One-call variant over a collected trajectory.
ErrorRecord error_norms(const std::vector<PhaseSpaceField>& trajectory,
                        const ManufacturedCase& c, const Mesh2D& mesh,
                        const SphericalBasis& basis, const EnergyGrid& grid);

/// One row of a convergence study.
struct SweepPoint {
  double knob = 0.0;  // swept value as configured (1/h, N, or 1/deps)
  int resolution = 0;
  int order = 0;
  double delta_eps = 0.0;
  ErrorRecord errors;
  long total_iterations = 0;
  double max_residual = 0.0;
  bool any_fallback = false;
};

struct StudyReport {
  StudyConfig config;  // effective configuration (defaults filled)
  std::string case_name;
  std::vector<SweepPoint> points;
};

/// Runs the configured sweep: one transport solve and error evaluation per
/// sweep value, optionally in parallel across points.
StudyReport run_study(const StudyConfig& config);

/// knob column label for the configured axis: 1/h, N or 1/deps.
std::string axis_label(SweepAxis axis);

void write_csv(const StudyReport& report, std::ostream& os);
void write_markdown(const StudyReport& report, std::ostream& os);

}  // namespace fplo
