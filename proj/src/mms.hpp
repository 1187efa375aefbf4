#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>

#include "model.hpp"

namespace fplo {

/// Reading of the Test-3 coefficient scaling: energy power eps^p, or the
/// constant Euler number raised to p.
enum class Test3Reading { EpsPower, EulerConstant };

/// Manufactured solution psi = chi(x,y) f(eps) sum_l Y_l^0 / (l+1)^2 with a
/// source constructed so the transport equation holds exactly. The spatial
/// profile chi vanishes on the domain boundary, f vanishes at eps_max, so
/// the homogeneous inflow and initial conditions hold as well.
struct ManufacturedCase {
  std::string name;
  int n_max = 2;  // truncation order of the exact expansion

  std::function<double(double)> f;        // energy profile
  std::function<double(double)> f_prime;

  ModelCoefficients coeffs;
  ScalarField stopping_eps_derivative;  // analytic d/d_eps of S

  std::function<double(double, double)> chi;
  std::function<Eigen::Vector2d(double, double)> grad_chi;

  Rect domain{-1.0, 1.0, -1.0, 1.0};
  double eps_min = 1.0;
  double eps_max = 2.0;

  // discretization defaults (overridable from the study configuration)
  int default_resolution = 16;  // cells per side
  int default_order = 5;        // N
  double default_delta_eps = 1e-2;
};

/// The three convergence experiments. Test 3 exists in both coefficient
/// readings; the energy-power reading is the default.
ManufacturedCase preset(int test_id,
                        Test3Reading reading = Test3Reading::EpsPower);

/// Pointwise exact solution.
double exact_solution(const ManufacturedCase& c, double x, double y,
                      const Eigen::Vector3d& s, double eps);

/// Source term with both a pointwise evaluator and the analytic moment fast
/// path; all terms are evaluated analytically (eigenvalue identity for the
/// surface Laplacian, moment matrices for streaming and rotation).
SourceTerm manufactured_source(const ManufacturedCase& c);

/// Exact-solution data expanded over an extended harmonics basis that is
/// large enough to hold the solution moments and their streaming images.
/// Everything here is independent of the energy variable: multiply by
/// f(eps) to obtain moments at a given energy.
class ExactExpansion {
 public:
  ExactExpansion(const ManufacturedCase& c, const SphericalBasis& discrete);

  const SphericalBasis& extended() const { return ext_; }

  /// Exact coefficients at the discrete even/odd index positions.
  const Eigen::VectorXd& even_coeffs() const { return even_coeffs_; }
  const Eigen::VectorXd& odd_coeffs() const { return odd_coeffs_; }

  /// Sum of squared exact coefficients whose moments fall outside the
  /// discrete basis (the P_N truncation contribution to the L2 error).
  double even_truncation_sq() const { return even_trunc_sq_; }
  double odd_truncation_sq() const { return odd_trunc_sq_; }

  /// Streaming images over the extended odd index list:
  /// a0 = X_x c^+, b0 = X_y c^+ for the even part of the exact coefficients.
  const Eigen::VectorXd& stream_x_exact() const { return a0_; }
  const Eigen::VectorXd& stream_y_exact() const { return b0_; }

  /// Streaming matrices restricted to (extended odd rows) x (discrete even
  /// columns), matching stream_*_exact row layout.
  const Eigen::MatrixXd& stream_x_discrete() const { return ax_; }
  const Eigen::MatrixXd& stream_y_discrete() const { return ay_; }

 private:
  SphericalBasis ext_;
  Eigen::VectorXd even_coeffs_, odd_coeffs_;
  double even_trunc_sq_ = 0.0, odd_trunc_sq_ = 0.0;
  Eigen::VectorXd a0_, b0_;
  Eigen::MatrixXd ax_, ay_;
};

}  // namespace fplo
