#pragma once

#include <Eigen/Core>
#include <array>
#include <functional>
#include <string>

#include "harmonics.hpp"
#include "mesh.hpp"

namespace fplo {

/// Scalar coefficient over position and energy.
using ScalarField = std::function<double(double x, double y, double eps)>;

/// Problem coefficients: stopping power S, transport coefficient T and the
/// scaled magnetic field G = (G1, G2, G3). S and T must stay uniformly
/// positive; this is checked on every sampled point before a solve.
struct ModelCoefficients {
  ScalarField stopping;
  ScalarField transport;
  std::array<ScalarField, 3> magnetic;
};

/// Equidistant energy grid eps^m = eps_min + m * deps, m = 0..steps.
struct EnergyGrid {
  double eps_min = 1.0;
  double eps_max = 2.0;
  int steps = 1;

  double delta() const { return (eps_max - eps_min) / steps; }
  double node(int m) const {
    return m == steps ? eps_max : eps_min + m * delta();
  }
};

/// Source density q(r, s, eps). The pointwise evaluator is mandatory; the
/// optional moment evaluator provides angular moments of q directly and is
/// used as a fast path during assembly (it must agree with the evaluator,
/// which the tests check by quadrature).
struct SourceTerm {
  std::function<double(double x, double y, const Eigen::Vector3d& s, double eps)>
      evaluate;
  /// Fills moments over basis.indices() at one spatial point; may be empty.
  std::function<void(double x, double y, double eps, const SphericalBasis& basis,
                     Eigen::VectorXd& moments)>
      moments;
  int average_points = 3;   // Gauss points for local energy averages
  int angular_bandwidth = -1;  // highest harmonic degree in q; -1: basis order
};

/// Cellwise-constant realization of the coefficients at one energy node.
struct DiscreteCoefficients {
  double eps = 0.0;
  Eigen::VectorXd stopping;   // one value per cell
  Eigen::VectorXd transport;
  std::array<Eigen::VectorXd, 3> magnetic;

  bool same_values(const DiscreteCoefficients& other) const;
};

/// Centroid sampling onto the mesh at energy eps. Throws with the offending
/// cell and energy if S or T fails its positivity bound.
DiscreteCoefficients discretize_coefficients(const ModelCoefficients& coeffs,
                                             const Mesh2D& mesh, double eps);

/// Checks the positivity bounds at all cell centroids and all energy nodes.
void validate_coefficients(const ModelCoefficients& coeffs, const Mesh2D& mesh,
                           const EnergyGrid& grid);

/// Local average over (eps^m, eps^{m+1}) by Gauss quadrature:
/// qbar^m(r, s) = (1/deps) \int q(r, s, eps) deps.
std::function<double(double, double, const Eigen::Vector3d&)> local_average_source(
    const SourceTerm& q, int m, const EnergyGrid& grid);

/// Angular moments of the energy-averaged source. Uses the source's moment
/// fast path when present, and a quadrature projection otherwise.
class AveragedSourceMoments {
 public:
  AveragedSourceMoments(const SourceTerm& q, int m, const EnergyGrid& grid,
                        const SphericalBasis& basis);

  /// Moments over basis.indices() at one spatial point.
  void moments_at(double x, double y, Eigen::VectorXd& out) const;

 private:
  const SourceTerm& source_;
  const SphericalBasis& basis_;
  std::vector<double> eps_points_, eps_weights_;  // scaled by 1/deps
  // quadrature fallback state
  SphereQuadrature quad_;
  Eigen::MatrixXd projection_;  // (moment, node): Y^T * diag(w)
};

}  // namespace fplo
