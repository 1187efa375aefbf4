#pragma once

#include <Eigen/Core>

#include "harmonics.hpp"
#include "mesh.hpp"

namespace fplo {

/// Discrete phase-space density: the even block holds P1 nodal coefficients
/// of the even moments (vertex-major, row-major storage), the odd block
/// holds P0 cell coefficients of the odd moments.
struct PhaseSpaceField {
  using Block = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Block even;  // vertices x even moments
  Block odd;   // cells x odd moments

  static PhaseSpaceField zero(const Mesh2D& mesh, const SphericalBasis& basis);

  bool conforms(const Mesh2D& mesh, const SphericalBasis& basis) const;
  double max_abs() const;

  /// Flat views in the solver's unknown order (even block first).
  Eigen::Map<Eigen::VectorXd> even_flat() {
    return {even.data(), even.size()};
  }
  Eigen::Map<const Eigen::VectorXd> even_flat() const {
    return {even.data(), even.size()};
  }
  Eigen::Map<Eigen::VectorXd> odd_flat() { return {odd.data(), odd.size()}; }
  Eigen::Map<const Eigen::VectorXd> odd_flat() const {
    return {odd.data(), odd.size()};
  }
};

}  // namespace fplo
