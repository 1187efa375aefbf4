#pragma once

#include <Eigen/Core>
#include <array>
#include <iosfwd>
#include <vector>

#include "geometry.hpp"

namespace fplo {

/// Degree/order pair (l, m) addressing one real spherical harmonic.
struct MomentIndex {
  int l = 0;
  int m = 0;
  bool operator==(const MomentIndex&) const = default;
};

/// Truncated real spherical harmonics basis of odd order N, orthonormal on
/// the unit sphere, with the index list split by parity of l. The layout is
/// fixed: l ascending, m ascending from -l to l, so serialized moment fields
/// are portable across runs.
class SphericalBasis {
 public:
  /// Builds the basis. The order must be odd and positive; even orders break
  /// the compatibility between streaming and the odd moment set.
  static SphericalBasis build(int order);

  int order() const { return order_; }
  const std::vector<MomentIndex>& indices() const { return all_; }
  const std::vector<MomentIndex>& even_indices() const { return even_; }
  const std::vector<MomentIndex>& odd_indices() const { return odd_; }
  int total_count() const { return static_cast<int>(all_.size()); }
  int even_count() const { return static_cast<int>(even_.size()); }
  int odd_count() const { return static_cast<int>(odd_.size()); }

  /// Position of (l, m) in the full index list, -1 if absent.
  int find(MomentIndex idx) const;
  /// Position within the even (odd) sublist, -1 if absent or wrong parity.
  int find_even(MomentIndex idx) const;
  int find_odd(MomentIndex idx) const;

  /// Positions of the parity sublists inside the full list.
  const std::vector<int>& even_positions() const { return even_pos_; }
  const std::vector<int>& odd_positions() const { return odd_pos_; }

 private:
  SphericalBasis() = default;

  int order_ = 0;
  std::vector<MomentIndex> all_, even_, odd_;
  std::vector<int> even_pos_, odd_pos_;
  std::vector<int> full_lookup_;  // (l^2 + l + m) -> position in all_
};

/// Value of the orthonormal real spherical harmonic Y_l^m at a unit vector.
/// Convention: Y_{l,0} = N_{l0} P_l(cos t); Y_{l,m>0} ~ cos(m p),
/// Y_{l,m<0} ~ sin(|m| p), both with sqrt(2) and without the
/// Condon-Shortley phase, so e.g. Y_{1,1} = sqrt(3/4pi) s_x.
double eval_harmonic(int l, int m, const Eigen::Vector3d& s);

/// Tangential rotation field (s x grad_s) Y_l^m at a unit vector.
Eigen::Vector3d eval_surface_curl(int l, int m, const Eigen::Vector3d& s);

/// Quadrature rule on the unit sphere.
struct SphereQuadrature {
  Eigen::Matrix3Xd nodes;   // unit vectors, one per column
  Eigen::VectorXd weights;  // positive, summing to 4*pi
  int exactness = 0;        // declared polynomial exactness degree

  int size() const { return static_cast<int>(weights.size()); }
};

/// Product rule: Gauss-Legendre in cos(theta) times uniform trapezoid in
/// the azimuth. Exact for spherical polynomials up to the given degree.
SphereQuadrature build_quadrature(int exactness);

/// Variant with the polar interval split at the equator, so that integrands
/// carrying a |s.n| factor (kink on a great circle) are integrated exactly
/// once the nodes are rotated to align that circle with the equator.
SphereQuadrature build_split_quadrature(int exactness);

/// Table of basis values at quadrature nodes: (node, moment) layout.
Eigen::MatrixXd harmonic_table(const std::vector<MomentIndex>& indices,
                               const SphereQuadrature& quad);

/// Full multiplication matrices (X_i)_{k'k} = \int s_i Y_k Y_k' ds over the
/// complete index list of the basis. Entries couple only |l - l'| = 1.
std::array<Eigen::MatrixXd, 3> multiplication_matrices(
    const SphericalBasis& basis, const SphereQuadrature& quad);

/// Streaming moment matrices: the odd-row/even-column blocks of the
/// multiplication matrices, (A_i)_{k'k} = \int s_i Y_k Y_k' ds with k even
/// and k' odd.
std::array<Eigen::MatrixXd, 3> streaming_matrices(const SphericalBasis& basis,
                                                  const SphereQuadrature& quad);

/// Rotation (Lorentz) moment matrices over the full index list,
/// (R_i)_{k'k} = \int (s x grad_s Y_k)_i Y_k' ds. Skew-symmetric and
/// block-diagonal in l.
std::array<Eigen::MatrixXd, 3> lorentz_matrices(const SphericalBasis& basis,
                                                const SphereQuadrature& quad);

/// Laplace-Beltrami eigenvalues l(l+1) in the order of the given index list.
Eigen::VectorXd laplace_beltrami_diagonal(const std::vector<MomentIndex>& indices);

/// Boundary weight matrix over the even indices,
/// (W_n)_{k'k} = \int |s.n| Y_k Y_k' ds. Requires a split rule; the nodes
/// are rotated internally so the |s.n| kink falls on the panel seam.
Eigen::MatrixXd boundary_weight_matrix(const SphericalBasis& basis,
                                       const Eigen::Vector3d& n,
                                       const SphereQuadrature& split_quad);

/// Everything the bilinear form needs from the angular variable.
struct AngularOperators {
  std::array<Eigen::MatrixXd, 3> streaming;      // odd x even
  std::array<Eigen::MatrixXd, 3> lorentz_full;   // total x total
  std::array<Eigen::MatrixXd, 3> lorentz_even;   // even x even slice
  std::array<Eigen::MatrixXd, 3> lorentz_odd;    // odd x odd slice
  Eigen::VectorXd lb_even, lb_odd;
  std::array<Eigen::MatrixXd, kNormalCount> boundary_weight;  // even x even
};

/// Assembles all operator matrices for the basis. Streaming and Lorentz
/// matrices use a product rule of exactness >= 2N+2; the boundary weights
/// use a split rule of exactness >= 4N+8.
AngularOperators build_angular_operators(const SphericalBasis& basis);

/// Writes a dense matrix as "row,col,value" CSV (zeros skipped).
void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& mat,
                      double drop_tol = 0.0);

}  // namespace fplo
