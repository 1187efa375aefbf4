#include "harmonics.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "quadrature.hpp"

namespace fplo {

namespace {

// Associated Legendre values P_l^m(c) for fixed m and l = m..lmax, without
// the Condon-Shortley phase.
void legendre_column(int m, int lmax, double c, double* out) {
  const double s2 = std::max(0.0, 1.0 - c * c);
  double pmm = 1.0;
  for (int k = 1; k <= m; ++k) pmm *= (2.0 * k - 1.0);
  pmm *= std::pow(s2, 0.5 * m);
  out[0] = pmm;
  if (lmax == m) return;
  double pm1 = c * (2.0 * m + 1.0) * pmm;
  out[1] = pm1;
  double pm2 = pmm;
  for (int l = m + 2; l <= lmax; ++l) {
    double p = (c * (2.0 * l - 1.0) * pm1 - (l - 1.0 + m) * pm2) / (l - m);
    out[l - m] = p;
    pm2 = pm1;
    pm1 = p;
  }
}

double legendre(int l, int m, double c) {
  std::vector<double> col(l - m + 1);
  legendre_column(m, l, c, col.data());
  return col[l - m];
}

double normalization(int l, int m) {
  double ratio = 1.0;  // (l-m)! / (l+m)!
  for (int k = l - m + 1; k <= l + m; ++k) ratio /= k;
  return std::sqrt((2.0 * l + 1.0) / (4.0 * M_PI) * ratio);
}

struct Angles {
  double c;    // cos(theta)
  double s;    // sin(theta) >= 0
  double phi;  // azimuth
};

Angles to_angles(const Eigen::Vector3d& v) {
  Angles a;
  a.c = std::clamp(v.z(), -1.0, 1.0);
  a.s = std::sqrt(std::max(0.0, 1.0 - a.c * a.c));
  a.phi = std::atan2(v.y(), v.x());
  return a;
}

double azimuth_factor(int m, double phi) {
  if (m == 0) return 1.0;
  if (m > 0) return std::sqrt(2.0) * std::cos(m * phi);
  return std::sqrt(2.0) * std::sin(-m * phi);
}

double azimuth_factor_derivative(int m, double phi) {
  if (m == 0) return 0.0;
  if (m > 0) return -m * std::sqrt(2.0) * std::sin(m * phi);
  return -m * std::sqrt(2.0) * std::cos(-m * phi);
}

void check_index(int l, int m) {
  if (l < 0 || std::abs(m) > l)
    throw std::invalid_argument("harmonic index out of range: l=" +
                                std::to_string(l) + " m=" + std::to_string(m));
}

}  // namespace

SphericalBasis SphericalBasis::build(int order) {
  if (order < 1 || order % 2 == 0)
    throw std::invalid_argument(
        "SphericalBasis: order must be an odd positive integer, got " +
        std::to_string(order));
  SphericalBasis basis;
  basis.order_ = order;
  basis.full_lookup_.assign((order + 1) * (order + 1), -1);
  for (int l = 0; l <= order; ++l) {
    for (int m = -l; m <= l; ++m) {
      const int pos = static_cast<int>(basis.all_.size());
      basis.all_.push_back({l, m});
      basis.full_lookup_[l * l + l + m] = pos;
      if (l % 2 == 0) {
        basis.even_pos_.push_back(pos);
        basis.even_.push_back({l, m});
      } else {
        basis.odd_pos_.push_back(pos);
        basis.odd_.push_back({l, m});
      }
    }
  }
  return basis;
}

int SphericalBasis::find(MomentIndex idx) const {
  if (idx.l < 0 || idx.l > order_ || std::abs(idx.m) > idx.l) return -1;
  return full_lookup_[idx.l * idx.l + idx.l + idx.m];
}

int SphericalBasis::find_even(MomentIndex idx) const {
  if (idx.l % 2 != 0) return -1;
  const int pos = find(idx);
  if (pos < 0) return -1;
  // even sublist keeps the relative order of the full list
  int count = 0;
  for (int p : even_pos_) {
    if (p == pos) return count;
    ++count;
  }
  return -1;
}

int SphericalBasis::find_odd(MomentIndex idx) const {
  if (idx.l % 2 == 0) return -1;
  const int pos = find(idx);
  if (pos < 0) return -1;
  int count = 0;
  for (int p : odd_pos_) {
    if (p == pos) return count;
    ++count;
  }
  return -1;
}

double eval_harmonic(int l, int m, const Eigen::Vector3d& s) {
  check_index(l, m);
  const Angles a = to_angles(s);
  const int am = std::abs(m);
  return normalization(l, am) * legendre(l, am, a.c) * azimuth_factor(m, a.phi);
}

Eigen::Vector3d eval_surface_curl(int l, int m, const Eigen::Vector3d& s) {
  check_index(l, m);
  const Angles a = to_angles(s);
  const int am = std::abs(m);
  const double norm = normalization(l, am);

  // dP/dtheta = (l c P_l^m - (l+m) P_{l-1}^m) / sin(theta)
  const double pl = legendre(l, am, a.c);
  const double plm1 = (l - 1 >= am) ? legendre(l - 1, am, a.c) : 0.0;
  double sin_t = a.s;
  if (sin_t < 1e-300) sin_t = 1e-300;  // P_l^m vanishes there for m >= 1
  const double dtheta = norm * (l * a.c * pl - (l + am) * plm1) / sin_t *
                        azimuth_factor(m, a.phi);

  // (1/sin) dY/dphi; zero identically for m = 0
  double dphi_over_sin = 0.0;
  if (m != 0)
    dphi_over_sin = norm * pl / sin_t * azimuth_factor_derivative(m, a.phi);

  const double cphi = std::cos(a.phi), sphi = std::sin(a.phi);
  const Eigen::Vector3d e_theta(a.c * cphi, a.c * sphi, -a.s);
  const Eigen::Vector3d e_phi(-sphi, cphi, 0.0);

  // s x grad_s Y = (dY/dtheta) e_phi - (1/sin) (dY/dphi) e_theta
  return dtheta * e_phi - dphi_over_sin * e_theta;
}

SphereQuadrature build_quadrature(int exactness) {
  if (exactness < 0) throw std::invalid_argument("quadrature exactness < 0");
  const int n_polar = exactness / 2 + 1;
  const int n_az = exactness + 1;
  const Rule1D polar = gauss_legendre(n_polar);

  SphereQuadrature quad;
  quad.exactness = exactness;
  quad.nodes.resize(3, n_polar * n_az);
  quad.weights.resize(n_polar * n_az);
  int idx = 0;
  for (int i = 0; i < n_polar; ++i) {
    const double c = polar.points[i];
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    for (int j = 0; j < n_az; ++j) {
      const double phi = 2.0 * M_PI * j / n_az;
      quad.nodes.col(idx) = Eigen::Vector3d(s * std::cos(phi),
                                            s * std::sin(phi), c);
      quad.weights[idx] = polar.weights[i] * (2.0 * M_PI / n_az);
      ++idx;
    }
  }
  return quad;
}

SphereQuadrature build_split_quadrature(int exactness) {
  if (exactness < 0) throw std::invalid_argument("quadrature exactness < 0");
  const int n_half = exactness / 2 + 2;
  const int n_az = 2 * (exactness + 1);  // even count keeps +/- symmetry
  const Rule1D upper = gauss_legendre(n_half, 0.0, 1.0);

  SphereQuadrature quad;
  quad.exactness = exactness;
  quad.nodes.resize(3, 2 * n_half * n_az);
  quad.weights.resize(2 * n_half * n_az);
  int idx = 0;
  for (int half = 0; half < 2; ++half) {
    for (int i = 0; i < n_half; ++i) {
      const double c = half == 0 ? upper.points[i] : -upper.points[i];
      const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
      for (int j = 0; j < n_az; ++j) {
        const double phi = 2.0 * M_PI * j / n_az;
        quad.nodes.col(idx) = Eigen::Vector3d(s * std::cos(phi),
                                              s * std::sin(phi), c);
        quad.weights[idx] = upper.weights[i] * (2.0 * M_PI / n_az);
        ++idx;
      }
    }
  }
  return quad;
}

Eigen::MatrixXd harmonic_table(const std::vector<MomentIndex>& indices,
                               const SphereQuadrature& quad) {
  Eigen::MatrixXd table(quad.size(), indices.size());
  for (int k = 0; k < static_cast<int>(indices.size()); ++k)
    for (int q = 0; q < quad.size(); ++q)
      table(q, k) = eval_harmonic(indices[k].l, indices[k].m, quad.nodes.col(q));
  return table;
}

std::array<Eigen::MatrixXd, 3> multiplication_matrices(
    const SphericalBasis& basis, const SphereQuadrature& quad) {
  const Eigen::MatrixXd table = harmonic_table(basis.indices(), quad);
  std::array<Eigen::MatrixXd, 3> result;
  for (int i = 0; i < 3; ++i) {
    // (X_i)_{k'k} = sum_q w_q s_i(q) Y_k(q) Y_k'(q)
    Eigen::VectorXd sw =
        quad.nodes.row(i).transpose().cwiseProduct(quad.weights);
    result[i] = table.transpose() * sw.asDiagonal() * table;
  }
  return result;
}

std::array<Eigen::MatrixXd, 3> streaming_matrices(const SphericalBasis& basis,
                                                  const SphereQuadrature& quad) {
  const auto full = multiplication_matrices(basis, quad);
  const auto& odd = basis.odd_positions();
  const auto& even = basis.even_positions();
  std::array<Eigen::MatrixXd, 3> result;
  for (int i = 0; i < 3; ++i) {
    result[i].resize(odd.size(), even.size());
    for (size_t r = 0; r < odd.size(); ++r)
      for (size_t c = 0; c < even.size(); ++c)
        result[i](r, c) = full[i](odd[r], even[c]);
  }
  return result;
}

std::array<Eigen::MatrixXd, 3> lorentz_matrices(const SphericalBasis& basis,
                                                const SphereQuadrature& quad) {
  const int n = basis.total_count();
  const Eigen::MatrixXd table = harmonic_table(basis.indices(), quad);

  // curl table per component: (node, moment)
  std::array<Eigen::MatrixXd, 3> curl;
  for (int i = 0; i < 3; ++i) curl[i].resize(quad.size(), n);
  for (int k = 0; k < n; ++k) {
    const auto idx = basis.indices()[k];
    for (int q = 0; q < quad.size(); ++q) {
      const Eigen::Vector3d v = eval_surface_curl(idx.l, idx.m, quad.nodes.col(q));
      for (int i = 0; i < 3; ++i) curl[i](q, k) = v[i];
    }
  }

  std::array<Eigen::MatrixXd, 3> result;
  for (int i = 0; i < 3; ++i)
    result[i] = table.transpose() * quad.weights.asDiagonal() * curl[i];
  return result;
}

Eigen::VectorXd laplace_beltrami_diagonal(const std::vector<MomentIndex>& indices) {
  Eigen::VectorXd diag(indices.size());
  for (size_t k = 0; k < indices.size(); ++k) {
    const double l = indices[k].l;
    diag[k] = l * (l + 1.0);
  }
  return diag;
}

Eigen::MatrixXd boundary_weight_matrix(const SphericalBasis& basis,
                                       const Eigen::Vector3d& n,
                                       const SphereQuadrature& split_quad) {
  if (std::abs(n.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("boundary_weight_matrix: normal must be unit");

  // Orthonormal frame with third row n: substituting s = R^T s~ turns
  // |s.n| into |s~_z|, whose kink sits exactly on the split rule's seam.
  Eigen::Matrix3d rot;
  Eigen::Vector3d u = std::abs(n.z()) < 0.9 ? Eigen::Vector3d::UnitZ()
                                            : Eigen::Vector3d::UnitX();
  Eigen::Vector3d e1 = (u - u.dot(n) * n).normalized();
  Eigen::Vector3d e2 = n.cross(e1);
  rot.row(0) = e1;
  rot.row(1) = e2;
  rot.row(2) = n;

  const auto& even = basis.even_indices();
  const int ne = static_cast<int>(even.size());
  Eigen::MatrixXd table(split_quad.size(), ne);
  Eigen::VectorXd w(split_quad.size());
  for (int q = 0; q < split_quad.size(); ++q) {
    const Eigen::Vector3d s = rot.transpose() * split_quad.nodes.col(q);
    w[q] = split_quad.weights[q] * std::abs(split_quad.nodes.col(q).z());
    for (int k = 0; k < ne; ++k)
      table(q, k) = eval_harmonic(even[k].l, even[k].m, s);
  }
  Eigen::MatrixXd result = table.transpose() * w.asDiagonal() * table;
  // symmetrize away quadrature round-off
  return 0.5 * (result + result.transpose());
}

AngularOperators build_angular_operators(const SphericalBasis& basis) {
  const int order = basis.order();
  const SphereQuadrature quad = build_quadrature(2 * order + 2);
  const SphereQuadrature split = build_split_quadrature(4 * order + 8);

  AngularOperators ops;
  ops.streaming = streaming_matrices(basis, quad);
  ops.lorentz_full = lorentz_matrices(basis, quad);

  const auto& evenp = basis.even_positions();
  const auto& oddp = basis.odd_positions();
  for (int i = 0; i < 3; ++i) {
    ops.lorentz_even[i].resize(evenp.size(), evenp.size());
    for (size_t r = 0; r < evenp.size(); ++r)
      for (size_t c = 0; c < evenp.size(); ++c)
        ops.lorentz_even[i](r, c) = ops.lorentz_full[i](evenp[r], evenp[c]);
    ops.lorentz_odd[i].resize(oddp.size(), oddp.size());
    for (size_t r = 0; r < oddp.size(); ++r)
      for (size_t c = 0; c < oddp.size(); ++c)
        ops.lorentz_odd[i](r, c) = ops.lorentz_full[i](oddp[r], oddp[c]);
  }

  ops.lb_even = laplace_beltrami_diagonal(basis.even_indices());
  ops.lb_odd = laplace_beltrami_diagonal(basis.odd_indices());

  for (int t = 0; t < kNormalCount; ++t)
    ops.boundary_weight[t] =
        boundary_weight_matrix(basis, unit_normal(static_cast<NormalTag>(t)), split);
  return ops;
}

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& mat,
                      double drop_tol) {
  os << "row,col,value\n";
  for (Eigen::Index i = 0; i < mat.rows(); ++i)
    for (Eigen::Index j = 0; j < mat.cols(); ++j)
      if (std::abs(mat(i, j)) > drop_tol) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%ld,%ld,%.17g\n", long(i), long(j),
                      mat(i, j));
        os << buf;
      }
}

}  // namespace fplo
