#include "model.hpp"

#include <sstream>
#include <stdexcept>

#include "quadrature.hpp"

namespace fplo {

bool DiscreteCoefficients::same_values(const DiscreteCoefficients& other) const {
  if (stopping.size() != other.stopping.size()) return false;
  return stopping == other.stopping && transport == other.transport &&
         magnetic[0] == other.magnetic[0] && magnetic[1] == other.magnetic[1] &&
         magnetic[2] == other.magnetic[2];
}

DiscreteCoefficients discretize_coefficients(const ModelCoefficients& coeffs,
                                             const Mesh2D& mesh, double eps) {
  DiscreteCoefficients d;
  d.eps = eps;
  const int nc = mesh.triangle_count();
  d.stopping.resize(nc);
  d.transport.resize(nc);
  for (auto& g : d.magnetic) g.resize(nc);

  for (int t = 0; t < nc; ++t) {
    const Eigen::Vector2d c = mesh.centroid(t);
    d.stopping[t] = coeffs.stopping(c.x(), c.y(), eps);
    d.transport[t] = coeffs.transport(c.x(), c.y(), eps);
    for (int i = 0; i < 3; ++i) d.magnetic[i][t] = coeffs.magnetic[i](c.x(), c.y(), eps);
    if (!(d.stopping[t] > 0.0) || !(d.transport[t] > 0.0)) {
      std::ostringstream msg;
      msg << "coefficient validation failed: "
          << (d.stopping[t] > 0.0 ? "T" : "S") << " <= 0 at cell " << t
          << " (centroid " << c.x() << ", " << c.y() << "), energy " << eps;
      throw std::invalid_argument(msg.str());
    }
  }
  return d;
}

void validate_coefficients(const ModelCoefficients& coeffs, const Mesh2D& mesh,
                           const EnergyGrid& grid) {
  for (int m = 0; m <= grid.steps; ++m)
    discretize_coefficients(coeffs, mesh, grid.node(m));
}

std::function<double(double, double, const Eigen::Vector3d&)> local_average_source(
    const SourceTerm& q, int m, const EnergyGrid& grid) {
  if (m < 0 || m >= grid.steps)
    throw std::out_of_range("local_average_source: step index out of range");
  const Rule1D rule =
      gauss_legendre(q.average_points, grid.node(m), grid.node(m + 1));
  const double inv_deps = 1.0 / grid.delta();
  auto eval = q.evaluate;
  return [rule, inv_deps, eval](double x, double y, const Eigen::Vector3d& s) {
    double sum = 0.0;
    for (size_t i = 0; i < rule.points.size(); ++i)
      sum += rule.weights[i] * eval(x, y, s, rule.points[i]);
    return sum * inv_deps;
  };
}

AveragedSourceMoments::AveragedSourceMoments(const SourceTerm& q, int m,
                                             const EnergyGrid& grid,
                                             const SphericalBasis& basis)
    : source_(q), basis_(basis) {
  if (m < 0 || m >= grid.steps)
    throw std::out_of_range("AveragedSourceMoments: step index out of range");
  const Rule1D rule =
      gauss_legendre(q.average_points, grid.node(m), grid.node(m + 1));
  eps_points_ = rule.points;
  eps_weights_ = rule.weights;
  for (double& w : eps_weights_) w /= grid.delta();

  if (!source_.moments) {
    // generic projection: exactness covers products of the source's own
    // harmonics content against each basis function
    const int bandwidth =
        q.angular_bandwidth >= 0 ? q.angular_bandwidth : basis.order();
    quad_ = build_quadrature(basis.order() + bandwidth + 2);
    projection_ = harmonic_table(basis.indices(), quad_).transpose() *
                  quad_.weights.asDiagonal();
  }
}

void AveragedSourceMoments::moments_at(double x, double y,
                                       Eigen::VectorXd& out) const {
  out.setZero(basis_.total_count());
  Eigen::VectorXd tmp(basis_.total_count());
  if (source_.moments) {
    for (size_t i = 0; i < eps_points_.size(); ++i) {
      source_.moments(x, y, eps_points_[i], basis_, tmp);
      out += eps_weights_[i] * tmp;
    }
    return;
  }
  Eigen::VectorXd values(quad_.size());
  for (size_t i = 0; i < eps_points_.size(); ++i) {
    for (int qn = 0; qn < quad_.size(); ++qn)
      values[qn] = source_.evaluate(x, y, quad_.nodes.col(qn), eps_points_[i]);
    out += eps_weights_[i] * (projection_ * values);
  }
}

}  // namespace fplo
