#include "mesh.hpp"

#include <ostream>
#include <stdexcept>

namespace fplo {

Mesh2D Mesh2D::rectangle(int nx, int ny, const Rect& bounds) {
  if (nx < 1 || ny < 1)
    throw std::invalid_argument("Mesh2D: need nx, ny >= 1");
  if (bounds.degenerate())
    throw std::invalid_argument("Mesh2D: degenerate bounds");

  Mesh2D mesh;
  mesh.bounds_ = bounds;
  mesh.nx_ = nx;
  mesh.ny_ = ny;

  const double hx = bounds.width() / nx;
  const double hy = bounds.height() / ny;

  mesh.vertices_.reserve((nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.vertices_.emplace_back(bounds.xmin + i * hx, bounds.ymin + j * hy);

  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };

  // Each quad is split along the (i,j)-(i+1,j+1) diagonal; both triangles
  // are counterclockwise.
  mesh.triangles_.reserve(2 * nx * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      mesh.triangles_.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      mesh.triangles_.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }

  mesh.areas_.resize(mesh.triangles_.size());
  for (size_t t = 0; t < mesh.triangles_.size(); ++t) {
    const auto& tri = mesh.triangles_[t];
    const Eigen::Vector2d a = mesh.vertices_[tri[0]];
    const Eigen::Vector2d b = mesh.vertices_[tri[1]];
    const Eigen::Vector2d c = mesh.vertices_[tri[2]];
    mesh.areas_[t] =
        0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
    if (mesh.areas_[t] <= 0.0)
      throw std::logic_error("Mesh2D: nonpositive triangle area");
  }

  auto tri_of_quad = [nx](int i, int j, bool upper) {
    return 2 * (j * nx + i) + (upper ? 1 : 0);
  };

  for (int i = 0; i < nx; ++i) {
    mesh.edges_.push_back({vid(i, 0), vid(i + 1, 0), tri_of_quad(i, 0, false),
                           NormalTag::YMinus, hx});
    mesh.edges_.push_back({vid(i, ny), vid(i + 1, ny), tri_of_quad(i, ny - 1, true),
                           NormalTag::YPlus, hx});
  }
  for (int j = 0; j < ny; ++j) {
    mesh.edges_.push_back({vid(0, j), vid(0, j + 1), tri_of_quad(0, j, true),
                           NormalTag::XMinus, hy});
    mesh.edges_.push_back({vid(nx, j), vid(nx, j + 1), tri_of_quad(nx - 1, j, false),
                           NormalTag::XPlus, hy});
  }
  return mesh;
}

Eigen::Vector2d Mesh2D::centroid(int t) const {
  const auto& tri = triangles_[t];
  return (vertices_[tri[0]] + vertices_[tri[1]] + vertices_[tri[2]]) / 3.0;
}

double Mesh2D::total_area() const {
  double sum = 0.0;
  for (double a : areas_) sum += a;
  return sum;
}

void Mesh2D::write_text(std::ostream& os) const {
  os << "vertices " << vertex_count() << "\n";
  for (const auto& v : vertices_) os << v.x() << " " << v.y() << "\n";
  os << "triangles " << triangle_count() << "\n";
  for (const auto& t : triangles_) os << t[0] << " " << t[1] << " " << t[2] << "\n";
  os << "boundary_edges " << edges_.size() << "\n";
  for (const auto& e : edges_)
    os << e.v0 << " " << e.v1 << " " << normal_name(e.normal) << "\n";
}

Eigen::Matrix<double, 2, 3> p1_gradients(const Eigen::Vector2d& p0,
                                         const Eigen::Vector2d& p1,
                                         const Eigen::Vector2d& p2) {
  const double det = (p1.x() - p0.x()) * (p2.y() - p0.y()) -
                     (p2.x() - p0.x()) * (p1.y() - p0.y());
  Eigen::Matrix<double, 2, 3> g;
  g.col(0) << p1.y() - p2.y(), p2.x() - p1.x();
  g.col(1) << p2.y() - p0.y(), p0.x() - p2.x();
  g.col(2) << p0.y() - p1.y(), p1.x() - p0.x();
  return g / det;
}

Eigen::Matrix3d p1_element_mass(double area) {
  Eigen::Matrix3d m;
  m << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  return m * (area / 12.0);
}

Eigen::SparseMatrix<double> assemble_weighted_p1_mass(const Mesh2D& mesh,
                                                      const Eigen::VectorXd& w) {
  if (w.size() != mesh.triangle_count())
    throw std::invalid_argument("assemble_weighted_p1_mass: weight size mismatch");
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(9 * mesh.triangle_count());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangle(t);
    const Eigen::Matrix3d el = w[t] * p1_element_mass(mesh.area(t));
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        trips.emplace_back(tri[a], tri[b], el(a, b));
  }
  Eigen::SparseMatrix<double> mat(mesh.vertex_count(), mesh.vertex_count());
  mat.setFromTriplets(trips.begin(), trips.end());
  return mat;
}

Eigen::VectorXd assemble_p0_mass(const Mesh2D& mesh, const Eigen::VectorXd& w) {
  if (w.size() != mesh.triangle_count())
    throw std::invalid_argument("assemble_p0_mass: weight size mismatch");
  Eigen::VectorXd diag(mesh.triangle_count());
  for (int t = 0; t < mesh.triangle_count(); ++t) diag[t] = w[t] * mesh.area(t);
  return diag;
}

std::array<Eigen::SparseMatrix<double>, 2> assemble_derivative_coupling(
    const Mesh2D& mesh) {
  std::vector<Eigen::Triplet<double>> tx, ty;
  tx.reserve(3 * mesh.triangle_count());
  ty.reserve(3 * mesh.triangle_count());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangle(t);
    const auto g = p1_gradients(mesh.vertex(tri[0]), mesh.vertex(tri[1]),
                                mesh.vertex(tri[2]));
    for (int a = 0; a < 3; ++a) {
      tx.emplace_back(t, tri[a], g(0, a) * mesh.area(t));
      ty.emplace_back(t, tri[a], g(1, a) * mesh.area(t));
    }
  }
  std::array<Eigen::SparseMatrix<double>, 2> result;
  result[0].resize(mesh.triangle_count(), mesh.vertex_count());
  result[1].resize(mesh.triangle_count(), mesh.vertex_count());
  result[0].setFromTriplets(tx.begin(), tx.end());
  result[1].setFromTriplets(ty.begin(), ty.end());
  return result;
}

Eigen::SparseMatrix<double> assemble_boundary_mass(const Mesh2D& mesh,
                                                   NormalTag normal) {
  std::vector<Eigen::Triplet<double>> trips;
  for (const auto& e : mesh.boundary_edges()) {
    if (e.normal != normal) continue;
    const double len6 = e.length / 6.0;
    trips.emplace_back(e.v0, e.v0, 2.0 * len6);
    trips.emplace_back(e.v1, e.v1, 2.0 * len6);
    trips.emplace_back(e.v0, e.v1, len6);
    trips.emplace_back(e.v1, e.v0, len6);
  }
  Eigen::SparseMatrix<double> mat(mesh.vertex_count(), mesh.vertex_count());
  mat.setFromTriplets(trips.begin(), trips.end());
  return mat;
}

}  // namespace fplo
