#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <iosfwd>
#include <vector>

#include "geometry.hpp"

namespace fplo {

/// Structured triangulation of a rectangle: nx-by-ny cells, each split into
/// two counterclockwise triangles by the same diagonal, so runs are
/// reproducible node for node.
class Mesh2D {
 public:
  struct BoundaryEdge {
    int v0, v1;      // endpoint vertex ids
    int triangle;    // owning triangle
    NormalTag normal;
    double length;
  };

  static Mesh2D rectangle(int nx, int ny, const Rect& bounds);

  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int triangle_count() const { return static_cast<int>(triangles_.size()); }
  const Eigen::Vector2d& vertex(int v) const { return vertices_[v]; }
  const std::array<int, 3>& triangle(int t) const { return triangles_[t]; }
  double area(int t) const { return areas_[t]; }
  Eigen::Vector2d centroid(int t) const;
  const std::vector<BoundaryEdge>& boundary_edges() const { return edges_; }
  const Rect& bounds() const { return bounds_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }

  double total_area() const;

  /// Plain-text dump: vertex and triangle lists plus tagged boundary edges.
  void write_text(std::ostream& os) const;

 private:
  std::vector<Eigen::Vector2d> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<double> areas_;
  std::vector<BoundaryEdge> edges_;
  Rect bounds_;
  int nx_ = 0, ny_ = 0;
};

/// P1 gradients on a triangle: column a holds grad of the nodal function of
/// vertex a (constant over the cell).
Eigen::Matrix<double, 2, 3> p1_gradients(const Eigen::Vector2d& p0,
                                         const Eigen::Vector2d& p1,
                                         const Eigen::Vector2d& p2);

/// Exact P1 element mass matrix: area/12 * [[2,1,1],[1,2,1],[1,1,2]].
Eigen::Matrix3d p1_element_mass(double area);

/// Weighted P1 mass matrix, weight piecewise constant per cell.
Eigen::SparseMatrix<double> assemble_weighted_p1_mass(const Mesh2D& mesh,
                                                      const Eigen::VectorXd& w);

/// Weighted P0 mass: diagonal entries w_cell * area_cell.
Eigen::VectorXd assemble_p0_mass(const Mesh2D& mesh, const Eigen::VectorXd& w);

/// Derivative couplings (C_i)_{cell,node} = d_i(phi_node)|_cell * area_cell.
std::array<Eigen::SparseMatrix<double>, 2> assemble_derivative_coupling(
    const Mesh2D& mesh);

/// P1 boundary mass accumulated over edges with the given outward normal.
Eigen::SparseMatrix<double> assemble_boundary_mass(const Mesh2D& mesh,
                                                   NormalTag normal);

}  // namespace fplo
