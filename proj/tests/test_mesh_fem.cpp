#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "mesh.hpp"
#include "quadrature.hpp"

using namespace fplo;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {
const Rect kSquare{-1.0, 1.0, -1.0, 1.0};

// Mid-edge rule, exact for quadratics: an oracle independent of the
// closed-form element matrices.
double integrate_deg2(const Mesh2D& mesh, int t,
                      const std::function<double(double, double)>& f) {
  const auto& tri = mesh.triangle(t);
  const Vector2d p0 = mesh.vertex(tri[0]);
  const Vector2d p1 = mesh.vertex(tri[1]);
  const Vector2d p2 = mesh.vertex(tri[2]);
  const Vector2d m01 = 0.5 * (p0 + p1), m12 = 0.5 * (p1 + p2), m20 = 0.5 * (p2 + p0);
  return mesh.area(t) / 3.0 *
         (f(m01.x(), m01.y()) + f(m12.x(), m12.y()) + f(m20.x(), m20.y()));
}
}  // namespace

TEST_CASE("mesh construction") {
  const auto mesh = Mesh2D::rectangle(8, 8, kSquare);
  CHECK(mesh.vertex_count() == 81);
  CHECK(mesh.triangle_count() == 128);
  CHECK(mesh.total_area() == doctest::Approx(4.0).epsilon(1e-13));

  const auto tiny = Mesh2D::rectangle(1, 1, kSquare);
  CHECK(tiny.vertex_count() == 4);
  CHECK(tiny.triangle_count() == 2);

  for (int t = 0; t < mesh.triangle_count(); ++t) CHECK(mesh.area(t) > 0.0);

  // every boundary edge belongs to exactly one triangle, and that triangle
  // contains both endpoints
  CHECK(int(mesh.boundary_edges().size()) == 4 * 8);
  for (const auto& e : mesh.boundary_edges()) {
    const auto& tri = mesh.triangle(e.triangle);
    int hits = 0;
    for (int v : tri) hits += (v == e.v0) + (v == e.v1);
    CHECK(hits == 2);
  }

  CHECK_THROWS_AS(Mesh2D::rectangle(0, 4, kSquare), std::invalid_argument);
  CHECK_THROWS_AS(Mesh2D::rectangle(4, 4, Rect{1, 1, 0, 1}), std::invalid_argument);

  std::ostringstream os;
  tiny.write_text(os);
  CHECK(os.str().rfind("vertices 4\n", 0) == 0);
  CHECK(os.str().find("triangles 2\n") != std::string::npos);
}

TEST_CASE("p1 element matrices") {
  // reference triangle (0,0)-(1,0)-(0,1)
  const Vector2d p0(0, 0), p1(1, 0), p2(0, 1);
  const auto g = p1_gradients(p0, p1, p2);
  CHECK(g(0, 0) == doctest::Approx(-1.0));
  CHECK(g(1, 0) == doctest::Approx(-1.0));
  CHECK(g(0, 1) == doctest::Approx(1.0));
  CHECK(g(1, 1) == doctest::Approx(0.0));
  CHECK(g(0, 2) == doctest::Approx(0.0));
  CHECK(g(1, 2) == doctest::Approx(1.0));

  const Eigen::Matrix3d m = p1_element_mass(0.5);
  CHECK(m(0, 0) == doctest::Approx(2.0 * 0.5 / 12.0));
  CHECK(m(0, 1) == doctest::Approx(1.0 * 0.5 / 12.0));
}

TEST_CASE("weighted p1 mass") {
  const auto mesh = Mesh2D::rectangle(3, 2, kSquare);
  const int nc = mesh.triangle_count();

  const auto m1 = assemble_weighted_p1_mass(mesh, VectorXd::Ones(nc));
  CHECK(MatrixXd(m1).sum() == doctest::Approx(4.0).epsilon(1e-13));

  // against the independent mid-edge quadrature oracle, entry by entry
  MatrixXd oracle = MatrixXd::Zero(mesh.vertex_count(), mesh.vertex_count());
  for (int t = 0; t < nc; ++t) {
    const auto& tri = mesh.triangle(t);
    const auto grads = p1_gradients(mesh.vertex(tri[0]), mesh.vertex(tri[1]),
                                    mesh.vertex(tri[2]));
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const Vector2d pa = mesh.vertex(tri[a]);
        const Vector2d pb = mesh.vertex(tri[b]);
        auto phi = [&](int local, double x, double y) {
          const Vector2d p = mesh.vertex(tri[local]);
          return 1.0 + grads(0, local) * (x - p.x()) + grads(1, local) * (y - p.y());
        };
        (void)pa;
        (void)pb;
        oracle(tri[a], tri[b]) += integrate_deg2(
            mesh, t, [&](double x, double y) { return phi(a, x, y) * phi(b, x, y); });
      }
  }
  CHECK((MatrixXd(m1) - oracle).cwiseAbs().maxCoeff() < 1e-13);

  const auto m0 = assemble_weighted_p1_mass(mesh, VectorXd::Zero(nc));
  CHECK(MatrixXd(m0).cwiseAbs().maxCoeff() == 0.0);

  const auto mc = assemble_weighted_p1_mass(mesh, 3.5 * VectorXd::Ones(nc));
  CHECK((MatrixXd(mc) - 3.5 * MatrixXd(m1)).cwiseAbs().maxCoeff() < 1e-13);

  CHECK_THROWS_AS(assemble_weighted_p1_mass(mesh, VectorXd::Ones(nc + 1)),
                  std::invalid_argument);
}

TEST_CASE("p0 mass") {
  const auto mesh = Mesh2D::rectangle(4, 4, kSquare);
  const int nc = mesh.triangle_count();

  const VectorXd d = assemble_p0_mass(mesh, VectorXd::Ones(nc));
  for (int t = 0; t < nc; ++t) CHECK(d[t] == doctest::Approx(mesh.area(t)));
  CHECK(d.sum() == doctest::Approx(4.0).epsilon(1e-13));

  VectorXd wx(nc);
  for (int t = 0; t < nc; ++t) wx[t] = mesh.centroid(t).x();
  CHECK(assemble_p0_mass(mesh, wx).sum() == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("derivative coupling") {
  const auto mesh = Mesh2D::rectangle(5, 3, kSquare);
  const auto c = assemble_derivative_coupling(mesh);

  const VectorXd ones = VectorXd::Ones(mesh.vertex_count());
  CHECK((c[0] * ones).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((c[1] * ones).cwiseAbs().maxCoeff() < 1e-13);

  VectorXd ux(mesh.vertex_count()), uxy(mesh.vertex_count());
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    ux[v] = mesh.vertex(v).x();
    uxy[v] = 2.0 * mesh.vertex(v).x() - 3.0 * mesh.vertex(v).y();
  }
  const VectorXd cx = c[0] * ux;
  const VectorXd cy = c[1] * ux;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    CHECK(cx[t] == doctest::Approx(mesh.area(t)).epsilon(1e-12));
    CHECK(std::abs(cy[t]) < 1e-13);
  }
  // gradient of a general linear reproduced per cell
  const VectorXd gx = c[0] * uxy, gy = c[1] * uxy;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    CHECK(gx[t] / mesh.area(t) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(gy[t] / mesh.area(t) == doctest::Approx(-3.0).epsilon(1e-12));
  }

  // hand-computed row for the reference triangle
  const auto gref = p1_gradients(Vector2d(0, 0), Vector2d(1, 0), Vector2d(0, 1));
  CHECK(gref(0, 0) * 0.5 == doctest::Approx(-0.5));
  CHECK(gref(0, 1) * 0.5 == doctest::Approx(0.5));
  CHECK(gref(0, 2) * 0.5 == doctest::Approx(0.0));
}

TEST_CASE("boundary mass") {
  const auto mesh = Mesh2D::rectangle(8, 8, kSquare);

  double perimeter = 0.0;
  for (int tag = 0; tag < kNormalCount; ++tag) {
    const auto mb = assemble_boundary_mass(mesh, static_cast<NormalTag>(tag));
    perimeter += MatrixXd(mb).sum();
  }
  CHECK(perimeter == doctest::Approx(8.0).epsilon(1e-13));

  const auto mx = assemble_boundary_mass(mesh, NormalTag::XPlus);
  const MatrixXd dense(mx);
  // trace: each edge contributes 2*len/3; 8 edges of length 1/4
  CHECK(dense.trace() == doctest::Approx(8.0 * 2.0 * 0.25 / 3.0).epsilon(1e-13));
  // rows of interior vertices vanish
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    const auto& p = mesh.vertex(v);
    if (std::abs(p.x() - 1.0) > 1e-12)
      CHECK(dense.row(v).cwiseAbs().maxCoeff() == 0.0);
  }
  // row sums over one edge reproduce the edge length
  double row_sum_total = dense.sum();
  CHECK(row_sum_total == doctest::Approx(2.0).epsilon(1e-13));
}
