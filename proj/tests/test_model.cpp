#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "model.hpp"

using namespace fplo;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {
const Rect kSquare{-1.0, 1.0, -1.0, 1.0};

ModelCoefficients simple_coeffs() {
  ModelCoefficients c;
  c.stopping = [](double x, double y, double) { return 1.0 + x * x + y * y; };
  c.transport = [](double, double, double) { return 1.0; };
  c.magnetic[0] = [](double, double, double) { return 0.0; };
  c.magnetic[1] = [](double, double, double) { return 0.0; };
  c.magnetic[2] = [](double, double, double eps) { return -eps; };
  return c;
}
}  // namespace

TEST_CASE("energy grid") {
  const EnergyGrid grid{1.0, 2.0, 100};
  CHECK(grid.delta() == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(grid.node(0) == 1.0);
  CHECK(grid.node(100) == 2.0);  // exact by construction
  CHECK(grid.node(50) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("coefficient discretization") {
  const auto mesh = Mesh2D::rectangle(4, 4, kSquare);
  const auto coeffs = simple_coeffs();

  const auto d = discretize_coefficients(coeffs, mesh, 2.0);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto c = mesh.centroid(t);
    CHECK(d.stopping[t] ==
          doctest::Approx(1.0 + c.x() * c.x() + c.y() * c.y()).epsilon(1e-15));
    CHECK(d.transport[t] == 1.0);
    CHECK(d.magnetic[0][t] == 0.0);
    CHECK(d.magnetic[2][t] == -2.0);
  }

  // a cell with centroid (1, 0.5) on a custom rectangle
  const auto one = Mesh2D::rectangle(1, 1, Rect{0.0, 1.5, 0.0, 1.5});
  const auto d1 = discretize_coefficients(simple_coeffs(), one, 1.0);
  CHECK(d1.stopping[0] == doctest::Approx(1.0 + 1.0 + 0.25).epsilon(1e-15));

  // Assumption-1 violations are rejected with cell and energy named
  ModelCoefficients bad = simple_coeffs();
  bad.transport = [](double, double, double) { return 0.0; };
  CHECK_THROWS_WITH_AS(discretize_coefficients(bad, mesh, 1.5),
                       doctest::Contains("cell"), std::invalid_argument);
  CHECK_THROWS_AS(validate_coefficients(bad, mesh, EnergyGrid{1.0, 2.0, 4}),
                  std::invalid_argument);
  CHECK_NOTHROW(validate_coefficients(simple_coeffs(), mesh, EnergyGrid{1.0, 2.0, 4}));
}

TEST_CASE("local source averages") {
  const EnergyGrid grid{1.0, 2.0, 10};
  SourceTerm q;

  q.evaluate = [](double, double, const Vector3d&, double) { return 2.5; };
  auto avg = local_average_source(q, 3, grid);
  CHECK(avg(0.1, 0.2, Vector3d(0, 0, 1)) == doctest::Approx(2.5).epsilon(1e-14));

  q.evaluate = [](double, double, const Vector3d&, double eps) { return eps; };
  avg = local_average_source(q, 4, grid);
  const double mid = 0.5 * (grid.node(4) + grid.node(5));
  CHECK(avg(0, 0, Vector3d(0, 0, 1)) == doctest::Approx(mid).epsilon(1e-14));

  q.evaluate = [](double, double, const Vector3d&, double eps) {
    return eps * eps * eps;
  };
  avg = local_average_source(q, 0, grid);
  const double a = grid.node(0), b = grid.node(1);
  const double exact = (std::pow(b, 4) - std::pow(a, 4)) / (4.0 * (b - a));
  CHECK(avg(0, 0, Vector3d(0, 0, 1)) == doctest::Approx(exact).epsilon(1e-14));

  // 3-point Gauss is exact through degree 5
  q.evaluate = [](double, double, const Vector3d&, double eps) {
    return std::pow(eps - 1.2, 5) + 0.7 * std::pow(eps, 3);
  };
  avg = local_average_source(q, 2, grid);
  const double a2 = grid.node(2), b2 = grid.node(3);
  const double exact2 = (std::pow(b2 - 1.2, 6) - std::pow(a2 - 1.2, 6)) / 6.0 / (b2 - a2) +
                        0.7 * (std::pow(b2, 4) - std::pow(a2, 4)) / 4.0 / (b2 - a2);
  CHECK(avg(0, 0, Vector3d(0, 0, 1)) == doctest::Approx(exact2).epsilon(1e-13));

  CHECK_THROWS_AS(local_average_source(q, 10, grid), std::out_of_range);
  CHECK_THROWS_AS(local_average_source(q, -1, grid), std::out_of_range);
}

TEST_CASE("averaged source moments via quadrature") {
  const EnergyGrid grid{1.0, 2.0, 4};
  const auto basis = SphericalBasis::build(3);

  // source with a single angular mode: q = (2 - eps) * Y_{1,0}
  SourceTerm q;
  q.evaluate = [](double, double, const Vector3d& s, double eps) {
    return (2.0 - eps) * eval_harmonic(1, 0, s);
  };
  const AveragedSourceMoments avg(q, 1, grid, basis);
  VectorXd moments;
  avg.moments_at(0.3, -0.4, moments);
  REQUIRE(moments.size() == basis.total_count());
  const double fbar = 2.0 - 0.5 * (grid.node(1) + grid.node(2));
  for (int k = 0; k < basis.total_count(); ++k) {
    const double expected = (basis.indices()[k] == MomentIndex{1, 0}) ? fbar : 0.0;
    CHECK(moments[k] == doctest::Approx(expected).epsilon(1e-12));
  }
}
