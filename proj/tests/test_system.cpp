#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <random>

#include "quadrature.hpp"
#include "system.hpp"

using namespace fplo;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

const Rect kSquare{-1.0, 1.0, -1.0, 1.0};

DiscreteCoefficients make_coeffs(int cells, double s, double t, double g3,
                                 double g1 = 0.0, double g2 = 0.0) {
  DiscreteCoefficients d;
  d.eps = 1.0;
  d.stopping = VectorXd::Constant(cells, s);
  d.transport = VectorXd::Constant(cells, t);
  d.magnetic[0] = VectorXd::Constant(cells, g1);
  d.magnetic[1] = VectorXd::Constant(cells, g2);
  d.magnetic[2] = VectorXd::Constant(cells, g3);
  return d;
}

PhaseSpaceField random_field(const Mesh2D& mesh, const SphericalBasis& basis,
                             unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> dist;
  PhaseSpaceField f = PhaseSpaceField::zero(mesh, basis);
  for (int i = 0; i < f.even.size(); ++i) f.even.data()[i] = dist(gen);
  for (int i = 0; i < f.odd.size(); ++i) f.odd.data()[i] = dist(gen);
  return f;
}

// Brute-force assembly of the full mixed bilinear form by direct quadrature
// over cells, sphere and boundary edges. No moment matrices, no Kronecker
// wiring: each entry is an integral of products of basis functions.
MatrixXd brute_force_matrix(const Mesh2D& mesh, const SphericalBasis& basis,
                            const DiscreteCoefficients& co, double deps) {
  const int nv = mesh.vertex_count();
  const int nc = mesh.triangle_count();
  const int ne = basis.even_count();
  const int no = basis.odd_count();
  const int ned = nv * ne, nod = nc * no;

  const SphereQuadrature sq = build_quadrature(2 * basis.order() + 4);
  const SphereQuadrature bq = build_split_quadrature(4 * basis.order() + 8);
  const Rule1D edge_rule = gauss_legendre(3, 0.0, 1.0);

  // tables of Y and s x grad_s Y at volume quadrature nodes
  MatrixXd ye(sq.size(), ne), yo(sq.size(), no);
  std::vector<MatrixXd> curl_e(3, MatrixXd(sq.size(), ne));
  std::vector<MatrixXd> curl_o(3, MatrixXd(sq.size(), no));
  for (int q = 0; q < sq.size(); ++q) {
    for (int k = 0; k < ne; ++k) {
      const auto idx = basis.even_indices()[k];
      ye(q, k) = eval_harmonic(idx.l, idx.m, sq.nodes.col(q));
      const Vector3d cv = eval_surface_curl(idx.l, idx.m, sq.nodes.col(q));
      for (int i = 0; i < 3; ++i) curl_e[i](q, k) = cv[i];
    }
    for (int k = 0; k < no; ++k) {
      const auto idx = basis.odd_indices()[k];
      yo(q, k) = eval_harmonic(idx.l, idx.m, sq.nodes.col(q));
      const Vector3d cv = eval_surface_curl(idx.l, idx.m, sq.nodes.col(q));
      for (int i = 0; i < 3; ++i) curl_o[i](q, k) = cv[i];
    }
  }

  MatrixXd m = MatrixXd::Zero(ned + nod, ned + nod);

  for (int c = 0; c < nc; ++c) {
    const auto& tri = mesh.triangle(c);
    const Vector2d p0 = mesh.vertex(tri[0]);
    const Vector2d p1 = mesh.vertex(tri[1]);
    const Vector2d p2 = mesh.vertex(tri[2]);
    const auto grads = p1_gradients(p0, p1, p2);
    const double area = mesh.area(c);
    // mid-edge rule, exact through degree 2
    const Vector2d mids[3] = {0.5 * (p0 + p1), 0.5 * (p1 + p2), 0.5 * (p2 + p0)};
    auto phi = [&](int a, const Vector2d& p) {
      const Vector2d pa = mesh.vertex(tri[a]);
      return 1.0 + grads(0, a) * (p.x() - pa.x()) + grads(1, a) * (p.y() - pa.y());
    };

    const Vector3d g(co.magnetic[0][c], co.magnetic[1][c], co.magnetic[2][c]);

    // even-even: (S/deps) u v + T grad_s u . grad_s v + (G . s x grad_s u) v
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        double spatial = 0.0;
        for (const auto& mp : mids) spatial += phi(a, mp) * phi(b, mp);
        spatial *= area / 3.0;
        for (int k = 0; k < ne; ++k)
          for (int kp = 0; kp < ne; ++kp) {
            double ang = 0.0;
            for (int q = 0; q < sq.size(); ++q) {
              double term = co.stopping[c] / deps * ye(q, k) * ye(q, kp);
              for (int i = 0; i < 3; ++i)
                term += co.transport[c] * curl_e[i](q, k) * curl_e[i](q, kp) +
                        g[i] * curl_e[i](q, k) * ye(q, kp);
              ang += sq.weights[q] * term;
            }
            m(tri[b] * ne + kp, tri[a] * ne + k) += spatial * ang;
          }
      }

    // odd-odd (P0 x P0 on this cell)
    for (int k = 0; k < no; ++k)
      for (int kp = 0; kp < no; ++kp) {
        double ang = 0.0;
        for (int q = 0; q < sq.size(); ++q) {
          double term = co.stopping[c] / deps * yo(q, k) * yo(q, kp);
          for (int i = 0; i < 3; ++i)
            term += co.transport[c] * curl_o[i](q, k) * curl_o[i](q, kp) +
                    g[i] * curl_o[i](q, k) * yo(q, kp);
          ang += sq.weights[q] * term;
        }
        m(ned + c * no + kp, ned + c * no + k) += area * ang;
      }

    // streaming <A u+, v-> and -<u-, A v+>
    for (int a = 0; a < 3; ++a)
      for (int k = 0; k < ne; ++k)
        for (int kp = 0; kp < no; ++kp) {
          double ang = 0.0;
          for (int q = 0; q < sq.size(); ++q)
            ang += sq.weights[q] *
                   (sq.nodes(0, q) * grads(0, a) + sq.nodes(1, q) * grads(1, a)) *
                   ye(q, k) * yo(q, kp);
          const double entry = area * ang;
          m(ned + c * no + kp, tri[a] * ne + k) += entry;
          m(tri[a] * ne + k, ned + c * no + kp) -= entry;
        }
  }

  // boundary term <|s.n| u+, v+> over tagged edges
  for (const auto& edge : mesh.boundary_edges()) {
    const Vector3d n = unit_normal(edge.normal);
    MatrixXd wang(ne, ne);
    for (int k = 0; k < ne; ++k)
      for (int kp = 0; kp < ne; ++kp) {
        double sum = 0.0;
        for (int q = 0; q < bq.size(); ++q) {
          // split rule is seam-aligned for e_z; rotate for x/y normals
          const Vector3d node = bq.nodes.col(q);
          Vector3d s;
          if (edge.normal == NormalTag::XMinus || edge.normal == NormalTag::XPlus)
            s = Vector3d(node.z(), node.x(), node.y());
          else
            s = Vector3d(node.x(), node.z(), node.y());
          const auto ik = basis.even_indices()[k];
          const auto ikp = basis.even_indices()[kp];
          sum += bq.weights[q] * std::abs(s.dot(n)) *
                 eval_harmonic(ik.l, ik.m, s) * eval_harmonic(ikp.l, ikp.m, s);
        }
        wang(kp, k) = sum;
      }
    const Vector2d a = mesh.vertex(edge.v0);
    const Vector2d b = mesh.vertex(edge.v1);
    for (size_t q = 0; q < edge_rule.points.size(); ++q) {
      const double t = edge_rule.points[q];
      const double w = edge_rule.weights[q] * edge.length;
      const double phi0 = 1.0 - t, phi1 = t;
      (void)a;
      (void)b;
      const double gram[2][2] = {{phi0 * phi0, phi0 * phi1},
                                 {phi1 * phi0, phi1 * phi1}};
      const int verts[2] = {edge.v0, edge.v1};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          for (int k = 0; k < ne; ++k)
            for (int kp = 0; kp < ne; ++kp)
              m(verts[j] * ne + kp, verts[i] * ne + k) +=
                  w * gram[i][j] * wang(kp, k);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("skew parts cancel") {
  const auto basis = SphericalBasis::build(3);
  const auto ops = build_angular_operators(basis);
  const auto mesh = Mesh2D::rectangle(2, 1, kSquare);
  auto ctx = std::make_shared<const StepContext>(mesh, basis, ops, false);

  auto co = make_coeffs(mesh.triangle_count(), 0.0, 0.0, 1.3, 0.4, -0.8);
  StepSystem sys(ctx, co, 1.0);
  for (unsigned seed : {1u, 2u, 3u}) {
    const auto u = random_field(mesh, basis, seed);
    const double scale = u.even.squaredNorm() + u.odd.squaredNorm();
    CHECK(std::abs(sys.quadratic_form(u)) < 1e-12 * scale);
  }
}

TEST_CASE("quadratic form identity and positivity") {
  const auto basis = SphericalBasis::build(3);
  const auto ops = build_angular_operators(basis);
  const auto mesh = Mesh2D::rectangle(1, 1, kSquare);  // two cells
  auto ctx = std::make_shared<const StepContext>(mesh, basis, ops, true);
  const int nc = mesh.triangle_count();

  DiscreteCoefficients co;
  co.eps = 1.0;
  co.stopping = VectorXd::LinSpaced(nc, 1.0, 1.7);
  co.transport = VectorXd::LinSpaced(nc, 0.4, 0.9);
  co.magnetic[0] = VectorXd::Constant(nc, 0.3);
  co.magnetic[1] = VectorXd::Constant(nc, -0.2);
  co.magnetic[2] = VectorXd::LinSpaced(nc, -1.0, -0.5);
  const double deps = 0.05;
  StepSystem sys(ctx, co, deps);

  const auto lb_e = laplace_beltrami_diagonal(basis.even_indices());
  const auto lb_o = laplace_beltrami_diagonal(basis.odd_indices());
  const auto mass_s = assemble_weighted_p1_mass(mesh, co.stopping);
  const auto mass_t = assemble_weighted_p1_mass(mesh, co.transport);

  for (unsigned seed : {10u, 20u, 30u, 40u}) {
    const auto u = random_field(mesh, basis, seed);
    double expect = 0.0;
    for (int k = 0; k < basis.even_count(); ++k) {
      expect += u.even.col(k).dot(mass_s * u.even.col(k)) / deps;
      expect += lb_e[k] * u.even.col(k).dot(mass_t * u.even.col(k));
    }
    for (int c = 0; c < nc; ++c) {
      expect += co.stopping[c] / deps * mesh.area(c) * u.odd.row(c).squaredNorm();
      for (int k = 0; k < basis.odd_count(); ++k)
        expect += co.transport[c] * mesh.area(c) * lb_o[k] * u.odd(c, k) * u.odd(c, k);
    }
    for (int t = 0; t < kNormalCount; ++t) {
      const auto mb = assemble_boundary_mass(mesh, static_cast<NormalTag>(t));
      for (int k = 0; k < basis.even_count(); ++k)
        for (int k2 = 0; k2 < basis.even_count(); ++k2)
          expect += ops.boundary_weight[t](k, k2) *
                    u.even.col(k).dot(mb * u.even.col(k2));
    }
    const double got = sys.quadratic_form(u);
    CHECK(got == doctest::Approx(expect).epsilon(1e-10));
    CHECK(got > 0.0);
  }
}

TEST_CASE("dense assembly matches the brute-force oracle") {
  for (int order : {1, 3}) {
    const auto basis = SphericalBasis::build(order);
    const auto ops = build_angular_operators(basis);
    const auto mesh = Mesh2D::rectangle(1, 1, kSquare);
    auto ctx = std::make_shared<const StepContext>(mesh, basis, ops, true);

    auto co = make_coeffs(mesh.triangle_count(), 1.3, 0.8, -1.1, 0.25, -0.4);
    co.stopping[1] = 2.1;  // cellwise variation
    co.transport[0] = 0.6;
    const double deps = 0.2;
    StepSystem sys(ctx, co, deps);

    const MatrixXd got = sys.dense_matrix();
    const MatrixXd expect = brute_force_matrix(mesh, basis, co, deps);
    REQUIRE(got.rows() == expect.rows());
    INFO("order ", order, " max deviation ",
         (got - expect).cwiseAbs().maxCoeff());
    CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-12);

    // apply() agrees with the dense matrix
    const auto u = random_field(mesh, basis, 77);
    VectorXd flat(ctx->even_dofs() + ctx->odd_dofs());
    flat.head(ctx->even_dofs()) = u.even_flat();
    flat.tail(ctx->odd_dofs()) = u.odd_flat();
    const VectorXd ref = got * flat;
    const auto mu = sys.apply(u);
    CHECK((mu.even_flat() - ref.head(ctx->even_dofs())).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK((mu.odd_flat() - ref.tail(ctx->odd_dofs())).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("rhs assembly") {
  const auto basis = SphericalBasis::build(3);
  const auto ops = build_angular_operators(basis);
  const auto mesh = Mesh2D::rectangle(2, 2, kSquare);
  auto ctx = std::make_shared<const StepContext>(mesh, basis, ops, true);
  auto co = make_coeffs(mesh.triangle_count(), 1.0, 1.0, 0.0);
  StepSystem sys(ctx, co, 0.5);

  // zero source, zero carry
  auto zero_moments = [&](double, double, VectorXd& out) {
    out.setZero(basis.total_count());
  };
  auto rhs0 = assemble_rhs(sys, zero_moments, nullptr, nullptr);
  CHECK(rhs0.max_abs() == 0.0);

  // isotropic source constant in space: only the (0,0) even entries load
  auto iso = [&](double, double, VectorXd& out) {
    out.setZero(basis.total_count());
    out[0] = 3.0;
  };
  auto rhs_iso = assemble_rhs(sys, iso, nullptr, nullptr);
  CHECK(rhs_iso.odd.cwiseAbs().maxCoeff() == 0.0);
  for (int k = 1; k < basis.even_count(); ++k)
    CHECK(rhs_iso.even.col(k).cwiseAbs().maxCoeff() == 0.0);
  // row sums of the mass matrix integrate the constant: total = 3 * area
  CHECK(rhs_iso.even.col(0).sum() == doctest::Approx(3.0 * 4.0).epsilon(1e-13));

  // carry-over with S = 1 is the plain mass application scaled by 1/deps
  const auto psi = random_field(mesh, basis, 5);
  const VectorXd ones = VectorXd::Ones(mesh.triangle_count());
  auto rhs_carry = assemble_rhs(sys, zero_moments, &psi, &ones);
  const PhaseSpaceField::Block expect_even =
      2.0 * (ctx->unweighted_p1_mass() * psi.even);  // 1/deps = 2
  CHECK((rhs_carry.even - expect_even).cwiseAbs().maxCoeff() < 1e-13);
  for (int c = 0; c < mesh.triangle_count(); ++c)
    CHECK((rhs_carry.odd.row(c) - 2.0 * mesh.area(c) * psi.odd.row(c))
              .cwiseAbs()
              .maxCoeff() < 1e-14);
}

TEST_CASE("solve paths agree with a dense direct oracle") {
  const auto basis = SphericalBasis::build(3);
  const auto ops = build_angular_operators(basis);
  const auto mesh = Mesh2D::rectangle(1, 1, kSquare);
  auto ctx = std::make_shared<const StepContext>(mesh, basis, ops, true);
  auto co = make_coeffs(mesh.triangle_count(), 1.5, 0.9, -1.0, 0.2, 0.0);
  StepSystem sys(ctx, co, 0.1);

  // zero rhs: unique solution is zero
  SolverOptions opt;
  const auto zero =
      sys.solve(PhaseSpaceField::zero(mesh, basis), opt, nullptr);
  CHECK(zero.max_abs() == 0.0);

  const auto rhs = random_field(mesh, basis, 123);
  const MatrixXd dense = sys.dense_matrix();
  VectorXd flat(dense.rows());
  flat.head(ctx->even_dofs()) = rhs.even_flat();
  flat.tail(ctx->odd_dofs()) = rhs.odd_flat();
  const VectorXd ref = Eigen::FullPivLU<MatrixXd>(dense).solve(flat);

  SolveStats stats;
  for (auto strategy : {SolveStrategy::SchurIterative, SolveStrategy::SchurDirect,
                        SolveStrategy::MonolithicDirect}) {
    opt.strategy = strategy;
    const auto u = sys.solve(rhs, opt, &stats);
    CHECK(stats.residual <= opt.rtol);
    CHECK((u.even_flat() - ref.head(ctx->even_dofs())).cwiseAbs().maxCoeff() <
          1e-8);
    CHECK((u.odd_flat() - ref.tail(ctx->odd_dofs())).cwiseAbs().maxCoeff() < 1e-8);
  }

  // Galerkin consistency: the discrete residual vanishes against every test
  // basis vector at solver tolerance
  opt.strategy = SolveStrategy::SchurIterative;
  const auto u = sys.solve(rhs, opt, nullptr);
  const auto residual = sys.apply(u);
  const double rhs_norm =
      std::sqrt(rhs.even.squaredNorm() + rhs.odd.squaredNorm());
  CHECK((residual.even - rhs.even).cwiseAbs().maxCoeff() < opt.rtol * rhs_norm);
  CHECK((residual.odd - rhs.odd).cwiseAbs().maxCoeff() < opt.rtol * rhs_norm);

  // iteration failure reports the achieved residual; fallback rescues it
  SolverOptions strict;
  strict.max_iterations = 1;
  strict.rtol = 1e-14;
  strict.allow_fallback = false;
  CHECK_THROWS_AS(sys.solve(rhs, strict, nullptr), SolverError);
  strict.allow_fallback = true;
  const auto rescued = sys.solve(rhs, strict, &stats);
  CHECK(stats.used_fallback);
  CHECK((rescued.even_flat() - ref.head(ctx->even_dofs())).cwiseAbs().maxCoeff() <
        1e-8);
}

TEST_CASE("transport sweep") {
  const auto basis = SphericalBasis::build(3);
  const auto ops = build_angular_operators(basis);
  const auto mesh = Mesh2D::rectangle(3, 3, kSquare);

  TransportProblem problem;
  problem.mesh = &mesh;
  problem.basis = &basis;
  problem.ops = &ops;
  problem.coeffs.stopping = [](double, double, double) { return 1.0; };
  problem.coeffs.transport = [](double, double, double) { return 1.0; };
  for (auto& g : problem.coeffs.magnetic)
    g = [](double, double, double) { return 0.0; };
  problem.grid = EnergyGrid{1.0, 2.0, 4};

  SUBCASE("zero source gives a zero trajectory") {
    problem.source.evaluate = [](double, double, const Vector3d&, double) {
      return 0.0;
    };
    const auto traj = run_transport_collect(problem);
    REQUIRE(traj.size() == 5);
    for (const auto& f : traj) CHECK(f.max_abs() < 1e-13);

    const auto report = stability_diagnostic(traj, problem);
    for (const auto& row : report.rows) {
      CHECK(row.stopping_energy == 0.0);
      CHECK(row.dissipation_tail == 0.0);
      CHECK(row.ratio == 0.0);
    }
  }

  SUBCASE("single step equals one solve") {
    problem.source.evaluate = [](double x, double, const Vector3d& s, double) {
      return x * s.z();
    };
    problem.source.angular_bandwidth = 1;
    problem.grid = EnergyGrid{1.0, 2.0, 1};
    const auto traj = run_transport_collect(problem);
    REQUIRE(traj.size() == 2);
    CHECK(traj[1].max_abs() == 0.0);

    auto ctx = std::make_shared<const StepContext>(mesh, basis, ops, true);
    const auto co = discretize_coefficients(problem.coeffs, mesh, 1.0);
    StepSystem sys(ctx, co, 1.0);
    const AveragedSourceMoments avg(problem.source, 0, problem.grid, basis);
    const auto rhs = assemble_rhs(
        sys,
        [&](double x, double y, VectorXd& out) { avg.moments_at(x, y, out); },
        nullptr, nullptr);
    const auto expect = sys.solve(rhs, problem.solver, nullptr);
    CHECK((traj[0].even - expect.even).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((traj[0].odd - expect.odd).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("bitwise deterministic") {
    problem.source.evaluate = [](double x, double y, const Vector3d& s, double eps) {
      return (2.0 - eps) * x * y * (1.0 + s.x());
    };
    problem.source.angular_bandwidth = 1;
    const auto t1 = run_transport_collect(problem);
    const auto t2 = run_transport_collect(problem);
    REQUIRE(t1.size() == t2.size());
    for (size_t i = 0; i < t1.size(); ++i) {
      CHECK(std::memcmp(t1[i].even.data(), t2[i].even.data(),
                        sizeof(double) * t1[i].even.size()) == 0);
      CHECK(std::memcmp(t1[i].odd.data(), t2[i].odd.data(),
                        sizeof(double) * t1[i].odd.size()) == 0);
    }
  }

  SUBCASE("coefficient validation runs before any solve") {
    problem.coeffs.transport = [](double, double, double eps) {
      return eps > 1.9 ? -1.0 : 1.0;  // violates the lower bound at one node
    };
    problem.source.evaluate = [](double, double, const Vector3d&, double) {
      return 1.0;
    };
    CHECK_THROWS_AS(run_transport_collect(problem), std::invalid_argument);
  }
}

TEST_CASE("checkpoint round trip") {
  const auto basis = SphericalBasis::build(1);
  const auto ops = build_angular_operators(basis);
  const auto mesh = Mesh2D::rectangle(2, 1, kSquare);
  (void)ops;

  const auto f0 = random_field(mesh, basis, 1);
  const auto f1 = random_field(mesh, basis, 2);

  for (auto format : {CheckpointFormat::Binary, CheckpointFormat::Csv}) {
    const std::string path =
        (std::filesystem::temp_directory_path() /
         (format == CheckpointFormat::Binary ? "fplo_traj_test.bin"
                                             : "fplo_traj_test.csv"))
            .string();
    {
      TrajectoryWriter writer(path, format);
      writer.write(2, 2.0, f0);
      writer.write(1, 1.5, f1);
    }
    const auto records = read_checkpoints(path, format);
    REQUIRE(records.size() == 2);
    CHECK(records[0].m == 2);
    CHECK(records[0].eps == 2.0);
    CHECK(records[1].m == 1);
    CHECK((records[0].field.even - f0.even).cwiseAbs().maxCoeff() == 0.0);
    CHECK((records[1].field.odd - f1.odd).cwiseAbs().maxCoeff() == 0.0);
    std::filesystem::remove(path);
  }
}
