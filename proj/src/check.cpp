#include "check.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "analysis.hpp"
#include "mms.hpp"
#include "system.hpp"

namespace fplo {

namespace {

std::string max_str(double v) {
  std::ostringstream os;
  os.precision(3);
  os << "max " << v;
  return os.str();
}

}  // namespace

std::vector<CheckResult> run_checks(int order) {
  std::vector<CheckResult> results;
  auto add = [&](const std::string& name, bool ok, const std::string& detail) {
    results.push_back({name, ok, detail});
  };

  const auto basis = SphericalBasis::build(order);
  const auto quad = build_quadrature(2 * order + 2);
  const auto dense_quad = build_quadrature(4 * order + 12);

  {
    const Eigen::MatrixXd table = harmonic_table(basis.indices(), quad);
    const Eigen::MatrixXd gram =
        table.transpose() * quad.weights.asDiagonal() * table;
    const double dev =
        (gram - Eigen::MatrixXd::Identity(basis.total_count(), basis.total_count()))
            .cwiseAbs()
            .maxCoeff();
    add("harmonics orthonormal under assembly quadrature", dev < 1e-10, max_str(dev));
  }

  const auto a = streaming_matrices(basis, quad);
  const auto a_ref = streaming_matrices(basis, dense_quad);
  {
    double dev = 0.0;
    for (int i = 0; i < 3; ++i)
      dev = std::max(dev, (a[i] - a_ref[i]).cwiseAbs().maxCoeff());
    add("streaming matrices vs refined quadrature", dev < 1e-10, max_str(dev));

    double rule = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int r = 0; r < basis.odd_count(); ++r)
        for (int c = 0; c < basis.even_count(); ++c)
          if (std::abs(basis.odd_indices()[r].l - basis.even_indices()[c].l) != 1)
            rule = std::max(rule, std::abs(a[i](r, c)));
    add("streaming selection rule |l-l'|=1", rule < 1e-12, max_str(rule));
  }

  const auto r = lorentz_matrices(basis, quad);
  {
    double skew = 0.0, offblock = 0.0;
    for (int i = 0; i < 3; ++i) {
      skew = std::max(skew, (r[i] + r[i].transpose()).cwiseAbs().maxCoeff());
      for (int row = 0; row < basis.total_count(); ++row)
        for (int col = 0; col < basis.total_count(); ++col)
          if (basis.indices()[row].l != basis.indices()[col].l)
            offblock = std::max(offblock, std::abs(r[i](row, col)));
    }
    add("rotation matrices skew-symmetric", skew < 1e-12, max_str(skew));
    add("rotation matrices block-diagonal in l", offblock < 1e-12, max_str(offblock));

    const Eigen::MatrixXd casimir = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    const Eigen::VectorXd lb = laplace_beltrami_diagonal(basis.indices());
    const double dev =
        (casimir + Eigen::MatrixXd(lb.asDiagonal())).cwiseAbs().maxCoeff();
    add("rotation Casimir equals Laplace-Beltrami", dev < 1e-9, max_str(dev));
  }

  {
    const auto split = build_split_quadrature(4 * order + 8);
    const auto w = boundary_weight_matrix(basis, Eigen::Vector3d(1, 0, 0), split);
    const auto w_ref = boundary_weight_matrix(basis, Eigen::Vector3d(1, 0, 0),
                                              build_split_quadrature(8 * order + 16));
    const double dev = (w - w_ref).cwiseAbs().maxCoeff();
    add("boundary weights vs refined quadrature", dev < 1e-10, max_str(dev));
    const auto wz = boundary_weight_matrix(basis, Eigen::Vector3d(0, 0, 1), split);
    add("boundary weight closed form (0,0)",
        std::abs(wz(0, 0) - 0.5) < 1e-12, max_str(std::abs(wz(0, 0) - 0.5)));
  }

  // step operator identities on a small instance
  {
    const auto b3 = SphericalBasis::build(3);
    const auto ops3 = build_angular_operators(b3);
    const auto mesh = Mesh2D::rectangle(1, 1, Rect{-1, 1, -1, 1});
    std::mt19937 gen(7);
    std::normal_distribution<double> dist;

    // pure skew: S -> 0 limit realized by dropping mass and boundary terms
    {
      auto ctx = std::make_shared<const StepContext>(mesh, b3, ops3, false);
      DiscreteCoefficients dc;
      dc.eps = 1.0;
      dc.stopping = Eigen::VectorXd::Constant(2, 1e-30);
      dc.transport = Eigen::VectorXd::Constant(2, 1e-30);
      for (auto& g : dc.magnetic) g = Eigen::VectorXd::Constant(2, 0.7);
      StepSystem sys(ctx, dc, 1.0);
      PhaseSpaceField u = PhaseSpaceField::zero(mesh, b3);
      for (int i = 0; i < u.even.size(); ++i) u.even.data()[i] = dist(gen);
      for (int i = 0; i < u.odd.size(); ++i) u.odd.data()[i] = dist(gen);
      const double q = std::abs(sys.quadratic_form(u));
      const double scale = u.even.squaredNorm() + u.odd.squaredNorm();
      add("skew parts cancel in the quadratic form", q < 1e-10 * scale,
          max_str(q / scale));
    }

    // coercivity identity: u^T M u = (1/deps)|S^",1/2" u|^2 + T norm + boundary
    {
      const auto mesh2 = Mesh2D::rectangle(1, 2, Rect{-1, 1, -1, 1});
      auto ctx = std::make_shared<const StepContext>(mesh2, b3, ops3, true);
      const int nc = mesh2.triangle_count();
      DiscreteCoefficients dc;
      dc.eps = 1.0;
      dc.stopping = Eigen::VectorXd::LinSpaced(nc, 1.0, 2.0);
      dc.transport = Eigen::VectorXd::LinSpaced(nc, 0.5, 1.5);
      for (auto& g : dc.magnetic) g = Eigen::VectorXd::LinSpaced(nc, -1.0, 1.0);
      const double deps = 0.05;
      StepSystem sys(ctx, dc, deps);

      PhaseSpaceField u = PhaseSpaceField::zero(mesh2, b3);
      for (int i = 0; i < u.even.size(); ++i) u.even.data()[i] = dist(gen);
      for (int i = 0; i < u.odd.size(); ++i) u.odd.data()[i] = dist(gen);

      const auto mass_s = assemble_weighted_p1_mass(mesh2, dc.stopping);
      const auto mass_t = assemble_weighted_p1_mass(mesh2, dc.transport);
      const auto lb_e = laplace_beltrami_diagonal(b3.even_indices());
      const auto lb_o = laplace_beltrami_diagonal(b3.odd_indices());
      double expect = 0.0;
      for (int k = 0; k < b3.even_count(); ++k) {
        expect += u.even.col(k).dot(mass_s * u.even.col(k)) / deps;
        expect += lb_e[k] * u.even.col(k).dot(mass_t * u.even.col(k));
      }
      for (int c = 0; c < nc; ++c) {
        const double area = mesh2.area(c);
        expect += dc.stopping[c] / deps * area * u.odd.row(c).squaredNorm();
        for (int k = 0; k < b3.odd_count(); ++k)
          expect += dc.transport[c] * area * lb_o[k] * u.odd(c, k) * u.odd(c, k);
      }
      for (int t = 0; t < kNormalCount; ++t) {
        const auto mb = assemble_boundary_mass(mesh2, static_cast<NormalTag>(t));
        const Eigen::MatrixXd wb = ops3.boundary_weight[t];
        for (int k = 0; k < b3.even_count(); ++k)
          for (int k2 = 0; k2 < b3.even_count(); ++k2)
            if (wb(k, k2) != 0.0)
              expect += wb(k, k2) * u.even.col(k).dot(mb * u.even.col(k2));
      }
      const double got = sys.quadratic_form(u);
      const double dev = std::abs(got - expect) / std::abs(expect);
      add("quadratic form equals collision plus boundary norms", dev < 1e-10,
          max_str(dev));
    }

    // Schur and monolithic paths agree
    {
      auto ctx = std::make_shared<const StepContext>(mesh, b3, ops3, true);
      DiscreteCoefficients dc;
      dc.eps = 1.0;
      dc.stopping = Eigen::VectorXd::Constant(2, 1.5);
      dc.transport = Eigen::VectorXd::Constant(2, 1.0);
      for (auto& g : dc.magnetic) g = Eigen::VectorXd::Constant(2, -1.0);
      StepSystem sys(ctx, dc, 0.1);
      PhaseSpaceField rhs = PhaseSpaceField::zero(mesh, b3);
      for (int i = 0; i < rhs.even.size(); ++i) rhs.even.data()[i] = dist(gen);
      for (int i = 0; i < rhs.odd.size(); ++i) rhs.odd.data()[i] = dist(gen);
      SolverOptions iterative, direct;
      direct.strategy = SolveStrategy::MonolithicDirect;
      const auto u1 = sys.solve(rhs, iterative);
      const auto u2 = sys.solve(rhs, direct);
      const double dev = std::sqrt((u1.even - u2.even).squaredNorm() +
                                   (u1.odd - u2.odd).squaredNorm());
      add("Schur and monolithic solves agree", dev < 1e-8, max_str(dev));
    }
  }

  // zero source propagates an identically zero trajectory
  {
    StudyConfig cfg;
    cfg.preset = 1;
    finalize_config(cfg, true);
    const ManufacturedCase mcase = case_from_config(cfg);
    const auto mesh = Mesh2D::rectangle(4, 4, mcase.domain);
    const auto b3 = SphericalBasis::build(3);
    const auto ops3 = build_angular_operators(b3);
    TransportProblem problem;
    problem.mesh = &mesh;
    problem.basis = &b3;
    problem.ops = &ops3;
    problem.coeffs = mcase.coeffs;
    problem.source.evaluate = [](double, double, const Eigen::Vector3d&, double) {
      return 0.0;
    };
    problem.grid = EnergyGrid{1.0, 2.0, 8};
    double worst = 0.0;
    run_transport(problem,
                  [&](int, double, const PhaseSpaceField& f, const SolveStats*) {
                    worst = std::max(worst, f.max_abs());
                  });
    add("zero source yields zero trajectory", worst < 1e-13, max_str(worst));

    // stability diagnostic on the manufactured preset: finite positive ratio
    problem.source = manufactured_source(mcase);
    const auto traj = run_transport_collect(problem);
    const auto report = stability_diagnostic(traj, problem);
    const double ratio = report.rows.front().ratio;
    add("stability ratio finite and positive", std::isfinite(ratio) && ratio > 0,
        max_str(ratio));
  }

  return results;
}

}  // namespace fplo
