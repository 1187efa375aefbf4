#include "analysis.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "quadrature.hpp"

namespace fplo {

double eoc(double coarse_error, double fine_error, double knob_ratio) {
  if (!(coarse_error > 0.0) || !(fine_error > 0.0))
    throw std::invalid_argument("eoc: errors must be positive");
  if (!(knob_ratio > 1.0))
    throw std::invalid_argument("eoc: knob ratio must exceed 1");
  return std::log(coarse_error / fine_error) / std::log(knob_ratio);
}

ErrorAccumulator::ErrorAccumulator(const ManufacturedCase& c, const Mesh2D& mesh,
                                   const SphericalBasis& basis)
    : case_(&c), mesh_(&mesh), basis_(&basis), expansion_(c, basis) {
  const TriangleRule& rule = triangle_rule_degree6();
  const int nq = static_cast<int>(rule.w.size());

  cells_.resize(mesh.triangle_count());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    CellTable& tab = cells_[t];
    const auto& tri = mesh.triangle(t);
    const Eigen::Vector2d p0 = mesh.vertex(tri[0]);
    const Eigen::Vector2d p1 = mesh.vertex(tri[1]);
    const Eigen::Vector2d p2 = mesh.vertex(tri[2]);
    tab.area = mesh.area(t);
    tab.elem = p1_element_mass(tab.area);
    tab.grads = p1_gradients(p0, p1, p2);
    tab.ic = tab.icc = tab.ia = tab.ib = tab.iaa = tab.ibb = tab.iab = 0.0;
    tab.icphi.setZero();
    for (int q = 0; q < nq; ++q) {
      const double xi = rule.x[q], eta = rule.y[q];
      const double w = rule.w[q] * 2.0 * tab.area;  // reference weights sum to 1/2
      const Eigen::Vector2d p = p0 + xi * (p1 - p0) + eta * (p2 - p0);
      const double chi = c.chi(p.x(), p.y());
      const Eigen::Vector2d g = c.grad_chi(p.x(), p.y());
      tab.ic += w * chi;
      tab.icc += w * chi * chi;
      tab.icphi[0] += w * chi * (1.0 - xi - eta);
      tab.icphi[1] += w * chi * xi;
      tab.icphi[2] += w * chi * eta;
      tab.ia += w * g.x();
      tab.ib += w * g.y();
      tab.iaa += w * g.x() * g.x();
      tab.ibb += w * g.y() * g.y();
      tab.iab += w * g.x() * g.y();
    }
    chi_sq_total_ += tab.icc;
  }

  a0_sq_ = expansion_.stream_x_exact().squaredNorm();
  b0_sq_ = expansion_.stream_y_exact().squaredNorm();
  a0b0_ = expansion_.stream_x_exact().dot(expansion_.stream_y_exact());
}

void ErrorAccumulator::accumulate(double eps, const PhaseSpaceField& field) {
  if (!field.conforms(*mesh_, *basis_))
    throw std::invalid_argument("ErrorAccumulator: field layout mismatch");
  const double f = case_->f(eps);
  const int ne = basis_->even_count();
  const int no = basis_->odd_count();
  const auto& ce = expansion_.even_coeffs();
  const auto& co = expansion_.odd_coeffs();
  const auto& ax = expansion_.stream_x_discrete();
  const auto& ay = expansion_.stream_y_discrete();
  const int next = static_cast<int>(ax.rows());

  double even_sq = f * f * expansion_.even_truncation_sq() * chi_sq_total_;
  double odd_sq = f * f * expansion_.odd_truncation_sq() * chi_sq_total_;
  double stream_sq = 0.0;

  Eigen::VectorXd gx(ne), gy(ne), w(next);
  for (int t = 0; t < mesh_->triangle_count(); ++t) {
    const CellTable& tab = cells_[t];
    const auto& tri = mesh_->triangle(t);

    // even L2: P1 moment fields against c_k * chi * f
    for (int k = 0; k < ne; ++k) {
      const double c = f * ce[k];
      const double u0 = field.even(tri[0], k);
      const double u1 = field.even(tri[1], k);
      const double u2 = field.even(tri[2], k);
      double cell = c * c * tab.icc;
      cell -= 2.0 * c * (u0 * tab.icphi[0] + u1 * tab.icphi[1] + u2 * tab.icphi[2]);
      cell += u0 * (tab.elem(0, 0) * u0 + tab.elem(0, 1) * u1 + tab.elem(0, 2) * u2);
      cell += u1 * (tab.elem(1, 0) * u0 + tab.elem(1, 1) * u1 + tab.elem(1, 2) * u2);
      cell += u2 * (tab.elem(2, 0) * u0 + tab.elem(2, 1) * u1 + tab.elem(2, 2) * u2);
      even_sq += cell;

      gx[k] = tab.grads(0, 0) * u0 + tab.grads(0, 1) * u1 + tab.grads(0, 2) * u2;
      gy[k] = tab.grads(1, 0) * u0 + tab.grads(1, 1) * u1 + tab.grads(1, 2) * u2;
    }

    // odd L2: P0 moment fields
    for (int k = 0; k < no; ++k) {
      const double c = f * co[k];
      const double d = field.odd(t, k);
      odd_sq += c * c * tab.icc - 2.0 * c * d * tab.ic + d * d * tab.area;
    }

    // streaming term: |alpha a + beta b - w|^2 integrated over the cell,
    // with a = f a0, b = f b0 fixed per step and w the discrete image
    w.noalias() = ax * gx;
    w.noalias() += ay * gy;
    const double ww = w.squaredNorm();
    const double aw = f * expansion_.stream_x_exact().dot(w);
    const double bw = f * expansion_.stream_y_exact().dot(w);
    stream_sq += f * f * (a0_sq_ * tab.iaa + b0_sq_ * tab.ibb + 2.0 * a0b0_ * tab.iab);
    stream_sq += ww * tab.area - 2.0 * aw * tab.ia - 2.0 * bw * tab.ib;
  }

  max_even_sq_ = std::max(max_even_sq_, even_sq);
  max_odd_sq_ = std::max(max_odd_sq_, odd_sq);
  max_combined_sq_ = std::max(max_combined_sq_, stream_sq + even_sq);
}

ErrorRecord ErrorAccumulator::record() const {
  ErrorRecord rec;
  rec.e_plus = std::sqrt(std::max(0.0, max_even_sq_));
  rec.e_minus = std::sqrt(std::max(0.0, max_odd_sq_));
  rec.e_stream = std::sqrt(std::max(0.0, max_combined_sq_));
  return rec;
}

ErrorRecord error_norms(const std::vector<PhaseSpaceField>& trajectory,
                        const ManufacturedCase& c, const Mesh2D& mesh,
                        const SphericalBasis& basis, const EnergyGrid& grid) {
  if (static_cast<int>(trajectory.size()) != grid.steps + 1)
    throw std::invalid_argument("error_norms: trajectory incomplete");
  ErrorAccumulator acc(c, mesh, basis);
  for (int m = 0; m <= grid.steps; ++m) acc.accumulate(grid.node(m), trajectory[m]);
  return acc.record();
}

namespace {

SweepPoint run_point(const StudyConfig& config, const ManufacturedCase& mcase,
                     int knob) {
  SweepPoint point;
  point.knob = knob;
  point.resolution =
      config.axis == SweepAxis::Resolution ? knob : config.resolution;
  point.order = config.axis == SweepAxis::Order ? knob : config.order;
  point.delta_eps =
      config.axis == SweepAxis::DeltaEps ? 1.0 / knob : config.delta_eps;

  const Mesh2D mesh =
      Mesh2D::rectangle(point.resolution, point.resolution, mcase.domain);
  const SphericalBasis basis = SphericalBasis::build(point.order);
  const AngularOperators ops = build_angular_operators(basis);

  TransportProblem problem;
  problem.mesh = &mesh;
  problem.basis = &basis;
  problem.ops = &ops;
  problem.coeffs = mcase.coeffs;
  problem.source = manufactured_source(mcase);
  problem.grid = EnergyGrid{mcase.eps_min, mcase.eps_max,
                            steps_for(mcase.eps_min, mcase.eps_max, point.delta_eps)};
  problem.solver.strategy = config.strategy;
  problem.solver.rtol = config.solver_rtol;
  problem.solver.max_iterations = config.solver_max_iterations;
  problem.rhs_projection = config.rhs_projection;

  ErrorAccumulator acc(mcase, mesh, basis);
  std::unique_ptr<TrajectoryWriter> writer;
  if (!config.checkpoint_path.empty()) {
    const std::string path = config.checkpoint_path + "." + std::to_string(knob) +
                             (config.checkpoint_format == CheckpointFormat::Binary
                                  ? ".bin"
                                  : ".csv");
    writer = std::make_unique<TrajectoryWriter>(path, config.checkpoint_format);
  }

  run_transport(problem, [&](int m, double eps, const PhaseSpaceField& f,
                             const SolveStats* stats) {
    acc.accumulate(eps, f);
    if (writer) writer->write(m, eps, f);
    if (stats) {
      point.total_iterations += stats->iterations;
      point.max_residual = std::max(point.max_residual, stats->residual);
      point.any_fallback = point.any_fallback || stats->used_fallback;
    }
  });

  point.errors = acc.record();
  return point;
}

}  // namespace

StudyReport run_study(const StudyConfig& config) {
  StudyReport report;
  report.config = config;
  const ManufacturedCase mcase = case_from_config(config);
  report.case_name = mcase.name;
  report.points.resize(config.sweep.size());

  const int workers =
      std::min<int>(config.threads, static_cast<int>(config.sweep.size()));
  if (workers <= 1) {
    for (size_t i = 0; i < config.sweep.size(); ++i)
      report.points[i] = run_point(config, mcase, config.sweep[i]);
  } else {
    // independent sweep points, results stored by index
    std::vector<std::exception_ptr> errors(config.sweep.size());
    std::atomic<size_t> next{0};
    auto work = [&]() {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= config.sweep.size()) return;
        try {
          report.points[i] = run_point(config, mcase, config.sweep[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    for (const auto& err : errors)
      if (err) std::rethrow_exception(err);
  }
  return report;
}

std::string axis_label(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Resolution: return "1/h";
    case SweepAxis::Order: return "N";
    case SweepAxis::DeltaEps: return "1/deps";
  }
  return "?";
}

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string solver_name(SolveStrategy s) {
  switch (s) {
    case SolveStrategy::SchurIterative: return "schur-bicgstab";
    case SolveStrategy::SchurDirect: return "schur-lu";
    case SolveStrategy::MonolithicDirect: return "monolithic-lu";
  }
  return "?";
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[64];
  std::strftime(buf, sizeof(buf), "%Y-%m-%d %H:%M:%S UTC", std::gmtime(&t));
  return buf;
}

}  // namespace

void write_csv(const StudyReport& report, std::ostream& os) {
  const auto& cfg = report.config;
  os << "# case=" << report.case_name << " axis=" << axis_label(cfg.axis) << "\n";
  // effective configuration echo, parseable after stripping the comment marks
  std::istringstream echo(render_config(cfg));
  std::string line;
  while (std::getline(echo, line)) os << "# " << line << "\n";
  if (!cfg.deterministic) os << "# generated: " << timestamp() << "\n";

  const bool with_eoc = report.points.size() > 1;
  os << "knob,e_plus";
  if (with_eoc) os << ",eoc_plus";
  os << ",e_minus";
  if (with_eoc) os << ",eoc_minus";
  os << ",E_plus";
  if (with_eoc) os << ",eoc_E";
  os << "\n";

  for (size_t i = 0; i < report.points.size(); ++i) {
    const auto& p = report.points[i];
    const double ratio = i > 0 ? p.knob / report.points[i - 1].knob : 0.0;
    auto eoc_cell = [&](double coarse, double fine) {
      return i == 0 ? std::string() : fixed2(eoc(coarse, fine, ratio));
    };
    os << static_cast<long>(p.knob) << "," << sci(p.errors.e_plus);
    if (with_eoc)
      os << "," << eoc_cell(report.points[i - 1].errors.e_plus, p.errors.e_plus);
    os << "," << sci(p.errors.e_minus);
    if (with_eoc)
      os << "," << eoc_cell(report.points[i - 1].errors.e_minus, p.errors.e_minus);
    os << "," << sci(p.errors.e_stream);
    if (with_eoc)
      os << "," << eoc_cell(report.points[i - 1].errors.e_stream, p.errors.e_stream);
    os << "\n";
  }
}

void write_markdown(const StudyReport& report, std::ostream& os) {
  const auto& cfg = report.config;
  os << "## Convergence study: " << report.case_name << "\n\n";
  os << "Sweep over " << axis_label(cfg.axis) << "; fixed knobs: resolution="
     << cfg.resolution << ", order=" << cfg.order << ", delta_eps=" << cfg.delta_eps
     << ", solver=" << solver_name(cfg.strategy) << ".";
  if (!cfg.deterministic) os << " Generated " << timestamp() << ".";
  os << "\n\n";

  const bool with_eoc = report.points.size() > 1;
  if (with_eoc) {
    os << "| " << axis_label(cfg.axis)
       << " | e+ | eoc | e- | eoc | E+ | eoc |\n";
    os << "|---|---|---|---|---|---|---|\n";
  } else {
    os << "| " << axis_label(cfg.axis) << " | e+ | e- | E+ |\n";
    os << "|---|---|---|---|\n";
  }
  for (size_t i = 0; i < report.points.size(); ++i) {
    const auto& p = report.points[i];
    const double ratio = i > 0 ? p.knob / report.points[i - 1].knob : 0.0;
    auto eoc_cell = [&](double coarse, double fine) {
      return i == 0 ? std::string("---") : fixed2(eoc(coarse, fine, ratio));
    };
    os << "| " << static_cast<long>(p.knob) << " | " << sci(p.errors.e_plus);
    if (with_eoc)
      os << " | " << eoc_cell(report.points[i - 1].errors.e_plus, p.errors.e_plus);
    os << " | " << sci(p.errors.e_minus);
    if (with_eoc)
      os << " | " << eoc_cell(report.points[i - 1].errors.e_minus, p.errors.e_minus);
    os << " | " << sci(p.errors.e_stream);
    if (with_eoc)
      os << " | "
         << eoc_cell(report.points[i - 1].errors.e_stream, p.errors.e_stream);
    os << " |\n";
  }

  os << "\nEffective configuration:\n\n```\n" << render_config(cfg) << "```\n";
}

}  // namespace fplo
