#include "system.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "quadrature.hpp"

namespace fplo {

namespace {

// Node-block Jacobi preconditioner for the Schur-complement system: the
// n_even x n_even diagonal block of every vertex is inverted exactly.
class BlockJacobi {
 public:
  using Scalar = double;

  BlockJacobi() = default;

  void set_block_size(int b) { block_ = b; }

  template <typename MatType>
  BlockJacobi& analyzePattern(const MatType&) {
    return *this;
  }

  template <typename MatType>
  BlockJacobi& factorize(const MatType& mat) {
    rows_ = static_cast<int>(mat.rows());
    const int nb = rows_ / block_;
    lu_.clear();
    lu_.reserve(nb);
    Eigen::MatrixXd block(block_, block_);
    for (int b = 0; b < nb; ++b) {
      block.setZero();
      for (int k = 0; k < block_; ++k) {
        const int col = b * block_ + k;
        for (typename MatType::InnerIterator it(mat, col); it; ++it) {
          const int row = static_cast<int>(it.row());
          if (row >= b * block_ && row < (b + 1) * block_)
            block(row - b * block_, k) = it.value();
        }
      }
      lu_.emplace_back(block);
    }
    ok_ = true;
    return *this;
  }

  template <typename MatType>
  BlockJacobi& compute(const MatType& mat) {
    return factorize(mat);
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x(b.size());
    for (size_t blk = 0; blk < lu_.size(); ++blk)
      x.segment(blk * block_, block_) = lu_[blk].solve(b.segment(blk * block_, block_));
    return x;
  }

  Eigen::ComputationInfo info() const {
    return ok_ ? Eigen::Success : Eigen::NumericalIssue;
  }

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return rows_; }

 private:
  int block_ = 1;
  int rows_ = 0;
  bool ok_ = false;
  std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_;
};

}  // namespace

int StepContext::slot_of(int row_node, int col_node) const {
  const auto& col = adj_[col_node];
  const auto it = std::lower_bound(col.begin(), col.end(), row_node);
  return static_cast<int>(slot_base_[col_node] + (it - col.begin()));
}

StepContext::StepContext(const Mesh2D& mesh, const SphericalBasis& basis,
                         const AngularOperators& ops, bool include_boundary)
    : mesh_(&mesh), basis_(&basis), ops_(&ops), include_boundary_(include_boundary) {
  const int nc = mesh.triangle_count();
  const int nv = mesh.vertex_count();
  const int ne = basis.even_count();

  cell_nodes_.resize(nc);
  cx_.resize(nc);
  cy_.resize(nc);
  for (int c = 0; c < nc; ++c) {
    cell_nodes_[c] = mesh.triangle(c);
    const auto g = p1_gradients(mesh.vertex(cell_nodes_[c][0]),
                                mesh.vertex(cell_nodes_[c][1]),
                                mesh.vertex(cell_nodes_[c][2]));
    for (int a = 0; a < 3; ++a) {
      cx_[c][a] = g(0, a) * mesh.area(c);
      cy_[c][a] = g(1, a) * mesh.area(c);
    }
  }

  // node adjacency (includes self pairs)
  adj_.assign(nv, {});
  for (int c = 0; c < nc; ++c)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        adj_[cell_nodes_[c][b]].push_back(cell_nodes_[c][a]);
  for (auto& col : adj_) {
    std::sort(col.begin(), col.end());
    col.erase(std::unique(col.begin(), col.end()), col.end());
  }

  slot_base_.resize(nv + 1);
  slot_base_[0] = 0;
  for (int j = 0; j < nv; ++j)
    slot_base_[j + 1] = slot_base_[j] + static_cast<std::ptrdiff_t>(adj_[j].size());

  const int nslots = static_cast<int>(slot_base_[nv]);
  slot_pos_.resize(nslots);
  slot_col_.resize(nslots);
  for (int j = 0; j < nv; ++j)
    for (size_t p = 0; p < adj_[j].size(); ++p) {
      slot_pos_[slot_base_[j] + p] = static_cast<int>(p);
      slot_col_[slot_base_[j] + p] = j;
    }

  cell_slots_.resize(nc);
  for (int c = 0; c < nc; ++c)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        cell_slots_[c][3 * a + b] = slot_of(cell_nodes_[c][a], cell_nodes_[c][b]);

  // block-sparse pattern of the even matrix
  col_base_.resize(nv);
  col_nnz_.resize(nv);
  std::ptrdiff_t total = 0;
  for (int j = 0; j < nv; ++j) {
    col_base_[j] = total;
    col_nnz_[j] = static_cast<int>(adj_[j].size()) * ne;
    total += static_cast<std::ptrdiff_t>(col_nnz_[j]) * ne;
  }

  pattern_.resize(nv * ne, nv * ne);
  Eigen::VectorXi per_col(nv * ne);
  for (int j = 0; j < nv; ++j)
    for (int k = 0; k < ne; ++k) per_col[j * ne + k] = col_nnz_[j];
  pattern_.reserve(per_col);
  for (int j = 0; j < nv; ++j)
    for (int k = 0; k < ne; ++k)
      for (int i : adj_[j])
        for (int kp = 0; kp < ne; ++kp)
          pattern_.insert(i * ne + kp, j * ne + k) = 0.0;
  pattern_.makeCompressed();

  // sanity of the value layout this class assumes
  for (int j = 0; j < nv; ++j)
    for (int k = 0; k < ne; ++k)
      if (pattern_.outerIndexPtr()[j * ne + k] !=
          col_base_[j] + static_cast<std::ptrdiff_t>(k) * col_nnz_[j])
        throw std::logic_error("StepContext: unexpected sparse layout");

  if (include_boundary_) {
    std::vector<Eigen::MatrixXd> acc(nslots);
    for (int t = 0; t < kNormalCount; ++t) {
      const auto mb = assemble_boundary_mass(mesh, static_cast<NormalTag>(t));
      for (int col = 0; col < mb.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator it(mb, col); it; ++it) {
          const int s = slot_of(static_cast<int>(it.row()), col);
          if (acc[s].size() == 0) acc[s] = Eigen::MatrixXd::Zero(ne, ne);
          acc[s] += it.value() * ops.boundary_weight[t];
        }
    }
    for (int s = 0; s < nslots; ++s)
      if (acc[s].size() != 0) boundary_blocks_.emplace_back(s, std::move(acc[s]));
  }

  mass1_ = assemble_weighted_p1_mass(mesh, Eigen::VectorXd::Ones(nc));
}

StepSystem::StepSystem(std::shared_ptr<const StepContext> context,
                       const DiscreteCoefficients& coeffs, double delta_eps)
    : context_(std::move(context)), coeffs_(coeffs), delta_eps_(delta_eps) {
  if (delta_eps_ <= 0.0)
    throw std::invalid_argument("StepSystem: delta_eps must be positive");
  if (coeffs.stopping.size() != context_->mesh().triangle_count())
    throw std::invalid_argument("StepSystem: coefficient size mismatch");
  assemble(coeffs);
}

void StepSystem::assemble(const DiscreteCoefficients& coeffs) {
  const StepContext& ctx = *context_;
  const int nc = ctx.mesh().triangle_count();
  const int ne = ctx.basis().even_count();
  const int no = ctx.basis().odd_count();
  const int nslots = ctx.slot_count();

  // weighted P1 mass entries per slot
  Eigen::VectorXd mS = Eigen::VectorXd::Zero(nslots);
  Eigen::VectorXd mT = Eigen::VectorXd::Zero(nslots);
  std::array<Eigen::VectorXd, 3> mG;
  for (auto& v : mG) v = Eigen::VectorXd::Zero(nslots);
  for (int c = 0; c < nc; ++c) {
    const double area = ctx.mesh().area(c);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const double elem = (a == b ? area / 6.0 : area / 12.0);
        const int s = ctx.cell_slots_[c][3 * a + b];
        mS[s] += coeffs.stopping[c] * elem;
        mT[s] += coeffs.transport[c] * elem;
        for (int i = 0; i < 3; ++i) mG[i][s] += coeffs.magnetic[i][c] * elem;
      }
  }

  even_ = ctx.pattern_;
  double* vals = even_.valuePtr();
  const auto& lb_even = ctx.ops().lb_even;
  Eigen::MatrixXd block(ne, ne);
  for (int s = 0; s < nslots; ++s) {
    block.setZero();
    block.diagonal().array() += mS[s] / delta_eps_;
    block.diagonal() += mT[s] * lb_even;
    for (int i = 0; i < 3; ++i)
      if (mG[i][s] != 0.0) block += mG[i][s] * ctx.ops().lorentz_even[i];
    const int j = ctx.slot_col_[s];
    const int pos = ctx.slot_pos_[s];
    for (int k = 0; k < ne; ++k) {
      double* dst = vals + ctx.col_base_[j] +
                    static_cast<std::ptrdiff_t>(k) * ctx.col_nnz_[j] +
                    static_cast<std::ptrdiff_t>(pos) * ne;
      for (int kp = 0; kp < ne; ++kp) dst[kp] = block(kp, k);
    }
  }
  for (const auto& [s, bblock] : ctx.boundary_blocks_) {
    const int j = ctx.slot_col_[s];
    const int pos = ctx.slot_pos_[s];
    for (int k = 0; k < ne; ++k) {
      double* dst = vals + ctx.col_base_[j] +
                    static_cast<std::ptrdiff_t>(k) * ctx.col_nnz_[j] +
                    static_cast<std::ptrdiff_t>(pos) * ne;
      for (int kp = 0; kp < ne; ++kp) dst[kp] += bblock(kp, k);
    }
  }

  // cell-local odd blocks
  const auto& lb_odd = ctx.ops().lb_odd;
  odd_blocks_.resize(nc);
  odd_lu_.clear();
  odd_lu_.reserve(nc);
  for (int c = 0; c < nc; ++c) {
    const double area = ctx.mesh().area(c);
    Eigen::MatrixXd& o = odd_blocks_[c];
    o = Eigen::MatrixXd::Zero(no, no);
    o.diagonal().array() += coeffs.stopping[c] / delta_eps_;
    o.diagonal() += coeffs.transport[c] * lb_odd;
    for (int i = 0; i < 3; ++i)
      if (coeffs.magnetic[i][c] != 0.0)
        o += coeffs.magnetic[i][c] * ctx.ops().lorentz_odd[i];
    o *= area;
    odd_lu_.emplace_back(o);
  }

  schur_ready_ = false;
  schur_lu_.reset();
  mono_lu_.reset();
}

Eigen::MatrixXd StepSystem::coupling_block(int cell, int local) const {
  const StepContext& ctx = *context_;
  return ctx.cx_[cell][local] * ctx.ops().streaming[0] +
         ctx.cy_[cell][local] * ctx.ops().streaming[1];
}

PhaseSpaceField StepSystem::apply(const PhaseSpaceField& u) const {
  const StepContext& ctx = *context_;
  const int nc = ctx.mesh().triangle_count();
  const int ne = ctx.basis().even_count();

  PhaseSpaceField v = PhaseSpaceField::zero(ctx.mesh(), ctx.basis());
  v.even_flat() = even_ * u.even_flat();
  for (int c = 0; c < nc; ++c) {
    Eigen::VectorXd odd_row = odd_blocks_[c] * u.odd.row(c).transpose();
    for (int a = 0; a < 3; ++a) {
      const Eigen::MatrixXd b = coupling_block(c, a);
      const int node = ctx.cell_nodes_[c][a];
      odd_row += b * u.even.row(node).transpose();
      v.even.row(node) -= (b.transpose() * u.odd.row(c).transpose()).transpose();
    }
    v.odd.row(c) += odd_row.transpose();
  }
  return v;
}

double StepSystem::quadratic_form(const PhaseSpaceField& u) const {
  const PhaseSpaceField mu = apply(u);
  return u.even_flat().dot(mu.even_flat()) + u.odd_flat().dot(mu.odd_flat());
}

Eigen::MatrixXd StepSystem::dense_matrix() const {
  const StepContext& ctx = *context_;
  const int ned = ctx.even_dofs();
  const int nod = ctx.odd_dofs();
  if (ned + nod > 5000)
    throw std::invalid_argument("dense_matrix: instance too large");
  const int nc = ctx.mesh().triangle_count();
  const int ne = ctx.basis().even_count();
  const int no = ctx.basis().odd_count();

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(ned + nod, ned + nod);
  m.topLeftCorner(ned, ned) = Eigen::MatrixXd(even_);
  for (int c = 0; c < nc; ++c) {
    m.block(ned + c * no, ned + c * no, no, no) = odd_blocks_[c];
    for (int a = 0; a < 3; ++a) {
      const Eigen::MatrixXd b = coupling_block(c, a);
      const int node = ctx.cell_nodes_[c][a];
      m.block(ned + c * no, node * ne, no, ne) += b;
      m.block(node * ne, ned + c * no, ne, no) -= b.transpose();
    }
  }
  return m;
}

void StepSystem::ensure_schur() const {
  if (schur_ready_) return;
  const StepContext& ctx = *context_;
  const int nc = ctx.mesh().triangle_count();
  const int ne = ctx.basis().even_count();

  schur_ = even_;
  double* vals = schur_.valuePtr();
  for (int c = 0; c < nc; ++c) {
    std::array<Eigen::MatrixXd, 3> b, p;
    for (int a = 0; a < 3; ++a) {
      b[a] = coupling_block(c, a);
      p[a] = odd_lu_[c].solve(b[a]);
    }
    for (int a = 0; a < 3; ++a)
      for (int bb = 0; bb < 3; ++bb) {
        const Eigen::MatrixXd add = b[a].transpose() * p[bb];
        const int s = ctx.cell_slots_[c][3 * a + bb];
        const int j = ctx.slot_col_[s];
        const int pos = ctx.slot_pos_[s];
        for (int k = 0; k < ne; ++k) {
          double* dst = vals + ctx.col_base_[j] +
                        static_cast<std::ptrdiff_t>(k) * ctx.col_nnz_[j] +
                        static_cast<std::ptrdiff_t>(pos) * ne;
          for (int kp = 0; kp < ne; ++kp) dst[kp] += add(kp, k);
        }
      }
  }
  schur_ready_ = true;
}

Eigen::VectorXd StepSystem::schur_rhs(const PhaseSpaceField& rhs) const {
  const StepContext& ctx = *context_;
  const int nc = ctx.mesh().triangle_count();
  Eigen::VectorXd out = rhs.even_flat();
  const int ne = ctx.basis().even_count();
  for (int c = 0; c < nc; ++c) {
    const Eigen::VectorXd y = odd_lu_[c].solve(rhs.odd.row(c).transpose());
    for (int a = 0; a < 3; ++a)
      out.segment(ctx.cell_nodes_[c][a] * ne, ne) +=
          coupling_block(c, a).transpose() * y;
  }
  return out;
}

void StepSystem::reconstruct_odd(const PhaseSpaceField& rhs,
                                 PhaseSpaceField& u) const {
  const StepContext& ctx = *context_;
  const int nc = ctx.mesh().triangle_count();
  for (int c = 0; c < nc; ++c) {
    Eigen::VectorXd r = rhs.odd.row(c).transpose();
    for (int a = 0; a < 3; ++a)
      r -= coupling_block(c, a) * u.even.row(ctx.cell_nodes_[c][a]).transpose();
    u.odd.row(c) = odd_lu_[c].solve(r).transpose();
  }
}

double StepSystem::relative_residual(const PhaseSpaceField& u,
                                     const PhaseSpaceField& rhs) const {
  const PhaseSpaceField mu = apply(u);
  const double num = std::sqrt((mu.even - rhs.even).squaredNorm() +
                               (mu.odd - rhs.odd).squaredNorm());
  const double den =
      std::sqrt(rhs.even.squaredNorm() + rhs.odd.squaredNorm());
  if (den == 0.0) return num == 0.0 ? 0.0 : num;
  return num / den;
}

void StepSystem::ensure_monolithic() const {
  if (mono_lu_) return;
  const StepContext& ctx = *context_;
  const int ned = ctx.even_dofs();
  const int nod = ctx.odd_dofs();
  const int nc = ctx.mesh().triangle_count();
  const int ne = ctx.basis().even_count();
  const int no = ctx.basis().odd_count();

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(even_.nonZeros() + nc * (no * no + 6 * no * ne));
  for (int col = 0; col < even_.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(even_, col); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), col, it.value());
  for (int c = 0; c < nc; ++c) {
    for (int o = 0; o < no; ++o)
      for (int o2 = 0; o2 < no; ++o2)
        trips.emplace_back(ned + c * no + o, ned + c * no + o2,
                           odd_blocks_[c](o, o2));
    for (int a = 0; a < 3; ++a) {
      const Eigen::MatrixXd b = coupling_block(c, a);
      const int node = ctx.cell_nodes_[c][a];
      for (int o = 0; o < no; ++o)
        for (int k = 0; k < ne; ++k) {
          trips.emplace_back(ned + c * no + o, node * ne + k, b(o, k));
          trips.emplace_back(node * ne + k, ned + c * no + o, -b(o, k));
        }
    }
  }
  mono_.resize(ned + nod, ned + nod);
  mono_.setFromTriplets(trips.begin(), trips.end());
  mono_lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
  mono_lu_->compute(mono_);
  if (mono_lu_->info() != Eigen::Success)
    throw SolverError("monolithic sparse LU factorization failed", -1.0);
}

PhaseSpaceField StepSystem::solve(const PhaseSpaceField& rhs,
                                  const SolverOptions& options,
                                  SolveStats* stats) const {
  const StepContext& ctx = *context_;
  if (!rhs.conforms(ctx.mesh(), ctx.basis()))
    throw std::invalid_argument("solve: rhs layout mismatch");
  PhaseSpaceField u = PhaseSpaceField::zero(ctx.mesh(), ctx.basis());
  SolveStats local;

  auto monolithic = [&]() {
    ensure_monolithic();
    Eigen::VectorXd full(ctx.even_dofs() + ctx.odd_dofs());
    full.head(ctx.even_dofs()) = rhs.even_flat();
    full.tail(ctx.odd_dofs()) = rhs.odd_flat();
    const Eigen::VectorXd x = mono_lu_->solve(full);
    u.even_flat() = x.head(ctx.even_dofs());
    u.odd_flat() = x.tail(ctx.odd_dofs());
  };

  switch (options.strategy) {
    case SolveStrategy::MonolithicDirect:
      monolithic();
      break;
    case SolveStrategy::SchurDirect: {
      ensure_schur();
      if (!schur_lu_) {
        schur_lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
        schur_lu_->compute(schur_);
        if (schur_lu_->info() != Eigen::Success)
          throw SolverError("Schur sparse LU factorization failed", -1.0);
      }
      u.even_flat() = schur_lu_->solve(schur_rhs(rhs));
      reconstruct_odd(rhs, u);
      break;
    }
    case SolveStrategy::SchurIterative: {
      ensure_schur();
      Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, BlockJacobi> solver;
      solver.preconditioner().set_block_size(ctx.basis().even_count());
      solver.setTolerance(std::max(options.rtol * 0.05, 1e-15));
      solver.setMaxIterations(options.max_iterations);
      solver.compute(schur_);
      const Eigen::VectorXd b = schur_rhs(rhs);
      Eigen::VectorXd x = solver.solve(b);
      local.iterations = static_cast<int>(solver.iterations());
      u.even_flat() = x;
      reconstruct_odd(rhs, u);
      const double resid = relative_residual(u, rhs);
      if (resid > options.rtol || !std::isfinite(resid)) {
        if (!options.allow_fallback) {
          std::ostringstream msg;
          msg << "iterative solve stopped after " << solver.iterations()
              << " iterations with relative residual " << resid
              << " above tolerance " << options.rtol;
          throw SolverError(msg.str(), resid);
        }
        monolithic();
        local.used_fallback = true;
      }
      break;
    }
  }

  local.residual = relative_residual(u, rhs);
  if (local.residual > options.rtol && options.strategy != SolveStrategy::SchurIterative) {
    // direct paths are expected to land far below the tolerance
    if (local.residual > std::sqrt(options.rtol)) {
      std::ostringstream msg;
      msg << "direct solve residual " << local.residual << " above tolerance";
      throw SolverError(msg.str(), local.residual);
    }
  }
  if (stats) {
    stats->iterations = local.iterations;
    stats->residual = local.residual;
    stats->used_fallback = local.used_fallback;
  }
  return u;
}

PhaseSpaceField assemble_rhs(
    const StepSystem& system,
    const std::function<void(double, double, Eigen::VectorXd&)>& source_moments_at,
    const PhaseSpaceField* carry_field, const Eigen::VectorXd* carry_stopping,
    RhsProjection projection) {
  const StepContext& ctx = system.context();
  const Mesh2D& mesh = ctx.mesh();
  const SphericalBasis& basis = ctx.basis();
  const int nv = mesh.vertex_count();
  const int nc = mesh.triangle_count();
  const int ne = basis.even_count();
  const int no = basis.odd_count();

  PhaseSpaceField rhs = PhaseSpaceField::zero(mesh, basis);
  Eigen::VectorXd all(basis.total_count());

  if (projection == RhsProjection::Quadrature) {
    const TriangleRule& rule = triangle_rule_degree6();
    for (int c = 0; c < nc; ++c) {
      const auto& tri = mesh.triangle(c);
      const Eigen::Vector2d p0 = mesh.vertex(tri[0]);
      const Eigen::Vector2d p1 = mesh.vertex(tri[1]);
      const Eigen::Vector2d p2 = mesh.vertex(tri[2]);
      for (size_t q = 0; q < rule.w.size(); ++q) {
        const double xi = rule.x[q], eta = rule.y[q];
        const double w = rule.w[q] * 2.0 * mesh.area(c);
        const Eigen::Vector2d p = p0 + xi * (p1 - p0) + eta * (p2 - p0);
        source_moments_at(p.x(), p.y(), all);
        const double phi[3] = {1.0 - xi - eta, xi, eta};
        for (int k = 0; k < ne; ++k) {
          const double v = w * all[basis.even_positions()[k]];
          rhs.even(tri[0], k) += v * phi[0];
          rhs.even(tri[1], k) += v * phi[1];
          rhs.even(tri[2], k) += v * phi[2];
        }
        for (int k = 0; k < no; ++k)
          rhs.odd(c, k) += w * all[basis.odd_positions()[k]];
      }
    }
  } else {
    // vertex samples feed the even block, centroid samples the odd block
    PhaseSpaceField::Block vertex_moments(nv, ne);
    for (int v = 0; v < nv; ++v) {
      source_moments_at(mesh.vertex(v).x(), mesh.vertex(v).y(), all);
      for (int k = 0; k < ne; ++k)
        vertex_moments(v, k) = all[basis.even_positions()[k]];
    }
    rhs.even = ctx.unweighted_p1_mass() * vertex_moments;
    for (int c = 0; c < nc; ++c) {
      const Eigen::Vector2d cen = mesh.centroid(c);
      source_moments_at(cen.x(), cen.y(), all);
      for (int k = 0; k < no; ++k)
        rhs.odd(c, k) = mesh.area(c) * all[basis.odd_positions()[k]];
    }
  }

  if (carry_field) {
    if (!carry_stopping || carry_stopping->size() != nc)
      throw std::invalid_argument("assemble_rhs: carry stopping coefficient missing");
    if (!carry_field->conforms(mesh, basis))
      throw std::invalid_argument("assemble_rhs: carry field layout mismatch");
    const double inv_deps = 1.0 / system.delta_eps();
    const auto mass_next = assemble_weighted_p1_mass(mesh, *carry_stopping);
    rhs.even += inv_deps * (mass_next * carry_field->even);
    for (int c = 0; c < nc; ++c)
      rhs.odd.row(c) += inv_deps * (*carry_stopping)[c] * mesh.area(c) *
                        carry_field->odd.row(c);
  }
  return rhs;
}

void run_transport(const TransportProblem& problem, const StepVisitor& visit) {
  if (!problem.mesh || !problem.basis || !problem.ops)
    throw std::invalid_argument("run_transport: incomplete problem");
  const Mesh2D& mesh = *problem.mesh;
  const SphericalBasis& basis = *problem.basis;
  const EnergyGrid& grid = problem.grid;

  validate_coefficients(problem.coeffs, mesh, grid);

  auto context = std::make_shared<const StepContext>(mesh, basis, *problem.ops,
                                                     problem.include_boundary);

  PhaseSpaceField psi = PhaseSpaceField::zero(mesh, basis);
  visit(grid.steps, grid.node(grid.steps), psi, nullptr);

  DiscreteCoefficients next =
      discretize_coefficients(problem.coeffs, mesh, grid.node(grid.steps));
  std::unique_ptr<StepSystem> system;
  DiscreteCoefficients current;

  for (int m = grid.steps - 1; m >= 0; --m) {
    try {
      DiscreteCoefficients at_m =
          discretize_coefficients(problem.coeffs, mesh, grid.node(m));
      SolveStats stats;
      if (!system || !at_m.same_values(current)) {
        system = std::make_unique<StepSystem>(context, at_m, grid.delta());
        current = at_m;
      } else {
        stats.reused_operator = true;
      }
      const AveragedSourceMoments averaged(problem.source, m, grid, basis);
      const PhaseSpaceField rhs = assemble_rhs(
          *system,
          [&](double x, double y, Eigen::VectorXd& out) {
            averaged.moments_at(x, y, out);
          },
          &psi, &next.stopping, problem.rhs_projection);
      psi = system->solve(rhs, problem.solver, &stats);
      next = at_m;
      visit(m, grid.node(m), psi, &stats);
    } catch (const SolverError& err) {
      throw SolverError("energy step m=" + std::to_string(m) + ": " + err.what(),
                        err.achieved_residual);
    } catch (const std::exception& err) {
      throw std::runtime_error("energy step m=" + std::to_string(m) + ": " +
                               err.what());
    }
  }
}

std::vector<PhaseSpaceField> run_transport_collect(const TransportProblem& problem) {
  std::vector<PhaseSpaceField> fields(problem.grid.steps + 1);
  run_transport(problem,
                [&](int m, double, const PhaseSpaceField& f, const SolveStats*) {
                  fields[m] = f;
                });
  return fields;
}

StabilityReport stability_diagnostic(const std::vector<PhaseSpaceField>& trajectory,
                                     const TransportProblem& problem) {
  const Mesh2D& mesh = *problem.mesh;
  const SphericalBasis& basis = *problem.basis;
  const EnergyGrid& grid = problem.grid;
  if (static_cast<int>(trajectory.size()) != grid.steps + 1)
    throw std::invalid_argument("stability_diagnostic: trajectory incomplete");

  const auto lb_even = laplace_beltrami_diagonal(basis.even_indices());
  const auto lb_odd = laplace_beltrami_diagonal(basis.odd_indices());
  const double deps = grid.delta();

  std::vector<double> energy(grid.steps + 1), dissip(grid.steps + 1, 0.0),
      source(grid.steps + 1, 0.0);

  for (int m = 0; m <= grid.steps; ++m) {
    const auto coeffs = discretize_coefficients(problem.coeffs, mesh, grid.node(m));
    const auto mass_s = assemble_weighted_p1_mass(mesh, coeffs.stopping);
    const auto mass_t = assemble_weighted_p1_mass(mesh, coeffs.transport);
    const PhaseSpaceField& f = trajectory[m];

    double e = (f.even.transpose() * (mass_s * f.even)).trace();
    double d = 0.0;
    for (int k = 0; k < basis.even_count(); ++k)
      d += lb_even[k] * f.even.col(k).dot(mass_t * f.even.col(k));
    for (int c = 0; c < mesh.triangle_count(); ++c) {
      const double a = mesh.area(c);
      e += coeffs.stopping[c] * a * f.odd.row(c).squaredNorm();
      for (int k = 0; k < basis.odd_count(); ++k)
        d += coeffs.transport[c] * a * lb_odd[k] * f.odd(c, k) * f.odd(c, k);
    }
    energy[m] = e;
    dissip[m] = d;
  }

  const auto mass1 = assemble_weighted_p1_mass(
      mesh, Eigen::VectorXd::Ones(mesh.triangle_count()));
  for (int m = 0; m < grid.steps; ++m) {
    const AveragedSourceMoments averaged(problem.source, m, grid, basis);
    Eigen::VectorXd all(basis.total_count());
    PhaseSpaceField::Block vertex(mesh.vertex_count(), basis.even_count());
    for (int v = 0; v < mesh.vertex_count(); ++v) {
      averaged.moments_at(mesh.vertex(v).x(), mesh.vertex(v).y(), all);
      for (int k = 0; k < basis.even_count(); ++k)
        vertex(v, k) = all[basis.even_positions()[k]];
    }
    double q2 = (vertex.transpose() * (mass1 * vertex)).trace();
    for (int c = 0; c < mesh.triangle_count(); ++c) {
      const Eigen::Vector2d cen = mesh.centroid(c);
      averaged.moments_at(cen.x(), cen.y(), all);
      for (int k = 0; k < basis.odd_count(); ++k) {
        const double v = all[basis.odd_positions()[k]];
        q2 += mesh.area(c) * v * v;
      }
    }
    source[m] = deps * q2;
  }

  StabilityReport report;
  report.rows.resize(grid.steps + 1);
  double dtail = 0.0, qtail = 0.0;
  for (int m = grid.steps; m >= 0; --m) {
    if (m < grid.steps) {
      dtail += deps * dissip[m];
      qtail += source[m];
    }
    auto& row = report.rows[m];
    row.m = m;
    row.eps = grid.node(m);
    row.stopping_energy = energy[m];
    row.dissipation_tail = dtail;
    row.source_tail = qtail;
    row.ratio = qtail > 0.0 ? (energy[m] + dtail) / qtail : 0.0;
  }
  return report;
}

struct TrajectoryWriter::Impl {
  std::ofstream out;
  CheckpointFormat format;
};

TrajectoryWriter::TrajectoryWriter(const std::string& path, CheckpointFormat format)
    : impl_(std::make_unique<Impl>()) {
  impl_->format = format;
  impl_->out.open(path, format == CheckpointFormat::Binary
                            ? std::ios::binary | std::ios::trunc
                            : std::ios::trunc);
  if (!impl_->out)
    throw std::runtime_error("TrajectoryWriter: cannot open " + path);
  if (format == CheckpointFormat::Binary) impl_->out.write("FPLOTRJ1", 8);
}

TrajectoryWriter::~TrajectoryWriter() = default;

void TrajectoryWriter::write(int m, double eps, const PhaseSpaceField& field) {
  auto& out = impl_->out;
  const std::int32_t dims[4] = {
      static_cast<std::int32_t>(field.even.rows()),
      static_cast<std::int32_t>(field.even.cols()),
      static_cast<std::int32_t>(field.odd.rows()),
      static_cast<std::int32_t>(field.odd.cols())};
  if (impl_->format == CheckpointFormat::Binary) {
    const std::int32_t mi = m;
    out.write(reinterpret_cast<const char*>(&mi), sizeof(mi));
    out.write(reinterpret_cast<const char*>(&eps), sizeof(eps));
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    out.write(reinterpret_cast<const char*>(field.even.data()),
              sizeof(double) * field.even.size());
    out.write(reinterpret_cast<const char*>(field.odd.data()),
              sizeof(double) * field.odd.size());
  } else {
    char head[160];
    std::snprintf(head, sizeof(head), "step,%d,%.17g,%d,%d,%d,%d\n", m, eps,
                  dims[0], dims[1], dims[2], dims[3]);
    out << head;
    auto write_block = [&out](const PhaseSpaceField::Block& b) {
      for (Eigen::Index r = 0; r < b.rows(); ++r) {
        for (Eigen::Index c = 0; c < b.cols(); ++c) {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%.17g", b(r, c));
          out << buf << (c + 1 < b.cols() ? "," : "");
        }
        out << "\n";
      }
    };
    write_block(field.even);
    write_block(field.odd);
  }
  if (!out) throw std::runtime_error("TrajectoryWriter: write failed");
}

std::vector<CheckpointRecord> read_checkpoints(const std::string& path,
                                               CheckpointFormat format) {
  std::ifstream in(path, format == CheckpointFormat::Binary
                             ? std::ios::binary
                             : std::ios::in);
  if (!in) throw std::runtime_error("read_checkpoints: cannot open " + path);
  std::vector<CheckpointRecord> records;

  if (format == CheckpointFormat::Binary) {
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "FPLOTRJ1", 8) != 0)
      throw std::runtime_error("read_checkpoints: bad magic");
    while (true) {
      std::int32_t m;
      if (!in.read(reinterpret_cast<char*>(&m), sizeof(m))) break;
      CheckpointRecord rec;
      rec.m = m;
      std::int32_t dims[4];
      in.read(reinterpret_cast<char*>(&rec.eps), sizeof(double));
      in.read(reinterpret_cast<char*>(dims), sizeof(dims));
      rec.field.even.resize(dims[0], dims[1]);
      rec.field.odd.resize(dims[2], dims[3]);
      in.read(reinterpret_cast<char*>(rec.field.even.data()),
              sizeof(double) * rec.field.even.size());
      in.read(reinterpret_cast<char*>(rec.field.odd.data()),
              sizeof(double) * rec.field.odd.size());
      if (!in) throw std::runtime_error("read_checkpoints: truncated record");
      records.push_back(std::move(rec));
    }
    return records;
  }

  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("step,", 0) != 0)
      throw std::runtime_error("read_checkpoints: malformed header line");
    CheckpointRecord rec;
    int dims[4];
    if (std::sscanf(line.c_str(), "step,%d,%lg,%d,%d,%d,%d", &rec.m, &rec.eps,
                    &dims[0], &dims[1], &dims[2], &dims[3]) != 6)
      throw std::runtime_error("read_checkpoints: malformed header line");
    rec.field.even.resize(dims[0], dims[1]);
    rec.field.odd.resize(dims[2], dims[3]);
    auto read_block = [&in](PhaseSpaceField::Block& b) {
      std::string row;
      for (Eigen::Index r = 0; r < b.rows(); ++r) {
        if (!std::getline(in, row))
          throw std::runtime_error("read_checkpoints: truncated block");
        std::istringstream ss(row);
        std::string tok;
        for (Eigen::Index c = 0; c < b.cols(); ++c) {
          if (!std::getline(ss, tok, ','))
            throw std::runtime_error("read_checkpoints: short row");
          b(r, c) = std::stod(tok);
        }
      }
    };
    read_block(rec.field.even);
    read_block(rec.field.odd);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace fplo
