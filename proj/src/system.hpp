#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "field.hpp"
#include "model.hpp"

namespace fplo {

enum class SolveStrategy { SchurIterative, SchurDirect, MonolithicDirect };

struct SolverOptions {
  SolveStrategy strategy = SolveStrategy::SchurIterative;
  double rtol = 1e-10;
  int max_iterations = 2000;
  bool allow_fallback = true;  // monolithic direct retry on iteration failure
};

struct SolveStats {
  int iterations = 0;
  double residual = 0.0;  // relative residual of the full mixed system
  bool used_fallback = false;
  bool reused_operator = false;
};

/// Thrown when the linear solver cannot reach the requested tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double achieved_residual)
      : std::runtime_error(what), achieved_residual(achieved_residual) {}
  double achieved_residual = 0.0;
};

/// Spatial and angular structure shared by every energy step: sparsity of
/// the even block, per-cell geometry, derivative couplings, boundary masses.
class StepContext {
 public:
  StepContext(const Mesh2D& mesh, const SphericalBasis& basis,
              const AngularOperators& ops, bool include_boundary = true);

  const Mesh2D& mesh() const { return *mesh_; }
  const SphericalBasis& basis() const { return *basis_; }
  const AngularOperators& ops() const { return *ops_; }
  bool include_boundary() const { return include_boundary_; }

  int even_dofs() const { return mesh_->vertex_count() * basis_->even_count(); }
  int odd_dofs() const { return mesh_->triangle_count() * basis_->odd_count(); }

  const Eigen::SparseMatrix<double>& unweighted_p1_mass() const { return mass1_; }

 private:
  friend class StepSystem;

  const Mesh2D* mesh_;
  const SphericalBasis* basis_;
  const AngularOperators* ops_;
  bool include_boundary_;

  // per-cell data: vertex ids, derivative couplings d_i(phi_a) * area
  std::vector<std::array<int, 3>> cell_nodes_;
  std::vector<std::array<double, 3>> cx_, cy_;

  // node adjacency in column-major order and the slot table
  std::vector<std::vector<int>> adj_;        // per column node: sorted row nodes
  std::vector<std::ptrdiff_t> slot_base_;    // prefix sums of adj sizes
  std::vector<std::array<int, 9>> cell_slots_;  // slot of (row a, col b): 3*a+b

  // value layout of the block-sparse even matrix
  std::vector<std::ptrdiff_t> col_base_;   // per node: first value index
  std::vector<int> col_nnz_;               // per node: nonzeros per scalar column
  std::vector<int> slot_pos_;              // per slot: position of row node in adj
  std::vector<int> slot_col_;              // per slot: column node
  Eigen::SparseMatrix<double> pattern_;    // even block pattern (values zeroed)

  // step-independent boundary contribution per slot: sum_n w_n(slot) W_n
  std::vector<std::pair<int, Eigen::MatrixXd>> boundary_blocks_;

  Eigen::SparseMatrix<double> mass1_;  // unweighted P1 mass

  int slot_count() const { return static_cast<int>(slot_pos_.size()); }
  int slot_of(int row_node, int col_node) const;
};

/// One implicit energy step: even block, cell-local odd blocks, couplings,
/// and the factorizations needed to solve it.
class StepSystem {
 public:
  StepSystem(std::shared_ptr<const StepContext> context,
             const DiscreteCoefficients& coeffs, double delta_eps);

  const StepContext& context() const { return *context_; }
  double delta_eps() const { return delta_eps_; }
  const DiscreteCoefficients& coefficients() const { return coeffs_; }

  /// Even-even block of the bilinear form (no Schur contribution).
  const Eigen::SparseMatrix<double>& even_matrix() const { return even_; }
  /// Dense odd-odd block of one cell.
  const Eigen::MatrixXd& odd_block(int cell) const { return odd_blocks_[cell]; }
  /// Streaming coupling block of (cell, local vertex): odd x even.
  Eigen::MatrixXd coupling_block(int cell, int local) const;

  /// Matrix-vector product of the full mixed operator.
  PhaseSpaceField apply(const PhaseSpaceField& u) const;
  /// u^T M u; the skew parts cancel, leaving the collision and boundary norms.
  double quadratic_form(const PhaseSpaceField& u) const;

  /// Dense assembly of the full mixed matrix (verification/small cases).
  Eigen::MatrixXd dense_matrix() const;

  PhaseSpaceField solve(const PhaseSpaceField& rhs, const SolverOptions& options,
                        SolveStats* stats = nullptr) const;

 private:
  void assemble(const DiscreteCoefficients& coeffs);
  void ensure_schur() const;
  void ensure_monolithic() const;
  Eigen::VectorXd schur_rhs(const PhaseSpaceField& rhs) const;
  void reconstruct_odd(const PhaseSpaceField& rhs, PhaseSpaceField& u) const;
  double relative_residual(const PhaseSpaceField& u,
                           const PhaseSpaceField& rhs) const;

  std::shared_ptr<const StepContext> context_;
  DiscreteCoefficients coeffs_;
  double delta_eps_;

  Eigen::SparseMatrix<double> even_;
  std::vector<Eigen::MatrixXd> odd_blocks_;
  std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> odd_lu_;

  // lazily built solver states
  mutable Eigen::SparseMatrix<double> schur_;
  mutable bool schur_ready_ = false;
  mutable std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> schur_lu_;
  mutable std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> mono_lu_;
  mutable Eigen::SparseMatrix<double> mono_;
};

/// Spatial realization of the source moments in the RHS: cellwise quadrature
/// of the exact inner products, or the vertex/centroid interpolant. The
/// interpolant commits an O(h^2) consistency error of the same order as the
/// even-part solution error and roughly doubles it; quadrature is the
/// default.
enum class RhsProjection { Quadrature, Interpolation };

/// RHS of one step: projected source moments plus the mass-weighted
/// carry-over (1/deps) <S^{m+1} psi^{m+1}, v>.
PhaseSpaceField assemble_rhs(
    const StepSystem& system,
    const std::function<void(double, double, Eigen::VectorXd&)>& source_moments_at,
    const PhaseSpaceField* carry_field, const Eigen::VectorXd* carry_stopping,
    RhsProjection projection = RhsProjection::Quadrature);

/// Full backward sweep over the energy grid.
struct TransportProblem {
  const Mesh2D* mesh = nullptr;
  const SphericalBasis* basis = nullptr;
  const AngularOperators* ops = nullptr;
  ModelCoefficients coeffs;
  SourceTerm source;
  EnergyGrid grid;
  SolverOptions solver;
  RhsProjection rhs_projection = RhsProjection::Quadrature;
  bool include_boundary = true;
};

/// Visitor receives every field from m = M (zero start value) down to 0.
/// stats is null for the starting value.
using StepVisitor =
    std::function<void(int m, double eps, const PhaseSpaceField&, const SolveStats*)>;

void run_transport(const TransportProblem& problem, const StepVisitor& visit);

/// Convenience variant returning the fields indexed by m = 0..M.
std::vector<PhaseSpaceField> run_transport_collect(const TransportProblem& problem);

/// Discrete stability functional: per energy node, the stopping-weighted
/// field energy, the accumulated angular dissipation, the accumulated
/// source norm and their ratio.
struct StabilityReport {
  struct Row {
    int m;
    double eps;
    double stopping_energy;    // <S^m psi^m, psi^m>
    double dissipation_tail;   // sum_{k>=m} deps <T^k grad_s psi^k, grad_s psi^k>
    double source_tail;        // sum_{k>=m} deps |qbar^k|^2
    double ratio;              // (energy + dissipation) / source, 0 if source 0
  };
  std::vector<Row> rows;  // ordered m = 0..M
};

StabilityReport stability_diagnostic(const std::vector<PhaseSpaceField>& trajectory,
                                     const TransportProblem& problem);

/// Trajectory checkpoints: per step a header (m, eps, block dims) and the
/// row-major even and odd blocks, as CSV or flat binary.
enum class CheckpointFormat { Csv, Binary };

class TrajectoryWriter {
 public:
  TrajectoryWriter(const std::string& path, CheckpointFormat format);
  ~TrajectoryWriter();
  void write(int m, double eps, const PhaseSpaceField& field);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct CheckpointRecord {
  int m;
  double eps;
  PhaseSpaceField field;
};

std::vector<CheckpointRecord> read_checkpoints(const std::string& path,
                                               CheckpointFormat format);

}  // namespace fplo
