#pragma once

// Conforming multilinear (Q1) discretization of u -> \int grad u . a grad u
// on a CellTensorGrid, and the preconditioned conjugate-gradient solves built
// on it. Nodal values are ordered with axis 0 fastest. Integrals are exact:
// the integrand is polynomial on each cell and a is constant there.

#include "homlab/fields.hpp"
#include "homlab/types.hpp"

#include <Eigen/Sparse>

#include <optional>
#include <vector>

namespace homlab {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct GridGeometry {
  int d = 0;
  int cells_per_axis = 0;
  double h = 0;
  VectorXd origin;  ///< position of node 0 (the cube corner)

  static GridGeometry of(const CellTensorGrid& grid);

  int nodes_per_axis() const noexcept { return cells_per_axis + 1; }
  Index node_count() const noexcept;
  Index cell_count() const noexcept;
  double volume() const noexcept;
  double side_length() const noexcept { return cells_per_axis * h; }

  std::vector<int> node_coords(Index node) const;
  VectorXd node_position(Index node) const;
  bool is_boundary_node(Index node) const;
  Index cell_base_node(Index cell) const;  ///< lowest-corner node of a cell
  /// Node of the local corner `local` (bit i set = +1 along axis i) of `cell`.
  Index cell_node(Index cell, int local) const;
  /// Integral of each nodal basis function (lumped mass).
  VectorXd node_weights() const;

  bool operator==(const GridGeometry& o) const {
    return d == o.d && cells_per_axis == o.cells_per_axis && h == o.h && origin == o.origin;
  }
};

enum class BoundaryTag { none, dirichlet, dirichlet_affine, neumann_mean_zero };

struct SolverStats {
  int iterations = 0;
  double residual = 0;  ///< final relative residual
};

struct SolverOptions {
  double tolerance = 1e-10;
  int max_iterations = 0;  ///< 0: 20 * nodes_per_axis * sqrt(Lambda)
};

/// Nodal values of a discrete solution plus where it came from.
struct ScalarField {
  GridGeometry geometry;
  VectorXd values;
  BoundaryTag tag = BoundaryTag::none;
  VectorXd slope;  ///< p for dirichlet_affine, q for neumann_mean_zero
  SolverStats stats;
};

/// Nodal interpolant of x -> p.x on the grid.
ScalarField affine_field(const GridGeometry& geometry, const VectorXd& p);

/// The assembled stiffness operator K with u^T K u = \int grad u . a grad u.
class EnergyOperator {
 public:
  explicit EnergyOperator(const CellTensorGrid& grid);

  const SparseMatrix& matrix() const noexcept { return k_; }
  const VectorXd& diagonal() const noexcept { return diag_; }
  const GridGeometry& geometry() const noexcept { return geometry_; }
  double ellipticity() const noexcept { return lambda_; }

  /// Volume-normalized energy (1/|U|) * 1/2 u^T K u.
  double energy(const VectorXd& u) const;

 private:
  GridGeometry geometry_;
  SparseMatrix k_;
  VectorXd diag_;
  double lambda_;
};

EnergyOperator assemble_energy(const CellTensorGrid& grid);

enum class Constraint { pinned_boundary, mean_zero };

/// K u = rhs on the free nodes. For pinned_boundary the boundary entries of
/// `boundary_values` are imposed; for mean_zero the solution is normalized to
/// zero volume-weighted mean.
struct LinearSystem {
  const EnergyOperator& op;
  VectorXd rhs;
  Constraint constraint = Constraint::pinned_boundary;
  VectorXd boundary_values;
};

/// Throws SolverFailure if the tolerance is not met.
ScalarField solve(const LinearSystem& system, const SolverOptions& options = {});

ScalarField solve_dirichlet_affine(const EnergyOperator& op, const VectorXd& p,
                                   const SolverOptions& options = {});
ScalarField solve_dirichlet_affine(const CellTensorGrid& grid, const VectorXd& p,
                                   const SolverOptions& options = {});

/// Mean-zero maximizer of (1/|U|) \int (-1/2 grad u.a grad u + q.grad u).
ScalarField solve_neumann_dual(const EnergyOperator& op, const VectorXd& q,
                               const SolverOptions& options = {});
ScalarField solve_neumann_dual(const CellTensorGrid& grid, const VectorXd& q,
                               const SolverOptions& options = {});

/// Dirichlet problem with arbitrary boundary values and an optional load.
ScalarField solve_dirichlet(const EnergyOperator& op, const VectorXd& boundary_values,
                            const std::optional<VectorXd>& load = std::nullopt,
                            const SolverOptions& options = {});

/// d x cells matrix: gradient of the multilinear interpolant at each cell
/// centre, which equals the cell average of the gradient.
MatrixXd cell_gradient(const GridGeometry& geometry, const VectorXd& values);
MatrixXd cell_gradient(const ScalarField& field);

/// Load vector F_i = \int g . grad N_i for a cellwise-constant vector field g.
VectorXd flux_load(const GridGeometry& geometry, const MatrixXd& cell_vectors);

/// Volume-normalized bilinear energy (1/|U|) \int grad u . a grad w.
double energy_form(const CellTensorGrid& grid, const VectorXd& u, const VectorXd& w);
/// (1/|U|) * 1/2 \int grad u . a grad u.
double energy_of(const CellTensorGrid& grid, const ScalarField& field);
/// (1/|U|) \int a grad u.
VectorXd flux_average(const CellTensorGrid& grid, const ScalarField& field);

}  // namespace homlab
