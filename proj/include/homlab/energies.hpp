#pragma once

// The subadditive energies
//   nu(U, p)  = min over v in l_p + H^1_0(U) of (1/|U|) \int 1/2 grad v . a grad v
//   nu*(U, q) = max over u in H^1(U) of (1/|U|) \int (-1/2 grad u . a grad u + q . grad u)
// and the matrices they define: nu(U, p) = 1/2 p.a(U)p, nu*(U, q) = 1/2 q.b(U)q,
// with a_*(U) = b(U)^-1 <= a(U).

#include "homlab/solver.hpp"

#include <string>
#include <utility>
#include <vector>

namespace homlab {

enum class Provenance { dirichlet, neumann_dual, limit_estimate };

std::string_view to_string(Provenance p);

struct MatrixProvenance {
  Provenance provenance = Provenance::dirichlet;
  int side = 0;
  int cells_per_unit = 0;
  Seed seed = 0;
  int samples = 1;
  SolverStats stats;  ///< iterations summed, residual maximized over the solves
};

/// a(U), or an estimate of the limit matrix.
struct EffectiveMatrix {
  MatrixXd matrix;
  MatrixProvenance meta;
};

/// b(U) with nu*(U, q) = 1/2 q.b(U)q.
struct DualForm {
  MatrixXd matrix;
  MatrixProvenance meta;
};

struct EnergyValue {
  double value = 0;
  ScalarField field;
};

EnergyValue nu(const CellTensorGrid& grid, const VectorXd& p, const SolverOptions& options = {});
EnergyValue nu_star(const CellTensorGrid& grid, const VectorXd& q,
                    const SolverOptions& options = {});

/// Probe directions used for polarization: e_i for i < d, then e_i + e_j for i < j.
std::vector<std::pair<int, int>> polarization_directions(int d);
std::string direction_label(std::pair<int, int> dir);
VectorXd direction_vector(int d, std::pair<int, int> dir);

/// Symmetric matrix M from the quadratic-form values 1/2 e.M e on the probe
/// directions (same order as polarization_directions).
MatrixXd polarize(int d, const VectorXd& values);

/// a(U) and b(U) together with the directional values they came from.
struct CubeResponse {
  EffectiveMatrix a;
  DualForm b;
  VectorXd nu_values;       ///< nu(U, e) per probe direction
  VectorXd nu_star_values;  ///< nu*(U, e) per probe direction
  std::vector<SolverStats> nu_stats;
  std::vector<SolverStats> nu_star_stats;
};

CubeResponse cube_response(const CellTensorGrid& grid, const SolverOptions& options = {});

EffectiveMatrix effective_matrix(const CellTensorGrid& grid, const SolverOptions& options = {});
DualForm dual_form(const CellTensorGrid& grid, const SolverOptions& options = {});

struct SubadditivityCheck {
  double parent = 0;    ///< nu(U, p) (or nu*)
  double children = 0;  ///< 2^-d sum over the aligned half-size subcubes
  double defect = 0;    ///< children - parent
};

SubadditivityCheck check_subadditivity(const CellTensorGrid& parent, const VectorXd& p,
                                       const SolverOptions& options = {});
SubadditivityCheck check_subadditivity_dual(const CellTensorGrid& parent, const VectorXd& q,
                                            const SolverOptions& options = {});

/// 1/2 p.(a(U) - b(U)^-1)p. Throws NumericalDegeneracy if b is not PD.
double duality_gap(const EffectiveMatrix& a, const DualForm& b, const VectorXd& p);
/// 1/2 lambda_max(a(U) - b(U)^-1), the supremum over |p| <= 1.
double duality_gap_max(const MatrixXd& a, const MatrixXd& b);

}  // namespace homlab
