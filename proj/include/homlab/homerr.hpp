#pragma once

// The oscillating problem -div a(x/eps) grad u = 0 in U = (0,1)^d, u = f on
// the boundary, against its homogenized limit -div abar grad u = 0, with the
// error statistics built on the pair.
//
// Solutions are stored in microscopic coordinates y = x/eps: the fine mesh
// is the unit-cell grid of the cube [0, 1/eps)^d with m cells per unit, so
// the coefficient is sampled exactly as everywhere else in the library. All
// reported norms are in macroscopic units over U.

#include "homlab/corrector.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace homlab {

/// Closed-form boundary data on U.
///   affine:    x1 + x2/2 + x3/4
///   quadratic: x1^2 - x2^2 (d >= 2), x^2 (d = 1)
///   sine:      sin(pi x1) sinh(pi x2) / sinh(pi) (d = 2), sin(pi x / 2) (d = 1),
///              sin(pi x1) sin(pi x2) sinh(sqrt2 pi x3) / sinh(sqrt2 pi) (d = 3)
/// For d >= 2 the quadratic and sine data are harmonic.
enum class BoundaryFunction { affine, quadratic, sine };

/// fem: solve both problems on the fine mesh. oracle: d = 1 closed form only.
enum class ErrorMethod { fem, oracle };

std::string_view to_string(BoundaryFunction f);
std::string_view to_string(ErrorMethod m);
ErrorMethod error_method_from_string(std::string_view name);
BoundaryFunction boundary_function_from_string(std::string_view name);
double evaluate(BoundaryFunction f, const VectorXd& x);

struct BoundaryValueProblem {
  int d = 2;
  BoundaryFunction f = BoundaryFunction::quadratic;
  int inv_eps = 8;         ///< 1/eps, a positive integer
  int cells_per_eps = 4;   ///< fine-mesh cells per eps-cell
  int min_cells_per_eps = 2;

  double eps() const noexcept { return 1.0 / inv_eps; }
  void validate() const;   ///< throws InvalidParameter
  Cube cube() const;       ///< [0, 1/eps)^d in unit cells
};

struct EpsSolution {
  ScalarField u;  ///< nodal values on the y-grid
  CellTensorGrid grid;
  double eps = 1;
};

/// Boundary values of f(eps y) on the fine mesh (interior entries unused).
VectorXd boundary_values(const BoundaryValueProblem& problem, const GridGeometry& geometry);

EpsSolution solve_eps(const BoundaryValueProblem& problem, const CoefficientField& field, Seed seed,
                      const SolverOptions& options = {});
EpsSolution solve_homogenized(const MatrixXd& abar, const BoundaryValueProblem& problem,
                              const SolverOptions& options = {});

/// Closed-form 1D solution u_eps(x) = alpha + (beta - alpha) F(x) / F(1) with
/// F(x) = \int_0^x 1/a(t/eps) dt, integrated by the midpoint rule on
/// `subdivisions` pieces per unit cell (exact for cellwise-constant fields).
class Oracle1D {
 public:
  Oracle1D(const CoefficientField& field, double eps, double alpha, double beta, int subdivisions = 8);

  double operator()(double x) const;  ///< x in [0, 1]
  /// Breakpoints in [0, 1]; u_eps is linear between consecutive ones.
  const std::vector<double>& breakpoints() const noexcept { return x_; }
  const std::vector<double>& values() const noexcept { return u_; }
  /// Effective conductivity of the sample: 1 / F(1).
  double flux() const noexcept { return flux_; }

  /// L^2(0,1) distance to `other` by Simpson's rule on each piece; exact when
  /// `other` is linear on every piece.
  double l2_distance(const std::function<double(double)>& other) const;

 private:
  std::vector<double> x_, u_;
  double flux_;
};

/// RMS of the difference of two nodal fields over their common grid, with the
/// exact multilinear mass matrix: sqrt((1/|U|) \int (u - v)^2). Coordinate-free.
double l2_error(const ScalarField& u, const ScalarField& v);

/// (1/|U|) \int |grad_y (u - v)|^2 over the cells with mask(cell) true, exact
/// for multilinear fields.
double gradient_error_sq(const ScalarField& u, const ScalarField& v, const std::vector<bool>& mask);

/// Cells at distance >= margin (in y units) from the boundary of the grid.
std::vector<bool> interior_mask(const GridGeometry& geometry, double margin);

/// Correctors phi_{e_i} on a cube covering [0, 1/eps)^d, padded so that its side is >= 16.
std::vector<CorrectorField> correctors_for(const BoundaryValueProblem& problem, const CoefficientField& field,
                                           Seed seed, const SolverOptions& options = {});

struct TwoScaleResult {
  ScalarField w;           ///< ubar + eps sum_i d_i ubar phi_i(x/eps), on the y-grid
  double h1_two_scale = 0; ///< ||grad(u_eps - w)||_{L^2} over the interior
  double h1_plain = 0;     ///< ||grad(u_eps - ubar)||_{L^2} over the interior
};

/// Builds w from ubar and the correctors; the correctors' grid must contain the
/// problem cube. The interior excludes a margin of 2 eps and must be nonempty
/// (1/eps > 4).
TwoScaleResult two_scale_expansion(const EpsSolution& ueps, const EpsSolution& ubar,
                                   const std::vector<CorrectorField>& correctors);

struct WeakConvergence {
  double rho = 0;
  int windows = 0;
  double gradient_window = 0;  ///< RMS over windows of |avg grad u_eps - avg grad ubar|
  double flux_window = 0;      ///< same for a grad u_eps vs abar grad ubar
  double gradient_pointwise = 0;  ///< RMS over interior cells of |grad u_eps - grad ubar|
};

/// Windows are the tiles of side rho of U; cells within 2 eps of the boundary are excluded.
WeakConvergence weak_convergence_check(const EpsSolution& ueps, const EpsSolution& ubar, const MatrixXd& abar,
                                       double rho);

struct ErrorRow {
  int d = 0;
  double eps = 0;
  int sample = 0;
  Seed seed = 0;
  double l2_error = 0;
  double h1_two_scale = 0;  ///< NaN when not computed
  double h1_plain = 0;      ///< NaN when not computed
  double h = 0;             ///< fine-mesh width in macroscopic units
  int iterations = 0;
  double residual = 0;
};

struct ErrorScalingOptions {
  int d = 2;
  BoundaryFunction f = BoundaryFunction::quadratic;
  std::vector<int> inv_eps;  ///< dyadic, >= 3 values
  int cells_per_eps = 4;
  int samples = 8;
  Seed seed = 0;
  ErrorMethod method = ErrorMethod::fem;
  bool two_scale = false;  ///< H^1 columns for 1/eps > 4, NaN otherwise
  int threads = 0;
  SolverOptions solver;
};

struct ErrorScaling {
  ErrorScalingOptions options;
  std::vector<ErrorRow> rows;
  std::vector<double> eps;
  std::vector<double> mean_error;
  std::vector<double> se_error;
  LinearFit fit;             ///< mean error against eps
  LinearFit fit_log;         ///< mean error against eps |log eps|^(1/2) (d = 2)
  bool degenerate = false;   ///< some mean error vanishes
  std::vector<SampleFailure> failures;
};

/// abar is used only by the fem method (the oracle's homogenized solution is the line).
ErrorScaling error_scaling(const CoefficientField& field, const MatrixXd& abar, const ErrorScalingOptions& options);

/// Recomputes the per-eps statistics and fits of `s` from its rows.
void summarize(ErrorScaling& s);

void write_error_csv(std::ostream& out, const ErrorScaling& s);
ErrorScaling read_error_csv(std::istream& in);

}  // namespace homlab
