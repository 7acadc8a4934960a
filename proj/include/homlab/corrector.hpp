#pragma once

// Correctors phi_p on a large cube with zero boundary values, their filtered
// gradient averages, growth statistics, the Gaussian surrogate driven by
// filtered white noise, and the large-scale regularity diagnostic.

#include "homlab/renorm.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace homlab {

/// -div a (p + grad phi) = 0 in the cube, phi = 0 on its boundary.
struct CorrectorField {
  ScalarField phi;
  VectorXd p;
  CellTensorGrid grid;
};

/// Direct solve with load -div(a p). Requires side >= 16.
CorrectorField solve_corrector(const CellTensorGrid& grid, const VectorXd& p,
                               const SolverOptions& options = {});

enum class KernelKind { bump, truncated_gaussian };

std::string_view to_string(KernelKind kind);
KernelKind kernel_kind_from_string(std::string_view name);

/// Nonnegative, supported in the ball of radius `scale`, unit mass on the grid.
struct FilterKernel {
  KernelKind kind = KernelKind::bump;
  double scale = 1;

  /// Unnormalized profile chi(x), zero for |x| >= scale.
  double profile(double distance) const;
};

/// Kernel weights on the cells around a grid node: weight w_j for the cell
/// whose lowest corner sits at node + offset_j. The weights include h^d and
/// sum to 1.
struct KernelStencil {
  std::vector<std::vector<int>> offsets;
  std::vector<double> weights;
};

KernelStencil kernel_stencil(const FilterKernel& kernel, int d, double h);

/// Filtered averages of a cellwise vector field at a set of nodes.
struct FilteredStats {
  double scale = 0;
  int realizations = 1;
  MatrixXd values;    ///< d x centers
  VectorXd variance;  ///< per component, across centers
};

/// Nodes at distance >= max(r, L/8) from the cube boundary, spaced `spacing`
/// apart on a lattice through the cube centre. Returned as node indices.
std::vector<Index> bulk_window_centers(const GridGeometry& geometry, double r, double spacing);

/// sum over cells chi_r(x - cell) grad phi(cell) h^d at each centre node.
/// Throws InvalidParameter if a window reaches the boundary.
FilteredStats filtered_gradient_average(const GridGeometry& geometry, const MatrixXd& cell_vectors,
                                        const FilterKernel& kernel, const std::vector<Index>& centers);
FilteredStats filtered_gradient_average(const CorrectorField& corrector, const FilterKernel& kernel,
                                        const std::vector<Index>& centers);

/// Concatenates the window values of several realizations at one scale.
FilteredStats pool(const std::vector<FilteredStats>& parts);

/// Stddev of nodal phi over the centred ball of each radius (nodes inside).
struct GrowthProfile {
  std::vector<double> radii;
  std::vector<double> stddev;
  std::optional<LinearFit> log_fit;  ///< stddev^2 against log radius, d = 2 only
};

GrowthProfile corrector_growth(const CorrectorField& corrector, const std::vector<double>& radii);

/// psi with -div(abar grad psi) = div(G) and psi = 0 on the boundary, where
/// G = amplitude |p| (xi_1, ..., xi_d) convolved with `noise_kernel`, xi_i i.i.d.
/// N(0, h^-d) per cell.
ScalarField gaussian_surrogate(const MatrixXd& abar, const VectorXd& p, const Cube& cube,
                               int cells_per_unit, const FilterKernel& noise_kernel, Seed seed,
                               double amplitude = 1.0, const SolverOptions& options = {});

struct GffRow {
  double scale = 0;
  int direction = 0;
  double var_corrector = 0;
  double var_surrogate = 0;
  double ratio = 0;
  bool degenerate = false;  ///< one of the variances vanishes
};

/// Variance ratios per scale and component. Needs >= 16 realizations each.
std::vector<GffRow> compare_corrector_gff(const std::vector<FilteredStats>& corrector,
                                          const std::vector<FilteredStats>& surrogate);

/// sqrt(var_corrector / var_surrogate) summed over components at one scale:
/// the amplitude that makes the surrogate match there.
double calibrate_amplitude(const FilteredStats& corrector, const FilteredStats& surrogate);

struct RegularitySample {
  double gradient_ratio = 0;  ///< mean |grad u|^2 on B_1 / mean on B_r
  double l2_ratio_r2 = 0;     ///< mean |grad u|^2 on B_1 / (r^-2 mean (u - avg)^2 on B_r)
  double l2_ratio_r1 = 0;     ///< same with r^-1
};

/// Ratios for the a-harmonic extension of `boundary_values` on `grid`; nullopt
/// if the data are degenerate (zero gradient energy).
std::optional<RegularitySample> regularity_sample(const CellTensorGrid& grid,
                                                  const VectorXd& boundary_values,
                                                  const SolverOptions& options = {});

/// Smooth random boundary data: a random affine part plus low Fourier modes
/// on the scale of the box.
VectorXd random_boundary_data(const GridGeometry& geometry, Seed seed);

struct RegularityResult {
  int r = 0;
  std::vector<RegularitySample> samples;
  std::vector<int> skipped;  ///< draw indices with degenerate data
  double max_ratio = 0;
  double median_ratio = 0;
  double q90_ratio = 0;
};

/// n draws on the box of half-width r centred at the origin.
RegularityResult regularity_ratio(const CoefficientField& field, int r, int n, int cells_per_unit,
                                  Seed seed, const SolverOptions& options = {});

/// Recomputes max, median and q90 (nearest rank) of the gradient ratios.
void summarize(RegularityResult& result);

/// Nodal-field dump; see docs/formats.md.
void write_nodal_binary(std::ostream& out, const ScalarField& field, Seed seed);
ScalarField read_nodal_binary(std::istream& in, Seed* seed = nullptr);

}  // namespace homlab
