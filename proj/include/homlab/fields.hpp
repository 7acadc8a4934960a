#pragma once

// Random coefficient fields and their piecewise-constant samples on
// lattice-aligned cubes.
//
// A field is a stationary, uniformly elliptic, finite-range random map
// x -> a(x) in Sym_d. Randomness is organised per unit lattice cell z: all
// structure generated "in" cell z (a colour, Poisson points, noise values,
// segments) comes from an engine seeded by cell_seed(master, z). A field
// object therefore never stores a realisation; it is a recipe plus a seed and
// can be shared freely across threads.

#include "homlab/rng.hpp"
#include "homlab/types.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace homlab {

enum class FieldKind { checkerboard, poisson_inclusion, filtered_white_noise, line_inclusion, constant };

std::string_view to_string(FieldKind kind);
FieldKind field_kind_from_string(std::string_view name);

struct CheckerboardParams {
  double a_lo = 1.0;
  double a_hi = 4.0;
  double prob_hi = 0.5;
};

struct PoissonInclusionParams {
  double intensity = 1.0;  ///< expected points per unit volume
  double radius = 0.2;
  double a_in = 4.0;
  double a_out = 1.0;
};

struct WhiteNoiseParams {
  double filter_scale = 0.5;
  double contrast = 0.1;  ///< delta in (1 - delta) Id <= a <= (1 + delta) Id
};

struct LineInclusionParams {
  double intensity = 1.0;
  double segment_length = 1.5;
  double thickness = 0.1;
  double a_line = 1e-5;
  double a_bg = 1.0;
  double orientation_spread = 0.1;  ///< radians around the vertical
};

struct ConstantParams {
  MatrixXd tensor;
};

using FieldParams = std::variant<CheckerboardParams, PoissonInclusionParams, WhiteNoiseParams,
                                 LineInclusionParams, ConstantParams>;

class CoefficientField {
 public:
  CoefficientField(int dimension, FieldParams params, Seed seed);

  int dimension() const noexcept { return d_; }
  FieldKind kind() const noexcept;
  const FieldParams& params() const noexcept { return params_; }
  Seed seed() const noexcept { return seed_; }

  /// Lambda of the two-sided bound Lambda^-1 |xi|^2 <= xi.a(x)xi <= Lambda |xi|^2.
  double ellipticity() const noexcept { return lambda_; }

  /// Distance (sup-norm) beyond which values are independent.
  double dependence_range() const noexcept;

  /// Same law, different realisation.
  CoefficientField with_seed(Seed seed) const { return {d_, params_, seed}; }

  /// a(x) at a single point. Pure in (seed, x).
  MatrixXd tensor_at(std::span<const double> x) const;

 private:
  int d_;
  FieldParams params_;
  Seed seed_;
  double lambda_;
};

CoefficientField gen_checkerboard(int d, double a_lo, double a_hi, double prob_hi, Seed seed);
CoefficientField gen_poisson_inclusions(int d, double intensity, double radius, double a_in,
                                        double a_out, Seed seed);
CoefficientField gen_filtered_white_noise(int d, double filter_scale, double contrast, Seed seed);
CoefficientField gen_line_inclusions(double intensity, double segment_length, double thickness,
                                     double a_line, double a_bg, double orientation_spread,
                                     Seed seed);
CoefficientField gen_constant(const MatrixXd& tensor);
CoefficientField gen_constant(int d, double c);

/// Lattice-aligned cube: integer corner, integer side (in unit cells).
struct Cube {
  std::vector<int> corner;
  int side = 0;

  static Cube centered(int d, int side);
  static Cube at_origin(int d, int side);
};

/// A cube discretized with m cells per unit length, one constant symmetric
/// tensor per cell. Cells are ordered with axis 0 fastest.
class CellTensorGrid {
 public:
  CellTensorGrid(int dimension, int side, int cells_per_unit, std::vector<int> corner,
                 MatrixXd packed_tensors, Seed seed = 0, FieldKind kind = FieldKind::constant);

  /// Grid on `cube` with every cell equal to `tensor`.
  static CellTensorGrid uniform(const Cube& cube, int cells_per_unit, const MatrixXd& tensor);

  int dimension() const noexcept { return d_; }
  int side() const noexcept { return side_; }
  int cells_per_unit() const noexcept { return m_; }
  int cells_per_axis() const noexcept { return side_ * m_; }
  double h() const noexcept { return 1.0 / m_; }
  Index cell_count() const noexcept { return packed_.cols(); }
  const std::vector<int>& corner() const noexcept { return corner_; }
  Seed seed() const noexcept { return seed_; }
  FieldKind kind() const noexcept { return kind_; }

  /// d(d+1)/2 x cell_count matrix of upper-triangular entries.
  const MatrixXd& packed() const noexcept { return packed_; }
  MatrixXd& packed() noexcept { return packed_; }
  MatrixXd tensor(Index cell) const;

  std::vector<int> cell_coords(Index cell) const;
  Index cell_index(std::span<const int> coords) const;
  VectorXd cell_center(Index cell) const;

  /// Sub-cube given by an offset (in unit cells) from this grid's corner.
  CellTensorGrid subgrid(std::span<const int> unit_offset, int side) const;

  MatrixXd arithmetic_mean() const;
  MatrixXd harmonic_mean() const;

  /// Smallest Lambda bounding every cell tensor.
  double ellipticity() const;

 private:
  int d_;
  int side_;
  int m_;
  std::vector<int> corner_;
  MatrixXd packed_;
  Seed seed_;
  FieldKind kind_;
};

/// Cell-centred sample of `field` on `cube` with m cells per unit length.
CellTensorGrid sample_on_grid(const CoefficientField& field, const Cube& cube, int m);

void write_grid_csv(std::ostream& out, const CellTensorGrid& grid);
void write_grid_binary(std::ostream& out, const CellTensorGrid& grid);
CellTensorGrid read_grid_csv(std::istream& in);
CellTensorGrid read_grid_binary(std::istream& in);

}  // namespace homlab
