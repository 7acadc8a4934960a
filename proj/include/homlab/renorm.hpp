#pragma once

// Multiscale Monte Carlo over dyadic cubes: per-scale means and fluctuations
// of nu and nu*, the additivity defect tau(r), the duality gap, exponent fits
// and the O_s tail statistic.

#include "homlab/energies.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace homlab {

// ---------------------------------------------------------------- regression

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double stderr_slope = 0;
  double r2 = 0;
  int points = 0;
};

/// Ordinary least squares y = intercept + slope x. Needs >= 2 points.
LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys);

/// Least-squares slope of log ys against log xs. Needs >= 3 points, ys > 0.
LinearFit fit_exponent(const std::vector<double>& xs, const std::vector<double>& ys);

// ---------------------------------------------------------------- tail statistic

struct TailStat {
  double s = 0;
  double theta = 0;
  bool vacuous = false;  ///< every sample <= 0: the condition holds for any theta
  std::vector<double> samples;
};

/// log of the empirical mean of exp((x/theta)_+^s).
double log_tail_mean(const std::vector<double>& samples, double s, double theta);

/// Smallest theta (to 0.1% relative) with mean exp((x/theta)_+^s) <= 2.
TailStat subgaussian_theta(std::vector<double> samples, double s);

// ---------------------------------------------------------------- sweep

enum class SamplingMode {
  independent,  ///< a fresh realization per (scale, sample)
  nested,       ///< one realization per sample index, shared by all scales
};

std::string_view to_string(SamplingMode mode);
SamplingMode sampling_mode_from_string(std::string_view name);

struct SweepOptions {
  std::vector<int> scales;  ///< r0, 2 r0, 4 r0, ...
  int samples = 64;
  int cells_per_unit = 4;
  Seed seed = 0;
  SamplingMode mode = SamplingMode::independent;
  int threads = 0;
  SolverOptions solver;
};

/// nu and nu* of one cube, per polarization direction.
struct SampleRecord {
  int index = 0;
  Seed seed = 0;
  VectorXd nu;
  VectorXd nu_star;
  std::vector<SolverStats> stats;  ///< per direction; iterations summed over both solves

  MatrixXd a(int d) const { return polarize(d, nu); }
  MatrixXd b(int d) const { return polarize(d, nu_star); }
};

struct SampleFailure {
  int scale = 0;
  int index = 0;
  Seed seed = 0;
  std::string what;
  int iterations = 0;
  double residual = 0;
};

struct ScaleLevel {
  int scale = 0;
  std::vector<SampleRecord> samples;  ///< successful samples, by index
  std::vector<SampleFailure> failures;

  // Aggregates over `samples`, filled by aggregate().
  MatrixXd a_mean;  ///< A-bar(r)
  MatrixXd b_mean;  ///< B-bar(r)
  VectorXd nu_mean, nu_var, nu_star_mean, nu_star_var;

  int count() const noexcept { return static_cast<int>(samples.size()); }
};

struct ScaleSeries {
  int dimension = 0;
  int cells_per_unit = 0;
  Seed seed = 0;
  std::string field;  ///< generator name
  SamplingMode mode = SamplingMode::independent;
  int requested = 0;  ///< samples requested per scale
  std::vector<ScaleLevel> levels;

  const ScaleLevel& level(int scale) const;  ///< throws InvalidParameter if absent
  std::vector<int> scales() const;
  int failure_count() const;
};

/// Recomputes the aggregates of `level` from its samples.
void aggregate(ScaleLevel& level, int d);

/// Seed of sample k at scale index i.
Seed sweep_sample_seed(const SweepOptions& options, int scale_index, int k);

ScaleSeries scale_sweep(const CoefficientField& field, const SweepOptions& options);

// ---------------------------------------------------------------- statistics

/// A scalar statistic with its (linearized) standard error.
struct Estimate {
  double value = 0;
  double se = 0;
};

/// 1/2 lambda_max(A-bar - B-bar^-1).
Estimate duality_gap(const ScaleLevel& level, int d);

/// Mean over samples of the per-cube gap 1/2 lambda_max(a(U) - b(U)^-1). Unlike
/// duality_gap this carries no Jensen bias from averaging before inverting.
Estimate mean_sample_gap(const ScaleLevel& level, int d);

/// tau(r) = 1/2 lambda_max(A(r) - A(2r)) + 1/2 lambda_max(B(r) - B(2r)).
Estimate additivity_defect(const ScaleSeries& series, int r);

/// Smallest eigenvalue of M(r) - M(2r) for M = A-bar (dual = false) or B-bar.
Estimate mean_decrease(const ScaleSeries& series, int r, bool dual);

struct DualityRow {
  int scale = 0;
  Estimate gap;
  std::optional<Estimate> tau;  ///< absent at the largest scale
  double ratio = 0;             ///< gap / tau; NaN when unavailable
  bool reliable = false;        ///< tau exceeds its standard error and solver noise
};

struct DualityTable {
  std::vector<DualityRow> rows;
  double c_emp = 0;  ///< max ratio over reliable rows; NaN if none
};

DualityTable duality_vs_additivity(const ScaleSeries& series);

/// Midpoint of B-bar(r)^-1 and A-bar(r) at one scale, with provenance
/// limit_estimate; `bracket` = lambda_max(A-bar - B-bar^-1).
struct AbarEstimate {
  EffectiveMatrix estimate;
  double bracket = 0;
};
AbarEstimate abar_estimate(const ScaleLevel& level, int cells_per_unit);

struct FluctuationFit {
  std::vector<double> scales;
  std::vector<double> stddevs;
  LinearFit fit;
  bool degenerate = false;  ///< some stddev is zero; fit not attempted
};

/// Exponent of the sample stddev against scale. samples[i] are the draws at scales[i].
FluctuationFit fluctuation_fit(const std::vector<double>& scales,
                               const std::vector<std::vector<double>>& samples);

/// Exponent of stddev[nu(cube_r, e_dir)] against r.
FluctuationFit fluctuation_scaling(const ScaleSeries& series, int direction = 0);

// ---------------------------------------------------------------- files

/// One row per (scale, sample, direction); see docs/formats.md.
void write_sweep_csv(std::ostream& out, const ScaleSeries& series);
ScaleSeries read_sweep_csv(std::istream& in);

void write_failures_csv(std::ostream& out, const std::vector<SampleFailure>& failures);

}  // namespace homlab
