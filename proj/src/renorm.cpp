#include "homlab/renorm.hpp"

#include "homlab/io.hpp"
#include "homlab/linalg.hpp"
#include "homlab/parallel.hpp"
#include "homlab/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

namespace homlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sample_variance(const std::vector<double>& x) {
  const auto n = x.size();
  if (n < 2) return 0;
  double mean = 0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(n - 1);
}

double mean_of(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v;
  return x.empty() ? kNaN : s / static_cast<double>(x.size());
}

// Extreme eigenpair of a symmetric matrix: largest if `top`, else smallest.
std::pair<double, VectorXd> extreme_eigen(const MatrixXd& m, bool top) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()));
  const Index k = top ? m.rows() - 1 : 0;
  return {es.eigenvalues()(k), es.eigenvectors().col(k)};
}

// Per-sample values of v.M_k v for M = a (dual = false) or b.
std::vector<double> quadratic_samples(const ScaleLevel& level, int d, const VectorXd& v, bool dual) {
  std::vector<double> out;
  out.reserve(level.samples.size());
  for (const auto& s : level.samples) out.push_back(v.dot((dual ? s.b(d) : s.a(d)) * v));
  return out;
}

// Linearized standard error of v.(M(r) - M(2r))v.
double difference_se(const ScaleLevel& lo, const ScaleLevel& hi, int d, const VectorXd& v, bool dual) {
  const double n1 = lo.count(), n2 = hi.count();
  return std::sqrt(sample_variance(quadratic_samples(lo, d, v, dual)) / n1 +
                   sample_variance(quadratic_samples(hi, d, v, dual)) / n2);
}

}  // namespace

// ---------------------------------------------------------------- regression

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw InvalidParameter("linear_fit: size mismatch");
  const auto n = static_cast<int>(xs.size());
  if (n < 2) throw InvalidParameter("linear_fit needs at least 2 points");
  const double mx = mean_of(xs), my = mean_of(ys);
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0) throw InvalidParameter("linear_fit: all x equal");
  LinearFit f;
  f.points = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0;
  for (int i = 0; i < n; ++i) {
    const double e = ys[i] - f.intercept - f.slope * xs[i];
    ssr += e * e;
  }
  f.r2 = syy > 0 ? 1 - ssr / syy : 1.0;
  f.stderr_slope = n > 2 ? std::sqrt(ssr / (n - 2) / sxx) : 0.0;
  return f;
}

LinearFit fit_exponent(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() < 3) throw InvalidParameter("fit_exponent needs at least 3 points");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0) || !(ys[i] > 0)) throw InvalidParameter("fit_exponent needs positive data");
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
  }
  return linear_fit(lx, ly);
}

// ---------------------------------------------------------------- tail statistic

double log_tail_mean(const std::vector<double>& samples, double s, double theta) {
  // log-sum-exp: the exponents can be far beyond double range for small theta.
  std::vector<double> e;
  e.reserve(samples.size());
  for (double x : samples) e.push_back(x > 0 ? std::pow(x / theta, s) : 0.0);
  const double top = *std::max_element(e.begin(), e.end());
  double acc = 0;
  for (double v : e) acc += std::exp(v - top);
  return top + std::log(acc / static_cast<double>(samples.size()));
}

TailStat subgaussian_theta(std::vector<double> samples, double s) {
  if (!(s > 0)) throw InvalidParameter("tail exponent s must be positive");
  if (samples.size() < 16) throw InvalidParameter("subgaussian_theta needs at least 16 samples");
  TailStat t;
  t.s = s;
  const double top = *std::max_element(samples.begin(), samples.end());
  t.samples = std::move(samples);
  if (!(top > 0)) {
    t.vacuous = true;
    return t;
  }
  const double target = std::log(2.0);
  auto ok = [&](double theta) { return log_tail_mean(t.samples, s, theta) <= target; };
  double hi = top, lo = top;
  while (!ok(hi)) hi *= 2;
  while (ok(lo)) lo /= 2;
  while (hi / lo > 1.001) {
    const double mid = std::sqrt(lo * hi);
    (ok(mid) ? hi : lo) = mid;
  }
  t.theta = hi;
  return t;
}

// ---------------------------------------------------------------- sweep

std::string_view to_string(SamplingMode mode) {
  return mode == SamplingMode::nested ? "nested" : "independent";
}

SamplingMode sampling_mode_from_string(std::string_view name) {
  if (name == "independent") return SamplingMode::independent;
  if (name == "nested") return SamplingMode::nested;
  throw ConfigError("unknown sampling mode '" + std::string(name) + "'");
}

const ScaleLevel& ScaleSeries::level(int scale) const {
  for (const auto& l : levels)
    if (l.scale == scale) return l;
  throw InvalidParameter("scale " + std::to_string(scale) + " not in series");
}

std::vector<int> ScaleSeries::scales() const {
  std::vector<int> out;
  for (const auto& l : levels) out.push_back(l.scale);
  return out;
}

int ScaleSeries::failure_count() const {
  int n = 0;
  for (const auto& l : levels) n += static_cast<int>(l.failures.size());
  return n;
}

void aggregate(ScaleLevel& level, int d) {
  const auto np = static_cast<Index>(polarization_directions(d).size());
  const int n = level.count();
  level.nu_mean = VectorXd::Constant(np, n ? 0.0 : kNaN);
  level.nu_star_mean = level.nu_mean;
  for (const auto& s : level.samples) {
    level.nu_mean += s.nu;
    level.nu_star_mean += s.nu_star;
  }
  if (n) {
    level.nu_mean /= n;
    level.nu_star_mean /= n;
  }
  level.nu_var = VectorXd::Zero(np);
  level.nu_star_var = VectorXd::Zero(np);
  if (n > 1) {
    for (const auto& s : level.samples) {
      level.nu_var += (s.nu - level.nu_mean).cwiseAbs2();
      level.nu_star_var += (s.nu_star - level.nu_star_mean).cwiseAbs2();
    }
    level.nu_var /= n - 1;
    level.nu_star_var /= n - 1;
  }
  // polarize is linear, so the mean matrix is the polarized mean.
  level.a_mean = polarize(d, level.nu_mean);
  level.b_mean = polarize(d, level.nu_star_mean);
}

Seed sweep_sample_seed(const SweepOptions& options, int scale_index, int k) {
  const int i = options.mode == SamplingMode::nested ? -1 : scale_index;
  return task_seed(options.seed, Experiment::sweep, i, k);
}

namespace {

void validate(const SweepOptions& o) {
  if (o.scales.empty()) throw InvalidParameter("sweep needs at least one scale");
  if (o.scales.front() < 1) throw InvalidParameter("scales must be positive");
  for (std::size_t i = 1; i < o.scales.size(); ++i)
    if (o.scales[i] != 2 * o.scales[i - 1])
      throw InvalidParameter("scales must form a dyadic ladder r0, 2 r0, 4 r0, ...");
  if (o.samples < 8) throw InvalidParameter("sweep needs at least 8 samples per scale");
  if (o.cells_per_unit < 1) throw InvalidParameter("cells per unit must be positive");
}

std::string field_name(const CoefficientField& field) { return std::string(to_string(field.kind())); }

}  // namespace

ScaleSeries scale_sweep(const CoefficientField& field, const SweepOptions& options) {
  validate(options);
  const int d = field.dimension();
  ScaleSeries out;
  out.dimension = d;
  out.cells_per_unit = options.cells_per_unit;
  out.seed = options.seed;
  out.field = field_name(field);
  out.mode = options.mode;
  out.requested = options.samples;

  struct Slot {
    std::optional<SampleRecord> record;
    std::optional<SampleFailure> failure;
  };
  const auto ns = options.scales.size();
  const auto per = static_cast<std::size_t>(options.samples);
  std::vector<Slot> slots(ns * per);

  // Largest cubes first so the expensive tasks do not straggle at the end.
  parallel_for(slots.size(), options.threads, [&](std::size_t t) {
    const std::size_t i = ns - 1 - t / per;
    const int k = static_cast<int>(t % per);
    const int r = options.scales[i];
    const Seed seed = sweep_sample_seed(options, static_cast<int>(i), k);
    Slot& slot = slots[i * per + static_cast<std::size_t>(k)];
    try {
      const auto grid = sample_on_grid(field.with_seed(seed), Cube::centered(d, r), options.cells_per_unit);
      const CubeResponse resp = cube_response(grid, options.solver);
      SampleRecord rec;
      rec.index = k;
      rec.seed = seed;
      rec.nu = resp.nu_values;
      rec.nu_star = resp.nu_star_values;
      for (std::size_t j = 0; j < resp.nu_stats.size(); ++j)
        rec.stats.push_back({resp.nu_stats[j].iterations + resp.nu_star_stats[j].iterations,
                             std::max(resp.nu_stats[j].residual, resp.nu_star_stats[j].residual)});
      slot.record = std::move(rec);
    } catch (const SolverFailure& e) {
      slot.failure = SampleFailure{r, k, seed, e.what(), e.iterations(), e.residual()};
    }
  });

  for (std::size_t i = 0; i < ns; ++i) {
    ScaleLevel level;
    level.scale = options.scales[i];
    for (std::size_t k = 0; k < per; ++k) {
      auto& slot = slots[i * per + k];
      if (slot.record) level.samples.push_back(std::move(*slot.record));
      if (slot.failure) level.failures.push_back(std::move(*slot.failure));
    }
    aggregate(level, d);
    out.levels.push_back(std::move(level));
  }
  return out;
}

// ---------------------------------------------------------------- statistics

Estimate duality_gap(const ScaleLevel& level, int d) {
  if (level.count() == 0) return {kNaN, kNaN};
  if (!is_positive_definite(level.b_mean))
    throw NumericalDegeneracy("mean dual form is not positive definite");
  const MatrixXd b_inv = level.b_mean.inverse();
  const auto [top, v] = extreme_eigen(level.a_mean - b_inv, true);
  // d(B^-1) = -B^-1 dB B^-1, so the gap moves with v.da v + w.db w, w = B^-1 v.
  const VectorXd w = b_inv * v;
  std::vector<double> g;
  for (const auto& s : level.samples) g.push_back(0.5 * (v.dot(s.a(d) * v) + w.dot(s.b(d) * w)));
  return {0.5 * top, std::sqrt(sample_variance(g) / level.count())};
}

Estimate mean_sample_gap(const ScaleLevel& level, int d) {
  if (level.count() == 0) return {kNaN, kNaN};
  std::vector<double> g;
  for (const auto& s : level.samples) g.push_back(duality_gap_max(s.a(d), s.b(d)));
  return {mean_of(g), std::sqrt(sample_variance(g) / level.count())};
}

Estimate additivity_defect(const ScaleSeries& series, int r) {
  const int d = series.dimension;
  const ScaleLevel& lo = series.level(r);
  const ScaleLevel& hi = series.level(2 * r);
  const auto [ta, va] = extreme_eigen(lo.a_mean - hi.a_mean, true);
  const auto [tb, vb] = extreme_eigen(lo.b_mean - hi.b_mean, true);
  const double sa = 0.5 * difference_se(lo, hi, d, va, false);
  const double sb = 0.5 * difference_se(lo, hi, d, vb, true);
  return {0.5 * ta + 0.5 * tb, std::hypot(sa, sb)};
}

Estimate mean_decrease(const ScaleSeries& series, int r, bool dual) {
  const ScaleLevel& lo = series.level(r);
  const ScaleLevel& hi = series.level(2 * r);
  const auto [low, v] = extreme_eigen(dual ? MatrixXd(lo.b_mean - hi.b_mean) : MatrixXd(lo.a_mean - hi.a_mean), false);
  return {low, difference_se(lo, hi, series.dimension, v, dual)};
}

DualityTable duality_vs_additivity(const ScaleSeries& series) {
  if (series.levels.size() < 3) throw InvalidParameter("duality table needs at least 3 scales");
  DualityTable t;
  t.c_emp = kNaN;
  for (std::size_t i = 0; i < series.levels.size(); ++i) {
    DualityRow row;
    row.scale = series.levels[i].scale;
    row.gap = duality_gap(series.levels[i], series.dimension);
    row.ratio = kNaN;
    if (i + 1 < series.levels.size()) {
      row.tau = additivity_defect(series, row.scale);
      // Below ~1e-8 relative, tau is solver noise rather than a defect.
      const double floor = 1e-8 * series.levels[i].a_mean.norm();
      row.reliable = row.tau->value > row.tau->se && row.tau->value > floor;
      if (row.reliable) {
        row.ratio = row.gap.value / row.tau->value;
        t.c_emp = std::isnan(t.c_emp) ? row.ratio : std::max(t.c_emp, row.ratio);
      }
    }
    t.rows.push_back(row);
  }
  return t;
}

AbarEstimate abar_estimate(const ScaleLevel& level, int cells_per_unit) {
  if (level.count() == 0) throw InvalidParameter("no samples at this scale");
  if (!is_positive_definite(level.b_mean))
    throw NumericalDegeneracy("mean dual form is not positive definite");
  const MatrixXd lower = level.b_mean.inverse();
  AbarEstimate out;
  out.estimate.matrix = 0.5 * (lower + level.a_mean);
  out.estimate.meta.provenance = Provenance::limit_estimate;
  out.estimate.meta.side = level.scale;
  out.estimate.meta.cells_per_unit = cells_per_unit;
  out.estimate.meta.samples = level.count();
  out.bracket = max_eigenvalue(MatrixXd(level.a_mean - lower));
  return out;
}

FluctuationFit fluctuation_fit(const std::vector<double>& scales,
                               const std::vector<std::vector<double>>& samples) {
  if (scales.size() != samples.size()) throw InvalidParameter("fluctuation_fit: size mismatch");
  FluctuationFit f;
  f.scales = scales;
  for (const auto& s : samples) {
    const double sd = std::sqrt(sample_variance(s));
    const double scale = std::abs(mean_of(s));
    f.stddevs.push_back(sd);
    if (!(sd > 1e-12 * std::max(scale, 1e-300))) f.degenerate = true;
  }
  if (!f.degenerate) f.fit = fit_exponent(f.scales, f.stddevs);
  return f;
}

FluctuationFit fluctuation_scaling(const ScaleSeries& series, int direction) {
  std::vector<double> scales;
  std::vector<std::vector<double>> samples;
  for (const auto& l : series.levels) {
    scales.push_back(l.scale);
    std::vector<double> v;
    for (const auto& s : l.samples) v.push_back(s.nu(direction));
    samples.push_back(std::move(v));
  }
  return fluctuation_fit(scales, samples);
}

// ---------------------------------------------------------------- files

void write_sweep_csv(std::ostream& out, const ScaleSeries& series) {
  const auto dirs = polarization_directions(series.dimension);
  out << "#schema=" << kSchemaVersion << '\n';
  out << "#d=" << series.dimension << ",m=" << series.cells_per_unit << ",seed=" << series.seed
      << ",field=" << series.field << ",mode=" << to_string(series.mode)
      << ",samples=" << series.requested << ",scales=";
  for (std::size_t i = 0; i < series.levels.size(); ++i)
    out << (i ? " " : "") << series.levels[i].scale;
  out << '\n';
  out << "scale,sample_idx,seed,direction,nu,nu_star,iterations,residual\n";
  for (const auto& l : series.levels)
    for (const auto& s : l.samples)
      for (std::size_t k = 0; k < dirs.size(); ++k) {
        const auto j = static_cast<Index>(k);
        out << l.scale << ',' << s.index << ',' << s.seed << ',' << direction_label(dirs[k]) << ','
            << format_double(s.nu(j)) << ',' << format_double(s.nu_star(j)) << ','
            << s.stats[k].iterations << ',' << format_double(s.stats[k].residual) << '\n';
      }
}

ScaleSeries read_sweep_csv(std::istream& in) {
  const CsvTable t = read_csv(in);
  require_schema(t, "sweep CSV");
  if (t.comments.empty()) throw ConfigError("sweep CSV lacks its metadata line");
  const auto meta = parse_metadata(t.comments.front());
  ScaleSeries s;
  s.dimension = static_cast<int>(parse_int(metadata_at(meta, "d")));
  s.cells_per_unit = static_cast<int>(parse_int(metadata_at(meta, "m")));
  s.seed = parse_uint64(metadata_at(meta, "seed"));
  s.field = metadata_at(meta, "field");
  s.mode = sampling_mode_from_string(metadata_at(meta, "mode"));
  s.requested = static_cast<int>(parse_int(metadata_at(meta, "samples")));
  if (s.dimension < 1) throw ConfigError("sweep CSV: bad dimension");
  const auto dirs = polarization_directions(s.dimension);
  std::map<std::string, Index> dir_index;
  for (std::size_t k = 0; k < dirs.size(); ++k) dir_index[direction_label(dirs[k])] = static_cast<Index>(k);

  const int c_scale = t.column("scale"), c_idx = t.column("sample_idx"), c_seed = t.column("seed"),
            c_dir = t.column("direction"), c_nu = t.column("nu"), c_nus = t.column("nu_star"),
            c_it = t.column("iterations"), c_res = t.column("residual");
  std::map<int, std::map<int, SampleRecord>> by_scale;
  for (const auto& sc : split(metadata_at(meta, "scales"), ' ')) by_scale[static_cast<int>(parse_int(sc))];
  const auto np = static_cast<Index>(dirs.size());
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw ConfigError("sweep CSV: ragged row");
    const int r = static_cast<int>(parse_int(row[c_scale]));
    const int k = static_cast<int>(parse_int(row[c_idx]));
    const auto it = dir_index.find(row[c_dir]);
    if (it == dir_index.end()) throw ConfigError("sweep CSV: unknown direction '" + row[c_dir] + "'");
    auto scale_it = by_scale.find(r);
    if (scale_it == by_scale.end()) throw ConfigError("sweep CSV: scale not declared in metadata");
    SampleRecord& rec = scale_it->second[k];
    if (rec.nu.size() == 0) {
      rec.index = k;
      rec.seed = parse_uint64(row[c_seed]);
      rec.nu = VectorXd::Constant(np, kNaN);
      rec.nu_star = VectorXd::Constant(np, kNaN);
      rec.stats.resize(dirs.size());
    }
    rec.nu(it->second) = parse_double(row[c_nu]);
    rec.nu_star(it->second) = parse_double(row[c_nus]);
    rec.stats[static_cast<std::size_t>(it->second)] = {static_cast<int>(parse_int(row[c_it])),
                                                       parse_double(row[c_res])};
  }
  for (auto& [r, samples] : by_scale) {
    ScaleLevel level;
    level.scale = r;
    for (auto& [k, rec] : samples) {
      if (rec.nu.hasNaN() || rec.nu_star.hasNaN()) throw ConfigError("sweep CSV: incomplete sample");
      level.samples.push_back(std::move(rec));
    }
    aggregate(level, s.dimension);
    s.levels.push_back(std::move(level));
  }
  return s;
}

void write_failures_csv(std::ostream& out, const std::vector<SampleFailure>& failures) {
  out << "#schema=" << kSchemaVersion << '\n';
  out << "scale,sample_idx,seed,iterations,residual,what\n";
  for (const auto& f : failures) {
    std::string what = f.what;
    std::replace(what.begin(), what.end(), ',', ';');
    out << f.scale << ',' << f.index << ',' << f.seed << ',' << f.iterations << ','
        << format_double(f.residual) << ',' << what << '\n';
  }
}

}  // namespace homlab
