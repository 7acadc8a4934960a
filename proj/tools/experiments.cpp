#include "experiments.hpp"

#include "homlab/homerr.hpp"
#include "homlab/io.hpp"
#include "homlab/linalg.hpp"
#include "homlab/parallel.hpp"
#include "homlab/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>

namespace homlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- helpers

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json matrix_json(const MatrixXd& m) {
  json out = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
    out.push_back(row);
  }
  return out;
}

json vector_json(const VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(num(v(i)));
  return out;
}

json fit_json(const LinearFit& f) {
  return {{"slope", num(f.slope)},
          {"intercept", num(f.intercept)},
          {"stderr", num(f.stderr_slope)},
          {"r2", num(f.r2)},
          {"points", f.points}};
}

json estimate_json(const Estimate& e) { return {{"value", num(e.value)}, {"se", num(e.se)}}; }

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
  if (!out) throw ConfigError("failed writing " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

CsvTable load_csv(const fs::path& path, std::string_view what) {
  std::istringstream in(read_file(path));
  auto t = read_csv(in);
  require_schema(t, what);
  return t;
}

std::map<std::string, std::string> csv_metadata(const CsvTable& t, std::string_view what) {
  if (t.comments.empty()) throw ConfigError(std::string(what) + " lacks its metadata line");
  return parse_metadata(t.comments.front());
}

std::string header(const std::string& metadata, const std::string& columns) {
  return "#schema=" + std::to_string(kSchemaVersion) + "\n#" + metadata + "\n" + columns + "\n";
}

// Collects SolverFailures thrown by parallel tasks.
class FailureLog {
 public:
  void add(int scale, int index, Seed seed, const SolverFailure& e) {
    const std::lock_guard lock(mutex_);
    failures_.push_back({scale, index, seed, e.what(), e.iterations(), e.residual()});
  }
  void append(const std::vector<SampleFailure>& f) { failures_.insert(failures_.end(), f.begin(), f.end()); }
  std::vector<SampleFailure> sorted() const {
    auto out = failures_;
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return std::tie(a.scale, a.index) < std::tie(b.scale, b.index); });
    return out;
  }

 private:
  std::mutex mutex_;
  std::vector<SampleFailure> failures_;
};

int count_rows(const fs::path& failures) {
  if (!fs::exists(failures)) return 0;
  return static_cast<int>(load_csv(failures, "failures CSV").rows.size());
}

double tolerance_for(const MatrixXd& a) { return 1e-9 * std::max(1.0, a.norm()); }

const std::string kMatrixColumns = "i,j";

// Upper-triangle (i <= j) entries of a symmetric matrix, row-major.
std::vector<std::pair<int, int>> upper_entries(int d) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) out.emplace_back(i, j);
  return out;
}

MatrixXd symmetric_from(int d, const std::map<std::pair<int, int>, double>& entries) {
  MatrixXd m = MatrixXd::Zero(d, d);
  for (const auto& [ij, v] : entries) {
    m(ij.first, ij.second) = v;
    m(ij.second, ij.first) = v;
  }
  return m;
}

// ---------------------------------------------------------------- homogenized matrix

struct Abar {
  MatrixXd matrix;
  double bracket = 0;
};

Abar resolve_abar(const Config& c, const RunContext& ctx, FailureLog& failures, const fs::path& dir) {
  const int d = static_cast<int>(c.integer("field", "d"));
  Abar out;
  std::string meta = "source=" + c.text("homogenized", "source");
  if (c.text("homogenized", "source") == "given") {
    const auto packed = c.reals("homogenized", "matrix");
    if (static_cast<int>(packed.size()) != packed_size(d))
      throw ConfigError("homogenized.matrix needs " + std::to_string(packed_size(d)) + " packed entries");
    out.matrix = unpack_symmetric(Eigen::Map<const VectorXd>(packed.data(), static_cast<Index>(packed.size())), d);
    if (!is_positive_definite(out.matrix)) throw ConfigError("homogenized.matrix is not positive definite");
  } else {
    SweepOptions o;
    o.scales = {static_cast<int>(c.integer("homogenized", "scale"))};
    o.samples = static_cast<int>(c.integer("homogenized", "samples"));
    o.cells_per_unit = static_cast<int>(c.integer("homogenized", "cells_per_unit"));
    o.seed = derive_seed(c.seed("run", "seed"), {0x61626172});
    o.threads = ctx.threads;
    o.solver = solver_from_config(c);
    const auto series = scale_sweep(field_from_config(c, o.seed), o);
    failures.append(series.levels.front().failures);
    if (series.levels.front().count() == 0) throw SolverFailure("every homogenized-matrix sample failed", 0, 0);
    const auto est = abar_estimate(series.levels.front(), o.cells_per_unit);
    out.matrix = est.estimate.matrix;
    out.bracket = est.bracket;
    meta += ",scale=" + std::to_string(o.scales.front()) + ",samples=" + std::to_string(o.samples) +
            ",m=" + std::to_string(o.cells_per_unit);
  }
  std::ostringstream csv;
  csv << header(meta, "i,j,value,bracket");
  for (auto [i, j] : upper_entries(d))
    csv << i << ',' << j << ',' << format_double(out.matrix(i, j)) << ',' << format_double(out.bracket) << '\n';
  write_file(dir / "abar.csv", csv.str());
  return out;
}

json abar_summary(const fs::path& dir, int d) {
  const auto t = load_csv(dir / "abar.csv", "abar CSV");
  std::map<std::pair<int, int>, double> entries;
  double bracket = 0;
  for (const auto& r : t.rows) {
    entries[{static_cast<int>(parse_int(r[t.column("i")])), static_cast<int>(parse_int(r[t.column("j")]))}] =
        parse_double(r[t.column("value")]);
    bracket = parse_double(r[t.column("bracket")]);
  }
  return {{"matrix", matrix_json(symmetric_from(d, entries))}, {"bracket", num(bracket)}};
}

// ---------------------------------------------------------------- gen-field

struct RunTotals {
  long long iterations = 0;
  std::vector<std::string> outputs;
};

void run_gen_field(const Config& c, const RunContext&, const fs::path& dir, FailureLog&, RunTotals& totals) {
  const int d = static_cast<int>(c.integer("field", "d"));
  const int side = static_cast<int>(c.integer("grid", "side"));
  const Cube cube = c.text("grid", "placement") == "centered" ? Cube::centered(d, side) : Cube::at_origin(d, side);
  const auto grid =
      sample_on_grid(field_from_config(c, c.seed("run", "seed")), cube, static_cast<int>(c.integer("grid", "cells_per_unit")));
  const auto& format = c.text("grid", "format");
  if (format != "binary") {
    std::ostringstream out;
    write_grid_csv(out, grid);
    write_file(dir / "field.csv", out.str());
    totals.outputs.push_back("field.csv");
  }
  if (format != "csv") {
    std::ostringstream out;
    write_grid_binary(out, grid);
    write_file(dir / "field.bin", out.str());
    totals.outputs.push_back("field.bin");
  }
}

json summarize_gen_field(const Config& c, const fs::path& dir, json& checks) {
  CellTensorGrid grid = [&] {
    if (fs::exists(dir / "field.csv")) {
      std::istringstream in(read_file(dir / "field.csv"));
      return read_grid_csv(in);
    }
    std::istringstream in(read_file(dir / "field.bin"));
    return read_grid_binary(in);
  }();
  const double bound = field_from_config(c, 0).ellipticity();
  checks["ellipticity_within_bound"] = grid.ellipticity() <= bound * (1 + 1e-12);
  return {{"cells", grid.cell_count()},
          {"ellipticity", num(grid.ellipticity())},
          {"ellipticity_bound", num(bound)},
          {"arithmetic_mean", matrix_json(grid.arithmetic_mean())},
          {"harmonic_mean", matrix_json(grid.harmonic_mean())}};
}

// ---------------------------------------------------------------- effmat

void run_effmat(const Config& c, const RunContext& ctx, const fs::path& dir, FailureLog& failures, RunTotals& totals) {
  const int d = static_cast<int>(c.integer("field", "d"));
  const int side = static_cast<int>(c.integer("effmat", "side"));
  const int m = static_cast<int>(c.integer("effmat", "cells_per_unit"));
  const int n = static_cast<int>(c.integer("effmat", "samples"));
  if (side < 1 || m < 1 || n < 1) throw ConfigError("effmat.side, cells_per_unit and samples must be positive");
  const Seed master = c.seed("run", "seed");
  const auto field = field_from_config(c, master);
  const auto solver = solver_from_config(c);

  struct Row {
    Seed seed;
    CubeResponse response;
    MatrixXd arithmetic, harmonic;
  };
  std::vector<std::optional<Row>> rows(static_cast<std::size_t>(n));
  parallel_for(rows.size(), ctx.threads, [&](std::size_t k) {
    const Seed seed = task_seed(master, Experiment::effmat, 0, static_cast<std::int64_t>(k));
    try {
      const auto grid = sample_on_grid(field.with_seed(seed), Cube::centered(d, side), m);
      rows[k] = Row{seed, cube_response(grid, solver), grid.arithmetic_mean(), grid.harmonic_mean()};
    } catch (const SolverFailure& e) {
      failures.add(side, static_cast<int>(k), seed, e);
    }
  });

  std::ostringstream csv;
  csv << header("d=" + std::to_string(d) + ",side=" + std::to_string(side) + ",m=" + std::to_string(m) +
                    ",seed=" + std::to_string(master) + ",field=" + std::string(to_string(field.kind())),
                "sample_idx,seed,i,j,a,b,arithmetic,harmonic,iterations,residual");
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (!rows[k]) continue;
    const auto& r = *rows[k];
    const auto& st = r.response.a.meta.stats;
    const auto& sb = r.response.b.meta.stats;
    totals.iterations += st.iterations + sb.iterations;
    for (auto [i, j] : upper_entries(d))
      csv << k << ',' << r.seed << ',' << i << ',' << j << ',' << format_double(r.response.a.matrix(i, j)) << ','
          << format_double(r.response.b.matrix(i, j)) << ',' << format_double(r.arithmetic(i, j)) << ','
          << format_double(r.harmonic(i, j)) << ',' << st.iterations + sb.iterations << ','
          << format_double(std::max(st.residual, sb.residual)) << '\n';
  }
  write_file(dir / "effmat.csv", csv.str());
  totals.outputs.push_back("effmat.csv");
}

json summarize_effmat(const Config& c, const fs::path& dir, json& checks) {
  const int d = static_cast<int>(c.integer("field", "d"));
  const auto t = load_csv(dir / "effmat.csv", "effmat CSV");
  std::map<int, std::map<std::string, std::map<std::pair<int, int>, double>>> samples;
  for (const auto& r : t.rows) {
    const int k = static_cast<int>(parse_int(r[t.column("sample_idx")]));
    const std::pair<int, int> ij{static_cast<int>(parse_int(r[t.column("i")])),
                                 static_cast<int>(parse_int(r[t.column("j")]))};
    for (const char* col : {"a", "b", "arithmetic", "harmonic"}) samples[k][col][ij] = parse_double(r[t.column(col)]);
  }
  json out{{"samples", samples.size()}};
  if (samples.empty()) return out;
  MatrixXd a_sum = MatrixXd::Zero(d, d), b_sum = a_sum, ar_sum = a_sum, h_sum = a_sum;
  bool arith_ok = true, harm_ok = true, dual_ok = true;
  double max_gap = -INFINITY;
  for (const auto& [k, s] : samples) {
    const MatrixXd a = symmetric_from(d, s.at("a")), b = symmetric_from(d, s.at("b"));
    const MatrixXd ar = symmetric_from(d, s.at("arithmetic")), h = symmetric_from(d, s.at("harmonic"));
    const double tol = tolerance_for(a);
    arith_ok = arith_ok && loewner_leq(a, ar, tol);
    harm_ok = harm_ok && loewner_leq(h, a, tol);
    const MatrixXd b_inv = b.inverse();
    dual_ok = dual_ok && loewner_leq(b_inv, a, tol);
    max_gap = std::max(max_gap, duality_gap_max(a, b));
    a_sum += a;
    b_sum += b;
    ar_sum += ar;
    h_sum += h;
  }
  const double n = static_cast<double>(samples.size());
  const MatrixXd a_mean = a_sum / n, b_mean = b_sum / n, ar_mean = ar_sum / n;
  const MatrixXd lower = b_mean.inverse();
  const MatrixXd midpoint = 0.5 * (a_mean + lower);
  checks["a_below_arithmetic"] = arith_ok;
  checks["a_above_harmonic"] = harm_ok;
  checks["dual_below_a"] = dual_ok;
  out["a_mean"] = matrix_json(a_mean);
  out["b_mean"] = matrix_json(b_mean);
  out["abar_estimate"] = matrix_json(midpoint);
  out["bracket"] = num(max_eigenvalue(MatrixXd(a_mean - lower)));
  out["arithmetic_mean"] = matrix_json(ar_mean);
  out["harmonic_mean"] = matrix_json(h_sum / n);
  out["deviation_from_arithmetic"] = num((midpoint - ar_mean).cwiseAbs().maxCoeff());
  out["max_sample_gap"] = num(max_gap);
  return out;
}

// ---------------------------------------------------------------- sweep

void run_sweep(const Config& c, const RunContext& ctx, const fs::path& dir, FailureLog& failures, RunTotals& totals) {
  SweepOptions o;
  o.scales = c.integers("sweep", "scales");
  o.samples = static_cast<int>(c.integer("sweep", "samples"));
  o.cells_per_unit = static_cast<int>(c.integer("sweep", "cells_per_unit"));
  o.seed = c.seed("run", "seed");
  o.mode = sampling_mode_from_string(c.text("sweep", "mode"));
  o.threads = ctx.threads;
  o.solver = solver_from_config(c);
  const auto series = scale_sweep(field_from_config(c, o.seed), o);
  for (const auto& l : series.levels) {
    failures.append(l.failures);
    for (const auto& s : l.samples)
      for (const auto& st : s.stats) totals.iterations += st.iterations;
  }
  std::ostringstream csv;
  write_sweep_csv(csv, series);
  write_file(dir / "sweep.csv", csv.str());
  totals.outputs.push_back("sweep.csv");
}

json summarize_sweep(const fs::path& dir, json& checks, json& fits) {
  std::istringstream in(read_file(dir / "sweep.csv"));
  const auto s = read_sweep_csv(in);
  const int d = s.dimension;
  json levels = json::array();
  bool gap_ok = true, complete = true;
  for (const auto& l : s.levels) {
    json row{{"scale", l.scale}, {"count", l.count()}};
    if (l.count() >= 2) {
      row["a_mean"] = matrix_json(l.a_mean);
      row["b_mean"] = matrix_json(l.b_mean);
      row["gap"] = estimate_json(duality_gap(l, d));
      row["mean_sample_gap"] = estimate_json(mean_sample_gap(l, d));
      row["nu_var"] = vector_json(l.nu_var);
      row["nu_star_var"] = vector_json(l.nu_star_var);
    } else {
      complete = false;
    }
    for (const auto& smp : l.samples) {
      const MatrixXd a = smp.a(d);
      gap_ok = gap_ok && duality_gap_max(a, smp.b(d)) >= -tolerance_for(a);
    }
    levels.push_back(row);
  }
  checks["sample_gap_nonnegative"] = gap_ok;
  json out{{"levels", levels}, {"complete", complete}};
  if (!complete) return out;

  const auto scales = s.scales();
  json decrease = json::array();
  bool a_mono = true, gap_mono = true;
  for (std::size_t i = 0; i + 1 < scales.size(); ++i) {
    const auto da = mean_decrease(s, scales[i], false);
    const auto db = mean_decrease(s, scales[i], true);
    const auto g0 = duality_gap(s.levels[i], d), g1 = duality_gap(s.levels[i + 1], d);
    const double floor = tolerance_for(s.levels[i].a_mean);
    a_mono = a_mono && da.value >= -2 * da.se - floor;
    gap_mono = gap_mono && g0.value - g1.value >= -2 * std::hypot(g0.se, g1.se) - floor;
    decrease.push_back({{"scale", scales[i]}, {"a", estimate_json(da)}, {"b", estimate_json(db)}});
  }
  checks["a_nonincreasing"] = a_mono;
  checks["gap_nonincreasing"] = gap_mono;
  out["decrease"] = decrease;

  if (scales.size() >= 3) {
    const auto table = duality_vs_additivity(s);
    json rows = json::array();
    for (const auto& r : table.rows) {
      json row{{"scale", r.scale}, {"gap", estimate_json(r.gap)}, {"ratio", num(r.ratio)}, {"reliable", r.reliable}};
      row["tau"] = r.tau ? estimate_json(*r.tau) : json(nullptr);
      rows.push_back(row);
    }
    out["duality_vs_additivity"] = rows;
    out["c_emp"] = num(table.c_emp);
    const auto fl = fluctuation_scaling(s, 0);
    out["fluctuation_stddev_e1"] = fl.stddevs;
    out["fluctuation_degenerate"] = fl.degenerate;
    if (!fl.degenerate) fits["fluctuation_e1"] = fit_json(fl.fit);
  }
  const auto est = abar_estimate(s.levels.back(), s.cells_per_unit);
  out["abar_estimate"] = {{"scale", scales.back()},
                          {"matrix", matrix_json(est.estimate.matrix)},
                          {"bracket", num(est.bracket)}};
  return out;
}

// ---------------------------------------------------------------- corrector

struct WindowKey {
  double scale;
  int slope;
  auto operator<=>(const WindowKey&) const = default;
};

// Window rows of one CSV grouped by (scale, slope), one FilteredStats per sample.
std::map<WindowKey, std::vector<FilteredStats>> read_windows(const CsvTable& t, int d, const std::string& source = "") {
  std::map<WindowKey, std::map<int, std::map<long long, VectorXd>>> acc;
  const bool has_source = !source.empty();
  for (const auto& r : t.rows) {
    if (has_source && r[t.column("source")] != source) continue;
    const WindowKey key{parse_double(r[t.column("scale")]),
                        has_source ? 0 : static_cast<int>(parse_int(r[t.column("slope")]))};
    const int k = static_cast<int>(parse_int(r[t.column("sample_idx")]));
    auto& v = acc[key][k][parse_int(r[t.column("center")])];
    if (v.size() == 0) v = VectorXd::Zero(d);
    v(static_cast<Index>(parse_int(r[t.column("component")]))) = parse_double(r[t.column("value")]);
  }
  std::map<WindowKey, std::vector<FilteredStats>> out;
  for (const auto& [key, by_sample] : acc)
    for (const auto& [k, centers] : by_sample) {
      FilteredStats f;
      f.scale = key.scale;
      f.values.resize(d, static_cast<Index>(centers.size()));
      Index j = 0;
      for (const auto& [node, v] : centers) f.values.col(j++) = v;
      out[key].push_back(f);
    }
  return out;
}

void write_windows(std::ostream& out, const std::string& prefix, double scale, int k, Seed seed,
                   const std::vector<Index>& centers, const FilteredStats& f) {
  for (std::size_t j = 0; j < centers.size(); ++j)
    for (Index i = 0; i < f.values.rows(); ++i)
      out << prefix << format_double(scale) << ',' << k << ',' << seed << ',' << centers[j] << ',' << i << ','
          << format_double(f.values(i, static_cast<Index>(j))) << '\n';
}

std::vector<Index> centers_for(const GridGeometry& g, double r, double spacing) {
  auto centers = bulk_window_centers(g, r, spacing > 0 ? spacing : r);
  if (centers.empty()) throw ConfigError("no filter window of scale " + format_double(r) + " fits in the cube");
  return centers;
}

void dump_nodal(const fs::path& path, const ScalarField& f, Seed seed) {
  std::ostringstream out;
  write_nodal_binary(out, f, seed);
  write_file(path, out.str());
}

void run_corrector(const Config& c, const RunContext& ctx, const fs::path& dir, FailureLog& failures,
                   RunTotals& totals) {
  const int d = static_cast<int>(c.integer("field", "d"));
  const int side = static_cast<int>(c.integer("corrector", "side"));
  const int m = static_cast<int>(c.integer("corrector", "cells_per_unit"));
  const int n = static_cast<int>(c.integer("corrector", "samples"));
  const auto scales = c.reals("corrector", "filter_scales");
  const auto radii = c.reals("corrector", "growth_radii");
  const double spacing = c.real("corrector", "spacing");
  const auto kind = kernel_kind_from_string(c.text("corrector", "kernel"));
  if (n < 1 || scales.empty()) throw ConfigError("corrector.samples and filter_scales must be nonempty");
  const Seed master = c.seed("run", "seed");
  const auto field = field_from_config(c, master);
  const auto solver = solver_from_config(c);

  struct Result {
    Seed seed = 0;
    std::vector<std::vector<FilteredStats>> windows;  // [slope][scale]
    std::vector<GrowthProfile> growth;                // [slope]
    long long iterations = 0;
  };
  std::vector<std::optional<Result>> results(static_cast<std::size_t>(n));
  const auto geo = GridGeometry::of(CellTensorGrid::uniform(Cube::centered(d, side), m, MatrixXd::Identity(d, d)));
  std::vector<std::vector<Index>> centers;
  for (double r : scales) centers.push_back(centers_for(geo, r, spacing));

  parallel_for(results.size(), ctx.threads, [&](std::size_t k) {
    const Seed seed = task_seed(master, Experiment::corrector, 0, static_cast<std::int64_t>(k));
    try {
      const auto grid = sample_on_grid(field.with_seed(seed), Cube::centered(d, side), m);
      Result res;
      res.seed = seed;
      for (int s = 0; s < d; ++s) {
        const auto corr = solve_corrector(grid, VectorXd::Unit(d, s), solver);
        res.iterations += corr.phi.stats.iterations;
        std::vector<FilteredStats> w;
        for (std::size_t i = 0; i < scales.size(); ++i)
          w.push_back(filtered_gradient_average(corr, FilterKernel{kind, scales[i]}, centers[i]));
        res.windows.push_back(std::move(w));
        res.growth.push_back(corrector_growth(corr, radii));
        if (k == 0 && c.flag("corrector", "dump"))
          dump_nodal(dir / ("corrector_phi_e" + std::to_string(s + 1) + ".bin"), corr.phi, seed);
      }
      if (k == 0 && c.flag("corrector", "dump")) {
        std::ostringstream out;
        write_grid_binary(out, grid);
        write_file(dir / "corrector_field.bin", out.str());
      }
      results[k] = std::move(res);
    } catch (const SolverFailure& e) {
      failures.add(side, static_cast<int>(k), seed, e);
    }
  });

  const std::string meta = "d=" + std::to_string(d) + ",side=" + std::to_string(side) + ",m=" + std::to_string(m) +
                           ",seed=" + std::to_string(master) + ",field=" + std::string(to_string(field.kind())) +
                           ",kernel=" + std::string(to_string(kind));
  std::ostringstream win, grow;
  win << header(meta, "scale,sample_idx,seed,slope,center,component,value");
  grow << header(meta, "sample_idx,seed,slope,radius,stddev");
  for (std::size_t i = 0; i < scales.size(); ++i)
    for (std::size_t k = 0; k < results.size(); ++k)
      if (results[k])
        for (int s = 0; s < d; ++s) {
          std::ostringstream prefix_rows;
          for (std::size_t j = 0; j < centers[i].size(); ++j)
            for (Index comp = 0; comp < d; ++comp)
              win << format_double(scales[i]) << ',' << k << ',' << results[k]->seed << ',' << s << ','
                  << centers[i][j] << ',' << comp << ','
                  << format_double(results[k]->windows[s][i].values(comp, static_cast<Index>(j))) << '\n';
        }
  for (std::size_t k = 0; k < results.size(); ++k)
    if (results[k]) {
      totals.iterations += results[k]->iterations;
      for (int s = 0; s < d; ++s)
        for (std::size_t j = 0; j < radii.size(); ++j)
          grow << k << ',' << results[k]->seed << ',' << s << ',' << format_double(radii[j]) << ','
               << format_double(results[k]->growth[s].stddev[j]) << '\n';
    }
  write_file(dir / "corrector_windows.csv", win.str());
  write_file(dir / "growth.csv", grow.str());
  totals.outputs.insert(totals.outputs.end(), {"corrector_windows.csv", "growth.csv"});
  if (c.flag("corrector", "dump") && results.front()) {
    totals.outputs.emplace_back("corrector_field.bin");
    for (int s = 0; s < d; ++s) totals.outputs.push_back("corrector_phi_e" + std::to_string(s + 1) + ".bin");
  }
}

json summarize_corrector(const Config& c, const fs::path& dir, json& fits) {
  const int d = static_cast<int>(c.integer("field", "d"));
  const auto windows = read_windows(load_csv(dir / "corrector_windows.csv", "corrector windows CSV"), d);
  json out;
  json decay = json::array();
  for (int s = 0; s < d; ++s) {
    std::vector<double> scales, sd;
    json rows = json::array();
    for (const auto& [key, parts] : windows) {
      if (key.slope != s) continue;
      const auto pooled = pool(parts);
      scales.push_back(key.scale);
      sd.push_back(std::sqrt(pooled.variance.sum()));
      rows.push_back({{"scale", key.scale},
                      {"realizations", pooled.realizations},
                      {"windows", pooled.values.cols()},
                      {"variance", vector_json(pooled.variance)},
                      {"stddev", num(sd.back())}});
    }
    decay.push_back({{"slope", s + 1}, {"scales", rows}});
    const bool positive = std::all_of(sd.begin(), sd.end(), [](double x) { return x > 0; });
    if (scales.size() >= 3 && positive) fits["decay_e" + std::to_string(s + 1)] = fit_json(fit_exponent(scales, sd));
  }
  out["filtered_gradient"] = decay;

  const auto t = load_csv(dir / "growth.csv", "growth CSV");
  std::map<int, std::map<double, std::pair<double, int>>> acc;
  for (const auto& r : t.rows) {
    auto& cell = acc[static_cast<int>(parse_int(r[t.column("slope")]))][parse_double(r[t.column("radius")])];
    const double sdv = parse_double(r[t.column("stddev")]);
    cell.first += sdv * sdv;
    cell.second += 1;
  }
  json growth = json::array();
  for (const auto& [s, by_radius] : acc) {
    std::vector<double> log_r, var;
    json rows = json::array();
    for (const auto& [rho, sum] : by_radius) {
      log_r.push_back(std::log(rho));
      var.push_back(sum.first / sum.second);
      rows.push_back({{"radius", rho}, {"mean_variance", num(var.back())}});
    }
    growth.push_back({{"slope", s + 1}, {"radii", rows}});
    if (d == 2 && log_r.size() >= 3) fits["growth_log_e" + std::to_string(s + 1)] = fit_json(linear_fit(log_r, var));
  }
  out["growth"] = growth;
  return out;
}

// ---------------------------------------------------------------- gff-compare

void run_gff(const Config& c, const RunContext& ctx, const fs::path& dir, FailureLog& failures, RunTotals& totals) {
  const int d = static_cast<int>(c.integer("field", "d"));
  const int side = static_cast<int>(c.integer("gff", "side"));
  const int m = static_cast<int>(c.integer("gff", "cells_per_unit"));
  const int n = static_cast<int>(c.integer("gff", "samples"));
  const auto scales = c.reals("gff", "filter_scales");
  const auto kind = kernel_kind_from_string(c.text("gff", "kernel"));
  const FilterKernel noise{kernel_kind_from_string(c.text("gff", "noise_kernel")), c.real("gff", "noise_scale")};
  if (n < 16) throw ConfigError("gff.samples must be >= 16");
  if (scales.empty()) throw ConfigError("gff.filter_scales must be nonempty");
  const Seed master = c.seed("run", "seed");
  const auto field = field_from_config(c, master);
  const auto solver = solver_from_config(c);
  const auto abar = resolve_abar(c, ctx, failures, dir);
  totals.outputs.push_back("abar.csv");

  const Cube cube = Cube::centered(d, side);
  const auto geo = GridGeometry::of(CellTensorGrid::uniform(cube, m, MatrixXd::Identity(d, d)));
  std::vector<std::vector<Index>> centers;
  for (double r : scales) centers.push_back(centers_for(geo, r, r));
  const VectorXd p = VectorXd::Unit(d, 0);

  struct Result {
    Seed seed_c = 0, seed_s = 0;
    std::vector<FilteredStats> corr, sur;
    std::optional<ScalarField> phi, psi;
    long long iterations = 0;
  };
  std::vector<std::optional<Result>> results(static_cast<std::size_t>(n));
  parallel_for(results.size(), ctx.threads, [&](std::size_t k) {
    Result res;
    res.seed_c = task_seed(master, Experiment::gff_compare, 0, static_cast<std::int64_t>(k));
    res.seed_s = task_seed(master, Experiment::gff_compare, 1, static_cast<std::int64_t>(k));
    try {
      const auto corr = solve_corrector(sample_on_grid(field.with_seed(res.seed_c), cube, m), p, solver);
      const auto psi = gaussian_surrogate(abar.matrix, p, cube, m, noise, res.seed_s, 1.0, solver);
      res.iterations = corr.phi.stats.iterations + psi.stats.iterations;
      const MatrixXd grad = cell_gradient(psi);
      for (std::size_t i = 0; i < scales.size(); ++i) {
        res.corr.push_back(filtered_gradient_average(corr, FilterKernel{kind, scales[i]}, centers[i]));
        res.sur.push_back(filtered_gradient_average(psi.geometry, grad, FilterKernel{kind, scales[i]}, centers[i]));
      }
      if (k == 0) {
        res.phi = corr.phi;
        res.psi = psi;
      }
      results[k] = std::move(res);
    } catch (const SolverFailure& e) {
      failures.add(side, static_cast<int>(k), res.seed_c, e);
    }
  });

  const std::string meta = "d=" + std::to_string(d) + ",side=" + std::to_string(side) + ",m=" + std::to_string(m) +
                           ",seed=" + std::to_string(master) + ",field=" + std::string(to_string(field.kind())) +
                           ",kernel=" + std::string(to_string(kind));
  std::ostringstream csv;
  csv << header(meta, "source,scale,sample_idx,seed,center,component,value");
  for (const char* source : {"corrector", "surrogate"})
    for (std::size_t i = 0; i < scales.size(); ++i)
      for (std::size_t k = 0; k < results.size(); ++k)
        if (results[k]) {
          const bool is_corr = std::string_view(source) == "corrector";
          write_windows(csv, std::string(source) + ",", scales[i], static_cast<int>(k),
                        is_corr ? results[k]->seed_c : results[k]->seed_s, centers[i],
                        is_corr ? results[k]->corr[i] : results[k]->sur[i]);
        }
  for (const auto& r : results)
    if (r) totals.iterations += r->iterations;
  write_file(dir / "gff_windows.csv", csv.str());
  totals.outputs.push_back("gff_windows.csv");

  if (c.flag("gff", "dump") && results.front() && results.front()->phi) {
    // The surrogate panel carries the calibrated amplitude.
    const auto windows = load_csv(dir / "gff_windows.csv", "gff windows CSV");
    const auto corr = read_windows(windows, d, "corrector");
    const auto sur = read_windows(windows, d, "surrogate");
    const double amp = calibrate_amplitude(pool(corr.begin()->second), pool(sur.begin()->second));
    ScalarField psi = *results.front()->psi;
    psi.values *= amp;
    dump_nodal(dir / "gff_corrector.bin", *results.front()->phi, results.front()->seed_c);
    dump_nodal(dir / "gff_surrogate.bin", psi, results.front()->seed_s);
    totals.outputs.insert(totals.outputs.end(), {"gff_corrector.bin", "gff_surrogate.bin"});
  }
}

json summarize_gff(const Config& c, const fs::path& dir, json& fits) {
  const int d = static_cast<int>(c.integer("field", "d"));
  const auto t = load_csv(dir / "gff_windows.csv", "gff windows CSV");
  const auto corr = read_windows(t, d, "corrector");
  const auto sur = read_windows(t, d, "surrogate");
  json out{{"abar", abar_summary(dir, d)}};
  if (corr.empty() || corr.size() != sur.size()) return out;
  std::vector<FilteredStats> pc, ps;
  std::vector<double> scales, sd_c, sd_s;
  for (const auto& [key, parts] : corr) {
    pc.push_back(pool(parts));
    ps.push_back(pool(sur.at(key)));
    scales.push_back(key.scale);
    sd_c.push_back(std::sqrt(pc.back().variance.sum()));
    sd_s.push_back(std::sqrt(ps.back().variance.sum()));
  }
  const double amp = calibrate_amplitude(pc.front(), ps.front());
  for (auto& s : ps) {
    s.values *= amp;
    s.variance *= amp * amp;
  }
  json rows = json::array();
  std::map<int, std::pair<double, double>> range;  // per direction: min and max ratio over scales
  for (const auto& r : compare_corrector_gff(pc, ps)) {
    rows.push_back({{"scale", r.scale},
                    {"direction", r.direction + 1},
                    {"var_corrector", num(r.var_corrector)},
                    {"var_surrogate", num(r.var_surrogate)},
                    {"ratio", num(r.ratio)},
                    {"degenerate", r.degenerate}});
    if (r.degenerate) continue;
    auto [it, fresh] = range.try_emplace(r.direction, r.ratio, r.ratio);
    it->second.first = std::min(it->second.first, r.ratio);
    it->second.second = std::max(it->second.second, r.ratio);
  }
  // Variation of the ratio across scales, worst direction; the level may differ
  // between directions since the surrogate noise is isotropic.
  double spread = range.empty() ? NAN : 1.0;
  for (const auto& [dir, lh] : range) spread = std::max(spread, lh.second / lh.first);
  out["amplitude"] = num(amp);
  out["rows"] = rows;
  out["ratio_spread"] = num(spread);
  if (scales.size() >= 3) {
    fits["corrector_decay"] = fit_json(fit_exponent(scales, sd_c));
    fits["surrogate_decay"] = fit_json(fit_exponent(scales, sd_s));
  }
  return out;
}

// ---------------------------------------------------------------- error-scaling

void run_error(const Config& c, const RunContext& ctx, const fs::path& dir, FailureLog& failures, RunTotals& totals) {
  ErrorScalingOptions o;
  o.d = static_cast<int>(c.integer("field", "d"));
  o.f = boundary_function_from_string(c.text("error", "f"));
  o.inv_eps = c.integers("error", "inv_eps");
  o.cells_per_eps = static_cast<int>(c.integer("error", "cells_per_eps"));
  o.samples = static_cast<int>(c.integer("error", "samples"));
  o.seed = c.seed("run", "seed");
  o.method = error_method_from_string(c.text("error", "method"));
  o.two_scale = c.flag("error", "two_scale");
  o.threads = ctx.threads;
  o.solver = solver_from_config(c);
  const auto field = field_from_config(c, o.seed);

  MatrixXd abar = MatrixXd::Identity(o.d, o.d);
  if (o.method == ErrorMethod::fem) {
    abar = resolve_abar(c, ctx, failures, dir).matrix;
    totals.outputs.push_back("abar.csv");
  }
  const auto s = error_scaling(field, abar, o);
  failures.append(s.failures);
  for (const auto& r : s.rows) totals.iterations += r.iterations;
  std::ostringstream csv;
  write_error_csv(csv, s);
  write_file(dir / "errors.csv", csv.str());
  totals.outputs.push_back("errors.csv");

  const double rho = c.real("error", "weak_rho");
  if (rho <= 0) return;
  if (o.method != ErrorMethod::fem) throw ConfigError("error.weak_rho needs error.method = fem");
  struct Weak {
    Seed seed;
    WeakConvergence w;
  };
  const std::size_t n_eps = o.inv_eps.size(), n = static_cast<std::size_t>(o.samples);
  std::vector<BoundaryValueProblem> problems;
  std::vector<EpsSolution> homogenized;
  for (int inv : o.inv_eps) {
    BoundaryValueProblem p;
    p.d = o.d;
    p.f = o.f;
    p.inv_eps = inv;
    p.cells_per_eps = o.cells_per_eps;
    problems.push_back(p);
    homogenized.push_back(solve_homogenized(abar, p, o.solver));
  }
  std::vector<std::optional<Weak>> weak(n_eps * n);
  parallel_for(weak.size(), ctx.threads, [&](std::size_t task) {
    const std::size_t i = task / n, k = task % n;
    const Seed seed = task_seed(o.seed, Experiment::error_scaling, static_cast<std::int64_t>(i),
                                static_cast<std::int64_t>(k));
    try {
      const auto ue = solve_eps(problems[i], field, seed, o.solver);
      weak[task] = Weak{seed, weak_convergence_check(ue, homogenized[i], abar, rho)};
    } catch (const SolverFailure&) {
      // Already recorded by the error run.
    }
  });
  std::ostringstream w;
  w << header("rho=" + format_double(rho), "eps,sample_idx,seed,windows,gradient_window,flux_window,gradient_pointwise");
  for (std::size_t task = 0; task < weak.size(); ++task)
    if (weak[task]) {
      const auto& r = weak[task]->w;
      w << format_double(problems[task / n].eps()) << ',' << task % n << ',' << weak[task]->seed << ','
        << r.windows << ',' << format_double(r.gradient_window) << ',' << format_double(r.flux_window) << ','
        << format_double(r.gradient_pointwise) << '\n';
    }
  write_file(dir / "weak.csv", w.str());
  totals.outputs.push_back("weak.csv");
}

json summarize_error(const Config& c, const fs::path& dir, json& checks, json& fits) {
  std::istringstream in(read_file(dir / "errors.csv"));
  const auto s = read_error_csv(in);
  json out;
  json rows = json::array();
  std::map<double, std::pair<double, int>, std::greater<>> ts, plain;
  bool below = true;
  for (const auto& r : s.rows)
    if (std::isfinite(r.h1_two_scale) && std::isfinite(r.h1_plain)) {
      below = below && r.h1_two_scale < r.h1_plain;
      ts[r.eps].first += r.h1_two_scale;
      ts[r.eps].second += 1;
      plain[r.eps].first += r.h1_plain;
      plain[r.eps].second += 1;
    }
  bool monotone = true;
  for (std::size_t i = 0; i < s.eps.size(); ++i) {
    json row{{"eps", s.eps[i]}, {"mean_l2_error", num(s.mean_error[i])}, {"se", num(s.se_error[i])}};
    if (ts.contains(s.eps[i])) {
      row["mean_h1_two_scale"] = num(ts[s.eps[i]].first / ts[s.eps[i]].second);
      row["mean_h1_plain"] = num(plain[s.eps[i]].first / plain[s.eps[i]].second);
    }
    rows.push_back(row);
    if (i > 0) monotone = monotone && s.mean_error[i] <= s.mean_error[i - 1] + 2 * (s.se_error[i] + s.se_error[i - 1]);
  }
  out["eps"] = rows;
  out["degenerate"] = s.degenerate;
  checks["error_nonincreasing"] = monotone;
  if (!ts.empty()) checks["two_scale_below_plain"] = below;
  if (!s.degenerate && s.eps.size() >= 3) {
    fits["l2_error"] = fit_json(s.fit);
    if (s.options.d == 2) fits["l2_error_log"] = fit_json(s.fit_log);
  }
  if (fs::exists(dir / "abar.csv")) out["abar"] = abar_summary(dir, s.options.d);

  if (fs::exists(dir / "weak.csv")) {
    const auto t = load_csv(dir / "weak.csv", "weak-convergence CSV");
    std::map<double, std::array<double, 4>, std::greater<>> acc;
    for (const auto& r : t.rows) {
      auto& a = acc[parse_double(r[t.column("eps")])];
      a[0] += parse_double(r[t.column("gradient_window")]);
      a[1] += parse_double(r[t.column("flux_window")]);
      a[2] += parse_double(r[t.column("gradient_pointwise")]);
      a[3] += 1;
    }
    json weak = json::array();
    std::vector<double> window, pointwise;
    for (const auto& [eps, a] : acc) {
      window.push_back(a[0] / a[3]);
      pointwise.push_back(a[2] / a[3]);
      weak.push_back({{"eps", eps},
                      {"gradient_window", num(window.back())},
                      {"flux_window", num(a[1] / a[3])},
                      {"gradient_pointwise", num(pointwise.back())}});
    }
    out["weak"] = weak;
    out["weak_rho"] = parse_double(csv_metadata(t, "weak-convergence CSV").at("rho"));
    bool dec = true, persists = true;
    for (std::size_t i = 1; i < window.size(); ++i) {
      dec = dec && window[i] < window[i - 1];
      persists = persists && pointwise[i] >= 0.1 * pointwise.front();
    }
    checks["weak_window_decreasing"] = dec;
    checks["pointwise_persists"] = persists;
  }
  (void)c;
  return out;
}

// ---------------------------------------------------------------- regularity

void run_regularity(const Config& c, const RunContext& ctx, const fs::path& dir, FailureLog& failures,
                    RunTotals& totals) {
  const auto radii = c.integers("regularity", "radii");
  const int draws = static_cast<int>(c.integer("regularity", "draws"));
  const int m = static_cast<int>(c.integer("regularity", "cells_per_unit"));
  const Seed master = c.seed("run", "seed");
  const auto field = field_from_config(c, master);
  const auto solver = solver_from_config(c);
  std::vector<std::optional<RegularityResult>> results(radii.size());
  parallel_for(radii.size(), ctx.threads, [&](std::size_t i) {
    try {
      results[i] = regularity_ratio(field, radii[i], draws, m, master, solver);
    } catch (const SolverFailure& e) {
      failures.add(radii[i], -1, master, e);
    }
  });
  std::ostringstream csv;
  csv << header("d=" + std::to_string(field.dimension()) + ",m=" + std::to_string(m) + ",seed=" +
                    std::to_string(master) + ",draws=" + std::to_string(draws),
                "r,draw,status,gradient_ratio,l2_ratio_r2,l2_ratio_r1");
  for (const auto& r : results) {
    if (!r) continue;
    std::size_t next = 0;
    for (int i = 0; i < draws; ++i) {
      csv << r->r << ',' << i << ',';
      if (std::find(r->skipped.begin(), r->skipped.end(), i) != r->skipped.end()) {
        csv << "skipped,nan,nan,nan\n";
        continue;
      }
      const auto& s = r->samples[next++];
      csv << "ok," << format_double(s.gradient_ratio) << ',' << format_double(s.l2_ratio_r2) << ','
          << format_double(s.l2_ratio_r1) << '\n';
    }
  }
  write_file(dir / "regularity.csv", csv.str());
  totals.outputs.push_back("regularity.csv");
}

json summarize_regularity(const fs::path& dir, json& checks) {
  const auto t = load_csv(dir / "regularity.csv", "regularity CSV");
  std::map<int, RegularityResult> by_r;
  for (const auto& row : t.rows) {
    const int r = static_cast<int>(parse_int(row[t.column("r")]));
    auto& res = by_r[r];
    res.r = r;
    if (row[t.column("status")] == "skipped") {
      res.skipped.push_back(static_cast<int>(parse_int(row[t.column("draw")])));
      continue;
    }
    res.samples.push_back({parse_double(row[t.column("gradient_ratio")]), parse_double(row[t.column("l2_ratio_r2")]),
                           parse_double(row[t.column("l2_ratio_r1")])});
  }
  json rows = json::array();
  bool positive = true;
  for (auto& [r, res] : by_r) {
    summarize(res);
    for (const auto& s : res.samples) positive = positive && s.gradient_ratio > 0 && std::isfinite(s.gradient_ratio);
    rows.push_back({{"r", r},
                    {"samples", res.samples.size()},
                    {"skipped", res.skipped.size()},
                    {"max_ratio", num(res.max_ratio)},
                    {"median_ratio", num(res.median_ratio)},
                    {"q90_ratio", num(res.q90_ratio)}});
  }
  checks["ratios_positive"] = positive;
  return {{"radii", rows}};
}

// ---------------------------------------------------------------- bundles

void write_failures(const fs::path& dir, const std::vector<SampleFailure>& failures) {
  std::ostringstream out;
  write_failures_csv(out, failures);
  write_file(dir / "failures.csv", out.str());
}

bool all_checks_pass(const json& summary) {
  for (const auto& [name, ok] : summary.at("checks").items())
    if (!ok.get<bool>()) return false;
  return true;
}

}  // namespace

int run_experiment(const Config& config, const RunContext& context) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir = context.output_dir;
  fs::create_directories(dir);
  write_file(dir / "config.ini", config.to_text());

  FailureLog failures;
  RunTotals totals;
  const auto& e = config.experiment();
  if (e == "gen-field") run_gen_field(config, context, dir, failures, totals);
  else if (e == "effmat") run_effmat(config, context, dir, failures, totals);
  else if (e == "sweep") run_sweep(config, context, dir, failures, totals);
  else if (e == "corrector") run_corrector(config, context, dir, failures, totals);
  else if (e == "gff-compare") run_gff(config, context, dir, failures, totals);
  else if (e == "error-scaling") run_error(config, context, dir, failures, totals);
  else if (e == "regularity") run_regularity(config, context, dir, failures, totals);
  else throw ConfigError("unknown experiment '" + e + "'");
  const auto failed = failures.sorted();
  write_failures(dir, failed);

  const json summary = summarize_bundle(dir);
  write_file(dir / "summary.json", summary.dump(2) + "\n");

  const int code = !failed.empty() ? kSolverFailure : all_checks_pass(summary) ? kSuccess : kInvariantFailure;
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  totals.outputs.insert(totals.outputs.begin(), "config.ini");
  totals.outputs.insert(totals.outputs.end(), {"failures.csv", "summary.json"});
  const json run{{"experiment", e},
                 {"seed", config.seed("run", "seed")},
                 {"threads", resolve_threads(context.threads)},
                 {"wall_seconds", seconds},
                 {"solver_iterations", totals.iterations},
                 {"failures", failed.size()},
                 {"exit_code", code},
                 {"outputs", totals.outputs}};
  write_file(dir / "run.json", run.dump(2) + "\n");
  return code;
}

json summarize_bundle(const fs::path& dir) {
  const auto config = Config::load((dir / "config.ini").string());
  json checks = json::object(), fits = json::object(), stats;
  const auto& e = config.experiment();
  if (e == "gen-field") stats = summarize_gen_field(config, dir, checks);
  else if (e == "effmat") stats = summarize_effmat(config, dir, checks);
  else if (e == "sweep") stats = summarize_sweep(dir, checks, fits);
  else if (e == "corrector") stats = summarize_corrector(config, dir, fits);
  else if (e == "gff-compare") stats = summarize_gff(config, dir, fits);
  else if (e == "error-scaling") stats = summarize_error(config, dir, checks, fits);
  else if (e == "regularity") stats = summarize_regularity(dir, checks);
  return {{"schema", kSchemaVersion},
          {"experiment", e},
          {"seed", config.seed("run", "seed")},
          {"field", std::string(to_string(config.field_kind()))},
          {"d", config.integer("field", "d")},
          {"failures", count_rows(dir / "failures.csv")},
          {"checks", checks},
          {"fits", fits},
          {"statistics", stats}};
}

int report(const std::vector<fs::path>& dirs, std::ostream& out, json& result) {
  if (dirs.empty()) throw ConfigError("report needs at least one bundle");
  result = {{"schema", kSchemaVersion}, {"bundles", json::array()}};
  std::map<std::string, std::vector<std::pair<std::string, json>>> fits_by_name;
  std::set<std::string> check_names;
  bool all_pass = true;
  std::vector<json> rows;
  for (const auto& dir : dirs) {
    const json summary = summarize_bundle(dir);
    bool matches = true;
    if (fs::exists(dir / "summary.json")) matches = json::parse(read_file(dir / "summary.json")) == summary;
    const int failures = summary.at("failures").get<int>();
    const bool pass = failures == 0 && all_checks_pass(summary) && matches;
    all_pass = all_pass && pass;
    json row{{"path", dir.string()},
             {"experiment", summary.at("experiment")},
             {"seed", summary.at("seed")},
             {"status", failures > 0 ? "FAILED" : pass ? "PASS" : "FAIL"},
             {"failures", failures},
             {"summary_matches", matches},
             {"checks", summary.at("checks")},
             {"fits", summary.at("fits")}};
    for (const auto& [name, ok] : summary.at("checks").items()) check_names.insert(name);
    for (const auto& [name, fit] : summary.at("fits").items())
      fits_by_name[summary.at("experiment").get<std::string>() + "/d" + std::to_string(summary.at("d").get<int>()) +
                   "/" + name]
          .emplace_back(dir.string(), fit);
    rows.push_back(row);
    result["bundles"].push_back(row);
  }

  out << "bundle status:\n";
  for (const auto& r : rows)
    out << "  " << std::left << std::setw(40) << r.at("path").get<std::string>() << std::setw(16)
        << r.at("experiment").get<std::string>() << std::setw(8) << r.at("status").get<std::string>()
        << "failures=" << r.at("failures").get<int>() << (r.at("summary_matches").get<bool>() ? "" : " summary-mismatch")
        << '\n';
  if (!check_names.empty()) {
    out << "invariant checks:\n";
    json matrix = json::object();
    for (const auto& name : check_names) {
      out << "  " << std::left << std::setw(28) << name;
      for (const auto& r : rows) {
        std::string cell = "-";
        if (r.at("status") == "FAILED") cell = "FAILED";
        else if (r.at("checks").contains(name)) cell = r.at("checks").at(name).get<bool>() ? "PASS" : "FAIL";
        matrix[name][r.at("path").get<std::string>()] = cell;
        out << ' ' << std::setw(7) << cell;
      }
      out << '\n';
    }
    result["matrix"] = matrix;
  }
  if (!fits_by_name.empty()) {
    out << "fits (slope +- 1.96 se):\n";
    json consistency = json::object();
    for (const auto& [name, entries] : fits_by_name) {
      bool overlap = true;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& f = entries[i].second;
        const double s = f.at("slope").is_null() ? NAN : f.at("slope").get<double>();
        const double se = f.at("stderr").is_null() ? NAN : f.at("stderr").get<double>();
        out << "  " << std::left << std::setw(36) << name << std::setw(40) << entries[i].first << std::right
            << std::setw(10) << std::setprecision(4) << std::fixed << s << " +- " << 1.96 * se
            << "  r2=" << std::setprecision(3) << f.at("r2").get<double>() << std::defaultfloat << '\n';
        for (std::size_t j = 0; j < i; ++j) {
          const auto& g = entries[j].second;
          const double dt = std::abs(s - g.at("slope").get<double>());
          overlap = overlap && dt <= 1.96 * (se + g.at("stderr").get<double>());
        }
      }
      if (entries.size() > 1) {
        consistency[name] = overlap;
        out << "  " << name << ": " << (overlap ? "consistent" : "inconsistent") << " across bundles\n";
      }
    }
    result["consistency"] = consistency;
  }
  result["status"] = all_pass ? "PASS" : "FAIL";
  return all_pass ? kSuccess : kInvariantFailure;
}

}  // namespace homlab::cli
