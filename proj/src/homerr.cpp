#include "homlab/homerr.hpp"

#include "homlab/io.hpp"
#include "homlab/linalg.hpp"
#include "homlab/parallel.hpp"
#include "homlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

namespace homlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// One-axis multilinear mass factors: int_0^1 phi_a phi_b for the two hat pieces.
double mass_factor(int a, int b) { return a == b ? 1.0 / 3.0 : 1.0 / 6.0; }

void require_same_grid(const ScalarField& u, const ScalarField& v) {
  if (!(u.geometry == v.geometry)) throw InvalidParameter("fields live on different grids");
  if (u.values.size() != v.values.size()) throw InvalidParameter("field sizes differ");
}

// Corner differences of e on one cell, in local-corner order.
VectorXd corner_values(const GridGeometry& g, Index cell, const VectorXd& e) {
  const int corners = 1 << g.d;
  VectorXd out(corners);
  for (int a = 0; a < corners; ++a) out(a) = e(g.cell_node(cell, a));
  return out;
}

double cell_l2_sq(const GridGeometry& g, const VectorXd& ec) {
  const int corners = 1 << g.d;
  double s = 0;
  for (int a = 0; a < corners; ++a)
    for (int b = 0; b < corners; ++b) {
      double w = 1;
      for (int i = 0; i < g.d; ++i) w *= mass_factor((a >> i) & 1, (b >> i) & 1);
      s += ec(a) * ec(b) * w;
    }
  return s * std::pow(g.h, g.d);
}

double cell_h1_sq(const GridGeometry& g, const VectorXd& ec) {
  const int corners = 1 << g.d;
  double s = 0;
  for (int i = 0; i < g.d; ++i) {
    const int bit = 1 << i;
    for (int a = 0; a < corners; ++a) {
      if (a & bit) continue;
      const double ga = (ec(a | bit) - ec(a)) / g.h;
      for (int b = 0; b < corners; ++b) {
        if (b & bit) continue;
        const double gb = (ec(b | bit) - ec(b)) / g.h;
        double w = 1;
        for (int j = 0; j < g.d; ++j)
          if (j != i) w *= mass_factor((a >> j) & 1, (b >> j) & 1);
        s += ga * gb * w;
      }
    }
  }
  return s * std::pow(g.h, g.d);
}

// Nodal gradient: average of the constant gradients of the adjacent cells.
MatrixXd nodal_gradient(const ScalarField& u) {
  const auto& g = u.geometry;
  const MatrixXd cg = cell_gradient(u);
  MatrixXd sum = MatrixXd::Zero(g.d, g.node_count());
  VectorXd count = VectorXd::Zero(g.node_count());
  for (Index c = 0; c < g.cell_count(); ++c)
    for (int a = 0; a < (1 << g.d); ++a) {
      const Index n = g.cell_node(c, a);
      sum.col(n) += cg.col(c);
      count(n) += 1;
    }
  for (Index n = 0; n < g.node_count(); ++n) sum.col(n) /= count(n);
  return sum;
}

Index node_at(const GridGeometry& g, std::span<const int> c) {
  Index idx = 0, stride = 1;
  for (int i = 0; i < g.d; ++i) {
    if (c[i] < 0 || c[i] > g.cells_per_axis) return -1;
    idx += c[i] * stride;
    stride *= g.nodes_per_axis();
  }
  return idx;
}

double mean_of(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

}  // namespace

std::string_view to_string(BoundaryFunction f) {
  switch (f) {
    case BoundaryFunction::affine: return "affine";
    case BoundaryFunction::quadratic: return "quadratic";
    case BoundaryFunction::sine: return "sine";
  }
  return "?";
}

BoundaryFunction boundary_function_from_string(std::string_view name) {
  if (name == "affine") return BoundaryFunction::affine;
  if (name == "quadratic") return BoundaryFunction::quadratic;
  if (name == "sine") return BoundaryFunction::sine;
  throw ConfigError("unknown boundary function '" + std::string(name) + "'");
}

std::string_view to_string(ErrorMethod m) { return m == ErrorMethod::fem ? "fem" : "oracle"; }

ErrorMethod error_method_from_string(std::string_view name) {
  if (name == "fem") return ErrorMethod::fem;
  if (name == "oracle") return ErrorMethod::oracle;
  throw ConfigError("unknown error method '" + std::string(name) + "'");
}

double evaluate(BoundaryFunction f, const VectorXd& x) {
  using std::numbers::pi;
  const auto d = x.size();
  switch (f) {
    case BoundaryFunction::affine: {
      double s = 0, w = 1;
      for (Index i = 0; i < d; ++i, w /= 2) s += w * x(i);
      return s;
    }
    case BoundaryFunction::quadratic:
      return d == 1 ? x(0) * x(0) : x(0) * x(0) - x(1) * x(1);
    case BoundaryFunction::sine:
      if (d == 1) return std::sin(pi * x(0) / 2);
      if (d == 2) return std::sin(pi * x(0)) * std::sinh(pi * x(1)) / std::sinh(pi);
      {
        const double k = std::numbers::sqrt2 * pi;
        return std::sin(pi * x(0)) * std::sin(pi * x(1)) * std::sinh(k * x(2)) / std::sinh(k);
      }
  }
  return 0;
}

void BoundaryValueProblem::validate() const {
  if (d < 1 || d > 3) throw InvalidParameter("dimension must be 1, 2 or 3");
  if (inv_eps < 1) throw InvalidParameter("1/eps must be a positive integer");
  if (min_cells_per_eps < 1) throw InvalidParameter("minimum cells per eps must be positive");
  if (cells_per_eps < min_cells_per_eps)
    throw InvalidParameter("mesh under-resolves eps: " + std::to_string(cells_per_eps) + " cells per eps, need >= " +
                           std::to_string(min_cells_per_eps));
}

Cube BoundaryValueProblem::cube() const { return Cube::at_origin(d, inv_eps); }

VectorXd boundary_values(const BoundaryValueProblem& problem, const GridGeometry& geometry) {
  VectorXd v(geometry.node_count());
  for (Index n = 0; n < geometry.node_count(); ++n)
    v(n) = evaluate(problem.f, geometry.node_position(n) * problem.eps());
  return v;
}

EpsSolution solve_eps(const BoundaryValueProblem& problem, const CoefficientField& field, Seed seed,
                      const SolverOptions& options) {
  problem.validate();
  if (field.dimension() != problem.d) throw InvalidParameter("field dimension does not match the problem");
  auto grid = sample_on_grid(field.with_seed(seed), problem.cube(), problem.cells_per_eps);
  const EnergyOperator op(grid);
  auto u = solve_dirichlet(op, boundary_values(problem, op.geometry()), std::nullopt, options);
  return {std::move(u), std::move(grid), problem.eps()};
}

EpsSolution solve_homogenized(const MatrixXd& abar, const BoundaryValueProblem& problem,
                              const SolverOptions& options) {
  problem.validate();
  if (abar.rows() != problem.d || abar.cols() != problem.d)
    throw InvalidParameter("homogenized matrix has the wrong size");
  if (!is_positive_definite(abar)) throw NumericalDegeneracy("homogenized matrix is not positive definite");
  auto grid = CellTensorGrid::uniform(problem.cube(), problem.cells_per_eps, abar);
  const EnergyOperator op(grid);
  auto u = solve_dirichlet(op, boundary_values(problem, op.geometry()), std::nullopt, options);
  return {std::move(u), std::move(grid), problem.eps()};
}

Oracle1D::Oracle1D(const CoefficientField& field, double eps, double alpha, double beta, int subdivisions) {
  if (field.dimension() != 1) throw InvalidParameter("the closed-form solution is one-dimensional");
  if (subdivisions < 1) throw InvalidParameter("subdivisions must be positive");
  const double inv = 1.0 / eps;
  const int cells = static_cast<int>(std::lround(inv));
  if (cells < 1 || std::abs(cells - inv) > 1e-9 * inv) throw InvalidParameter("1/eps must be a positive integer");

  const int pieces = cells * subdivisions;
  std::vector<double> F(static_cast<std::size_t>(pieces) + 1, 0.0);
  x_.resize(F.size());
  for (int k = 0; k < pieces; ++k) {
    const double y = (k + 0.5) / subdivisions;
    const double a = field.tensor_at(std::span<const double>(&y, 1))(0, 0);
    if (!(a > 0)) throw NumericalDegeneracy("coefficient is not positive");
    const double dx = eps / subdivisions;
    F[k + 1] = F[k] + dx / a;
  }
  for (int k = 0; k <= pieces; ++k) x_[k] = static_cast<double>(k) / pieces;
  x_.back() = 1.0;
  const double total = F.back();
  flux_ = 1.0 / total;
  u_.resize(F.size());
  for (std::size_t k = 0; k < F.size(); ++k) u_[k] = alpha + (beta - alpha) * F[k] / total;
}

double Oracle1D::operator()(double x) const {
  if (x <= 0) return u_.front();
  if (x >= 1) return u_.back();
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const auto k = static_cast<std::size_t>(it - x_.begin()) - 1;
  const double t = (x - x_[k]) / (x_[k + 1] - x_[k]);
  return (1 - t) * u_[k] + t * u_[k + 1];
}

double Oracle1D::l2_distance(const std::function<double(double)>& other) const {
  double s = 0;
  for (std::size_t k = 0; k + 1 < x_.size(); ++k) {
    const double xm = 0.5 * (x_[k] + x_[k + 1]);
    const double e0 = u_[k] - other(x_[k]);
    const double e1 = u_[k + 1] - other(x_[k + 1]);
    const double em = 0.5 * (u_[k] + u_[k + 1]) - other(xm);
    s += (x_[k + 1] - x_[k]) / 6 * (e0 * e0 + 4 * em * em + e1 * e1);
  }
  return std::sqrt(s);
}

double l2_error(const ScalarField& u, const ScalarField& v) {
  require_same_grid(u, v);
  const auto& g = u.geometry;
  const VectorXd e = u.values - v.values;
  double s = 0;
  for (Index c = 0; c < g.cell_count(); ++c) s += cell_l2_sq(g, corner_values(g, c, e));
  return std::sqrt(std::max(s, 0.0) / g.volume());
}

double gradient_error_sq(const ScalarField& u, const ScalarField& v, const std::vector<bool>& mask) {
  require_same_grid(u, v);
  const auto& g = u.geometry;
  if (static_cast<Index>(mask.size()) != g.cell_count()) throw InvalidParameter("mask size does not match the grid");
  const VectorXd e = u.values - v.values;
  double s = 0;
  for (Index c = 0; c < g.cell_count(); ++c)
    if (mask[static_cast<std::size_t>(c)]) s += cell_h1_sq(g, corner_values(g, c, e));
  return std::max(s, 0.0) / g.volume();
}

std::vector<bool> interior_mask(const GridGeometry& geometry, double margin) {
  std::vector<bool> mask(static_cast<std::size_t>(geometry.cell_count()));
  const double tol = 1e-9 * geometry.h;
  for (Index c = 0; c < geometry.cell_count(); ++c) {
    const auto base = geometry.node_coords(geometry.cell_base_node(c));
    bool inside = true;
    for (int i = 0; i < geometry.d && inside; ++i) {
      const double lo = base[i] * geometry.h;
      const double hi = (geometry.cells_per_axis - base[i] - 1) * geometry.h;
      inside = lo >= margin - tol && hi >= margin - tol;
    }
    mask[static_cast<std::size_t>(c)] = inside;
  }
  return mask;
}

std::vector<CorrectorField> correctors_for(const BoundaryValueProblem& problem, const CoefficientField& field,
                                           Seed seed, const SolverOptions& options) {
  problem.validate();
  const int pad = std::max(0, (16 - problem.inv_eps + 1) / 2);
  Cube cube;
  cube.corner.assign(static_cast<std::size_t>(problem.d), -pad);
  cube.side = problem.inv_eps + 2 * pad;
  const auto grid = sample_on_grid(field.with_seed(seed), cube, problem.cells_per_eps);
  std::vector<CorrectorField> out;
  for (int i = 0; i < problem.d; ++i) out.push_back(solve_corrector(grid, VectorXd::Unit(problem.d, i), options));
  return out;
}

TwoScaleResult two_scale_expansion(const EpsSolution& ueps, const EpsSolution& ubar,
                                   const std::vector<CorrectorField>& correctors) {
  require_same_grid(ueps.u, ubar.u);
  const auto& g = ubar.u.geometry;
  if (static_cast<int>(correctors.size()) != g.d) throw InvalidParameter("need one corrector per axis");
  const auto& cg = correctors.front().phi.geometry;
  if (cg.h != g.h) throw InvalidParameter("corrector mesh differs from the problem mesh");
  std::vector<int> offset(static_cast<std::size_t>(g.d));
  for (int i = 0; i < g.d; ++i) {
    const double o = (g.origin(i) - cg.origin(i)) / g.h;
    offset[i] = static_cast<int>(std::lround(o));
    if (std::abs(o - offset[i]) > 1e-9 || offset[i] < 0 || offset[i] + g.cells_per_axis > cg.cells_per_axis)
      throw InvalidParameter("corrector grid does not contain the problem cube");
  }
  for (const auto& c : correctors)
    if (!(c.phi.geometry == cg)) throw InvalidParameter("correctors live on different grids");

  const MatrixXd du = nodal_gradient(ubar.u);
  TwoScaleResult r;
  r.w = ubar.u;
  r.w.tag = BoundaryTag::none;
  std::vector<int> c(static_cast<std::size_t>(g.d));
  for (Index n = 0; n < g.node_count(); ++n) {
    const auto nc = g.node_coords(n);
    for (int i = 0; i < g.d; ++i) c[i] = nc[i] + offset[i];
    const Index m = node_at(cg, c);
    for (int i = 0; i < g.d; ++i) r.w.values(n) += du(i, n) * correctors[i].phi.values(m);
  }
  const auto mask = interior_mask(g, 2.0);
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
    throw InvalidParameter("the 2 eps boundary margin leaves no interior");
  const double inv_eps2 = 1.0 / (ueps.eps * ueps.eps);
  r.h1_two_scale = std::sqrt(gradient_error_sq(ueps.u, r.w, mask) * inv_eps2);
  r.h1_plain = std::sqrt(gradient_error_sq(ueps.u, ubar.u, mask) * inv_eps2);
  return r;
}

WeakConvergence weak_convergence_check(const EpsSolution& ueps, const EpsSolution& ubar, const MatrixXd& abar,
                                       double rho) {
  require_same_grid(ueps.u, ubar.u);
  const auto& g = ueps.u.geometry;
  const int tiles = static_cast<int>(std::lround(1.0 / rho));
  if (tiles < 1 || std::abs(tiles * rho - 1) > 1e-9) throw InvalidParameter("1/rho must be a positive integer");

  const MatrixXd gu = cell_gradient(ueps.u) / ueps.eps;
  const MatrixXd gb = cell_gradient(ubar.u) / ueps.eps;
  const auto mask = interior_mask(g, 2.0);

  Index tile_count = 1;
  for (int i = 0; i < g.d; ++i) tile_count *= tiles;
  MatrixXd sum_g = MatrixXd::Zero(g.d, tile_count), sum_f = MatrixXd::Zero(g.d, tile_count);
  VectorXd cells = VectorXd::Zero(tile_count);
  double pointwise = 0;
  Index interior = 0;
  for (Index c = 0; c < g.cell_count(); ++c) {
    if (!mask[static_cast<std::size_t>(c)]) continue;
    const VectorXd x = ueps.grid.cell_center(c) * ueps.eps;
    Index t = 0, stride = 1;
    for (int i = 0; i < g.d; ++i) {
      const int k = std::clamp(static_cast<int>(std::floor(x(i) / rho)), 0, tiles - 1);
      t += k * stride;
      stride *= tiles;
    }
    const VectorXd diff = gu.col(c) - gb.col(c);
    sum_g.col(t) += diff;
    sum_f.col(t) += ueps.grid.tensor(c) * gu.col(c) - abar * gb.col(c);
    cells(t) += 1;
    pointwise += diff.squaredNorm();
    ++interior;
  }
  WeakConvergence w;
  w.rho = rho;
  double sg = 0, sf = 0;
  for (Index t = 0; t < tile_count; ++t) {
    if (cells(t) == 0) continue;
    ++w.windows;
    sg += (sum_g.col(t) / cells(t)).squaredNorm();
    sf += (sum_f.col(t) / cells(t)).squaredNorm();
  }
  if (w.windows == 0) throw InvalidParameter("no window meets the interior");
  w.gradient_window = std::sqrt(sg / w.windows);
  w.flux_window = std::sqrt(sf / w.windows);
  w.gradient_pointwise = std::sqrt(pointwise / static_cast<double>(interior));
  return w;
}

ErrorScaling error_scaling(const CoefficientField& field, const MatrixXd& abar, const ErrorScalingOptions& options) {
  const auto& o = options;
  if (o.inv_eps.size() < 3) throw InvalidParameter("error scaling needs at least 3 values of eps");
  for (std::size_t i = 1; i < o.inv_eps.size(); ++i)
    if (o.inv_eps[i] != 2 * o.inv_eps[i - 1]) throw InvalidParameter("1/eps values must double");
  if (o.samples < 1) throw InvalidParameter("samples must be positive");
  if (field.dimension() != o.d) throw InvalidParameter("field dimension does not match d");
  if (o.method == ErrorMethod::oracle && o.d != 1) throw InvalidParameter("the oracle method is one-dimensional");
  if (o.method == ErrorMethod::oracle && o.two_scale)
    throw InvalidParameter("two-scale errors need the fem method");

  std::vector<BoundaryValueProblem> problems;
  for (int inv : o.inv_eps) {
    BoundaryValueProblem p;
    p.d = o.d;
    p.f = o.f;
    p.inv_eps = inv;
    p.cells_per_eps = o.cells_per_eps;
    p.validate();
    problems.push_back(p);
  }

  std::vector<EpsSolution> homogenized;
  if (o.method == ErrorMethod::fem)
    for (const auto& p : problems) homogenized.push_back(solve_homogenized(abar, p, o.solver));

  const double alpha = evaluate(o.f, VectorXd::Zero(1));
  const double beta = evaluate(o.f, VectorXd::Ones(1));

  const std::size_t n_eps = problems.size();
  const auto samples = static_cast<std::size_t>(o.samples);
  std::vector<std::optional<ErrorRow>> rows(n_eps * samples);
  std::vector<SampleFailure> failures;
  std::mutex failure_lock;

  parallel_for(rows.size(), o.threads, [&](std::size_t task) {
    // Smallest eps first: the most expensive tasks start early.
    const std::size_t i = n_eps - 1 - task / samples;
    const int k = static_cast<int>(task % samples);
    const auto& p = problems[i];
    const Seed seed = task_seed(o.seed, Experiment::error_scaling, static_cast<std::int64_t>(i), k);
    ErrorRow row;
    row.d = o.d;
    row.eps = p.eps();
    row.sample = k;
    row.seed = seed;
    row.h = p.eps() / p.cells_per_eps;
    row.h1_two_scale = kNaN;
    row.h1_plain = kNaN;
    try {
      if (o.method == ErrorMethod::oracle) {
        const Oracle1D u(field.with_seed(seed), p.eps(), alpha, beta, p.cells_per_eps);
        row.l2_error = u.l2_distance([&](double x) { return alpha + (beta - alpha) * x; });
      } else {
        const auto ue = solve_eps(p, field, seed, o.solver);
        row.iterations = ue.u.stats.iterations;
        row.residual = ue.u.stats.residual;
        row.l2_error = l2_error(ue.u, homogenized[i].u);
        if (o.two_scale && p.inv_eps > 4) {
          const auto correctors = correctors_for(p, field, seed, o.solver);
          const auto ts = two_scale_expansion(ue, homogenized[i], correctors);
          row.h1_two_scale = ts.h1_two_scale;
          row.h1_plain = ts.h1_plain;
        }
      }
      rows[i * samples + static_cast<std::size_t>(k)] = row;
    } catch (const SolverFailure& e) {
      const std::lock_guard lock(failure_lock);
      failures.push_back({p.inv_eps, k, seed, e.what(), e.iterations(), e.residual()});
    }
  });

  ErrorScaling s;
  s.options = o;
  for (auto& r : rows)
    if (r) s.rows.push_back(*r);
  std::sort(failures.begin(), failures.end(),
            [](const auto& a, const auto& b) { return std::tie(a.scale, a.index) < std::tie(b.scale, b.index); });
  s.failures = std::move(failures);
  summarize(s);
  return s;
}

void summarize(ErrorScaling& s) {
  std::map<double, std::vector<double>, std::greater<>> by_eps;
  for (const auto& r : s.rows) by_eps[r.eps].push_back(r.l2_error);
  s.eps.clear();
  s.mean_error.clear();
  s.se_error.clear();
  s.degenerate = false;
  s.fit = {};
  s.fit_log = {};
  for (const auto& [eps, errs] : by_eps) {
    const double m = mean_of(errs);
    double ss = 0;
    for (double e : errs) ss += (e - m) * (e - m);
    const auto n = static_cast<double>(errs.size());
    s.eps.push_back(eps);
    s.mean_error.push_back(m);
    s.se_error.push_back(errs.size() > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0);
    if (!(m > 1e-8)) s.degenerate = true;
  }
  if (s.degenerate || s.eps.size() < 3) return;
  s.fit = fit_exponent(s.eps, s.mean_error);
  std::vector<double> scaled;
  for (double e : s.eps) scaled.push_back(e * std::sqrt(std::abs(std::log(e))));
  s.fit_log = fit_exponent(scaled, s.mean_error);
}

void write_error_csv(std::ostream& out, const ErrorScaling& s) {
  const auto& o = s.options;
  out << "#schema=" << kSchemaVersion << '\n';
  out << "#d=" << o.d << ",f=" << to_string(o.f) << ",method=" << to_string(o.method)
      << ",cells_per_eps=" << o.cells_per_eps << ",samples=" << o.samples << ",seed=" << o.seed
      << ",two_scale=" << (o.two_scale ? 1 : 0) << ",inv_eps=";
  for (std::size_t i = 0; i < o.inv_eps.size(); ++i) out << (i ? " " : "") << o.inv_eps[i];
  out << '\n';
  out << "d,eps,sample_idx,seed,l2_error,h1_error_two_scale,h1_error_plain,h,iterations,residual\n";
  for (const auto& r : s.rows)
    out << r.d << ',' << format_double(r.eps) << ',' << r.sample << ',' << r.seed << ','
        << format_double(r.l2_error) << ',' << format_double(r.h1_two_scale) << ','
        << format_double(r.h1_plain) << ',' << format_double(r.h) << ',' << r.iterations << ','
        << format_double(r.residual) << '\n';
}

ErrorScaling read_error_csv(std::istream& in) {
  const CsvTable t = read_csv(in);
  require_schema(t, "error CSV");
  if (t.comments.empty()) throw ConfigError("error CSV lacks its metadata line");
  const auto meta = parse_metadata(t.comments.front());
  ErrorScaling s;
  auto& o = s.options;
  o.d = static_cast<int>(parse_int(metadata_at(meta, "d")));
  o.f = boundary_function_from_string(metadata_at(meta, "f"));
  o.method = error_method_from_string(metadata_at(meta, "method"));
  o.cells_per_eps = static_cast<int>(parse_int(metadata_at(meta, "cells_per_eps")));
  o.samples = static_cast<int>(parse_int(metadata_at(meta, "samples")));
  o.seed = parse_uint64(metadata_at(meta, "seed"));
  o.two_scale = parse_int(metadata_at(meta, "two_scale")) != 0;
  for (const auto& v : split(metadata_at(meta, "inv_eps"), ' '))
    if (!trim(v).empty()) o.inv_eps.push_back(static_cast<int>(parse_int(v)));

  const int c_d = t.column("d"), c_eps = t.column("eps"), c_idx = t.column("sample_idx"),
            c_seed = t.column("seed"), c_l2 = t.column("l2_error"), c_ts = t.column("h1_error_two_scale"),
            c_pl = t.column("h1_error_plain"), c_h = t.column("h"), c_it = t.column("iterations"),
            c_res = t.column("residual");
  for (const auto& row : t.rows) {
    ErrorRow r;
    r.d = static_cast<int>(parse_int(row[c_d]));
    r.eps = parse_double(row[c_eps]);
    r.sample = static_cast<int>(parse_int(row[c_idx]));
    r.seed = parse_uint64(row[c_seed]);
    r.l2_error = parse_double(row[c_l2]);
    r.h1_two_scale = parse_double(row[c_ts]);
    r.h1_plain = parse_double(row[c_pl]);
    r.h = parse_double(row[c_h]);
    r.iterations = static_cast<int>(parse_int(row[c_it]));
    r.residual = parse_double(row[c_res]);
    if (r.d != o.d) throw ConfigError("error CSV: row dimension differs from the metadata");
    s.rows.push_back(r);
  }
  summarize(s);
  return s;
}

}  // namespace homlab
