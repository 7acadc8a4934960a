#include "homlab/corrector.hpp"

#include "homlab/io.hpp"
#include "homlab/linalg.hpp"
#include "homlab/rng.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

namespace homlab {

namespace {

constexpr char kNodalMagic[8] = {'H', 'L', 'N', 'O', 'D', 'E', '0', '1'};

// Index of the cell with integer coordinates c (axis 0 fastest), or -1 if outside.
Index cell_at(const GridGeometry& g, std::span<const int> c) {
  Index idx = 0, stride = 1;
  for (int i = 0; i < g.d; ++i) {
    if (c[i] < 0 || c[i] >= g.cells_per_axis) return -1;
    idx += c[i] * stride;
    stride *= g.cells_per_axis;
  }
  return idx;
}

double sample_var(const std::vector<double>& x) {
  if (x.size() < 2) return 0;
  double m = 0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double ss = 0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

// Sample variance of each row.
VectorXd row_variances(const MatrixXd& m) {
  if (m.cols() < 2) return VectorXd::Zero(m.rows());
  const MatrixXd centred = m.colwise() - m.rowwise().mean();
  return centred.rowwise().squaredNorm() / static_cast<double>(m.cols() - 1);
}

// Distance from a node to the nearest face of the cube.
double boundary_distance(const GridGeometry& g, Index node) {
  const auto c = g.node_coords(node);
  int m = g.cells_per_axis;
  for (int ci : c) m = std::min({m, ci, g.cells_per_axis - ci});
  return m * g.h;
}

// Cartesian product of [lo, hi]^d, axis 0 fastest.
template <typename Fn>
void for_each_offset(int d, int lo, int hi, Fn&& fn) {
  std::vector<int> o(static_cast<std::size_t>(d), lo);
  while (true) {
    fn(o);
    int i = 0;
    while (i < d && ++o[i] > hi) o[i++] = lo;
    if (i == d) return;
  }
}

VectorXd cube_center(const GridGeometry& g) {
  return g.origin + VectorXd::Constant(g.d, 0.5 * g.side_length());
}

}  // namespace

CorrectorField solve_corrector(const CellTensorGrid& grid, const VectorXd& p, const SolverOptions& options) {
  if (grid.side() < 16) throw InvalidParameter("corrector cube must have side >= 16");
  if (p.size() != grid.dimension()) throw InvalidParameter("slope has the wrong dimension");
  const EnergyOperator op(grid);
  const GridGeometry& g = op.geometry();
  MatrixXd ap(g.d, g.cell_count());
  for (Index c = 0; c < g.cell_count(); ++c) ap.col(c) = grid.tensor(c) * p;
  const VectorXd load = -flux_load(g, ap);
  CorrectorField out{solve_dirichlet(op, VectorXd::Zero(g.node_count()), load, options), p, grid};
  out.phi.tag = BoundaryTag::dirichlet;
  out.phi.slope = p;
  return out;
}

std::string_view to_string(KernelKind kind) {
  return kind == KernelKind::bump ? "bump" : "truncated-gaussian";
}

KernelKind kernel_kind_from_string(std::string_view name) {
  if (name == "bump") return KernelKind::bump;
  if (name == "truncated-gaussian") return KernelKind::truncated_gaussian;
  throw ConfigError("unknown kernel '" + std::string(name) + "'");
}

double FilterKernel::profile(double distance) const {
  const double q = distance / scale;
  if (q >= 1) return 0;
  if (kind == KernelKind::bump) return (1 - q * q) * (1 - q * q);
  return std::exp(-4.5 * q * q);  // sigma = scale / 3
}

KernelStencil kernel_stencil(const FilterKernel& kernel, int d, double h) {
  if (!(kernel.scale > 0)) throw InvalidParameter("kernel scale must be positive");
  const int reach = static_cast<int>(std::ceil(kernel.scale / h));
  KernelStencil s;
  double total = 0;
  for_each_offset(d, -reach, reach - 1, [&](const std::vector<int>& o) {
    double r2 = 0;
    for (int v : o) r2 += (v + 0.5) * (v + 0.5);
    const double w = kernel.profile(std::sqrt(r2) * h);
    if (w > 0) {
      s.offsets.push_back(o);
      s.weights.push_back(w);
      total += w;
    }
  });
  if (total <= 0) throw InvalidParameter("kernel scale below the mesh size");
  for (double& w : s.weights) w /= total;
  return s;
}

std::vector<Index> bulk_window_centers(const GridGeometry& g, double r, double spacing) {
  const double margin = std::max(r, g.side_length() / 8);
  const int step = std::max(1, static_cast<int>(std::lround(spacing / g.h)));
  const int mid = g.cells_per_axis / 2;
  std::vector<int> axis;
  for (int c = mid % step; c <= g.cells_per_axis; c += step)
    if (c * g.h >= margin - 1e-12 && (g.cells_per_axis - c) * g.h >= margin - 1e-12) axis.push_back(c);
  std::vector<Index> out;
  if (axis.empty()) return out;
  const int n = static_cast<int>(axis.size());
  for_each_offset(g.d, 0, n - 1, [&](const std::vector<int>& k) {
    Index idx = 0, stride = 1;
    for (int i = 0; i < g.d; ++i) {
      idx += axis[static_cast<std::size_t>(k[i])] * stride;
      stride *= g.nodes_per_axis();
    }
    out.push_back(idx);
  });
  return out;
}

FilteredStats filtered_gradient_average(const GridGeometry& g, const MatrixXd& cell_vectors,
                                        const FilterKernel& kernel, const std::vector<Index>& centers) {
  const KernelStencil st = kernel_stencil(kernel, g.d, g.h);
  FilteredStats out;
  out.scale = kernel.scale;
  out.values = MatrixXd::Zero(cell_vectors.rows(), static_cast<Index>(centers.size()));
  std::vector<int> c(static_cast<std::size_t>(g.d));
  for (std::size_t k = 0; k < centers.size(); ++k) {
    if (boundary_distance(g, centers[k]) < kernel.scale - 1e-12)
      throw InvalidParameter("filter window reaches the cube boundary");
    const auto node = g.node_coords(centers[k]);
    for (std::size_t j = 0; j < st.weights.size(); ++j) {
      for (int i = 0; i < g.d; ++i) c[i] = node[i] + st.offsets[j][i];
      const Index cell = cell_at(g, c);
      if (cell < 0) throw InvalidParameter("filter window reaches the cube boundary");
      out.values.col(static_cast<Index>(k)) += st.weights[j] * cell_vectors.col(cell);
    }
  }
  out.variance = row_variances(out.values);
  return out;
}

FilteredStats filtered_gradient_average(const CorrectorField& corrector, const FilterKernel& kernel,
                                        const std::vector<Index>& centers) {
  return filtered_gradient_average(corrector.phi.geometry, cell_gradient(corrector.phi), kernel, centers);
}

FilteredStats pool(const std::vector<FilteredStats>& parts) {
  if (parts.empty()) throw InvalidParameter("nothing to pool");
  FilteredStats out;
  out.scale = parts.front().scale;
  out.realizations = 0;
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.scale != out.scale) throw InvalidParameter("pooling windows of different scales");
    cols += p.values.cols();
    out.realizations += p.realizations;
  }
  const Index rows = parts.front().values.rows();
  out.values.resize(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.values.middleCols(at, p.values.cols()) = p.values;
    at += p.values.cols();
  }
  out.variance = row_variances(out.values);
  return out;
}

GrowthProfile corrector_growth(const CorrectorField& corrector, const std::vector<double>& radii) {
  const GridGeometry& g = corrector.phi.geometry;
  const VectorXd center = cube_center(g);
  GrowthProfile out;
  out.radii = radii;
  for (double rho : radii) {
    if (!(rho > 0) || rho > g.side_length() / 4 + 1e-12)
      throw InvalidParameter("growth radius must lie in (0, L/4]");
    std::vector<double> vals;
    for (Index n = 0; n < g.node_count(); ++n)
      if ((g.node_position(n) - center).norm() < rho) vals.push_back(corrector.phi.values(n));
    out.stddev.push_back(std::sqrt(sample_var(vals)));
  }
  if (g.d == 2 && radii.size() >= 3) {
    std::vector<double> lx, y;
    for (std::size_t i = 0; i < radii.size(); ++i) {
      lx.push_back(std::log(radii[i]));
      y.push_back(out.stddev[i] * out.stddev[i]);
    }
    out.log_fit = linear_fit(lx, y);
  }
  return out;
}

ScalarField gaussian_surrogate(const MatrixXd& abar, const VectorXd& p, const Cube& cube, int cells_per_unit,
                               const FilterKernel& noise_kernel, Seed seed, double amplitude,
                               const SolverOptions& options) {
  if (!is_positive_definite(abar)) throw NumericalDegeneracy("surrogate matrix is not positive definite");
  const int d = static_cast<int>(abar.rows());
  if (p.size() != d || static_cast<int>(cube.corner.size()) != d)
    throw InvalidParameter("surrogate dimensions disagree");
  const auto grid = CellTensorGrid::uniform(cube, cells_per_unit, abar);
  const EnergyOperator op(grid);
  const GridGeometry& g = op.geometry();
  const Index nc = g.cell_count();

  // White noise: i.i.d. N(0, h^-d) per cell and channel.
  Engine engine(seed);
  boost::random::normal_distribution<double> normal(0.0, std::pow(g.h, -0.5 * d));
  MatrixXd xi(d, nc);
  for (Index c = 0; c < nc; ++c)
    for (int i = 0; i < d; ++i) xi(i, c) = normal(engine);

  // Cell-centred convolution, truncated at the cube boundary.
  const int reach = static_cast<int>(std::ceil(noise_kernel.scale / g.h));
  std::vector<std::vector<int>> offs;
  std::vector<double> w;
  double total = 0;
  for_each_offset(d, -reach, reach, [&](const std::vector<int>& o) {
    double r2 = 0;
    for (int v : o) r2 += double(v) * v;
    const double x = noise_kernel.profile(std::sqrt(r2) * g.h);
    if (x > 0) {
      offs.push_back(o);
      w.push_back(x);
      total += x;
    }
  });
  for (double& x : w) x /= total;
  MatrixXd smooth = MatrixXd::Zero(d, nc);
  std::vector<int> c2(static_cast<std::size_t>(d));
  for (Index c = 0; c < nc; ++c) {
    Index rem = c;
    std::vector<int> cc(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
      cc[i] = static_cast<int>(rem % g.cells_per_axis);
      rem /= g.cells_per_axis;
    }
    for (std::size_t j = 0; j < w.size(); ++j) {
      for (int i = 0; i < d; ++i) c2[i] = cc[i] + offs[j][i];
      const Index src = cell_at(g, c2);
      if (src >= 0) smooth.col(c) += w[j] * xi.col(src);
    }
  }
  smooth *= amplitude * p.norm();

  // -div(abar grad psi) = div G  <=>  \int grad v.abar grad psi = -\int grad v.G.
  const VectorXd load = -flux_load(g, smooth);
  ScalarField psi = solve_dirichlet(op, VectorXd::Zero(g.node_count()), load, options);
  psi.tag = BoundaryTag::dirichlet;
  psi.slope = p;
  return psi;
}

std::vector<GffRow> compare_corrector_gff(const std::vector<FilteredStats>& corrector,
                                          const std::vector<FilteredStats>& surrogate) {
  if (corrector.size() != surrogate.size()) throw InvalidParameter("scale lists differ");
  constexpr double kFloor = 1e-20;
  std::vector<GffRow> rows;
  for (std::size_t k = 0; k < corrector.size(); ++k) {
    const auto& a = corrector[k];
    const auto& b = surrogate[k];
    if (a.realizations < 16 || b.realizations < 16)
      throw InvalidParameter("need at least 16 realizations of each ensemble");
    if (a.scale != b.scale) throw InvalidParameter("scale lists differ");
    for (Index i = 0; i < a.variance.size(); ++i) {
      GffRow row;
      row.scale = a.scale;
      row.direction = static_cast<int>(i);
      row.var_corrector = a.variance(i);
      row.var_surrogate = b.variance(i);
      row.degenerate = !(row.var_corrector > kFloor) || !(row.var_surrogate > kFloor);
      row.ratio = row.var_corrector > kFloor ? row.var_corrector / row.var_surrogate : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

double calibrate_amplitude(const FilteredStats& corrector, const FilteredStats& surrogate) {
  const double vs = surrogate.variance.sum();
  if (!(vs > 0)) throw NumericalDegeneracy("surrogate variance vanishes");
  return std::sqrt(corrector.variance.sum() / vs);
}

std::optional<RegularitySample> regularity_sample(const CellTensorGrid& grid, const VectorXd& boundary_values,
                                                  const SolverOptions& options) {
  const EnergyOperator op(grid);
  const GridGeometry& g = op.geometry();
  // Constant data have a constant extension: nothing to compare.
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Index n = 0; n < g.node_count(); ++n)
    if (g.is_boundary_node(n)) {
      lo = std::min(lo, boundary_values(n));
      hi = std::max(hi, boundary_values(n));
    }
  if (hi - lo <= 1e-12 * (1 + std::abs(hi))) return std::nullopt;
  const ScalarField u = solve_dirichlet(op, boundary_values, std::nullopt, options);
  const MatrixXd grad = cell_gradient(u);
  const VectorXd e = grad.colwise().squaredNorm();

  const VectorXd center = cube_center(g);
  double inner = 0;
  int n_inner = 0;
  for (Index c = 0; c < g.cell_count(); ++c) {
    VectorXd x = g.node_position(g.cell_base_node(c)) + VectorXd::Constant(g.d, 0.5 * g.h);
    if ((x - center).norm() < 1.0) {
      inner += e(c);
      ++n_inner;
    }
  }
  if (n_inner == 0) throw InvalidParameter("unit ball contains no cell centre");
  inner /= n_inner;

  // Cell-centre values are the averages of the cell's corners.
  VectorXd centre_values = VectorXd::Zero(g.cell_count());
  const int corners = 1 << g.d;
  for (Index c = 0; c < g.cell_count(); ++c)
    for (int l = 0; l < corners; ++l) centre_values(c) += u.values(g.cell_node(c, l)) / corners;
  const double var = (centre_values.array() - centre_values.mean()).square().mean();
  const double r = 0.5 * g.side_length();

  RegularitySample s;
  s.gradient_ratio = inner / e.mean();
  s.l2_ratio_r2 = var > 0 ? inner / (var / (r * r)) : 0.0;
  s.l2_ratio_r1 = var > 0 ? inner / (var / r) : 0.0;
  return s;
}

VectorXd random_boundary_data(const GridGeometry& g, Seed seed) {
  Engine engine(seed);
  boost::random::normal_distribution<double> normal;
  boost::random::uniform_int_distribution<int> freq(-2, 2);
  boost::random::uniform_real_distribution<double> phase(0, 2 * std::numbers::pi);
  const VectorXd center = cube_center(g);
  const double half = 0.5 * g.side_length();
  VectorXd p(g.d);
  for (int i = 0; i < g.d; ++i) p(i) = normal(engine);
  constexpr int kModes = 4;
  std::vector<VectorXd> k(kModes, VectorXd(g.d));
  std::vector<double> amp(kModes), ph(kModes);
  for (int m = 0; m < kModes; ++m) {
    do {
      for (int i = 0; i < g.d; ++i) k[m](i) = freq(engine);
    } while (k[m].squaredNorm() == 0);
    amp[m] = normal(engine) / k[m].norm();
    ph[m] = phase(engine);
  }
  VectorXd out(g.node_count());
  for (Index n = 0; n < g.node_count(); ++n) {
    const VectorXd y = (g.node_position(n) - center) / half;
    double v = p.dot(y);
    for (int m = 0; m < kModes; ++m) v += amp[m] * std::cos(std::numbers::pi * k[m].dot(y) + ph[m]);
    out(n) = v;
  }
  return out;
}

RegularityResult regularity_ratio(const CoefficientField& field, int r, int n, int cells_per_unit, Seed seed,
                                  const SolverOptions& options) {
  if (r < 4) throw InvalidParameter("regularity radius must be >= 4");
  if (n < 1) throw InvalidParameter("need at least one draw");
  RegularityResult out;
  out.r = r;
  const Cube box = Cube::centered(field.dimension(), 2 * r);
  for (int i = 0; i < n; ++i) {
    const Seed s = task_seed(seed, Experiment::regularity, r, i);
    const auto grid = sample_on_grid(field.with_seed(s), box, cells_per_unit);
    const auto bv = random_boundary_data(GridGeometry::of(grid), mix64(s));
    if (auto sample = regularity_sample(grid, bv, options)) out.samples.push_back(*sample);
    else out.skipped.push_back(i);
  }
  summarize(out);
  return out;
}

void summarize(RegularityResult& result) {
  std::vector<double> ratios;
  for (const auto& s : result.samples) ratios.push_back(s.gradient_ratio);
  std::sort(ratios.begin(), ratios.end());
  result.max_ratio = result.median_ratio = result.q90_ratio = 0;
  if (ratios.empty()) return;
  // Nearest-rank quantiles.
  auto q = [&](double t) {
    const auto idx = static_cast<std::size_t>(std::ceil(t * static_cast<double>(ratios.size()))) - 1;
    return ratios[std::min(idx, ratios.size() - 1)];
  };
  result.max_ratio = ratios.back();
  result.median_ratio = q(0.5);
  result.q90_ratio = q(0.9);
}

void write_nodal_binary(std::ostream& out, const ScalarField& f, Seed seed) {
  const GridGeometry& g = f.geometry;
  out.write(kNodalMagic, sizeof kNodalMagic);
  write_binary<std::uint32_t>(out, kSchemaVersion);
  write_binary<std::int32_t>(out, g.d);
  write_binary<std::int32_t>(out, g.cells_per_axis);
  write_binary<double>(out, g.h);
  for (int i = 0; i < g.d; ++i) write_binary<double>(out, g.origin(i));
  write_binary<std::uint64_t>(out, seed);
  write_binary<std::uint32_t>(out, static_cast<std::uint32_t>(f.tag));
  write_binary<std::int32_t>(out, static_cast<std::int32_t>(f.slope.size()));
  for (Index i = 0; i < f.slope.size(); ++i) write_binary<double>(out, f.slope(i));
  for (Index n = 0; n < f.values.size(); ++n) write_binary<double>(out, f.values(n));
}

ScalarField read_nodal_binary(std::istream& in, Seed* seed) {
  constexpr std::string_view what = "nodal field";
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kNodalMagic, sizeof magic) != 0)
    throw ConfigError("not a nodal field dump (bad magic)");
  const auto schema = read_binary<std::uint32_t>(in, what);
  if (schema != kSchemaVersion)
    throw ConfigError("nodal field schema " + std::to_string(schema) + ", expected " +
                      std::to_string(kSchemaVersion));
  ScalarField f;
  f.geometry.d = read_binary<std::int32_t>(in, what);
  if (f.geometry.d < 1 || f.geometry.d > 3) throw ConfigError("nodal field has invalid dimension");
  f.geometry.cells_per_axis = read_binary<std::int32_t>(in, what);
  if (f.geometry.cells_per_axis < 1) throw ConfigError("nodal field has invalid size");
  f.geometry.h = read_binary<double>(in, what);
  f.geometry.origin.resize(f.geometry.d);
  for (int i = 0; i < f.geometry.d; ++i) f.geometry.origin(i) = read_binary<double>(in, what);
  const auto s = read_binary<std::uint64_t>(in, what);
  if (seed) *seed = s;
  const auto tag = read_binary<std::uint32_t>(in, what);
  if (tag > static_cast<std::uint32_t>(BoundaryTag::neumann_mean_zero)) throw ConfigError("bad boundary tag");
  f.tag = static_cast<BoundaryTag>(tag);
  const auto ns = read_binary<std::int32_t>(in, what);
  if (ns < 0 || ns > 3) throw ConfigError("bad slope length");
  f.slope.resize(ns);
  for (int i = 0; i < ns; ++i) f.slope(i) = read_binary<double>(in, what);
  f.values.resize(f.geometry.node_count());
  for (Index n = 0; n < f.values.size(); ++n) f.values(n) = read_binary<double>(in, what);
  return f;
}

}  // namespace homlab
