#include "homlab/energies.hpp"

#include "homlab/linalg.hpp"

#include <algorithm>

namespace homlab {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::dirichlet: return "dirichlet-a(U)";
    case Provenance::neumann_dual: return "neumann-dual-a_*(U)";
    case Provenance::limit_estimate: return "limit-abar-estimate";
  }
  return "unknown";
}

namespace {

void accumulate(SolverStats& total, const SolverStats& s) {
  total.iterations += s.iterations;
  total.residual = std::max(total.residual, s.residual);
}

MatrixProvenance provenance_of(const CellTensorGrid& grid, Provenance p) {
  MatrixProvenance m;
  m.provenance = p;
  m.side = grid.side();
  m.cells_per_unit = grid.cells_per_unit();
  m.seed = grid.seed();
  return m;
}

double nu_star_value(const ScalarField& u, const VectorXd& q) {
  // At the maximizer \int grad u.a grad u = \int q.grad u, so the value is
  // half the mean of q.grad u.
  const MatrixXd grad = cell_gradient(u);
  return 0.5 * (q.transpose() * grad).mean();
}

}  // namespace

EnergyValue nu(const CellTensorGrid& grid, const VectorXd& p, const SolverOptions& options) {
  const EnergyOperator op(grid);
  ScalarField v = solve_dirichlet_affine(op, p, options);
  const double value = op.energy(v.values);
  return {value, std::move(v)};
}

EnergyValue nu_star(const CellTensorGrid& grid, const VectorXd& q, const SolverOptions& options) {
  ScalarField u = solve_neumann_dual(grid, q, options);
  const double value = nu_star_value(u, q);
  return {value, std::move(u)};
}

std::vector<std::pair<int, int>> polarization_directions(int d) {
  std::vector<std::pair<int, int>> dirs;
  for (int i = 0; i < d; ++i) dirs.emplace_back(i, -1);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) dirs.emplace_back(i, j);
  return dirs;
}

std::string direction_label(std::pair<int, int> dir) {
  std::string s = "e" + std::to_string(dir.first + 1);
  if (dir.second >= 0) s += "+e" + std::to_string(dir.second + 1);
  return s;
}

VectorXd direction_vector(int d, std::pair<int, int> dir) {
  VectorXd e = VectorXd::Unit(d, dir.first);
  if (dir.second >= 0) e(dir.second) += 1;
  return e;
}

MatrixXd polarize(int d, const VectorXd& values) {
  const auto dirs = polarization_directions(d);
  if (values.size() != static_cast<Index>(dirs.size()))
    throw InvalidParameter("wrong number of polarization values");
  MatrixXd m(d, d);
  for (int i = 0; i < d; ++i) m(i, i) = 2 * values(i);
  for (std::size_t k = static_cast<std::size_t>(d); k < dirs.size(); ++k) {
    const auto [i, j] = dirs[k];
    m(i, j) = m(j, i) = values(static_cast<Index>(k)) - values(i) - values(j);
  }
  return m;
}

CubeResponse cube_response(const CellTensorGrid& grid, const SolverOptions& options) {
  const int d = grid.dimension();
  const EnergyOperator op(grid);
  const auto dirs = polarization_directions(d);
  const auto n = static_cast<Index>(dirs.size());

  CubeResponse out;
  out.a.meta = provenance_of(grid, Provenance::dirichlet);
  out.b.meta = provenance_of(grid, Provenance::neumann_dual);
  out.nu_values.resize(n);
  out.nu_star_values.resize(n);

  // Both solution maps are linear in the slope, so the mixed directions
  // e_i + e_j reuse the sums of the axis solutions.
  std::vector<VectorXd> v(static_cast<std::size_t>(d)), u(static_cast<std::size_t>(d));
  std::vector<MatrixXd> u_grad(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    ScalarField vi = solve_dirichlet_affine(op, VectorXd::Unit(d, i), options);
    ScalarField ui = solve_neumann_dual(op, VectorXd::Unit(d, i), options);
    out.nu_stats.push_back(vi.stats);
    out.nu_star_stats.push_back(ui.stats);
    accumulate(out.a.meta.stats, vi.stats);
    accumulate(out.b.meta.stats, ui.stats);
    v[i] = std::move(vi.values);
    u_grad[i] = cell_gradient(ui);
    u[i] = std::move(ui.values);
  }
  for (Index k = 0; k < n; ++k) {
    const auto [i, j] = dirs[static_cast<std::size_t>(k)];
    if (j < 0) {
      out.nu_values(k) = op.energy(v[i]);
      out.nu_star_values(k) = 0.5 * u_grad[i].row(i).mean();
    } else {
      out.nu_values(k) = op.energy(v[i] + v[j]);
      const MatrixXd g = u_grad[i] + u_grad[j];
      out.nu_star_values(k) = 0.5 * (g.row(i) + g.row(j)).mean();
      out.nu_stats.push_back({});
      out.nu_star_stats.push_back({});
    }
  }
  out.a.matrix = polarize(d, out.nu_values);
  out.b.matrix = polarize(d, out.nu_star_values);
  return out;
}

EffectiveMatrix effective_matrix(const CellTensorGrid& grid, const SolverOptions& options) {
  const int d = grid.dimension();
  const EnergyOperator op(grid);
  const auto dirs = polarization_directions(d);
  EffectiveMatrix out;
  out.meta = provenance_of(grid, Provenance::dirichlet);
  std::vector<VectorXd> v;
  for (int i = 0; i < d; ++i) {
    ScalarField vi = solve_dirichlet_affine(op, VectorXd::Unit(d, i), options);
    accumulate(out.meta.stats, vi.stats);
    v.push_back(std::move(vi.values));
  }
  VectorXd values(static_cast<Index>(dirs.size()));
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    const auto [i, j] = dirs[k];
    values(static_cast<Index>(k)) = op.energy(j < 0 ? v[i] : VectorXd(v[i] + v[j]));
  }
  out.matrix = polarize(d, values);
  return out;
}

DualForm dual_form(const CellTensorGrid& grid, const SolverOptions& options) {
  const int d = grid.dimension();
  const EnergyOperator op(grid);
  const auto dirs = polarization_directions(d);
  DualForm out;
  out.meta = provenance_of(grid, Provenance::neumann_dual);
  std::vector<MatrixXd> grads;
  for (int i = 0; i < d; ++i) {
    ScalarField ui = solve_neumann_dual(op, VectorXd::Unit(d, i), options);
    accumulate(out.meta.stats, ui.stats);
    grads.push_back(cell_gradient(ui));
  }
  VectorXd values(static_cast<Index>(dirs.size()));
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    const auto [i, j] = dirs[k];
    const VectorXd e = direction_vector(d, dirs[k]);
    const MatrixXd g = j < 0 ? grads[i] : MatrixXd(grads[i] + grads[j]);
    values(static_cast<Index>(k)) = 0.5 * (e.transpose() * g).mean();
  }
  out.matrix = polarize(d, values);
  return out;
}

namespace {

template <typename Energy>
SubadditivityCheck subadditivity(const CellTensorGrid& parent, Energy&& energy) {
  if (parent.side() % 2 != 0)
    throw InvalidParameter("parent cube side must be even to split into aligned halves");
  const int d = parent.dimension();
  const int half = parent.side() / 2;
  SubadditivityCheck out;
  out.parent = energy(parent);
  const int children = 1 << d;
  std::vector<int> offset(static_cast<std::size_t>(d));
  for (int c = 0; c < children; ++c) {
    for (int i = 0; i < d; ++i) offset[i] = ((c >> i) & 1) * half;
    out.children += energy(parent.subgrid(offset, half));
  }
  out.children /= children;
  out.defect = out.children - out.parent;
  return out;
}

}  // namespace

SubadditivityCheck check_subadditivity(const CellTensorGrid& parent, const VectorXd& p,
                                       const SolverOptions& options) {
  return subadditivity(parent, [&](const CellTensorGrid& g) { return nu(g, p, options).value; });
}

SubadditivityCheck check_subadditivity_dual(const CellTensorGrid& parent, const VectorXd& q,
                                            const SolverOptions& options) {
  return subadditivity(parent,
                       [&](const CellTensorGrid& g) { return nu_star(g, q, options).value; });
}

double duality_gap(const EffectiveMatrix& a, const DualForm& b, const VectorXd& p) {
  if (!is_positive_definite(b.matrix)) throw NumericalDegeneracy("dual form is not positive definite");
  return 0.5 * p.dot((a.matrix - b.matrix.inverse()) * p);
}

double duality_gap_max(const MatrixXd& a, const MatrixXd& b) {
  if (!is_positive_definite(b)) throw NumericalDegeneracy("dual form is not positive definite");
  return 0.5 * max_eigenvalue(MatrixXd(a - b.inverse()));
}

}  // namespace homlab
