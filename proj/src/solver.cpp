#include "homlab/solver.hpp"

#include "homlab/linalg.hpp"

#include <cmath>
#include <sstream>

namespace homlab {

namespace {

// Element matrices for one cell of side h, split by tensor entry: the
// element stiffness of a constant tensor a is sum_k a_k * blocks[k] over the
// packed upper-triangular entries a_k.
struct ReferenceElement {
  int d = 0;
  int nloc = 0;
  std::vector<MatrixXd> blocks;  // one per packed entry
  MatrixXd center_gradient;      // d x nloc, grad N_j at the cell centre

  ReferenceElement(int dim, double h) : d(dim), nloc(1 << dim) {
    const double stiff[2][2] = {{1, -1}, {-1, 1}};
    const double mass[2][2] = {{1.0 / 3, 1.0 / 6}, {1.0 / 6, 1.0 / 3}};
    const double mixed[2][2] = {{-0.5, -0.5}, {0.5, 0.5}};  // \int N_a' N_b
    auto ref = [&](int k, int l) {
      MatrixXd r(nloc, nloc);
      for (int i = 0; i < nloc; ++i)
        for (int j = 0; j < nloc; ++j) {
          double v = 1;
          for (int t = 0; t < d; ++t) {
            const int it = (i >> t) & 1;
            const int jt = (j >> t) & 1;
            if (t == k && t == l) v *= stiff[it][jt];
            else if (t == k) v *= mixed[it][jt];
            else if (t == l) v *= mixed[jt][it];
            else v *= mass[it][jt];
          }
          r(i, j) = v;
        }
      return r;
    };
    const double scale = std::pow(h, d - 2);
    for (int k = 0; k < d; ++k)
      for (int l = k; l < d; ++l)
        blocks.push_back(scale * (k == l ? ref(k, k) : MatrixXd(ref(k, l) + ref(l, k))));

    center_gradient.resize(d, nloc);
    const double g = 1.0 / (h * std::pow(2.0, d - 1));
    for (int k = 0; k < d; ++k)
      for (int j = 0; j < nloc; ++j) center_gradient(k, j) = ((j >> k) & 1) ? g : -g;
  }

  MatrixXd element_matrix(const MatrixXd& packed, Index cell) const {
    MatrixXd ke = MatrixXd::Zero(nloc, nloc);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      const double a = packed(static_cast<Index>(k), cell);
      if (a != 0.0) ke.noalias() += a * blocks[k];
    }
    return ke;
  }
};

void check_geometry(const GridGeometry& g, const VectorXd& v) {
  if (v.size() != g.node_count()) throw InvalidParameter("nodal vector does not match the grid");
}

int default_max_iterations(const EnergyOperator& op) {
  return static_cast<int>(
      std::ceil(20.0 * op.geometry().nodes_per_axis() * std::sqrt(op.ellipticity())));
}

}  // namespace

// ---------------------------------------------------------------------------

GridGeometry GridGeometry::of(const CellTensorGrid& grid) {
  GridGeometry g;
  g.d = grid.dimension();
  g.cells_per_axis = grid.cells_per_axis();
  g.h = grid.h();
  g.origin.resize(g.d);
  for (int i = 0; i < g.d; ++i) g.origin(i) = grid.corner()[i];
  return g;
}

Index GridGeometry::node_count() const noexcept {
  Index n = 1;
  for (int i = 0; i < d; ++i) n *= nodes_per_axis();
  return n;
}

Index GridGeometry::cell_count() const noexcept {
  Index n = 1;
  for (int i = 0; i < d; ++i) n *= cells_per_axis;
  return n;
}

double GridGeometry::volume() const noexcept { return std::pow(side_length(), d); }

std::vector<int> GridGeometry::node_coords(Index node) const {
  std::vector<int> c(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    c[i] = static_cast<int>(node % nodes_per_axis());
    node /= nodes_per_axis();
  }
  return c;
}

VectorXd GridGeometry::node_position(Index node) const {
  VectorXd x(d);
  for (int i = 0; i < d; ++i) {
    x(i) = origin(i) + static_cast<double>(node % nodes_per_axis()) * h;
    node /= nodes_per_axis();
  }
  return x;
}

bool GridGeometry::is_boundary_node(Index node) const {
  for (int i = 0; i < d; ++i) {
    const Index c = node % nodes_per_axis();
    if (c == 0 || c == cells_per_axis) return true;
    node /= nodes_per_axis();
  }
  return false;
}

Index GridGeometry::cell_base_node(Index cell) const {
  Index node = 0, stride = 1;
  for (int i = 0; i < d; ++i) {
    node += (cell % cells_per_axis) * stride;
    cell /= cells_per_axis;
    stride *= nodes_per_axis();
  }
  return node;
}

Index GridGeometry::cell_node(Index cell, int local) const {
  Index node = cell_base_node(cell), stride = 1;
  for (int i = 0; i < d; ++i) {
    if ((local >> i) & 1) node += stride;
    stride *= nodes_per_axis();
  }
  return node;
}

VectorXd GridGeometry::node_weights() const {
  VectorXd w(node_count());
  for (Index n = 0; n < node_count(); ++n) {
    double v = 1;
    Index t = n;
    for (int i = 0; i < d; ++i) {
      const Index c = t % nodes_per_axis();
      t /= nodes_per_axis();
      v *= (c == 0 || c == cells_per_axis) ? 0.5 * h : h;
    }
    w(n) = v;
  }
  return w;
}

ScalarField affine_field(const GridGeometry& geometry, const VectorXd& p) {
  ScalarField f;
  f.geometry = geometry;
  f.values.resize(geometry.node_count());
  for (Index n = 0; n < geometry.node_count(); ++n) f.values(n) = p.dot(geometry.node_position(n));
  f.tag = BoundaryTag::dirichlet_affine;
  f.slope = p;
  return f;
}

// ---------------------------------------------------------------------------

EnergyOperator::EnergyOperator(const CellTensorGrid& grid)
    : geometry_(GridGeometry::of(grid)), lambda_(grid.ellipticity()) {
  const ReferenceElement ref(geometry_.d, geometry_.h);
  const Index cells = geometry_.cell_count();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(cells * ref.nloc * ref.nloc));
  std::vector<Index> nodes(static_cast<std::size_t>(ref.nloc));
  for (Index c = 0; c < cells; ++c) {
    const MatrixXd ke = ref.element_matrix(grid.packed(), c);
    for (int j = 0; j < ref.nloc; ++j) nodes[j] = geometry_.cell_node(c, j);
    for (int i = 0; i < ref.nloc; ++i)
      for (int j = 0; j < ref.nloc; ++j) triplets.emplace_back(nodes[i], nodes[j], ke(i, j));
  }
  k_.resize(geometry_.node_count(), geometry_.node_count());
  k_.setFromTriplets(triplets.begin(), triplets.end());
  k_.makeCompressed();
  diag_ = k_.diagonal();
}

double EnergyOperator::energy(const VectorXd& u) const {
  return 0.5 * u.dot(k_ * u) / geometry_.volume();
}

EnergyOperator assemble_energy(const CellTensorGrid& grid) { return EnergyOperator(grid); }

// ---------------------------------------------------------------------------

ScalarField solve(const LinearSystem& system, const SolverOptions& options) {
  const EnergyOperator& op = system.op;
  const GridGeometry& g = op.geometry();
  const SparseMatrix& k = op.matrix();
  const Index n = g.node_count();
  check_geometry(g, system.rhs);
  const bool pinned = system.constraint == Constraint::pinned_boundary;

  VectorXd free_mask = VectorXd::Ones(n);
  if (pinned)
    for (Index i = 0; i < n; ++i)
      if (g.is_boundary_node(i)) free_mask(i) = 0;
  const VectorXd weights = g.node_weights();
  const double total_weight = weights.sum();

  // Residuals live in the range of the constrained operator; search
  // directions in the constrained solution space.
  auto project_residual = [&](VectorXd& r) {
    if (pinned) r.array() *= free_mask.array();
    else r.array() -= r.mean();
  };
  auto project_direction = [&](VectorXd& z) {
    if (pinned) z.array() *= free_mask.array();
    else z.array() -= weights.dot(z) / total_weight;
  };

  VectorXd x = VectorXd::Zero(n);
  if (pinned) {
    check_geometry(g, system.boundary_values);
    x = system.boundary_values.cwiseProduct(VectorXd::Ones(n) - free_mask);
  }

  VectorXd inv_diag = VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i)
    if (free_mask(i) != 0 && op.diagonal()(i) > 0) inv_diag(i) = 1.0 / op.diagonal()(i);

  VectorXd r = system.rhs - k * x;
  project_residual(r);
  const double norm0 = r.norm();

  ScalarField out;
  out.geometry = g;
  out.tag = pinned ? BoundaryTag::dirichlet : BoundaryTag::neumann_mean_zero;

  int iterations = 0;
  if (norm0 > 0) {
    const int max_it =
        options.max_iterations > 0 ? options.max_iterations : default_max_iterations(op);
    VectorXd z = inv_diag.cwiseProduct(r);
    project_direction(z);
    VectorXd p = z;
    VectorXd q(n);
    double rz = r.dot(z);
    double rel = 1.0;
    while (true) {
      if (iterations >= max_it) {
        std::ostringstream msg;
        msg << "conjugate gradients did not converge in " << iterations
            << " iterations (relative residual " << rel << ")";
        throw SolverFailure(msg.str(), iterations, rel);
      }
      q.noalias() = k * p;
      project_residual(q);
      const double pq = p.dot(q);
      if (!(pq > 0)) throw SolverFailure("conjugate gradients broke down", iterations, rel);
      const double alpha = rz / pq;
      x.noalias() += alpha * p;
      r.noalias() -= alpha * q;
      ++iterations;
      rel = r.norm() / norm0;
      if (rel <= options.tolerance) break;
      z = inv_diag.cwiseProduct(r);
      project_direction(z);
      const double rz_new = r.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
    }
  }
  if (!pinned) x.array() -= weights.dot(x) / total_weight;

  VectorXd true_r = system.rhs - k * x;
  project_residual(true_r);
  out.stats.iterations = iterations;
  out.stats.residual = norm0 > 0 ? true_r.norm() / norm0 : 0.0;
  out.values = std::move(x);
  return out;
}

ScalarField solve_dirichlet(const EnergyOperator& op, const VectorXd& boundary_values,
                            const std::optional<VectorXd>& load, const SolverOptions& options) {
  const Index n = op.geometry().node_count();
  LinearSystem sys{op, load ? *load : VectorXd(VectorXd::Zero(n)), Constraint::pinned_boundary,
                   boundary_values};
  return solve(sys, options);
}

ScalarField solve_dirichlet_affine(const EnergyOperator& op, const VectorXd& p,
                                   const SolverOptions& options) {
  const GridGeometry& g = op.geometry();
  if (p.size() != g.d) throw InvalidParameter("slope has the wrong dimension");
  const ScalarField affine = affine_field(g, p);
  ScalarField out = solve_dirichlet(op, affine.values, std::nullopt, options);
  out.tag = BoundaryTag::dirichlet_affine;
  out.slope = p;
  return out;
}

ScalarField solve_dirichlet_affine(const CellTensorGrid& grid, const VectorXd& p,
                                   const SolverOptions& options) {
  return solve_dirichlet_affine(EnergyOperator(grid), p, options);
}

ScalarField solve_neumann_dual(const EnergyOperator& op, const VectorXd& q,
                               const SolverOptions& options) {
  const GridGeometry& g = op.geometry();
  if (q.size() != g.d) throw InvalidParameter("flux direction has the wrong dimension");
  const MatrixXd qs = q.replicate(1, g.cell_count());
  LinearSystem sys{op, flux_load(g, qs), Constraint::mean_zero, {}};
  ScalarField out = solve(sys, options);
  out.slope = q;
  return out;
}

ScalarField solve_neumann_dual(const CellTensorGrid& grid, const VectorXd& q,
                               const SolverOptions& options) {
  return solve_neumann_dual(EnergyOperator(grid), q, options);
}

// ---------------------------------------------------------------------------

MatrixXd cell_gradient(const GridGeometry& g, const VectorXd& values) {
  check_geometry(g, values);
  const ReferenceElement ref(g.d, g.h);
  const Index cells = g.cell_count();
  MatrixXd grad(g.d, cells);
  VectorXd local(ref.nloc);
  for (Index c = 0; c < cells; ++c) {
    for (int j = 0; j < ref.nloc; ++j) local(j) = values(g.cell_node(c, j));
    grad.col(c).noalias() = ref.center_gradient * local;
  }
  return grad;
}

MatrixXd cell_gradient(const ScalarField& field) {
  return cell_gradient(field.geometry, field.values);
}

VectorXd flux_load(const GridGeometry& g, const MatrixXd& cell_vectors) {
  if (cell_vectors.rows() != g.d || cell_vectors.cols() != g.cell_count())
    throw InvalidParameter("cell vector field does not match the grid");
  const ReferenceElement ref(g.d, g.h);
  const double cell_volume = std::pow(g.h, g.d);
  VectorXd load = VectorXd::Zero(g.node_count());
  for (Index c = 0; c < g.cell_count(); ++c) {
    const VectorXd contrib = cell_volume * (ref.center_gradient.transpose() * cell_vectors.col(c));
    for (int j = 0; j < ref.nloc; ++j) load(g.cell_node(c, j)) += contrib(j);
  }
  return load;
}

double energy_form(const CellTensorGrid& grid, const VectorXd& u, const VectorXd& w) {
  const GridGeometry g = GridGeometry::of(grid);
  check_geometry(g, u);
  check_geometry(g, w);
  const ReferenceElement ref(g.d, g.h);
  VectorXd lu(ref.nloc), lw(ref.nloc);
  double total = 0;
  for (Index c = 0; c < g.cell_count(); ++c) {
    for (int j = 0; j < ref.nloc; ++j) {
      const Index node = g.cell_node(c, j);
      lu(j) = u(node);
      lw(j) = w(node);
    }
    total += lu.dot(ref.element_matrix(grid.packed(), c) * lw);
  }
  return total / g.volume();
}

double energy_of(const CellTensorGrid& grid, const ScalarField& field) {
  return 0.5 * energy_form(grid, field.values, field.values);
}

VectorXd flux_average(const CellTensorGrid& grid, const ScalarField& field) {
  const MatrixXd grad = cell_gradient(field);
  VectorXd sum = VectorXd::Zero(grid.dimension());
  for (Index c = 0; c < grid.cell_count(); ++c) sum.noalias() += grid.tensor(c) * grad.col(c);
  return sum / static_cast<double>(grid.cell_count());
}

}  // namespace homlab
