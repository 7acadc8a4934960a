#include "homlab/solver.hpp"

#include <doctest.h>

#include <cmath>

using namespace homlab;

namespace {

VectorXd unit(int d, int i) { return VectorXd::Unit(d, i); }

// 1D grid alternating a = 1, 4 per unit cell, starting with 1 at x = 0.
CellTensorGrid alternating_1d(int side, int m) {
  MatrixXd packed(1, side * m);
  for (int c = 0; c < side * m; ++c) packed(0, c) = (c / m) % 2 == 0 ? 1.0 : 4.0;
  return {1, side, m, {0}, packed};
}

}  // namespace

TEST_CASE("affine energy is exact") {
  const auto g = CellTensorGrid::uniform(Cube::at_origin(2, 1), 4, 3.0 * MatrixXd::Identity(2, 2));
  const auto geo = GridGeometry::of(g);
  CHECK(energy_of(g, affine_field(geo, unit(2, 0))) == doctest::Approx(1.5).epsilon(1e-14));
  const EnergyOperator op = assemble_energy(g);
  CHECK(op.energy(affine_field(geo, unit(2, 0)).values) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(op.energy(VectorXd::Constant(geo.node_count(), 2.5)) == doctest::Approx(0.0).epsilon(1e-14));

  // Two-cell 1D grid with a in {1, 4}: energy of l_1 is 1/2 * mean(a).
  MatrixXd packed(1, 2);
  packed << 1, 4;
  const CellTensorGrid two(1, 2, 1, {0}, packed);
  CHECK(energy_of(two, affine_field(GridGeometry::of(two), unit(1, 0))) == doctest::Approx(1.25));

  // Anisotropic constant tensor: energy of l_p is 1/2 p.a p.
  MatrixXd a(2, 2);
  a << 2, 0.5, 0.5, 1;
  const auto ga = CellTensorGrid::uniform(Cube{{-1, 3}, 2}, 3, a);
  VectorXd p(2);
  p << 0.3, -1.2;
  CHECK(energy_of(ga, affine_field(GridGeometry::of(ga), p)) == doctest::Approx(0.5 * p.dot(a * p)).epsilon(1e-13));
}

TEST_CASE("dirichlet affine solve") {
  const auto g = CellTensorGrid::uniform(Cube::at_origin(2, 3), 4, 2.0 * MatrixXd::Identity(2, 2));
  VectorXd p(2);
  p << 1.0, -0.5;
  const auto v = solve_dirichlet_affine(g, p);
  CHECK((v.values - affine_field(v.geometry, p).values).lpNorm<Eigen::Infinity>() < 1e-8);

  const auto zero = solve_dirichlet_affine(g, VectorXd::Zero(2));
  CHECK(zero.values.norm() == 0.0);

  // 1D alternating {1, 4}: flux a v' is constant and equals the harmonic mean.
  const auto g1 = alternating_1d(8, 4);
  const auto v1 = solve_dirichlet_affine(g1, unit(1, 0));
  const MatrixXd grad = cell_gradient(v1);
  for (Index c = 0; c < g1.cell_count(); ++c)
    CHECK(g1.packed()(0, c) * grad(0, c) == doctest::Approx(1.6).epsilon(1e-9));
  CHECK(flux_average(g1, v1)(0) == doctest::Approx(1.6).epsilon(1e-9));
  CHECK(v1.stats.residual <= 1e-10);
}

TEST_CASE("neumann dual solve") {
  const auto g = CellTensorGrid::uniform(Cube::at_origin(2, 2), 4, 4.0 * MatrixXd::Identity(2, 2));
  VectorXd q(2);
  q << 1.0, 2.0;
  const auto u = solve_neumann_dual(g, q);
  const MatrixXd grad = cell_gradient(u);
  for (Index c = 0; c < g.cell_count(); ++c) CHECK((grad.col(c) - q / 4.0).norm() < 1e-9);
  CHECK(u.geometry.node_weights().dot(u.values) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  const auto zero = solve_neumann_dual(g, VectorXd::Zero(2));
  CHECK(zero.values.norm() == 0.0);

  // 1D {1, 4}: grad u = q / a, so 1/2 mean(q . grad u) = 1/2 mean(1/a).
  const auto g1 = alternating_1d(8, 2);
  const auto u1 = solve_neumann_dual(g1, unit(1, 0));
  const MatrixXd g1grad = cell_gradient(u1);
  CHECK(0.5 * g1grad.mean() == doctest::Approx(0.3125).epsilon(1e-9));
}

TEST_CASE("cell gradients") {
  const auto g = CellTensorGrid::uniform(Cube{{2, -1, 0}, 2}, 2, MatrixXd::Identity(3, 3));
  const auto geo = GridGeometry::of(g);
  VectorXd p(3);
  p << 0.25, -1, 3;
  const MatrixXd grad = cell_gradient(affine_field(geo, p));
  for (Index c = 0; c < geo.cell_count(); ++c) CHECK((grad.col(c) - p).norm() < 1e-12);
  CHECK(cell_gradient(geo, VectorXd::Constant(geo.node_count(), 7.0)).norm() == 0.0);
}

TEST_CASE("iteration cap raises solver failure") {
  const auto g = alternating_1d(16, 4);
  SolverOptions opts;
  opts.max_iterations = 3;
  CHECK_THROWS_AS(solve_dirichlet_affine(g, unit(1, 0), opts), SolverFailure);
  try {
    solve_dirichlet_affine(g, unit(1, 0), opts);
  } catch (const SolverFailure& e) {
    CHECK(e.iterations() == 3);
    CHECK(e.residual() > 1e-10);
  }
}
