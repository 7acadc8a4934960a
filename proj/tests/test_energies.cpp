#include "homlab/energies.hpp"
#include "homlab/linalg.hpp"

#include <doctest.h>

using namespace homlab;

namespace {

CellTensorGrid alternating_1d(int side, int m) {
  MatrixXd packed(1, side * m);
  for (int c = 0; c < side * m; ++c) packed(0, c) = (c / m) % 2 == 0 ? 1.0 : 4.0;
  return {1, side, m, {0}, packed};
}

CellTensorGrid constant_grid(int d, int side, int m, const MatrixXd& a) {
  return CellTensorGrid::uniform(Cube::centered(d, side), m, a);
}

// Independent 1D oracle: a(U) is the harmonic mean, b(U) the mean of 1/a.
double mean_inverse(const CellTensorGrid& g) { return g.packed().row(0).cwiseInverse().mean(); }

}  // namespace

TEST_CASE("nu and nu* on constant and 1D fields") {
  const auto g = constant_grid(2, 4, 2, 3.0 * MatrixXd::Identity(2, 2));
  CHECK(nu(g, VectorXd::Unit(2, 0)).value == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(nu(g, VectorXd::Zero(2)).value == 0.0);
  CHECK(nu_star(g, VectorXd::Unit(2, 0)).value == doctest::Approx(1.0 / 6).epsilon(1e-10));
  CHECK(nu_star(g, VectorXd::Zero(2)).value == 0.0);

  const auto g1 = alternating_1d(16, 4);
  CHECK(nu(g1, VectorXd::Ones(1)).value == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(nu_star(g1, VectorXd::Ones(1)).value == doctest::Approx(0.3125).epsilon(1e-9));
}

TEST_CASE("effective matrix and dual form") {
  for (double c : {0.5, 1.0, 3.0}) {
    const auto g = constant_grid(2, 4, 2, c * MatrixXd::Identity(2, 2));
    CHECK((effective_matrix(g).matrix - c * MatrixXd::Identity(2, 2)).norm() < 1e-9);
    CHECK((dual_form(g).matrix - MatrixXd::Identity(2, 2) / c).norm() < 1e-9);
  }
  const auto g1 = alternating_1d(16, 4);
  CHECK(effective_matrix(g1).matrix(0, 0) == doctest::Approx(1.6).epsilon(1e-9));
  CHECK(dual_form(g1).matrix(0, 0) == doctest::Approx(0.625).epsilon(1e-9));

  // Polarization reproduces a constant anisotropic tensor.
  MatrixXd diag(2, 2);
  diag << 1, 0, 0, 4;
  CHECK((effective_matrix(constant_grid(2, 4, 2, diag)).matrix - diag).norm() < 1e-9);
  MatrixXd full(3, 3);
  full << 2, 0.3, -0.2, 0.3, 1, 0.1, -0.2, 0.1, 1.5;
  const auto g3 = constant_grid(3, 2, 2, full);
  CHECK((effective_matrix(g3).matrix - full).norm() < 1e-9);
  CHECK((dual_form(g3).matrix - full.inverse()).norm() < 1e-9);

  const auto resp = cube_response(g3);
  CHECK((resp.a.matrix - full).norm() < 1e-9);
  CHECK(resp.nu_values.size() == 6);
  CHECK(resp.a.meta.provenance == Provenance::dirichlet);
  CHECK(resp.b.meta.provenance == Provenance::neumann_dual);
}

TEST_CASE("polarization helpers") {
  CHECK(direction_label({0, -1}) == "e1");
  CHECK(direction_label({0, 2}) == "e1+e3");
  MatrixXd m(2, 2);
  m << 2, 0.5, 0.5, 3;
  VectorXd values(3);
  for (int k = 0; k < 3; ++k) {
    const VectorXd e = direction_vector(2, polarization_directions(2)[static_cast<std::size_t>(k)]);
    values(k) = 0.5 * e.dot(m * e);
  }
  CHECK((polarize(2, values) - m).norm() < 1e-14);
}

TEST_CASE("quadratic homogeneity") {
  const auto g = sample_on_grid(gen_checkerboard(2, 1, 4, 0.5, 31), Cube::centered(2, 6), 2);
  VectorXd p(2);
  p << 0.7, -0.4;
  const double v1 = nu(g, p).value;
  CHECK(nu(g, 2 * p).value == doctest::Approx(4 * v1).epsilon(1e-9));
  const double s1 = nu_star(g, p).value;
  CHECK(nu_star(g, 2 * p).value == doctest::Approx(4 * s1).epsilon(1e-9));
  CHECK(nu_star(g, -p).value == doctest::Approx(s1).epsilon(1e-9));
}

TEST_CASE("nu only sees the field inside the cube") {
  const auto field = gen_checkerboard(2, 1, 4, 0.5, 123);
  const auto inner = sample_on_grid(field, Cube{{0, 0}, 4}, 2);
  // Outer cube from a different seed with the inner block overwritten.
  auto outer = sample_on_grid(field.with_seed(999), Cube{{-2, -2}, 8}, 2);
  const int off[2] = {2, 2};
  for (Index c = 0; c < inner.cell_count(); ++c) {
    auto ij = inner.cell_coords(c);
    ij[0] += 4;
    ij[1] += 4;
    outer.packed().col(outer.cell_index(ij)) = inner.packed().col(c);
  }
  const auto cut = outer.subgrid(off, 4);
  CHECK(cut.packed() == inner.packed());
  CHECK(nu(cut, VectorXd::Unit(2, 0)).value == nu(inner, VectorXd::Unit(2, 0)).value);
}

TEST_CASE("pinching and duality on random cubes") {
  for (int s = 0; s < 10; ++s) {
    const auto field = s % 2 ? gen_checkerboard(2, 1, 9, 0.4, 50 + s)
                             : gen_poisson_inclusions(2, 1.0, 0.4, 0.2, 2.0, 50 + s);
    const auto g = sample_on_grid(field, Cube::centered(2, 6), 3);
    const auto r = cube_response(g);
    const MatrixXd& a = r.a.matrix;
    const MatrixXd& b = r.b.matrix;
    CHECK(loewner_leq(g.harmonic_mean(), a, 1e-9));
    CHECK(loewner_leq(a, g.arithmetic_mean(), 1e-9));
    CHECK(loewner_leq(b.inverse(), a, 1e-9));
    CHECK(min_eigenvalue(MatrixXd(b - a.inverse())) >= -1e-9);
    CHECK(duality_gap(r.a, r.b, VectorXd::Unit(2, 0)) >= -1e-9);
    CHECK(duality_gap_max(a, b) >= -1e-9);
  }
}

TEST_CASE("duality gap") {
  const auto g = constant_grid(2, 4, 2, 2.0 * MatrixXd::Identity(2, 2));
  const auto r = cube_response(g);
  CHECK(std::abs(duality_gap(r.a, r.b, VectorXd::Ones(2))) < 1e-9);

  // d = 1: nu and nu* are exactly dual.
  const auto g1 = sample_on_grid(gen_checkerboard(1, 1, 4, 0.5, 8), Cube::centered(1, 64), 4);
  const auto r1 = cube_response(g1);
  CHECK(std::abs(duality_gap(r1.a, r1.b, VectorXd::Ones(1))) < 1e-8);
  CHECK(r1.a.matrix(0, 0) == doctest::Approx(1.0 / mean_inverse(g1)).epsilon(1e-9));

  DualForm bad;
  bad.matrix = -MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(duality_gap(r.a, bad, VectorXd::Ones(2)), NumericalDegeneracy);
}

TEST_CASE("subadditivity") {
  const auto g = constant_grid(2, 8, 2, 1.7 * MatrixXd::Identity(2, 2));
  CHECK(std::abs(check_subadditivity(g, VectorXd::Unit(2, 1)).defect) < 1e-9);

  const auto odd = constant_grid(2, 5, 2, MatrixXd::Identity(2, 2));
  CHECK_THROWS_AS(check_subadditivity(odd, VectorXd::Unit(2, 0)), InvalidParameter);

  // Checkerboard r = 8 -> 16: strictly positive defect for every seed.
  int positive = 0;
  for (int s = 0; s < 20; ++s) {
    const auto parent = sample_on_grid(gen_checkerboard(2, 1, 4, 0.5, 700 + s), Cube::centered(2, 16), 2);
    const auto chk = check_subadditivity(parent, VectorXd::Unit(2, 0));
    CHECK(chk.defect >= -1e-9);
    if (chk.defect > 0) ++positive;
    CHECK(check_subadditivity_dual(parent, VectorXd::Unit(2, 1)).defect >= -1e-9);
  }
  CHECK(positive == 20);
}
