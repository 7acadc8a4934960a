#include "homlab/homerr.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace homlab;

namespace {

BoundaryValueProblem problem(int d, BoundaryFunction f, int inv_eps, int m) {
  BoundaryValueProblem p;
  p.d = d;
  p.f = f;
  p.inv_eps = inv_eps;
  p.cells_per_eps = m;
  return p;
}

// Piecewise-linear interpolant of a 1D nodal field, as a function of x = eps y.
std::function<double(double)> interpolant(const EpsSolution& s) {
  return [&s](double x) {
    const auto& g = s.u.geometry;
    const double t = x / s.eps / g.h;
    const int k = std::clamp(static_cast<int>(std::floor(t)), 0, g.cells_per_axis - 1);
    const double w = t - k;
    return (1 - w) * s.u.values(k) + w * s.u.values(k + 1);
  };
}

const MatrixXd kCheckerAbar = 2.0 * MatrixXd::Identity(2, 2);

}  // namespace

TEST_CASE("boundary function catalogue") {
  VectorXd x(2);
  x << 0.3, 0.7;
  CHECK(evaluate(BoundaryFunction::affine, x) == doctest::Approx(0.65));
  CHECK(evaluate(BoundaryFunction::quadratic, x) == doctest::Approx(0.09 - 0.49));
  CHECK(evaluate(BoundaryFunction::sine, VectorXd::Ones(1)) == doctest::Approx(1.0));
  VectorXd top(2);
  top << 0.5, 1.0;
  CHECK(evaluate(BoundaryFunction::sine, top) == doctest::Approx(1.0));
  CHECK(boundary_function_from_string("sine") == BoundaryFunction::sine);
  CHECK_THROWS_AS(boundary_function_from_string("cubic"), ConfigError);
  CHECK_THROWS_AS(problem(2, BoundaryFunction::affine, 8, 1).validate(), InvalidParameter);
  CHECK_THROWS_AS(problem(2, BoundaryFunction::affine, 0, 4).validate(), InvalidParameter);
}

TEST_CASE("exact L2 and gradient norms of multilinear fields") {
  const auto geo = GridGeometry::of(CellTensorGrid::uniform(Cube::at_origin(2, 4), 2, MatrixXd::Identity(2, 2)));
  VectorXd p(2);
  p << 1.0, 0.0;
  const auto x = affine_field(geo, p);
  ScalarField zero = x;
  zero.values.setZero();
  // (1/16) \int_{[0,4]^2} x^2 = 16/3.
  CHECK(l2_error(x, zero) == doctest::Approx(std::sqrt(16.0 / 3.0)).epsilon(1e-13));
  p << 0.5, -2.0;
  const auto y = affine_field(geo, p);
  const std::vector<bool> all(static_cast<std::size_t>(geo.cell_count()), true);
  CHECK(gradient_error_sq(y, zero, all) == doctest::Approx(4.25).epsilon(1e-13));

  const auto inner = interior_mask(geo, 1.0);
  int count = 0;
  for (bool b : inner) count += b;
  CHECK(count == 16);  // [1,3]^2 at h = 1/2
  CHECK(gradient_error_sq(y, zero, inner) == doctest::Approx(4.25 / 4).epsilon(1e-13));
}

TEST_CASE("constant field: no eps dependence") {
  const auto field = gen_constant(2, 2.0);
  for (int inv : {8, 16}) {
    const auto p = problem(2, BoundaryFunction::sine, inv, 2);
    const auto ue = solve_eps(p, field, 1);
    const auto ub = solve_homogenized(kCheckerAbar, p);
    CHECK(l2_error(ue.u, ub.u) < 1e-9);
    const auto w = weak_convergence_check(ue, ub, kCheckerAbar, 0.5);
    CHECK(w.gradient_window < 1e-8);
    CHECK(w.flux_window < 1e-8);
    CHECK(w.gradient_pointwise < 1e-8);
  }
}

TEST_CASE("affine data is reproduced exactly") {
  const auto p = problem(2, BoundaryFunction::affine, 4, 2);
  const auto ue = solve_eps(p, gen_constant(2, 3.0), 5);
  const auto ub = solve_homogenized(kCheckerAbar, p);
  const VectorXd f = boundary_values(p, ue.u.geometry);
  CHECK((ue.u.values - f).lpNorm<Eigen::Infinity>() < 1e-9);
  CHECK((ub.u.values - f).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("harmonic data is reproduced for isotropic abar") {
  const auto p = problem(2, BoundaryFunction::quadratic, 4, 2);
  const auto ub = solve_homogenized(kCheckerAbar, p);
  // x^2 - y^2 is also discretely harmonic for the Q1 stiffness on a uniform mesh.
  CHECK((ub.u.values - boundary_values(p, ub.u.geometry)).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK_THROWS_AS(solve_homogenized(-kCheckerAbar, p), NumericalDegeneracy);
}

TEST_CASE("1D oracle") {
  const auto flat = Oracle1D(gen_constant(1, 2.0), 1.0 / 8, 0.0, 1.0);
  CHECK(flat(0.3) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(flat.flux() == doctest::Approx(2.0));

  // Period-2 two-phase field {1, 4}: flux is the harmonic mean 1.6.
  const auto two = gen_checkerboard(1, 1, 4, 0.5, 3);
  const auto o = Oracle1D(two, 1.0 / 32, 0.0, 1.0, 4);
  const auto& xs = o.breakpoints();
  const auto& us = o.values();
  for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
    const double y = 32 * 0.5 * (xs[k] + xs[k + 1]);
    const double a = two.tensor_at(std::span<const double>(&y, 1))(0, 0);
    CHECK((us[k + 1] - us[k]) / (xs[k + 1] - xs[k]) == doctest::Approx(o.flux() / a).epsilon(1e-10));
  }
  CHECK(us.back() == 1.0);
  CHECK(o.l2_distance([&](double x) { return o(x); }) < 1e-15);
  CHECK_THROWS_AS(Oracle1D(two, 0.3, 0, 1), InvalidParameter);
  CHECK_THROWS_AS(Oracle1D(gen_constant(2, 1.0), 0.5, 0, 1), InvalidParameter);
}

TEST_CASE("1D finite elements agree with the oracle") {
  const auto two = gen_checkerboard(1, 1, 4, 0.5, 0);
  for (auto f : {BoundaryFunction::affine, BoundaryFunction::sine}) {
    const auto p = problem(1, f, 16, 4);
    const Seed seed = 42;
    const auto ue = solve_eps(p, two, seed);
    const Oracle1D o(two.with_seed(seed), p.eps(), evaluate(f, VectorXd::Zero(1)), evaluate(f, VectorXd::Ones(1)), 4);
    // Nodally exact in 1D: the oracle breakpoints are the mesh nodes.
    CHECK(o.l2_distance(interpolant(ue)) < 1e-9);
  }

  // Coefficients varying inside a unit cell: FEM converges to a fine oracle.
  const auto noise = gen_filtered_white_noise(1, 0.5, 0.5, 0);
  const Oracle1D fine(noise.with_seed(9), 1.0 / 8, 0.0, 1.0, 256);
  double last = 1;
  for (int m : {2, 4, 8, 16}) {
    const auto ue = solve_eps(problem(1, BoundaryFunction::affine, 8, m), noise, 9);
    const double dist = fine.l2_distance(interpolant(ue));
    CHECK(dist < last);
    last = dist;
  }
  CHECK(last < 1e-4);
}

TEST_CASE("discrete maximum principle") {
  const auto field = gen_checkerboard(2, 1, 4, 0.5, 0);
  for (auto f : {BoundaryFunction::quadratic, BoundaryFunction::sine}) {
    const auto p = problem(2, f, 8, 2);
    const auto ue = solve_eps(p, field, 17);
    const VectorXd bv = boundary_values(p, ue.u.geometry);
    double lo = INFINITY, hi = -INFINITY;
    for (Index n = 0; n < bv.size(); ++n)
      if (ue.u.geometry.is_boundary_node(n)) {
        lo = std::min(lo, bv(n));
        hi = std::max(hi, bv(n));
      }
    CHECK(ue.u.values.minCoeff() >= lo - 1e-8);
    CHECK(ue.u.values.maxCoeff() <= hi + 1e-8);
  }
}

TEST_CASE("two-scale expansion") {
  const auto field = gen_checkerboard(2, 1, 4, 0.5, 0);
  const auto p = problem(2, BoundaryFunction::quadratic, 8, 2);
  for (Seed seed : {1, 2, 3}) {
    const auto ue = solve_eps(p, field, seed);
    const auto ub = solve_homogenized(kCheckerAbar, p);
    const auto corr = correctors_for(p, field, seed);
    REQUIRE(corr.size() == 2);
    CHECK(corr[0].grid.side() == 16);
    const auto ts = two_scale_expansion(ue, ub, corr);
    CHECK(ts.h1_two_scale < ts.h1_plain);
  }

  // Constant field: zero correctors, w = ubar.
  const auto flat = gen_constant(2, 2.0);
  const auto ue = solve_eps(p, flat, 1);
  const auto ub = solve_homogenized(kCheckerAbar, p);
  const auto ts = two_scale_expansion(ue, ub, correctors_for(p, flat, 1));
  CHECK((ts.w.values - ub.u.values).lpNorm<Eigen::Infinity>() < 1e-9);
  CHECK(ts.h1_two_scale < 1e-7);

  // Too small a corrector cube.
  const auto big = problem(2, BoundaryFunction::quadratic, 32, 2);
  CHECK_THROWS_AS(two_scale_expansion(solve_eps(big, flat, 1), solve_homogenized(kCheckerAbar, big),
                                      correctors_for(p, flat, 1)),
                  InvalidParameter);
}

TEST_CASE("affine data: two-scale gradient tracks the corrector") {
  // grad ubar = p everywhere, so w = ubar + p.phi and the interior error is
  // only the boundary layer's far field.
  const auto field = gen_checkerboard(2, 1, 4, 0.5, 0);
  const auto p = problem(2, BoundaryFunction::affine, 16, 2);
  const auto ue = solve_eps(p, field, 4);
  const auto ub = solve_homogenized(kCheckerAbar, p);
  const auto ts = two_scale_expansion(ue, ub, correctors_for(p, field, 4));
  CHECK(ts.h1_two_scale < 0.25 * ts.h1_plain);
}

TEST_CASE("linearity in the boundary data") {
  // Adding constants shifts u_eps, ubar and w by the same constant; adding an
  // affine l shifts ubar by l and u_eps by the a-harmonic extension of l.
  const auto field = gen_checkerboard(2, 1, 4, 0.5, 0);
  const auto p = problem(2, BoundaryFunction::quadratic, 8, 2);
  const auto grid = sample_on_grid(field.with_seed(6), p.cube(), 2);
  const EnergyOperator op(grid);
  SolverOptions tight;
  tight.tolerance = 1e-13;
  const VectorXd f = boundary_values(p, op.geometry());
  const auto u = solve_dirichlet(op, f, std::nullopt, tight);
  const auto shifted = solve_dirichlet(op, (f.array() + 0.75).matrix(), std::nullopt, tight);
  CHECK(((shifted.values - u.values).array() - 0.75).abs().maxCoeff() < 1e-9);

  const auto l = problem(2, BoundaryFunction::affine, 8, 2);
  const VectorXd lv = boundary_values(l, op.geometry());
  const auto sum = solve_dirichlet(op, f + lv, std::nullopt, tight);
  const auto ul = solve_dirichlet(op, lv, std::nullopt, tight);
  CHECK((sum.values - u.values - ul.values).lpNorm<Eigen::Infinity>() < 1e-9);

  const auto ub = solve_homogenized(kCheckerAbar, p, tight);
  const auto hom = CellTensorGrid::uniform(p.cube(), 2, kCheckerAbar);
  const auto ub_sum = solve_dirichlet(EnergyOperator(hom), f + lv, std::nullopt, tight);
  CHECK((ub_sum.values - ub.u.values - lv).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("weak but not strong convergence") {
  const auto field = gen_checkerboard(2, 1, 4, 0.5, 0);
  const auto p = problem(2, BoundaryFunction::sine, 16, 2);
  const auto ue = solve_eps(p, field, 8);
  const auto ub = solve_homogenized(kCheckerAbar, p);
  const auto w = weak_convergence_check(ue, ub, kCheckerAbar, 0.25);
  CHECK(w.windows == 16);
  CHECK(w.gradient_window < 0.5 * w.gradient_pointwise);
  CHECK(w.gradient_pointwise > 0.1);
  CHECK_THROWS_AS(weak_convergence_check(ue, ub, kCheckerAbar, 0.3), InvalidParameter);
}

TEST_CASE("1D error scaling by the oracle") {
  ErrorScalingOptions o;
  o.d = 1;
  o.f = BoundaryFunction::affine;
  o.inv_eps = {16, 32, 64, 128};
  o.samples = 64;
  o.seed = 3;
  o.method = ErrorMethod::oracle;
  o.threads = 2;
  const auto s = error_scaling(gen_checkerboard(1, 1, 4, 0.5, 0), MatrixXd::Constant(1, 1, 1.6), o);
  REQUIRE(s.rows.size() == 256);
  CHECK_FALSE(s.degenerate);
  CHECK(s.fit.slope >= 0.4);
  CHECK(s.fit.slope <= 0.6);
  for (std::size_t i = 1; i < s.mean_error.size(); ++i)
    CHECK(s.mean_error[i] <= s.mean_error[i - 1] + 2 * (s.se_error[i] + s.se_error[i - 1]));

  std::ostringstream out;
  write_error_csv(out, s);
  CHECK(out.str().rfind("#schema=1\n", 0) == 0);
  std::istringstream in(out.str());
  const auto back = read_error_csv(in);
  std::ostringstream again;
  write_error_csv(again, back);
  CHECK(again.str() == out.str());
  CHECK(back.fit.slope == s.fit.slope);

  auto bad = o;
  bad.d = 2;
  CHECK_THROWS_AS(error_scaling(gen_constant(2, 1.0), MatrixXd::Identity(2, 2), bad), InvalidParameter);
  bad = o;
  bad.inv_eps = {16, 32, 48};
  CHECK_THROWS_AS(error_scaling(gen_checkerboard(1, 1, 4, 0.5, 0), MatrixXd::Ones(1, 1), bad), InvalidParameter);
}

TEST_CASE("FEM error scaling: determinism, degeneracy, failures") {
  ErrorScalingOptions o;
  o.d = 2;
  o.inv_eps = {4, 8, 16};
  o.cells_per_eps = 2;
  o.samples = 3;
  o.seed = 11;
  o.two_scale = true;
  o.threads = 1;
  const auto field = gen_checkerboard(2, 1, 4, 0.5, 0);
  const auto a = error_scaling(field, kCheckerAbar, o);
  o.threads = 3;
  const auto b = error_scaling(field, kCheckerAbar, o);
  std::ostringstream ca, cb;
  write_error_csv(ca, a);
  write_error_csv(cb, b);
  CHECK(ca.str() == cb.str());
  for (const auto& r : a.rows) {
    CHECK(std::isnan(r.h1_two_scale) == (r.eps > 0.2));
    if (r.eps < 0.2) CHECK(r.h1_two_scale < r.h1_plain);
  }

  o.two_scale = false;
  const auto flat = error_scaling(gen_constant(2, 2.0), kCheckerAbar, o);
  CHECK(flat.degenerate);

  // The homogenized solves are shared by all samples: their failure aborts the run.
  o.solver.max_iterations = 1;
  CHECK_THROWS_AS(error_scaling(field, kCheckerAbar, o), SolverFailure);
}
