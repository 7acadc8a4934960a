#include "homlab/linalg.hpp"
#include "homlab/renorm.hpp"
#include "homlab/rng.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace homlab;

namespace {

SweepOptions small_sweep(std::vector<int> scales, int n, int m, Seed seed) {
  SweepOptions o;
  o.scales = std::move(scales);
  o.samples = n;
  o.cells_per_unit = m;
  o.seed = seed;
  o.threads = 1;
  return o;
}

std::string csv_of(const ScaleSeries& s) {
  std::ostringstream out;
  write_sweep_csv(out, s);
  return out.str();
}

}  // namespace

TEST_CASE("fit_exponent") {
  const std::vector<double> xs{2, 4, 8, 16, 32};
  std::vector<double> inv, flat;
  for (double x : xs) {
    inv.push_back(1 / x);
    flat.push_back(3.0);
  }
  const auto f = fit_exponent(xs, inv);
  CHECK(f.slope == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(fit_exponent(xs, flat).slope) < 1e-12);

  Engine e(5);
  boost::random::normal_distribution<double> noise(0, 0.01);
  std::vector<double> noisy;
  for (double x : xs) noisy.push_back(std::pow(x, -0.5) * (1 + noise(e)));
  const auto g = fit_exponent(xs, noisy);
  CHECK(g.slope >= -0.55);
  CHECK(g.slope <= -0.45);
  CHECK(g.stderr_slope < 0.05);

  CHECK_THROWS_AS(fit_exponent({1, 2, 3}, {1, 0, 2}), InvalidParameter);
  CHECK_THROWS_AS(fit_exponent({1, 2}, {1, 2}), InvalidParameter);
}

TEST_CASE("subgaussian theta") {
  // Equal samples c, s = 1: exp(c / theta) = 2.
  const std::vector<double> equal(32, 0.7);
  const auto t = subgaussian_theta(equal, 1.0);
  CHECK(t.theta == doctest::Approx(0.7 / std::log(2.0)).epsilon(1e-3));
  CHECK_FALSE(t.vacuous);

  const auto neg = subgaussian_theta(std::vector<double>(20, -1.0), 2.0);
  CHECK(neg.vacuous);
  CHECK(neg.theta == 0.0);

  // Standard normal, s = 2: E exp((X/theta)_+^2) = 1/2 + 1/2 (1 - 2/theta^2)^-1/2,
  // which equals 2 at theta = 1.5.
  Engine e(2024);
  boost::random::normal_distribution<double> normal;
  std::vector<double> xs(10000);
  for (auto& x : xs) x = normal(e);
  const auto tn = subgaussian_theta(xs, 2.0);
  CHECK(tn.theta >= 1.2);
  CHECK(tn.theta <= 2.2);
  CHECK(log_tail_mean(xs, 2.0, tn.theta) <= std::log(2.0));
  CHECK(log_tail_mean(xs, 2.0, tn.theta / 1.01) > std::log(2.0));

  CHECK_THROWS_AS(subgaussian_theta(std::vector<double>(8, 1.0), 2.0), InvalidParameter);
  CHECK_THROWS_AS(subgaussian_theta(equal, 0.0), InvalidParameter);
}

TEST_CASE("fluctuations of i.i.d. cell averages follow the CLT") {
  // No PDE: the statistic is the mean of r^d i.i.d. uniforms, stddev ~ r^{-d/2}.
  Engine e(77);
  boost::random::uniform_real_distribution<double> u(1, 4);
  for (int d : {1, 2}) {
    std::vector<double> scales;
    std::vector<std::vector<double>> samples;
    for (int r : {4, 8, 16, 32}) {
      scales.push_back(r);
      std::vector<double> v;
      const int cells = static_cast<int>(std::pow(r, d));
      for (int k = 0; k < 400; ++k) {
        double s = 0;
        for (int c = 0; c < cells; ++c) s += u(e);
        v.push_back(s / cells);
      }
      samples.push_back(std::move(v));
    }
    const auto f = fluctuation_fit(scales, samples);
    CHECK_FALSE(f.degenerate);
    CHECK(f.fit.slope == doctest::Approx(-d / 2.0).epsilon(0.1 / (d / 2.0)));
  }
  const auto flat = fluctuation_fit({2, 4, 8}, {{1, 1, 1}, {2, 2}, {3, 3, 3}});
  CHECK(flat.degenerate);
}

TEST_CASE("sweep on a constant field") {
  const auto s = scale_sweep(gen_constant(2, 1.5), small_sweep({2, 4, 8}, 8, 2, 1));
  REQUIRE(s.levels.size() == 3);
  for (const auto& l : s.levels) {
    CHECK(l.count() == 8);
    CHECK(l.nu_var.maxCoeff() < 1e-24);
    CHECK((l.a_mean - 1.5 * MatrixXd::Identity(2, 2)).norm() < 1e-9);
    CHECK(std::abs(duality_gap(l, 2).value) < 1e-9);
  }
  CHECK(std::abs(additivity_defect(s, 2).value) < 1e-9);
  CHECK(std::abs(additivity_defect(s, 4).value) < 1e-9);
  CHECK(fluctuation_scaling(s).degenerate);
  const auto table = duality_vs_additivity(s);
  for (const auto& row : table.rows) CHECK_FALSE(row.reliable);
  CHECK(std::isnan(table.c_emp));
  CHECK_THROWS_AS(additivity_defect(s, 8), InvalidParameter);
}

TEST_CASE("sweep on the 1D two-phase field") {
  const auto s = scale_sweep(gen_checkerboard(1, 1, 4, 0.5, 0), small_sweep({8, 16, 32, 64}, 64, 4, 11));
  const auto& top = s.level(64);
  const double se = std::sqrt(top.nu_var(0) / top.count()) * 2;  // a = 2 nu
  CHECK(std::abs(top.a_mean(0, 0) - 1.6) <= 2 * se);
  for (const auto& l : s.levels) {
    CHECK(mean_sample_gap(l, 1).value < 1e-8);
    // On means only Jensen's inequality separates A-bar from B-bar^-1.
    CHECK(duality_gap(l, 1).value >= 0);
  }
  CHECK(duality_gap(top, 1).value < 0.01);
  CHECK(top.b_mean(0, 0) == doctest::Approx(0.625).epsilon(0.02));
}

TEST_CASE("sweep on a 2D checkerboard") {
  const auto s = scale_sweep(gen_checkerboard(2, 1, 4, 0.5, 0), small_sweep({2, 4, 8}, 16, 2, 3));
  for (int r : {2, 4}) {
    const auto dec = mean_decrease(s, r, false);
    CHECK(dec.value >= -2 * dec.se);
    const auto decb = mean_decrease(s, r, true);
    CHECK(decb.value >= -2 * decb.se);
    const auto tau = additivity_defect(s, r);
    CHECK(tau.value >= -2 * tau.se);
  }
  for (const auto& l : s.levels) {
    CHECK(duality_gap(l, 2).value >= 0);
    CHECK(loewner_leq(MatrixXd(l.b_mean.inverse()), l.a_mean, 1e-12));
    for (const auto& smp : l.samples) CHECK(loewner_leq(MatrixXd(smp.b(2).inverse()), smp.a(2), 1e-9));
  }
  const auto est = abar_estimate(s.level(8), 2);
  CHECK(est.estimate.meta.provenance == Provenance::limit_estimate);
  CHECK(est.bracket > 0);
  CHECK(duality_vs_additivity(s).rows.size() == 3);
}

TEST_CASE("sweep determinism and CSV round trip") {
  const auto field = gen_poisson_inclusions(2, 1.0, 0.3, 4.0, 1.0, 0);
  auto opts = small_sweep({2, 4}, 8, 2, 99);
  const auto a = scale_sweep(field, opts);
  opts.threads = 3;
  const auto b = scale_sweep(field, opts);
  const std::string text = csv_of(a);
  CHECK(text == csv_of(b));
  CHECK(text.rfind("#schema=1\n", 0) == 0);

  std::istringstream in(text);
  const auto back = read_sweep_csv(in);
  CHECK(csv_of(back) == text);
  for (std::size_t i = 0; i < a.levels.size(); ++i) {
    CHECK(back.levels[i].a_mean == a.levels[i].a_mean);
    CHECK(back.levels[i].nu_var == a.levels[i].nu_var);
  }

  opts.mode = SamplingMode::nested;
  const auto nested = scale_sweep(field, opts);
  CHECK(nested.levels[0].samples[3].seed == nested.levels[1].samples[3].seed);
  CHECK(a.levels[0].samples[3].seed != a.levels[1].samples[3].seed);
}

TEST_CASE("sweep failures are recorded") {
  auto opts = small_sweep({2, 4}, 8, 2, 1);
  opts.solver.max_iterations = 1;
  const auto s = scale_sweep(gen_checkerboard(2, 1, 4, 0.5, 0), opts);
  CHECK(s.failure_count() == 16);
  CHECK(s.levels[0].count() == 0);
  CHECK(s.levels[0].failures[0].iterations == 1);

  std::ostringstream out;
  write_failures_csv(out, s.levels[0].failures);
  CHECK(out.str().rfind("#schema=1\nscale,sample_idx,seed,iterations,residual,what\n", 0) == 0);

  auto bad = small_sweep({2, 6}, 8, 2, 1);
  CHECK_THROWS_AS(scale_sweep(gen_constant(2, 1), bad), InvalidParameter);
  bad = small_sweep({2, 4}, 4, 2, 1);
  CHECK_THROWS_AS(scale_sweep(gen_constant(2, 1), bad), InvalidParameter);
}
