#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvhom/cell_solver.hpp"
#include "mvhom/errors.hpp"
#include "mvhom/rng.hpp"
#include "oracles.hpp"

using namespace mvhom;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Vec on_circle(double t) {
  Vec s(2);
  s << std::cos(t), std::sin(t);
  return s;
}

Mat tangent_slope(double t, double size) {
  Mat xi(2, 1);
  xi << -std::sin(t) * size, std::cos(t) * size;
  return xi;
}

}  // namespace

TEST_SUITE("cell_solver") {
  TEST_CASE("vertex oracle is optimal against random feasible points") {
    const auto a = [](double y) { return 2.0 + std::sin(kTwoPi * y); };
    const int t = 2, n = 16, cells = t * n;
    const double opt = oracle::lp_vertex(a, t, n, 1.0);
    CounterRng rng(31);
    for (int k = 0; k < 2000; ++k) {
      std::vector<double> w(cells);
      double sum = 0.0;
      for (double& x : w) sum += (x = rng.uniform(-1.0, 1.0) + (k % 3 == 0 ? 0.0 : 0.5));
      double obj = 0.0;
      for (int i = 0; i < cells; ++i) {
        const double delta = w[i] + (cells - sum) / cells;
        obj += a((i + 0.5) / n) * std::abs(delta) / cells;
      }
      CHECK(obj >= opt - 1e-12);
    }
  }

  TEST_CASE("1D weighted cell value matches the LP oracle") {
    const auto f = std::make_shared<const Integrand>(
        Integrand::weighted_norm(1, 2, Coefficient::sine(2, 1, 1)));
    const auto a = [](double y) { return 2.0 + std::sin(kTwoPi * y); };
    for (BoundaryMode mode : {BoundaryMode::DirichletZero, BoundaryMode::Periodic}) {
      CellProblemSpec spec;
      spec.density = f;
      spec.basis = Eigen::MatrixXd(2, 1);
      spec.basis << 0, 1;
      spec.slope = tangent_slope(0.0, 1.0);
      spec.t = 2;
      spec.n = 32;
      spec.mode = mode;
      const CellSolution sol = solve_cell(spec);
      const double lp = oracle::lp_vertex(a, 2, 32, 1.0);
      CHECK(sol.converged);
      CHECK(sol.value >= lp - 1e-12);
      CHECK(sol.value <= lp * (1.0 + 1e-2));
      CHECK(sol.value_mu_half <= sol.value_mu + 1e-12);
    }
  }

  TEST_CASE("isotropic density: zero corrector is optimal") {
    CounterRng rng(32);
    const auto f1 = std::make_shared<const Integrand>(Integrand::weighted_norm(1, 2, Coefficient::constant(1)));
    CellOptions opt;
    opt.schedule = {1, 2};
    opt.n = 16;
    for (int k = 0; k < 5; ++k) {
      const double th = rng.uniform(0.0, kTwoPi);
      const Mat xi = tangent_slope(th, rng.uniform(0.1, 10.0));
      const DensityEstimate e = tf_hom(f1, Manifold::circle(), ManifoldPoint{on_circle(th)}, xi, opt);
      CHECK(e.value == doctest::Approx(xi.norm()).epsilon(5e-3));
      CHECK(e.upper_bound);
      CHECK(e.trace.size() == 2);
    }
    const Manifold s2 = Manifold::sphere(3);
    const auto f2 = std::make_shared<const Integrand>(Integrand::weighted_norm(2, 3, Coefficient::constant(1)));
    Vec s(3);
    s << 0, 0, 1;
    Mat xi(3, 2);
    xi << 1, 0.5, -2, 0.3, 0, 0;
    const DensityEstimate e = tf_hom(f2, s2, ManifoldPoint{s}, xi, opt);
    CHECK(e.value == doctest::Approx(xi.norm()).epsilon(5e-3));
  }

  TEST_CASE("growth bounds and Lipschitz quotients on samples") {
    const auto f = std::make_shared<const Integrand>(Integrand::weighted_norm(1, 2, Coefficient::sine(2, 1, 1)));
    const HypothesisReport rep = certify(*f, SamplerConfig{});
    CellOptions opt;
    opt.schedule = {1, 2};
    opt.n = 32;
    CounterRng rng(33);
    const double th = 0.7;
    std::vector<double> sizes, values;
    for (int k = 0; k < 6; ++k) {
      const double size = rng.uniform(0.1, 5.0);
      const Mat xi = tangent_slope(th, size);
      const double v = tf_hom(f, Manifold::circle(), ManifoldPoint{on_circle(th)}, xi, opt).value;
      const double tol = cell_tolerance(xi);
      CHECK(v >= rep.alpha_hat * size - tol);
      CHECK(v <= rep.beta_hat * (1.0 + size) + tol);
      sizes.push_back(size);
      values.push_back(v);
    }
    double lip = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i)
      for (std::size_t j = i + 1; j < sizes.size(); ++j)
        lip = std::max(lip, std::abs(values[i] - values[j]) / std::abs(sizes[i] - sizes[j]));
    CHECK(std::isfinite(lip));
    CHECK(lip <= rep.lip_hat + 0.05);
  }

  TEST_CASE("recession of a 1-homogeneous density reproduces the density") {
    const auto f = std::make_shared<const Integrand>(Integrand::weighted_norm(1, 2, Coefficient::sine(2, 1, 1)));
    CellOptions opt;
    opt.schedule = {1, 2};
    opt.n = 32;
    const Mat xi = tangent_slope(0.3, 1.0);
    const ManifoldPoint s{on_circle(0.3)};
    const double base = tf_hom(f, Manifold::circle(), s, xi, opt).value;
    const double rec = tf_hom_recession(f, Manifold::circle(), s, xi, {8, 16, 32}, opt).value;
    CHECK(rec == doctest::Approx(base).epsilon(2e-3));
  }

  TEST_CASE("preconditions are enforced") {
    const auto f = std::make_shared<const Integrand>(Integrand::weighted_norm(1, 2, Coefficient::constant(1)));
    const Manifold c = Manifold::circle();
    Vec off(2);
    off << 1.1, 0;
    CHECK_THROWS(tf_hom(f, c, ManifoldPoint{off}, tangent_slope(0, 1), {}));
    Mat normal(2, 1);
    normal << 1, 0;
    CHECK_THROWS(tf_hom(f, c, ManifoldPoint{on_circle(0)}, normal, {}));
    CellOptions bad;
    bad.schedule = {1, 3};
    CHECK_THROWS(tf_hom(f, c, ManifoldPoint{on_circle(0)}, tangent_slope(0, 1), bad));
    CellProblemSpec spec;
    spec.density = f;
    spec.basis = Eigen::MatrixXd(2, 1);
    spec.basis << 0, 1;
    spec.slope = normal;
    CHECK_THROWS(solve_cell(spec));
  }

  TEST_CASE("periodic extended-integrand cell value on M") {
    const auto f = std::make_shared<const Integrand>(Integrand::weighted_norm(1, 2, Coefficient::constant(1)));
    const ExtendedIntegrand g(f, Manifold::circle());
    CellOptions opt;
    opt.schedule = {1, 2};
    opt.n = 16;
    const Mat xi = tangent_slope(1.0, 2.0);
    const DensityEstimate e = ginf_hom_periodic(g, on_circle(1.0), xi, opt);
    CHECK(e.value == doctest::Approx(2.0).epsilon(5e-3));
  }

  TEST_CASE("rank-one convexity probe") {
    Vec a(2);
    a << 0, 1;
    VecN nu(1);
    nu << 1;
    const Mat xi = tangent_slope(0.0, 0.5);
    const std::vector<double> lambdas{-2, -1, -0.5, 0, 0.5, 1, 2};
    const auto convex = [](const Mat& x) { return x.norm(); };
    const ConvexityReport ok = rank_one_convexity_probe(convex, xi, a, nu, lambdas, 1e-12);
    CHECK(ok.violations.empty());
    CHECK(ok.values.size() == lambdas.size());
    const auto well = [](const Mat& x) {
      const double r = x.squaredNorm();
      return (r - 1.0) * (r - 1.0);
    };
    const ConvexityReport bad = rank_one_convexity_probe(well, Mat::Zero(2, 1), a, nu, lambdas, 1e-12);
    CHECK_FALSE(bad.violations.empty());
    CHECK(bad.max_violation > 0.1);
  }
}
