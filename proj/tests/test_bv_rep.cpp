#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mvhom/bv_rep.hpp"
#include "mvhom/errors.hpp"

using namespace mvhom;

namespace {

constexpr double kPi = std::numbers::pi;

Vec e(int d, int i) {
  Vec v = Vec::Zero(d);
  v[i] = 1.0;
  return v;
}

VecN vn(std::initializer_list<double> xs) {
  VecN v(static_cast<long>(xs.size()));
  long i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

BVRecipe unit_interval() { return BVRecipe{Box{vn({0}), vn({1})}, e(2, 0), e(2, 1)}; }
BVRecipe unit_square() { return BVRecipe{Box{vn({0, 0}), vn({1, 1})}, e(2, 0), e(2, 1)}; }

// Depth-k staircase: piecewise linear interpolant of the Cantor function
// through the endpoints of the 2^k retained intervals, built by recursion.
double staircase(double s, int k) {
  if (k == 0) return s;
  if (s <= 1.0 / 3.0) return 0.5 * staircase(3.0 * s, k - 1);
  if (s >= 2.0 / 3.0) return 0.5 + 0.5 * staircase(3.0 * s - 2.0, k - 1);
  return 0.5;
}

}  // namespace

TEST_SUITE("bv_rep") {
  TEST_CASE("Cantor function values and symmetries") {
    CHECK(cantor_function(0.0) == 0.0);
    CHECK(cantor_function(1.0) == 1.0);
    CHECK(cantor_function(1.0 / 3.0) == doctest::Approx(0.5));
    CHECK(cantor_function(0.25) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(cantor_function(0.5) == 0.5);
    double prev = 0.0;
    for (int i = 1; i <= 1000; ++i) {
      const double s = i / 1000.0;
      const double c = cantor_function(s);
      CHECK(c >= prev);
      prev = c;
      // c is only log2/log3-Hoelder, so rounding in s shows up near 1e-10.
      CHECK(std::abs(cantor_function(s / 3.0) - 0.5 * c) <= 1e-9);
      CHECK(std::abs(cantor_function(1.0 - s) - (1.0 - c)) <= 1e-9);
      CHECK(std::abs(staircase(s, 20) - c) <= std::pow(0.5, 20) + 1e-12);
    }
  }

  TEST_CASE("finite-depth staircase has total variation one") {
    for (int k : {1, 4, 8}) {
      double tv = 0.0;
      const int m = 1 << 14;
      for (int i = 0; i < m; ++i) tv += std::abs(staircase((i + 1.0) / m, k) - staircase(double(i) / m, k));
      CHECK(tv == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("closed-form fixtures with isotropic stubs") {
    const Manifold c = Manifold::circle();
    const DensityEvaluators stubs = isotropic_stubs(c);
    SUBCASE("pure AC") {
      BVRecipe r = unit_interval();
      r.slope = vn({2 * kPi});
      const BVMap u = build_bv(r, c);
      const EnergyBreakdown eb = evaluate_fhom(u, stubs);
      CHECK(eb.bulk == doctest::Approx(2 * kPi).epsilon(1e-12));
      CHECK(eb.surface == 0.0);
      CHECK(eb.cantor == 0.0);
      const DerivativeDecomposition d = u.decompose();
      CHECK(d.jump.empty());
      CHECK(d.cantor.empty());
      CHECK(d.ac.size() == 1024);
    }
    SUBCASE("pure jump") {
      BVRecipe r = unit_interval();
      r.jumps.push_back({vn({1}), 0.4, 2.5});
      const EnergyBreakdown eb = evaluate_fhom(build_bv(r, c), stubs);
      CHECK(eb.surface == doctest::Approx(2.5).epsilon(1e-12));
      CHECK(eb.bulk == 0.0);
      BVRecipe wrap = unit_interval();
      wrap.jumps.push_back({vn({1}), 0.4, 5.0});
      CHECK(evaluate_fhom(build_bv(wrap, c), stubs).surface ==
            doctest::Approx(2 * kPi - 5.0).epsilon(1e-12));
    }
    SUBCASE("pure Cantor") {
      BVRecipe r = unit_interval();
      r.cantor = CantorRecipe{vn({1}), 0.0, 1.0, 2 * kPi, 12};
      const BVMap u = build_bv(r, c);
      const EnergyBreakdown eb = evaluate_fhom(u, stubs);
      CHECK(eb.cantor == doctest::Approx(2 * kPi).epsilon(1e-12));
      CHECK(eb.bulk == 0.0);
      const DerivativeDecomposition d = u.decompose();
      CHECK(d.cantor.size() == 4096);
      CHECK(d.cantor_variation == doctest::Approx(2 * kPi));
      CHECK(d.cantor_remainder == doctest::Approx(2 * kPi / 4096));
    }
  }

  TEST_CASE("2D jump along a line: measure equals the clipped length") {
    const Manifold c = Manifold::circle();
    BVRecipe r = unit_square();
    r.jumps.push_back({vn({0.6, 0.8}), 0.5, 1.0});
    const DerivativeDecomposition d = build_bv(r, c).decompose();
    // 0.6 x + 0.8 y = 0.5 meets the axes at x = 5/6 and y = 5/8.
    CHECK(d.jump_measure == doctest::Approx(std::hypot(5.0 / 6.0, 5.0 / 8.0)).epsilon(1e-12));
    const double chord = 2.0 * std::sin(0.5);
    CHECK(d.jump_variation == doctest::Approx(chord * d.jump_measure).epsilon(1e-12));
    CHECK(evaluate_fhom(build_bv(r, c), isotropic_stubs(c)).surface ==
          doctest::Approx(d.jump_measure).epsilon(1e-12));
  }

  TEST_CASE("energy is additive over a partition of the domain") {
    const Manifold c = Manifold::circle();
    BVRecipe r = unit_square();
    r.slope = vn({1.0, -0.5});
    r.amplitude = 0.3;
    r.wave = vn({1, 2});
    r.jumps.push_back({vn({1, 0}), 0.3, 1.2});
    const BVMap u = build_bv(r, c);
    const DensityEvaluators stubs = isotropic_stubs(c);
    const QuadratureOptions q{256, 256};
    const double whole = evaluate_fhom(u, stubs, q).total();
    const double left = evaluate_fhom(u.restricted(Box{vn({0, 0}), vn({0.5, 1})}), stubs, {128, 256}).total();
    const double right = evaluate_fhom(u.restricted(Box{vn({0.5, 0}), vn({1, 1})}), stubs, {128, 256}).total();
    CHECK(left + right == doctest::Approx(whole).epsilon(1e-4));
  }

  TEST_CASE("Sobolev maps carry only the bulk term") {
    const Manifold c = Manifold::circle();
    BVRecipe r = unit_interval();
    r.amplitude = 1.0;
    r.wave = vn({1});
    const EnergyBreakdown eb = evaluate_fhom(build_bv(r, c), isotropic_stubs(c));
    CHECK(eb.surface == 0.0);
    CHECK(eb.cantor == 0.0);
    // int_0^1 |2 pi cos(2 pi x)| dx = 4.
    CHECK(eb.bulk == doctest::Approx(4.0).epsilon(1e-5));
  }

  TEST_CASE("Cantor term converges in depth within the variation remainder") {
    const Manifold c = Manifold::circle();
    DensityEvaluators dens = isotropic_stubs(c);
    const double beta = 3.0;
    dens.bulk_recession = [](const Vec& s, const Mat& xi) { return (2.0 + s[0]) * xi.norm(); };
    double prev = 0.0;
    double prev_inc = HUGE_VAL;
    for (int k = 2; k <= 14; ++k) {
      BVRecipe r = unit_interval();
      r.cantor = CantorRecipe{vn({1}), 0.0, 1.0, 3.0, k};
      const BVMap u = build_bv(r, c);
      const double val = evaluate_fhom(u, dens).cantor;
      if (k > 2) {
        const double inc = std::abs(val - prev);
        const double remainder = u.decompose().cantor_remainder;
        CHECK(inc <= beta * 3.0 * 2.0 * remainder + 1e-12);
        CHECK(inc <= prev_inc + 1e-12);
        prev_inc = inc;
      }
      prev = val;
    }
  }

  TEST_CASE("invalid recipes name the violated constraint") {
    const Manifold c = Manifold::circle();
    auto expect = [&](BVRecipe r, const Manifold& m, const std::string& needle) {
      try {
        build_bv(r, m);
        FAIL("recipe accepted");
      } catch (const InvalidRecipe& e) {
        CHECK(e.constraint().find(needle) != std::string::npos);
      }
    };
    const Manifold g = Manifold::generic_sampled(2, 0.5, kPi, [](const Vec& p, Vec* grad) {
      if (grad) *grad = p.normalized();
      return p.norm() - 1.0;
    });
    expect(unit_interval(), g, "sphere");
    BVRecipe r = unit_interval();
    r.p = 2.0 * r.p;
    expect(r, c, "lie on M");
    r = unit_interval();
    r.q = r.p;
    expect(r, c, "orthonormal");
    r = unit_interval();
    r.jumps.push_back({vn({1}), 0.5, 2 * kPi});
    expect(r, c, "multiple of 2 pi");
    r = unit_interval();
    r.jumps.push_back({vn({1}), 1.5, 1.0});
    expect(r, c, "cross the domain");
    r = unit_square();
    r.jumps.push_back({vn({1, 0}), 0.5, 1.0});
    r.jumps.push_back({vn({0, 1}), 0.5, 1.0});
    expect(r, c, "intersect");
    r = unit_interval();
    r.jumps.push_back({vn({1}), 0.5, 1.0});
    r.cantor = CantorRecipe{vn({1}), 0.0, 1.0, 1.0, 8};
    expect(r, c, "Cantor support");
    r = unit_interval();
    r.cantor = CantorRecipe{vn({1}), 0.0, 1.0, 1.0, 0};
    expect(r, c, "depth");
    r = unit_interval();
    r.jumps.push_back({vn({2}), 0.5, 1.0});
    expect(r, c, "unit vector");
    r = BVRecipe{Box{vn({0, 0, 0}), vn({1, 1, 1})}, e(2, 0), e(2, 1)};
    expect(r, c, "dimension");
  }

  TEST_CASE("tangency holds for recipe maps and fails for the adversarial control") {
    const Manifold s2 = Manifold::sphere(3);
    BVRecipe r{Box{vn({0, 0}), vn({1, 1})}, e(3, 0), e(3, 2)};
    r.slope = vn({2.0, 1.0});
    r.amplitude = 0.5;
    r.wave = vn({1, 1});
    r.jumps.push_back({vn({1, 0}), 0.25, 1.0});
    r.cantor = CantorRecipe{vn({1, 0}), 0.5, 0.4, 2.0, 8};
    const BVMap u = build_bv(r, s2);
    const TangencyReport ok = verify_tangency(u, {64, 64});
    CHECK(ok.passed);
    CHECK(ok.max_ac_defect <= 1e-12);
    CHECK(ok.max_cantor_defect <= 1e-12);
    CHECK(ok.max_second_singular <= 1e-12);

    const BVMap bad = u.with_gradient([](const VecN& x, const Mat& g) {
      Mat out = g;
      if (x[0] > 0.6 && x[1] < 0.3) out.col(0) += 0.1 * Vec::Ones(3);
      return out;
    });
    const TangencyReport fail = verify_tangency(bad, {64, 64});
    CHECK_FALSE(fail.passed);
    CHECK(fail.max_ac_defect > 1e-3);
    CHECK(fail.ac_location[0] > 0.6);
    CHECK(fail.ac_location[1] < 0.3);

    BVRecipe j = unit_interval();
    j.jumps.push_back({vn({1}), 0.5, 1.0});
    CHECK(verify_tangency(build_bv(j, Manifold::circle())).passed);
  }

  TEST_CASE("evaluators reject requests outside their domain") {
    const Manifold c = Manifold::circle();
    const DensityEvaluators stubs = isotropic_stubs(c);
    Mat xi(2, 1);
    xi << 0, 1;
    CHECK_THROWS_AS(stubs.bulk(2.0 * e(2, 0), xi), EvaluatorDomain);
    CHECK_THROWS_AS(stubs.bulk(e(2, 1), xi), EvaluatorDomain);
    CHECK_THROWS_AS(stubs.surface(e(2, 0), 0.5 * e(2, 1), vn({1})), EvaluatorDomain);
    const auto f = std::make_shared<const Integrand>(Integrand::weighted_norm(1, 2, Coefficient::constant(1)));
    SolverEvaluatorOptions o;
    o.max_slope = 10.0;
    const DensityEvaluators solver = solver_evaluators(f, c, o);
    CHECK_THROWS_AS(solver.bulk(e(2, 0), 100.0 * xi), EvaluatorDomain);
    CHECK(solver.bulk(e(2, 0), xi) == doctest::Approx(1.0).epsilon(5e-3));
  }

  TEST_CASE("solver-backed densities reproduce the fixtures") {
    const Manifold c = Manifold::circle();
    const auto f = std::make_shared<const Integrand>(Integrand::weighted_norm(1, 2, Coefficient::constant(1)));
    const DensityEvaluators solver = solver_evaluators(f, c);
    BVRecipe jump = unit_interval();
    jump.jumps.push_back({vn({1}), 0.5, 2.0});
    CHECK(evaluate_fhom(build_bv(jump, c), solver).total() == doctest::Approx(2.0).epsilon(5e-2));
    BVRecipe ac = unit_interval();
    ac.slope = vn({2 * kPi});
    CHECK(evaluate_fhom(build_bv(ac, c), solver, {64, 16}).total() == doctest::Approx(2 * kPi).epsilon(5e-2));
  }
}
