#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvhom/errors.hpp"
#include "mvhom/manifold.hpp"
#include "mvhom/rng.hpp"

using namespace mvhom;

namespace {

Vec random_unit(CounterRng& rng, int d) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.normal();
  return v.normalized();
}

// Great-circle distance from the chord length.
double arc(const Vec& a, const Vec& b) { return 2.0 * std::asin(std::min(1.0, 0.5 * (a - b).norm())); }

}  // namespace

TEST_SUITE("manifold") {
  TEST_CASE("projection onto the sphere is radial normalization") {
    const Manifold s2 = Manifold::sphere(3);
    Vec p(3);
    p << 0.3, -1.2, 0.4;
    const Vec q = s2.project(p).coords;
    CHECK((q - p.normalized()).norm() < 1e-14);
    CHECK(s2.distance_to(p) == doctest::Approx(std::abs(p.norm() - 1.0)).epsilon(1e-14));
    CHECK(s2.contains(q));
  }

  TEST_CASE("projection outside the tube throws") {
    const Manifold c = Manifold::circle();
    CHECK_THROWS_AS(c.project(Vec::Zero(2)), OutOfTube);
    Vec far(2);
    far << 0.0, 0.01;
    CHECK_THROWS_AS(c.project(far), OutOfTube);
  }

  TEST_CASE("tangent projector is a symmetric idempotent killing the normal") {
    CounterRng rng(11);
    for (int d : {2, 3, 4}) {
      const Manifold m = Manifold::sphere(d);
      for (int k = 0; k < 20; ++k) {
        const ManifoldPoint s{random_unit(rng, d)};
        const MatD p = m.tangent_projector(s);
        CHECK((p * p - p).norm() < 1e-13);
        CHECK((p - p.transpose()).norm() < 1e-14);
        CHECK((p * s.coords).norm() < 1e-14);
        CHECK(p.trace() == doctest::Approx(d - 1));
        const Eigen::MatrixXd b = m.tangent_basis(s);
        CHECK(b.cols() == d - 1);
        CHECK((b.transpose() * b - Eigen::MatrixXd::Identity(d - 1, d - 1)).norm() < 1e-13);
        CHECK((b.transpose() * s.coords).norm() < 1e-13);
      }
    }
  }

  TEST_CASE("geodesic distance matches the great-circle arc") {
    CounterRng rng(12);
    const Manifold m = Manifold::sphere(3);
    for (int k = 0; k < 50; ++k) {
      const Vec a = random_unit(rng, 3);
      const Vec b = random_unit(rng, 3);
      const double ref = std::acos(std::clamp(a.dot(b), -1.0, 1.0));
      CHECK(m.geodesic_distance(ManifoldPoint{a}, ManifoldPoint{b}) ==
            doctest::Approx(ref).epsilon(1e-12));
      CHECK(arc(a, b) == doctest::Approx(ref).epsilon(1e-10));
    }
    Vec e1(2), e2(2);
    e1 << 1, 0;
    e2 << -1, 0;
    CHECK(Manifold::circle().geodesic_distance(ManifoldPoint{e1}, ManifoldPoint{e2}) ==
          doctest::Approx(std::numbers::pi));
  }

  TEST_CASE("geodesic interpolation runs at constant speed along a minimizing arc") {
    const Manifold m = Manifold::circle();
    Vec a(2), b(2);
    a << 1, 0;
    b << std::cos(2.0), std::sin(2.0);
    for (double lam : {0.0, 0.25, 0.5, 0.9, 1.0}) {
      const Vec x = m.geodesic_interpolate(a, b, lam);
      CHECK(m.contains(x, 1e-14));
      CHECK(std::atan2(x[1], x[0]) == doctest::Approx(2.0 * lam).epsilon(1e-12));
    }
  }

  TEST_CASE("antipodal interpolation picks a geodesic of length pi") {
    const Manifold m = Manifold::sphere(3);
    Vec a(3);
    a << 0, 0, 1;
    const Vec b = -a;
    const Vec mid = m.geodesic_interpolate(a, b, 0.5);
    CHECK(std::abs(mid.dot(a)) < 1e-12);
    const ManifoldPoint pa{a}, pm{mid}, pb{b};
    CHECK(m.geodesic_distance(pa, pm) + m.geodesic_distance(pm, pb) ==
          doctest::Approx(std::numbers::pi));
  }

  TEST_CASE("geodesic profile has endpoints b, a and length d_M") {
    const Manifold m = Manifold::circle();
    Vec a(2), b(2);
    a << 0, 1;
    b << 1, 0;
    const GeodesicCurve g = m.geodesic_profile(ManifoldPoint{a}, ManifoldPoint{b});
    CHECK((g(-0.5) - b).norm() < 1e-14);
    CHECK((g(0.5) - a).norm() < 1e-14);
    CHECK((g(-3.0) - b).norm() < 1e-14);
    CHECK((g(3.0) - a).norm() < 1e-14);
    CHECK(g.length() == doctest::Approx(std::numbers::pi / 2));
    CHECK(g.discrete_total_variation() == doctest::Approx(std::numbers::pi / 2).epsilon(1e-4));
    for (double t : {-0.4, -0.1, 0.2, 0.45}) CHECK(m.contains(g(t), 1e-13));
  }

  TEST_CASE("edge vector has geodesic length and chord direction") {
    const Manifold m = Manifold::circle();
    Vec p(2), q(2);
    p << 1, 0;
    q << std::cos(0.3), std::sin(0.3);
    MatD jac;
    const Vec e = m.edge_vector(p, q, &jac);
    CHECK(e.norm() == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(std::abs(e.normalized().dot((q - p).normalized()) - 1.0) < 1e-12);
    // Jacobian against central differences in q - p.
    const double h = 1e-6;
    for (int k = 0; k < 2; ++k) {
      Vec dq = Vec::Zero(2);
      dq[k] = h;
      const Vec fd = (m.edge_vector(p, q + dq, nullptr) - m.edge_vector(p, q - dq, nullptr)) / (2 * h);
      CHECK((fd - jac.col(k)).norm() < 1e-6);
    }
  }

  TEST_CASE("generic sampled manifold reproduces the circle") {
    const Manifold g = Manifold::generic_sampled(
        2, 0.5, std::numbers::pi, [](const Vec& p, Vec* grad) {
          if (grad) *grad = p.normalized();
          return p.norm() - 1.0;
        });
    CHECK_FALSE(g.is_sphere());
    Vec p(2);
    p << 0.0, 1.3;
    CHECK((g.project(p).coords - p.normalized()).norm() < 1e-10);
    Vec a(2), b(2);
    a << 1, 0;
    b << 0, 1;
    CHECK(g.geodesic_distance(ManifoldPoint{a}, ManifoldPoint{b}) ==
          doctest::Approx(std::numbers::pi / 2).epsilon(1e-3));
  }
}
