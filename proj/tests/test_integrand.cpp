#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "mvhom/errors.hpp"
#include "mvhom/integrand.hpp"
#include "mvhom/rng.hpp"

using namespace mvhom;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Mat random_mat(CounterRng& rng, int d, int n, double scale) {
  Mat m(d, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < d; ++i) m(i, j) = scale * rng.normal();
  return m;
}

VecN random_y(CounterRng& rng, int n) {
  VecN y(n);
  for (int i = 0; i < n; ++i) y[i] = rng.uniform(-3.0, 3.0);
  return y;
}

std::vector<Integrand> builtin_families() {
  Vec e(2);
  e << 0.6, 0.8;
  return {Integrand::weighted_norm(2, 2, Coefficient::sine(2, 1, 1)),
          Integrand::weighted_norm(2, 2, Coefficient::cosine_product(2, 0.5), 0.3),
          Integrand::anisotropic(2, 2, Coefficient::constant(1.5), Coefficient::sine(0.5, 0.25, 2), e),
          Integrand::smoothed_nonconvex(2, 2, Coefficient::sine(2, 1, 1), 0.7)};
}

}  // namespace

TEST_SUITE("integrand") {
  TEST_CASE("weighted norm evaluates a(y)|xi|") {
    const Integrand f = Integrand::weighted_norm(1, 2, Coefficient::sine(2, 1, 1));
    VecN y(1);
    y << 0.3;
    CHECK(f.eval(y, Mat::Zero(2, 1)) == 0.0);
    y << 0.0;
    Mat xi(2, 1);
    xi << 3, 0;
    CHECK(f.eval(y, xi) == doctest::Approx(6.0).epsilon(1e-15));
    y << 0.25;
    CHECK(f.eval(y, xi) == doctest::Approx(9.0).epsilon(1e-15));
  }

  TEST_CASE("anisotropic and nonconvex families match their formulas") {
    Vec e(2);
    e << 1, 0;
    const Integrand g = Integrand::anisotropic(2, 2, Coefficient::constant(1), Coefficient::constant(2), e);
    Mat xi(2, 2);
    xi << 1, -2, 3, 4;
    VecN y = VecN::Zero(2);
    CHECK(g.eval(y, xi) == doctest::Approx(xi.norm() + 2.0 * (1.0 + 2.0)));
    const Integrand h = Integrand::smoothed_nonconvex(2, 2, Coefficient::constant(1), 0.5, 0.1);
    const double r2 = xi.squaredNorm();
    CHECK(h.eval(y, xi) == doctest::Approx(xi.norm() + 0.5 * r2 / (1 + r2) + 0.1));
    CHECK_THROWS(Integrand::smoothed_nonconvex(2, 2, Coefficient::constant(1), -0.5));
  }

  TEST_CASE("closed-form families are exactly 1-periodic") {
    CounterRng rng(21);
    for (const auto& f : builtin_families()) {
      double defect = 0.0;
      for (int k = 0; k < 1000; ++k) {
        const VecN y = random_y(rng, 2);
        const Mat xi = random_mat(rng, 2, 2, 2.0);
        VecN z = y;
        z[rng.next_u64() % 2] += 1.0;
        defect = std::max(defect, std::abs(f.eval(y, xi) - f.eval(z, xi)));
      }
      CHECK(defect <= 1e-12);
    }
  }

  TEST_CASE("recession drops offsets, vanishes at zero and is 1-homogeneous") {
    CounterRng rng(22);
    for (const auto& f : builtin_families()) {
      for (int k = 0; k < 200; ++k) {
        const VecN y = random_y(rng, 2);
        const Mat xi = random_mat(rng, 2, 2, 1.0);
        const double lam = rng.uniform(1e-3, 10.0);
        const double r = f.recession(y, xi);
        CHECK(std::abs(f.recession(y, lam * xi) - lam * r) <= 1e-10 * (1.0 + lam * r));
        CHECK(f.recession(y, Mat::Zero(2, 2)) == 0.0);
      }
    }
    const Integrand off = Integrand::weighted_norm(1, 2, Coefficient::constant(2), 5.0);
    Mat xi(2, 1);
    xi << 0, 3;
    CHECK(off.recession(VecN::Zero(1), xi) == doctest::Approx(6.0));
  }

  TEST_CASE("recession lies between the growth constants") {
    CounterRng rng(23);
    for (const auto& f : builtin_families()) {
      SamplerConfig cfg;
      cfg.samples = 20000;
      const HypothesisReport rep = certify(f, cfg);
      // Sampled constants carry sampling error, and beta is normalized by 1 + |xi|
      // with |xi| <= 100; allow 2%.
      for (int k = 0; k < 200; ++k) {
        const VecN y = random_y(rng, 2);
        const Mat xi = random_mat(rng, 2, 2, 3.0);
        const double r = f.recession(y, xi);
        CHECK(r >= 0.98 * rep.alpha_hat * xi.norm());
        CHECK(r <= 1.02 * rep.beta_hat * xi.norm());
      }
    }
  }

  TEST_CASE("numerical recession rejects short schedules") {
    const Integrand f = Integrand::custom(
        1, 2, [](const VecN&, const Mat& xi) { return std::sqrt(1.0 + xi.squaredNorm()); }, "sqrt");
    Mat xi(2, 1);
    xi << 0, 2;
    const std::vector<double> short_schedule{1, 2, 4, 512};
    CHECK_THROWS_AS(f.recession(VecN::Zero(1), xi, short_schedule), ScheduleTooShort);
    const std::vector<double> bad{1, 4, 2, 2048};
    CHECK_THROWS_AS(f.recession(VecN::Zero(1), xi, bad), ScheduleTooShort);
    const std::vector<double> ok{16, 64, 256, 1024, 4096};
    CHECK(f.recession(VecN::Zero(1), xi, ok) == doctest::Approx(2.0).epsilon(1e-5));
  }

  TEST_CASE("certify brackets the extrema of a(y) = 2 + sin(2 pi y)") {
    // Brute-force extrema of the coefficient on a fine grid.
    double amin = HUGE_VAL, amax = 0.0;
    for (int i = 0; i <= 100000; ++i) {
      const double a = 2.0 + std::sin(kTwoPi * i / 100000.0);
      amin = std::min(amin, a);
      amax = std::max(amax, a);
    }
    const Integrand f = Integrand::weighted_norm(1, 2, Coefficient::sine(2, 1, 1));
    const HypothesisReport rep = certify(f, SamplerConfig{});
    CHECK(rep.alpha_hat >= amin - 1e-12);
    CHECK(rep.beta_hat <= amax + 1e-12);
    CHECK(rep.alpha_hat <= rep.beta_hat);
    CHECK(rep.h1);
    CHECK(rep.h2);
    CHECK(rep.h3);
    CHECK(rep.lip_hat <= amax + 1e-9);
  }

  TEST_CASE("certify on |xi| gives alpha = beta = 1 and all passes") {
    const Integrand f = Integrand::weighted_norm(2, 3, Coefficient::constant(1));
    const HypothesisReport rep = certify(f, SamplerConfig{});
    CHECK(rep.alpha_hat == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.beta_hat == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.lip_hat <= 1.0 + 1e-9);
    CHECK(rep.h1);
    CHECK(rep.h2);
    CHECK(rep.h3);
    CHECK(rep.h4);
  }

  TEST_CASE("certify flags a non-coercive stub") {
    const Integrand zero = Integrand::custom(1, 2, [](const VecN&, const Mat&) { return 0.0; }, "zero");
    const HypothesisReport rep = certify(zero, SamplerConfig{});
    CHECK_FALSE(rep.h2);
  }

  TEST_CASE("certify fits a recession rate for the nonconvex family") {
    const Integrand f = Integrand::smoothed_nonconvex(1, 2, Coefficient::constant(1), 1.0);
    const HypothesisReport rep = certify(f, SamplerConfig{});
    CHECK(rep.h4);
    CHECK(rep.recession_q > 0.0);
    CHECK(rep.recession_q < 1.0);
    CHECK(std::isfinite(rep.recession_C));
  }

  TEST_CASE("certify rejects too few samples") {
    const Integrand f = Integrand::weighted_norm(1, 2, Coefficient::constant(1));
    SamplerConfig cfg;
    cfg.samples = 10;
    CHECK_THROWS(certify(f, cfg));
  }

  TEST_CASE("smoothed density: gradient, majorizer bound and clipped Hessian") {
    CounterRng rng(24);
    const double mu = 0.05;
    for (const auto& f : builtin_families()) {
      for (int k = 0; k < 50; ++k) {
        const VecN y = random_y(rng, 2);
        const Mat xi = random_mat(rng, 2, 2, k % 2 ? 1.0 : 0.02);
        Mat g;
        Curvature c;
        const double v = f.smoothed(y, xi, mu, &g, &c);
        CHECK(v <= f.eval(y, xi) + 1e-12);
        CHECK(v >= f.eval(y, xi) - 4.0 * mu);
        const double h = 1e-6;
        for (int i = 0; i < 4; ++i) {
          Mat dx = Mat::Zero(2, 2);
          dx.data()[i] = h;
          const double fd = (f.smoothed(y, xi + dx, mu, nullptr, nullptr) -
                             f.smoothed(y, xi - dx, mu, nullptr, nullptr)) /
                            (2 * h);
          CHECK(std::abs(fd - g.data()[i]) <= 1e-5 * (1.0 + std::abs(fd)));
        }
        const Mat eta = random_mat(rng, 2, 2, 0.3);
        const Eigen::Map<const Eigen::VectorXd> ev(eta.data(), 4);
        const Eigen::Map<const Eigen::VectorXd> gv(g.data(), 4);
        const double bound = v + gv.dot(ev) + 0.5 * ev.dot(c.majorizer * ev);
        CHECK(f.smoothed(y, xi + eta, mu, nullptr, nullptr) <= bound + 1e-10);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(c.majorizer - c.hessian));
        CHECK(es.eigenvalues().minCoeff() >= -1e-9);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> hs(Eigen::MatrixXd(c.hessian));
        CHECK(hs.eigenvalues().minCoeff() >= -1e-9);
      }
    }
  }

  TEST_CASE("coefficient parser") {
    VecN y(2);
    y << 0.25, 0.0;
    CHECK(Coefficient::parse("2.5")(y) == 2.5);
    CHECK(Coefficient::parse("const(1.5)")(y) == 1.5);
    CHECK(Coefficient::parse("sine(2,1,1)")(y) == doctest::Approx(3.0));
    CHECK(Coefficient::parse("cosprod(2,0.5)")(y) == doctest::Approx(2.0));
    CHECK(Coefficient::parse("sine(2,1,1)").describe() == "sine(2,1,1)");
    CHECK_THROWS(Coefficient::parse("sine(2,1)"));
    CHECK_THROWS(Coefficient::parse("bogus"));
  }

  TEST_CASE("tabulated family interpolates a periodic lattice") {
    const int pts = 64;
    std::vector<double> vals(pts);
    for (int i = 0; i < pts; ++i) vals[i] = 2.0 + std::sin(kTwoPi * i / pts);
    const Integrand f = Integrand::tabulated(1, 2, Lattice(1, pts, vals, true));
    Mat xi(2, 1);
    xi << 1, 0;
    CounterRng rng(25);
    for (int k = 0; k < 100; ++k) {
      VecN y(1);
      y << rng.uniform(0.0, 1.0);
      CHECK(std::abs(f.eval(y, xi) - (2.0 + std::sin(kTwoPi * y[0]))) < 5e-3);
      VecN z = y;
      z[0] += 1.0;
      CHECK(std::abs(f.eval(y, xi) - f.eval(z, xi)) < 1e-9);
    }
    VecN y = VecN::Zero(1);
    CHECK(f.recession(y, 3.0 * xi) == doctest::Approx(3.0 * f.recession(y, xi)).epsilon(1e-8));
  }

  TEST_CASE("tangential extension") {
    const Manifold m = Manifold::circle();
    auto base = std::make_shared<const Integrand>(Integrand::weighted_norm(1, 2, Coefficient::sine(2, 1, 1)));
    const ExtendedIntegrand g(base, m);
    CounterRng rng(26);
    VecN y(1);
    SUBCASE("identity on the constraint set, for g and for its recession") {
      for (int k = 0; k < 100; ++k) {
        const double t = rng.uniform(0.0, kTwoPi);
        Vec s(2);
        s << std::cos(t), std::sin(t);
        Vec tau(2);
        tau << -std::sin(t), std::cos(t);
        Mat xi(2, 1);
        xi.col(0) = rng.normal() * 3.0 * tau;
        y << rng.uniform(0.0, 1.0);
        CHECK(std::abs(g.eval(y, s, xi) - base->eval(y, xi)) <= 1e-12);
        CHECK(std::abs(g.eval_recession(y, s, xi) - base->recession(y, xi)) <= 1e-12);
      }
    }
    SUBCASE("normal slopes cost |xi|") {
      Vec s(2);
      s << 0, 1;
      Mat xi(2, 1);
      xi.col(0) = 2.5 * s;
      y << 0.1;
      CHECK(g.eval(y, s, xi) == doctest::Approx(2.5).epsilon(1e-14));
    }
    SUBCASE("cutoff vanishes far from M") {
      Vec s(2);
      s << 0.0, 1.0 + 0.8 * m.tube_radius();
      CHECK(g.cutoff(s) == 0.0);
      Mat xi(2, 1);
      xi << 0.7, -1.1;
      y << 0.4;
      CHECK(g.eval(y, s, xi) == doctest::Approx(base->eval(y, Mat::Zero(2, 1)) + xi.norm()));
      Vec near(2);
      near << 0.0, 1.0 + 0.4 * m.tube_radius();
      CHECK(g.cutoff(near) == 1.0);
    }
    SUBCASE("growth and Lipschitz continuity in s on samples") {
      double lip_s = 0.0;
      for (int k = 0; k < 10000; ++k) {
        Vec s(2), t(2);
        s << rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5);
        t = s;
        t[0] += rng.uniform(-1e-3, 1e-3);
        const Mat xi = random_mat(rng, 2, 1, 2.0);
        y << rng.uniform(0.0, 1.0);
        const double gs = g.eval(y, s, xi);
        CHECK(gs >= 1.0 * xi.norm() - 1e-12);
        CHECK(gs <= 3.0 * (1.0 + xi.norm()) + 1e-12);
        if ((s - t).norm() > 0) {
          lip_s = std::max(lip_s, std::abs(gs - g.eval(y, t, xi)) / ((s - t).norm() * xi.norm()));
        }
      }
      CHECK(std::isfinite(lip_s));
      CHECK(lip_s < 1e3);
    }
  }
}
