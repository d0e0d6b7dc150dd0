#include "mvhom/bv_rep.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "mvhom/errors.hpp"

namespace mvhom {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Segment {
  VecN a;
  VecN b;
  double length = 0.0;
};

// {x : x . nu = c} clipped to the box; in 1D a degenerate segment (point).
std::optional<Segment> clip_hyperplane(const Box& box, const VecN& nu, double c) {
  const int n = static_cast<int>(nu.size());
  if (n == 1) {
    const double x = c / nu[0];
    if (x <= box.lo[0] || x >= box.hi[0]) return std::nullopt;
    VecN p(1);
    p << x;
    return Segment{p, p, 0.0};
  }
  VecN base = c * nu;
  VecN dir(2);
  dir << -nu[1], nu[0];
  double tlo = -HUGE_VAL;
  double thi = HUGE_VAL;
  for (int i = 0; i < 2; ++i) {
    if (std::abs(dir[i]) < 1e-15) {
      if (base[i] <= box.lo[i] || base[i] >= box.hi[i]) return std::nullopt;
      continue;
    }
    double t0 = (box.lo[i] - base[i]) / dir[i];
    double t1 = (box.hi[i] - base[i]) / dir[i];
    if (t0 > t1) std::swap(t0, t1);
    tlo = std::max(tlo, t0);
    thi = std::min(thi, t1);
  }
  if (!(thi > tlo)) return std::nullopt;
  return Segment{VecN(base + tlo * dir), VecN(base + thi * dir), thi - tlo};
}

// Midpoint samples along a segment with `per_unit` points per unit length.
std::vector<std::pair<VecN, double>> line_samples(const Segment& s, int per_unit) {
  std::vector<std::pair<VecN, double>> out;
  if (s.length == 0.0) {
    out.emplace_back(s.a, 1.0);
    return out;
  }
  const int m = std::max(1, static_cast<int>(std::ceil(per_unit * s.length)));
  for (int i = 0; i < m; ++i) {
    const double t = (i + 0.5) / m;
    out.emplace_back(VecN(s.a + t * (s.b - s.a)), s.length / m);
  }
  return out;
}

bool inside(const Box& box, const VecN& x) {
  for (int i = 0; i < x.size(); ++i) {
    if (x[i] < box.lo[i] || x[i] > box.hi[i]) return false;
  }
  return true;
}

double heaviside(double s) { return s > 0.0 ? 1.0 : 0.0; }

void check_unit(const VecN& v, int n, const std::string& what) {
  if (v.size() != n || std::abs(v.norm() - 1.0) > 1e-12) {
    throw InvalidRecipe(what + " must be a unit vector in R^N");
  }
}

}  // namespace

double cantor_function(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  double result = 0.0;
  double factor = 0.5;
  for (int i = 0; i < 60; ++i) {
    s *= 3.0;
    const int digit = std::min(2, static_cast<int>(std::floor(s)));
    s -= digit;
    if (digit == 1) return result + factor;
    if (digit == 2) result += factor;
    factor *= 0.5;
  }
  return result;
}

Vec BVMap::point(double th) const { return std::cos(th) * recipe_.p + std::sin(th) * recipe_.q; }

Vec BVMap::tangent(double th) const {
  return -std::sin(th) * recipe_.p + std::cos(th) * recipe_.q;
}

double BVMap::smooth_theta(const VecN& x) const {
  double th = recipe_.theta0 + recipe_.slope.dot(x);
  if (recipe_.amplitude != 0.0) th += recipe_.amplitude * std::sin(kTwoPi * recipe_.wave.dot(x));
  return th;
}

double BVMap::cantor_theta(const VecN& x) const {
  if (!recipe_.cantor) return 0.0;
  const auto& c = *recipe_.cantor;
  return c.height * cantor_function((x.dot(c.normal) - c.offset) / c.length);
}

double BVMap::theta(const VecN& x) const {
  double th = smooth_theta(x) + cantor_theta(x);
  for (const auto& j : recipe_.jumps) th += j.height * heaviside(x.dot(j.normal) - j.offset);
  return th;
}

Vec BVMap::value(const VecN& x) const { return point(theta(x)); }

Mat BVMap::gradient(const VecN& x) const {
  VecN g = recipe_.slope;
  if (recipe_.amplitude != 0.0) {
    g += recipe_.amplitude * kTwoPi * std::cos(kTwoPi * recipe_.wave.dot(x)) * recipe_.wave;
  }
  const Mat grad = outer(tangent(theta(x)), g);
  return gradient_override_ ? gradient_override_(x, grad) : grad;
}

BVMap BVMap::restricted(const Box& box) const {
  BVMap out = *this;
  out.recipe_.domain = box;
  return out;
}

BVMap BVMap::with_gradient(std::function<Mat(const VecN&, const Mat&)> fn) const {
  BVMap out = *this;
  out.gradient_override_ = std::move(fn);
  return out;
}

DerivativeDecomposition BVMap::decompose(const QuadratureOptions& options) const {
  DerivativeDecomposition dec;
  const int n = domain_dim();
  const Box& box = recipe_.domain;
  const int pts = options.points > 0 ? options.points : (n == 1 ? 1024 : 128);

  // Absolutely continuous part: composite midpoint rule.
  long total = 1;
  for (int i = 0; i < n; ++i) total *= pts;
  double vol = 1.0;
  for (int i = 0; i < n; ++i) vol *= (box.hi[i] - box.lo[i]) / pts;
  dec.ac.reserve(static_cast<std::size_t>(total));
  for (long k = 0; k < total; ++k) {
    VecN x(n);
    long r = k;
    for (int i = n - 1; i >= 0; --i) {
      const long idx = r % pts;
      r /= pts;
      x[i] = box.lo[i] + (idx + 0.5) * (box.hi[i] - box.lo[i]) / pts;
    }
    AcSample s{x, vol, value(x), gradient(x)};
    dec.ac_variation += vol * s.gradient.norm();
    dec.ac.push_back(std::move(s));
  }

  // Jump part.
  for (std::size_t j = 0; j < recipe_.jumps.size(); ++j) {
    const auto& jr = recipe_.jumps[j];
    const auto seg = clip_hyperplane(box, jr.normal, jr.offset);
    if (!seg) continue;
    dec.jump_measure += n == 1 ? 1.0 : seg->length;
    for (const auto& [x, w] : line_samples(*seg, options.line_points)) {
      const double rest = theta(x) - jr.height * heaviside(x.dot(jr.normal) - jr.offset);
      JumpSample s{x, w, point(rest + jr.height), point(rest), jr.normal};
      dec.jump_variation += w * (s.u_plus - s.u_minus).norm();
      dec.jump.push_back(std::move(s));
    }
  }

  // Cantor part: one node per depth-k interval, carrying 2^-k |height|.
  if (recipe_.cantor) {
    const auto& c = *recipe_.cantor;
    const long count = 1L << c.depth;
    const double third = std::pow(3.0, -c.depth);
    const double mass = std::abs(c.height) / static_cast<double>(count);
    dec.cantor_remainder = mass;
    for (long i = 0; i < count; ++i) {
      double left = 0.0;
      double scale = 1.0;
      for (int b = c.depth - 1; b >= 0; --b) {
        scale /= 3.0;
        if (i & (1L << b)) left += 2.0 * scale;
      }
      const double sm = left + 0.5 * third;
      const double offset = c.offset + c.length * sm;
      const auto seg = clip_hyperplane(box, c.normal, offset);
      if (!seg) continue;
      for (const auto& [x, w] : line_samples(*seg, options.line_points)) {
        const double th = theta(x);
        const double sign = c.height >= 0.0 ? 1.0 : -1.0;
        CantorSample s{x, w * mass, point(th), Mat(sign * outer(tangent(th), c.normal))};
        dec.cantor_variation += s.weight;
        dec.cantor.push_back(std::move(s));
      }
    }
  }
  return dec;
}

BVMap build_bv(const BVRecipe& recipe_in, const Manifold& m) {
  BVRecipe r = recipe_in;
  const int n = static_cast<int>(r.domain.lo.size());
  if (n < 1 || n > 2) throw InvalidRecipe("domain dimension must be 1 or 2");
  if (r.domain.hi.size() != n) throw InvalidRecipe("domain corners must have equal dimension");
  for (int i = 0; i < n; ++i) {
    if (!(r.domain.lo[i] < r.domain.hi[i])) throw InvalidRecipe("domain must be a nonempty box");
  }
  if (!m.is_sphere()) throw InvalidRecipe("manifold must be a sphere");
  if (r.p.size() != m.ambient_dim() || r.q.size() != m.ambient_dim() ||
      !m.contains(r.p, 1e-12) || !m.contains(r.q, 1e-12)) {
    throw InvalidRecipe("p and q must lie on M");
  }
  if (std::abs(r.p.dot(r.q)) > 1e-12) throw InvalidRecipe("p and q must be orthonormal");
  if (r.slope.size() == 0) r.slope = VecN::Zero(n);
  if (r.slope.size() != n) throw InvalidRecipe("slope must live in R^N");
  if (r.amplitude != 0.0 && r.wave.size() != n) throw InvalidRecipe("wave vector must live in R^N");
  if (r.wave.size() == 0) r.wave = VecN::Zero(n);

  for (const auto& j : r.jumps) {
    check_unit(j.normal, n, "jump normal");
    const double turns = j.height / kTwoPi;
    if (std::abs(turns - std::round(turns)) < 1e-12) {
      throw InvalidRecipe("jump height must not be a multiple of 2 pi");
    }
    if (!clip_hyperplane(r.domain, j.normal, j.offset)) {
      throw InvalidRecipe("jump interface must cross the domain");
    }
  }
  for (std::size_t i = 0; i < r.jumps.size(); ++i) {
    for (std::size_t k = i + 1; k < r.jumps.size(); ++k) {
      const auto& a = r.jumps[i];
      const auto& b = r.jumps[k];
      const double cross = n == 1 ? 0.0 : a.normal[0] * b.normal[1] - a.normal[1] * b.normal[0];
      if (std::abs(cross) < 1e-12) {
        const double sgn = a.normal.dot(b.normal) > 0 ? 1.0 : -1.0;
        if (std::abs(a.offset - sgn * b.offset) < 1e-12) {
          throw InvalidRecipe("jump interfaces must be distinct");
        }
        continue;
      }
      VecN x(2);
      x << (a.offset * b.normal[1] - b.offset * a.normal[1]) / cross,
          (a.normal[0] * b.offset - b.normal[0] * a.offset) / cross;
      if (inside(r.domain, x)) {
        throw InvalidRecipe("jump interfaces must not intersect inside the domain");
      }
    }
  }
  if (r.cantor) {
    const auto& c = *r.cantor;
    check_unit(c.normal, n, "Cantor normal");
    if (!(c.length > 0.0)) throw InvalidRecipe("Cantor support length must be positive");
    if (c.depth < 1 || c.depth > 30) throw InvalidRecipe("Cantor depth must be in [1, 30]");
    for (const auto& j : r.jumps) {
      const auto seg = clip_hyperplane(r.domain, j.normal, j.offset);
      const double s0 = seg->a.dot(c.normal);
      const double s1 = seg->b.dot(c.normal);
      const double lo = std::min(s0, s1);
      const double hi = std::max(s0, s1);
      if (hi >= c.offset && lo <= c.offset + c.length) {
        throw InvalidRecipe("Cantor support must not meet a jump interface");
      }
    }
  }
  return BVMap(std::move(r), m);
}

TangencyReport verify_tangency(const BVMap& u, const QuadratureOptions& options) {
  const DerivativeDecomposition dec = u.decompose(options);
  const Manifold& m = u.manifold();
  TangencyReport rep;
  rep.ac_location = VecN::Zero(u.domain_dim());
  rep.cantor_location = VecN::Zero(u.domain_dim());
  for (const auto& s : dec.ac) {
    rep.max_value_defect = std::max(rep.max_value_defect, m.distance_to(s.u));
    const ManifoldPoint base = m.project(s.u);
    const double defect = (s.gradient - m.tangent_project(base, s.gradient).columns).norm();
    if (defect > rep.max_ac_defect) {
      rep.max_ac_defect = defect;
      rep.ac_location = s.x;
    }
  }
  for (const auto& s : dec.jump) {
    rep.max_value_defect = std::max(rep.max_value_defect, m.distance_to(s.u_plus));
    rep.max_value_defect = std::max(rep.max_value_defect, m.distance_to(s.u_minus));
  }
  for (const auto& s : dec.cantor) {
    const ManifoldPoint base = m.project(s.u_tilde);
    const double defect = (s.direction - m.tangent_project(base, s.direction).columns).norm();
    if (defect > rep.max_cantor_defect) {
      rep.max_cantor_defect = defect;
      rep.cantor_location = s.x;
    }
    if (std::min(s.direction.rows(), s.direction.cols()) >= 2) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(s.direction));
      rep.max_second_singular = std::max(rep.max_second_singular, svd.singularValues()[1]);
    }
  }
  rep.passed = rep.max_ac_defect <= 1e-8 && rep.max_cantor_defect <= 1e-8 &&
               rep.max_second_singular <= 1e-10 && rep.max_value_defect <= 1e-12;
  return rep;
}

EnergyBreakdown evaluate_fhom(const BVMap& u, const DensityEvaluators& densities,
                              const QuadratureOptions& options) {
  const DerivativeDecomposition dec = u.decompose(options);
  EnergyBreakdown e;
  for (const auto& s : dec.ac) e.bulk += s.weight * densities.bulk(s.u, s.gradient);
  for (const auto& s : dec.jump) e.surface += s.weight * densities.surface(s.u_plus, s.u_minus, s.normal);
  for (const auto& s : dec.cantor) {
    e.cantor += s.weight * densities.bulk_recession(s.u_tilde, s.direction);
  }
  return e;
}

namespace {

void check_bulk_domain(const Manifold& m, const Vec& s, const Mat& xi, double max_slope) {
  if (s.size() != m.ambient_dim() || !m.contains(s, 1e-10)) {
    throw EvaluatorDomain("basepoint is not on the manifold");
  }
  const Mat t = m.tangent_project(ManifoldPoint{s}, xi).columns;
  if ((t - xi).norm() > 1e-10 * (1.0 + xi.norm())) throw EvaluatorDomain("slope is not tangent");
  if (xi.norm() > max_slope) throw EvaluatorDomain("slope exceeds the validated range");
}

void check_surface_domain(const Manifold& m, const Vec& a, const Vec& b, const VecN& nu) {
  if (!m.contains(a, 1e-10) || !m.contains(b, 1e-10)) {
    throw EvaluatorDomain("traces are not on the manifold");
  }
  if (std::abs(nu.norm() - 1.0) > 1e-10) throw EvaluatorDomain("normal is not a unit vector");
}

std::vector<double> key_of(std::initializer_list<const double*> parts,
                           std::initializer_list<long> sizes) {
  std::vector<double> k;
  auto size = sizes.begin();
  for (const double* p : parts) {
    k.insert(k.end(), p, p + *size);
    ++size;
  }
  return k;
}

class Memo {
 public:
  template <class F>
  double get(const std::vector<double>& key, F&& compute) {
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    const double v = compute();
    std::lock_guard lock(mu_);
    cache_.emplace(key, v);
    return v;
  }

 private:
  std::mutex mu_;
  std::map<std::vector<double>, double> cache_;
};

}  // namespace

DensityEvaluators isotropic_stubs(const Manifold& m, double c) {
  DensityEvaluators ev;
  ev.bulk = [m, c](const Vec& s, const Mat& xi) {
    check_bulk_domain(m, s, xi, HUGE_VAL);
    return c * xi.norm();
  };
  ev.bulk_recession = ev.bulk;
  ev.surface = [m, c](const Vec& a, const Vec& b, const VecN& nu) {
    check_surface_domain(m, a, b, nu);
    return c * m.geodesic_distance(ManifoldPoint{a}, ManifoldPoint{b});
  };
  return ev;
}

DensityEvaluators solver_evaluators(std::shared_ptr<const Integrand> f, const Manifold& m,
                                    const SolverEvaluatorOptions& options) {
  auto bulk_memo = std::make_shared<Memo>();
  auto rec_memo = std::make_shared<Memo>();
  auto surf_memo = std::make_shared<Memo>();
  std::shared_ptr<const Density> fd = f;
  std::shared_ptr<const Density> finf = f->recession_density();
  DensityEvaluators ev;
  ev.bulk = [=](const Vec& s, const Mat& xi) {
    check_bulk_domain(m, s, xi, options.max_slope);
    return bulk_memo->get(key_of({s.data(), xi.data()}, {s.size(), xi.size()}), [&] {
      return tf_hom(fd, m, ManifoldPoint{s}, xi, options.cell).value;
    });
  };
  ev.bulk_recession = [=](const Vec& s, const Mat& xi) {
    check_bulk_domain(m, s, xi, options.max_slope);
    return rec_memo->get(key_of({s.data(), xi.data()}, {s.size(), xi.size()}), [&] {
      return tf_hom_recession(fd, m, ManifoldPoint{s}, xi, options.recession_scales, options.cell)
          .value;
    });
  };
  ev.surface = [=](const Vec& a, const Vec& b, const VecN& nu) {
    check_surface_domain(m, a, b, nu);
    return surf_memo->get(key_of({a.data(), b.data(), nu.data()}, {a.size(), b.size(), nu.size()}),
                          [&] { return theta_hom(finf, m, a, b, nu, options.theta).estimate.value; });
  };
  return ev;
}

}  // namespace mvhom
