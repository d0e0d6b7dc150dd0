#include "mvhom/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvhom/errors.hpp"

namespace mvhom {

namespace {

constexpr double kPi = std::numbers::pi;

double smoothstep3(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * (3.0 - 2.0 * s);
}

// rho(c) = theta(c) / c with theta(c) = 2 asin(c/2): ratio of arc to chord on
// the unit sphere, and its derivative in c.
void arc_chord_ratio(double c, double* rho, double* drho) {
  if (c < 1e-4) {
    const double c2 = c * c;
    *rho = 1.0 + c2 / 24.0 + 3.0 * c2 * c2 / 640.0;
    *drho = c / 12.0 + 3.0 * c2 * c / 160.0;
    return;
  }
  const double cc = std::min(c, 2.0);
  const double theta = 2.0 * std::asin(cc / 2.0);
  *rho = theta / c;
  const double cd = std::min(c, 2.0 - 1e-9);
  const double dtheta = 1.0 / std::sqrt(1.0 - cd * cd / 4.0);
  *drho = (c * dtheta - theta) / (c * c);
}

double sphere_distance(const Vec& a, const Vec& b) {
  return 2.0 * std::atan2((a - b).norm(), (a + b).norm());
}

// Arc-length polyline approximation of a geodesic on a generic manifold.
std::vector<Vec> shortened_polyline(const Manifold& m, const Vec& a, const Vec& b) {
  constexpr int kSegments = 64;
  std::vector<Vec> pts(kSegments + 1);
  for (int i = 0; i <= kSegments; ++i) {
    const double lam = static_cast<double>(i) / kSegments;
    pts[i] = m.project((1.0 - lam) * a + lam * b).coords;
  }
  pts.front() = a;
  pts.back() = b;
  for (int sweep = 0; sweep < 400; ++sweep) {
    for (int i = 1; i < kSegments; ++i) {
      pts[i] = m.project(0.5 * (pts[i - 1] + pts[i + 1])).coords;
    }
  }
  return pts;
}

double polyline_length(const std::vector<Vec>& pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
  return len;
}

// Catmull-Rom evaluation at arc fraction sigma in [0,1], projected back to M.
Vec polyline_point(const Manifold& m, const std::vector<Vec>& pts, double sigma) {
  const int segs = static_cast<int>(pts.size()) - 1;
  if (segs <= 0) return pts.front();
  std::vector<double> acc(pts.size(), 0.0);
  for (int i = 1; i <= segs; ++i) acc[i] = acc[i - 1] + (pts[i] - pts[i - 1]).norm();
  const double total = acc.back();
  if (total == 0.0) return pts.front();
  const double target = std::clamp(sigma, 0.0, 1.0) * total;
  int i = static_cast<int>(std::upper_bound(acc.begin(), acc.end(), target) - acc.begin()) - 1;
  i = std::clamp(i, 0, segs - 1);
  const double seg = acc[i + 1] - acc[i];
  const double u = seg > 0.0 ? (target - acc[i]) / seg : 0.0;
  const Vec& p0 = pts[std::max(i - 1, 0)];
  const Vec& p1 = pts[i];
  const Vec& p2 = pts[i + 1];
  const Vec& p3 = pts[std::min(i + 2, segs)];
  const Vec m1 = 0.5 * (p2 - p0);
  const Vec m2 = 0.5 * (p3 - p1);
  const double u2 = u * u;
  const double u3 = u2 * u;
  const Vec h = (2 * u3 - 3 * u2 + 1) * p1 + (u3 - 2 * u2 + u) * m1 + (-2 * u3 + 3 * u2) * p2 +
                (u3 - u2) * m2;
  return m.project(h).coords;
}

}  // namespace

Vec antipodal_direction(const Vec& a) {
  const int d = static_cast<int>(a.size());
  for (int k = 0; k < d; ++k) {
    if (std::abs(a[k]) < 1.0 - 1e-9) {
      Vec w = Vec::Zero(d);
      w[k] = 1.0;
      w -= a[k] * a;
      return w.normalized();
    }
  }
  // Unreachable for unit vectors with d >= 2.
  Vec w = Vec::Zero(d);
  w[(d > 1) ? 1 : 0] = 1.0;
  return w;
}

Vec GeodesicCurve::operator()(double t) const {
  if (t >= 0.5) return a_.coords;
  if (t <= -0.5) return b_.coords;
  const double s = smoothstep3(t + 0.5);
  if (great_circle_) {
    return std::cos(length_ * s) * b_.coords + std::sin(length_ * s) * dir_;
  }
  // Samples are stored at uniform t; interpolate in t with a cubic Hermite
  // spline (C^1) and renormalize onto the chord polyline.
  const int k = static_cast<int>(samples_.size()) - 1;
  const double u = (t + 0.5) * k;
  int i = std::clamp(static_cast<int>(std::floor(u)), 0, k - 1);
  const double f = u - i;
  const Vec& p0 = samples_[std::max(i - 1, 0)];
  const Vec& p1 = samples_[i];
  const Vec& p2 = samples_[i + 1];
  const Vec& p3 = samples_[std::min(i + 2, k)];
  const double f2 = f * f;
  const double f3 = f2 * f;
  return (2 * f3 - 3 * f2 + 1) * p1 + (f3 - 2 * f2 + f) * 0.5 * (p2 - p0) +
         (-2 * f3 + 3 * f2) * p2 + (f3 - f2) * 0.5 * (p3 - p1);
}

double GeodesicCurve::discrete_total_variation() const { return polyline_length(samples_); }

Manifold Manifold::circle() { return sphere(2); }

Manifold Manifold::sphere(int ambient_dim) {
  if (ambient_dim < 2 || ambient_dim > kMaxAmbient) {
    throw Error("sphere ambient dimension must be in [2," + std::to_string(kMaxAmbient) + "]");
  }
  Manifold m;
  m.kind_ = ambient_dim == 2 ? ManifoldKind::Circle : ManifoldKind::Sphere;
  m.dim_ = ambient_dim;
  m.tube_radius_ = 0.5;
  m.diameter_ = kPi;
  return m;
}

Manifold Manifold::generic_sampled(int ambient_dim, double tube_radius, double diameter,
                                   DistanceField field) {
  if (ambient_dim < 2 || ambient_dim > kMaxAmbient) throw Error("bad ambient dimension");
  if (!(tube_radius > 0.0)) throw Error("generic manifolds must declare a positive tube radius");
  if (!(diameter > 0.0)) throw Error("generic manifolds must declare a positive diameter");
  Manifold m;
  m.kind_ = ManifoldKind::GenericSampled;
  m.dim_ = ambient_dim;
  m.tube_radius_ = tube_radius;
  m.diameter_ = diameter;
  m.field_ = std::make_shared<const DistanceField>(std::move(field));
  return m;
}

Manifold Manifold::generic_sampled(int ambient_dim, double tube_radius, double diameter,
                                   Lattice distance, std::vector<Lattice> gradient) {
  if (distance.dim() != ambient_dim || static_cast<int>(gradient.size()) != ambient_dim) {
    throw Error("distance lattice dimension does not match the ambient dimension");
  }
  auto field = [distance = std::move(distance), gradient = std::move(gradient)](
                   const Vec& p, Vec* grad) {
    const Eigen::VectorXd x = p;
    if (grad) {
      grad->resize(p.size());
      for (int i = 0; i < p.size(); ++i) (*grad)[i] = gradient[i](x);
    }
    return distance(x);
  };
  return generic_sampled(ambient_dim, tube_radius, diameter, std::move(field));
}

double Manifold::distance_to(const Vec& p) const {
  if (is_sphere()) return std::abs(p.norm() - 1.0);
  return std::abs((*field_)(p, nullptr));
}

ManifoldPoint Manifold::project(const Vec& p) const {
  if (p.size() != dim_) throw Error("point has the wrong ambient dimension");
  const double dist = distance_to(p);
  if (!(dist < tube_radius_)) {
    throw OutOfTube("point at distance " + std::to_string(dist) + " is outside the tube of radius " +
                    std::to_string(tube_radius_));
  }
  if (is_sphere()) return {p / p.norm()};
  Vec x = p;
  Vec grad(dim_);
  for (int it = 0; it < 100; ++it) {
    const double phi = (*field_)(x, &grad);
    if (std::abs(phi) < 1e-14) break;
    const double g2 = grad.squaredNorm();
    if (g2 == 0.0) throw OutOfTube("distance field has a vanishing gradient");
    double step = 1.0;
    Vec trial = x - step * phi * grad / g2;
    while (std::abs((*field_)(trial, nullptr)) > std::abs(phi) && step > 1e-6) {
      step *= 0.5;
      trial = x - step * phi * grad / g2;
    }
    x = trial;
  }
  return {x};
}

MatD Manifold::tangent_projector(const ManifoldPoint& s) const {
  Vec n;
  if (is_sphere()) {
    n = s.coords / s.coords.norm();
  } else {
    Vec grad(dim_);
    (*field_)(s.coords, &grad);
    n = grad.normalized();
  }
  return MatD::Identity(dim_, dim_) - n * n.transpose();
}

TangentMatrix Manifold::tangent_project(const ManifoldPoint& s, const Mat& xi) const {
  return {tangent_projector(s) * xi, s};
}

Eigen::MatrixXd Manifold::tangent_basis(const ManifoldPoint& s) const {
  Eigen::VectorXd n;
  if (is_sphere()) {
    n = s.coords / s.coords.norm();
  } else {
    Vec grad(dim_);
    (*field_)(s.coords, &grad);
    n = grad.normalized();
  }
  if (dim_ == 2) {
    Eigen::MatrixXd t(2, 1);
    t << -n[1], n[0];
    return t;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(n);
  Eigen::MatrixXd q = qr.householderQ();
  return q.rightCols(dim_ - 1);
}

double Manifold::geodesic_distance(const ManifoldPoint& a, const ManifoldPoint& b) const {
  if (is_sphere()) return sphere_distance(a.coords, b.coords);
  if ((a.coords - b.coords).norm() == 0.0) return 0.0;
  return polyline_length(shortened_polyline(*this, a.coords, b.coords));
}

Vec Manifold::geodesic_interpolate(const Vec& from, const Vec& to, double lambda) const {
  if (is_sphere()) {
    const double theta = sphere_distance(from, to);
    if (theta == 0.0) return from;
    Vec dir;
    if ((from + to).norm() < 1e-12) {
      dir = antipodal_direction(from);
    } else {
      dir = (to - from.dot(to) * from).normalized();
    }
    return std::cos(theta * lambda) * from + std::sin(theta * lambda) * dir;
  }
  if ((from - to).norm() == 0.0) return from;
  return polyline_point(*this, shortened_polyline(*this, from, to), lambda);
}

GeodesicCurve Manifold::geodesic_profile(const ManifoldPoint& a, const ManifoldPoint& b,
                                         int samples) const {
  if (samples < 2) throw Error("geodesic profile needs at least two samples");
  GeodesicCurve c;
  c.a_ = a;
  c.b_ = b;
  std::vector<Vec> poly;
  if (is_sphere()) {
    c.great_circle_ = true;
    c.length_ = sphere_distance(a.coords, b.coords);
    if ((a.coords + b.coords).norm() < 1e-12) {
      // Tie-break keyed on a; the plane of a and e_k also contains b = -a.
      c.dir_ = antipodal_direction(a.coords);
    } else if (c.length_ > 0.0) {
      c.dir_ = (a.coords - a.coords.dot(b.coords) * b.coords).normalized();
    } else {
      c.dir_ = Vec::Zero(dim_);
    }
  } else {
    poly = (a.coords - b.coords).norm() == 0.0 ? std::vector<Vec>{b.coords, a.coords}
                                               : shortened_polyline(*this, b.coords, a.coords);
    c.length_ = polyline_length(poly);
  }
  c.samples_.resize(samples);
  for (int i = 0; i < samples; ++i) {
    const double t = -0.5 + static_cast<double>(i) / (samples - 1);
    if (c.great_circle_) {
      c.samples_[i] = c(t);
    } else {
      c.samples_[i] = polyline_point(*this, poly, smoothstep3(t + 0.5));
    }
  }
  c.samples_.front() = b.coords;
  c.samples_.back() = a.coords;
  return c;
}

Vec Manifold::edge_vector(const Vec& p, const Vec& q, MatD* jacobian) const {
  const Vec delta = q - p;
  if (!is_sphere()) {
    if (jacobian) *jacobian = MatD::Identity(dim_, dim_);
    return delta;
  }
  const double c = delta.norm();
  double rho;
  double drho;
  arc_chord_ratio(c, &rho, &drho);
  if (jacobian) {
    *jacobian = rho * MatD::Identity(dim_, dim_);
    if (c > 0.0) *jacobian += (drho / c) * delta * delta.transpose();
  }
  return rho * delta;
}

}  // namespace mvhom
