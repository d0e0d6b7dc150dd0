#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mvhom/lattice.hpp"
#include "mvhom/linalg.hpp"

namespace mvhom {

enum class ManifoldKind { Circle, Sphere, GenericSampled };

/// A point of M in ambient coordinates.
struct ManifoldPoint {
  Vec coords;
};

/// Columns xi_1..xi_N of a slope, each in T_s(M).
struct TangentMatrix {
  Mat columns;
  ManifoldPoint basepoint;
};

/// Transition curve of class G(a,b): equal to b for t <= -1/2, to a for
/// t >= 1/2, and running along a minimizing geodesic in between with a C^1
/// (cubic smoothstep) parametrization.
class GeodesicCurve {
 public:
  GeodesicCurve() = default;

  Vec operator()(double t) const;

  const ManifoldPoint& a() const { return a_; }
  const ManifoldPoint& b() const { return b_; }
  double length() const { return length_; }

  /// Uniform samples on [-1/2, 1/2]; front() == b, back() == a.
  const std::vector<Vec>& samples() const { return samples_; }
  /// Sum of chord lengths between consecutive samples.
  double discrete_total_variation() const;

 private:
  friend class Manifold;

  ManifoldPoint a_;
  ManifoldPoint b_;
  double length_ = 0.0;
  // Great-circle form: gamma = cos(length*s) b + sin(length*s) dir.
  bool great_circle_ = false;
  Vec dir_;
  std::vector<Vec> samples_;
};

/// Signed-distance-like field for generic manifolds; writes the gradient
/// into `grad` when it is non-null.
using DistanceField = std::function<double(const Vec& p, Vec* grad)>;

/// Compact connected submanifold M of R^d without boundary.
///
/// Immutable after construction; all queries are pure and thread safe.
class Manifold {
 public:
  /// S^1 in R^2.
  static Manifold circle();
  /// S^{d-1} in R^d.
  static Manifold sphere(int ambient_dim);
  /// Hypersurface given as the zero set of a signed distance field. Geodesic
  /// services use a projected polyline and are approximate.
  static Manifold generic_sampled(int ambient_dim, double tube_radius, double diameter,
                                  DistanceField field);
  /// Generic hypersurface whose distance field and gradient are sampled on
  /// non-periodic lattices over the box [lo, hi]^d.
  static Manifold generic_sampled(int ambient_dim, double tube_radius, double diameter,
                                  Lattice distance, std::vector<Lattice> gradient);

  ManifoldKind kind() const { return kind_; }
  bool is_sphere() const { return kind_ != ManifoldKind::GenericSampled; }
  int ambient_dim() const { return dim_; }
  int intrinsic_dim() const { return dim_ - 1; }
  double tube_radius() const { return tube_radius_; }
  double diameter() const { return diameter_; }

  /// dist(p, M).
  double distance_to(const Vec& p) const;
  bool contains(const Vec& p, double tol = 1e-12) const { return distance_to(p) <= tol; }

  /// Nearest-point projection; throws OutOfTube when dist(p, M) >= tube radius.
  ManifoldPoint project(const Vec& p) const;

  /// Orthogonal projector P_s onto T_s(M).
  MatD tangent_projector(const ManifoldPoint& s) const;
  /// Columnwise P_s.
  TangentMatrix tangent_project(const ManifoldPoint& s, const Mat& xi) const;
  /// Orthonormal basis of T_s(M) as the columns of a d x m matrix.
  Eigen::MatrixXd tangent_basis(const ManifoldPoint& s) const;

  double geodesic_distance(const ManifoldPoint& a, const ManifoldPoint& b) const;
  GeodesicCurve geodesic_profile(const ManifoldPoint& a, const ManifoldPoint& b,
                                 int samples = 257) const;
  /// Point at fraction lambda in [0,1] along the chosen minimizing geodesic
  /// from `from` to `to`.
  Vec geodesic_interpolate(const Vec& from, const Vec& to, double lambda) const;

  /// Edge vector used by the discrete energies: the chord q - p rescaled to
  /// geodesic length (spheres) or the plain chord (generic). The Jacobian
  /// with respect to q - p is written into `jacobian` when non-null.
  Vec edge_vector(const Vec& p, const Vec& q, MatD* jacobian) const;

 private:
  Manifold() = default;

  ManifoldKind kind_ = ManifoldKind::Sphere;
  int dim_ = 2;
  double tube_radius_ = 0.5;
  double diameter_ = 0.0;
  std::shared_ptr<const DistanceField> field_;
};

/// Deterministic direction used to break ties between antipodal points:
/// the unit tangent at `a` in the plane of `a` and the first standard basis
/// vector that is not parallel to `a`.
Vec antipodal_direction(const Vec& a);

}  // namespace mvhom
