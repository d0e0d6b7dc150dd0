#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "mvhom/cell_solver.hpp"
#include "mvhom/integrand.hpp"
#include "mvhom/interface_solver.hpp"
#include "mvhom/manifold.hpp"

namespace mvhom {

/// Axis-aligned box lo < x < hi in R^N.
struct Box {
  VecN lo;
  VecN hi;
};

/// theta jumps by `height` across {x . normal = offset}.
struct JumpRecipe {
  VecN normal;
  double offset = 0.0;
  double height = 0.0;
};

/// theta gains height * c((x . normal - offset) / length), c the middle
/// thirds Cantor function, represented at construction depth `depth`.
struct CantorRecipe {
  VecN normal;
  double offset = 0.0;
  double length = 1.0;
  double height = 0.0;
  int depth = 12;
};

/// u(x) = cos(theta(x)) p + sin(theta(x)) q on the great circle through the
/// orthonormal pair (p, q) of a sphere, with
///   theta = theta0 + slope . x + amplitude sin(2 pi wave . x)
///         + sum_j height_j H(x . nu_j - c_j) + Cantor term.
struct BVRecipe {
  Box domain;
  Vec p;
  Vec q;
  double theta0 = 0.0;
  VecN slope;
  double amplitude = 0.0;
  VecN wave;
  std::vector<JumpRecipe> jumps;
  std::optional<CantorRecipe> cantor;
};

struct QuadratureOptions {
  /// Midpoint points per axis for the absolutely continuous part; 0 picks
  /// 2^10 in 1D and 2^7 in 2D.
  int points = 0;
  /// Points per unit length along jump lines and Cantor slices (2D).
  int line_points = 128;
};

struct AcSample {
  VecN x;
  double weight = 0.0;
  Vec u;
  Mat gradient;
};

struct JumpSample {
  VecN x;
  double weight = 0.0;
  Vec u_plus;
  Vec u_minus;
  VecN normal;
};

struct CantorSample {
  VecN x;
  double weight = 0.0;
  Vec u_tilde;
  /// dD^c u / d|D^c u|, a unit rank-one matrix.
  Mat direction;
};

struct DerivativeDecomposition {
  std::vector<AcSample> ac;
  std::vector<JumpSample> jump;
  std::vector<CantorSample> cantor;
  double ac_variation = 0.0;
  double jump_variation = 0.0;
  double cantor_variation = 0.0;
  /// H^{N-1}(S_u).
  double jump_measure = 0.0;
  /// Oscillation of theta left inside each depth-k Cantor interval,
  /// |height| 2^-k; bounds the quadrature error of the Cantor term.
  double cantor_remainder = 0.0;
  double total_variation() const { return ac_variation + jump_variation + cantor_variation; }
};

class BVMap {
 public:
  int domain_dim() const { return static_cast<int>(recipe_.domain.lo.size()); }
  const Box& domain() const { return recipe_.domain; }
  const BVRecipe& recipe() const { return recipe_; }
  const Manifold& manifold() const { return manifold_; }

  double theta(const VecN& x) const;
  /// Value at x (off the jump set this is also the precise representative).
  Vec value(const VecN& x) const;
  /// Absolutely continuous part of the gradient at x.
  Mat gradient(const VecN& x) const;

  DerivativeDecomposition decompose(const QuadratureOptions& options = {}) const;

  /// Same map on a sub-box.
  BVMap restricted(const Box& box) const;
  /// Copy whose absolutely continuous gradient is replaced by
  /// fn(x, original gradient); used to build negative controls.
  BVMap with_gradient(std::function<Mat(const VecN&, const Mat&)> fn) const;

 private:
  friend BVMap build_bv(const BVRecipe& recipe, const Manifold& m);
  BVMap(BVRecipe recipe, Manifold m) : recipe_(std::move(recipe)), manifold_(std::move(m)) {}

  Vec point(double theta) const;
  Vec tangent(double theta) const;
  double smooth_theta(const VecN& x) const;
  double cantor_theta(const VecN& x) const;

  BVRecipe recipe_;
  Manifold manifold_;
  std::function<Mat(const VecN&, const Mat&)> gradient_override_;
};

/// Exact middle-thirds Cantor function on [0, 1] (clamped outside).
double cantor_function(double s);

/// Validates the recipe; throws InvalidRecipe naming the violated constraint.
BVMap build_bv(const BVRecipe& recipe, const Manifold& m);

struct TangencyReport {
  double max_ac_defect = 0.0;
  VecN ac_location;
  double max_cantor_defect = 0.0;
  VecN cantor_location;
  /// Largest second singular value of the Cantor direction matrices.
  double max_second_singular = 0.0;
  /// Largest distance from M of a sampled value or jump trace.
  double max_value_defect = 0.0;
  bool passed = false;
};

TangencyReport verify_tangency(const BVMap& u, const QuadratureOptions& options = {});

/// Densities entering F_hom; each may throw EvaluatorDomain.
struct DensityEvaluators {
  std::function<double(const Vec& s, const Mat& xi)> bulk;
  std::function<double(const Vec& s, const Mat& xi)> bulk_recession;
  std::function<double(const Vec& a, const Vec& b, const VecN& nu)> surface;
};

struct EnergyBreakdown {
  double bulk = 0.0;
  double surface = 0.0;
  double cantor = 0.0;
  double total() const { return bulk + surface + cantor; }
};

EnergyBreakdown evaluate_fhom(const BVMap& u, const DensityEvaluators& densities,
                              const QuadratureOptions& options = {});

/// Closed-form densities for f = c |xi|: Tf_hom = Tf_hom^inf = c |xi| and
/// theta_hom = c d_M(a, b). Valid for s on M and tangent xi.
DensityEvaluators isotropic_stubs(const Manifold& m, double c = 1.0);

struct SolverEvaluatorOptions {
  CellOptions cell{std::vector<int>{1, 2}, 16, 1e-3, 50000};
  std::vector<double> recession_scales{8, 16, 32};
  ThetaOptions theta{std::vector<int>{1, 2}, 16, 1e-3, 50000, false, 0.03};
  /// Validated range: |xi| <= max_slope.
  double max_slope = 1e3;
};

/// Densities computed by the cell and interface solvers (results cached per
/// argument).
DensityEvaluators solver_evaluators(std::shared_ptr<const Integrand> f, const Manifold& m,
                                    const SolverEvaluatorOptions& options = {});

}  // namespace mvhom
