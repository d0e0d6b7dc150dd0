#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mvhom/grid_energy.hpp"
#include "mvhom/integrand.hpp"
#include "mvhom/manifold.hpp"

namespace mvhom {

enum class BoundaryMode { DirichletZero, Periodic };

/// Corrector problem on (0,t)^N with n grid cells per unit length: minimize
/// t^-N sum_q h(y_q, xi + D_h phi) over correctors phi with values in the
/// span of `basis` (orthonormal columns, d x k).
struct CellProblemSpec {
  std::shared_ptr<const Density> density;
  Eigen::MatrixXd basis;
  Mat slope;
  int t = 1;
  int n = 64;
  BoundaryMode mode = BoundaryMode::DirichletZero;
  double mu = 1e-3;
  int max_iterations = 50000;
};

struct CellSolution {
  /// Unsmoothed average energy of the returned corrector.
  double value = 0.0;
  double value_mu = 0.0;
  double value_mu_half = 0.0;
  GridField corrector;
  int iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;
};

struct TracePoint {
  double t = 0.0;
  double value = 0.0;
  double value_mu = 0.0;
  double value_mu_half = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct DensityEstimate {
  double value = 0.0;
  std::vector<TracePoint> trace;
  /// True when every trace value is the exact energy of an admissible
  /// Lipschitz competitor (y-independent densities).
  bool upper_bound = false;
  double error_estimate = 0.0;
  bool converged = true;
};

struct CellOptions {
  std::vector<int> schedule{1, 2, 4, 8};
  /// Grid cells per unit length; 0 picks 64 / 32 / 16 for N = 1 / 2 / 3.
  int n = 0;
  double mu = 1e-3;
  int max_iterations = 50000;
};

int default_cell_resolution(int domain_dim);

/// Solver tolerance used for cell values: 1e-3 (1 + |xi|).
double cell_tolerance(const Mat& xi);

/// Minimizes the cell problem. `warm` (same grid) replaces the zero
/// initial corrector when given.
CellSolution solve_cell(const CellProblemSpec& spec, const GridField* warm = nullptr);

/// Tangentially homogenized density along the doubling schedule with
/// Dirichlet-zero tangent correctors; each 2t solve starts from the tiled
/// t corrector.
DensityEstimate tf_hom(std::shared_ptr<const Density> f, const Manifold& m,
                       const ManifoldPoint& s, const Mat& xi, const CellOptions& options = {});

/// Tail maximum of tf_hom(s, lambda xi) / lambda over the last three scales.
DensityEstimate tf_hom_recession(std::shared_ptr<const Density> f, const Manifold& m,
                                 const ManifoldPoint& s, const Mat& xi,
                                 const std::vector<double>& scales = {8, 16, 32, 64, 128, 256,
                                                                      512, 1024},
                                 const CellOptions& options = {});

/// Periodic cell value of (g^inf)_hom(s, xi): infimum over the m schedule of
/// periodic-corrector minima of g^inf(y, s, xi + D phi), phi in R^d.
DensityEstimate ginf_hom_periodic(const ExtendedIntegrand& g, const Vec& s, const Mat& xi,
                                  const CellOptions& options = {});

struct ConvexityViolation {
  double lambda = 0.0;
  double magnitude = 0.0;
};

struct ConvexityReport {
  std::vector<double> lambdas;
  std::vector<double> values;
  std::vector<ConvexityViolation> violations;
  double max_violation = 0.0;
};

/// Checks midpoint convexity of lambda -> density(xi + lambda a (x) nu) on
/// consecutive triples of the grid; excesses above `tol` are violations.
ConvexityReport rank_one_convexity_probe(const std::function<double(const Mat&)>& density,
                                         const Mat& xi, const Vec& a, const VecN& nu,
                                         std::vector<double> lambdas, double tol);

}  // namespace mvhom
