#pragma once

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include "mvhom/grid.hpp"
#include "mvhom/integrand.hpp"
#include "mvhom/manifold.hpp"

namespace mvhom {

/// Discrete energy  scale * sum_cells sum_corners w h(y_c, slope + D_h u)
/// on a grid, with one-sided corner gradients (2^N per cell, weight
/// h^N / 2^N; a single edge gradient of weight h in 1D) and y sampled at the
/// cell centre through y = y_offset + y_map x.
///
/// Linear mode (no manifold): nodal values are B c with B = `basis`, and
/// differences are plain. Manifold mode: nodal values lie on the manifold,
/// differences are geodesic edge vectors and updates are retracted by
/// nearest-point projection.
struct GridProblem {
  Grid grid;
  std::shared_ptr<const Density> density;
  /// Per node; fixed nodes keep the value of the initial field.
  std::vector<char> fixed;
  /// Periodic axes: nodes on the upper face are copies of the lower face.
  std::array<bool, 3> periodic{false, false, false};
  Mat slope;
  VecN y_offset;
  MatN y_map;
  double energy_scale = 1.0;
  std::optional<Manifold> manifold;
  Eigen::MatrixXd basis;
};

struct MinimizeOptions {
  double mu = 1e-3;
  /// Run a second warm-started stage at mu / 2.
  bool continuation = true;
  /// Iteration cap per stage.
  int max_iterations = 50000;
  double rel_tol = 1e-9;
  double grad_tol = 1e-7;
  /// Gradient tolerance is grad_tol * grad_scale (typically 1 + |xi|).
  double grad_scale = 1.0;
  /// Also stop once the predicted decrease of the local model drops below
  /// model_tol * mu * grad_scale, i.e. well under the smoothing error.
  double model_tol = 1e-2;
};

struct StageResult {
  double mu = 0.0;
  /// Unsmoothed energy of the stage output.
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Preconditioned gradient norm sqrt(g^T H^-1 g) at exit.
  double grad_norm = 0.0;
  /// Smoothed energy of every accepted iterate (starting point included).
  std::vector<double> history;
};

struct MinimizeResult {
  /// Best of (initial field, stage outputs) by unsmoothed energy.
  GridField field;
  double value = 0.0;
  double initial_value = 0.0;
  std::vector<StageResult> stages;
  int iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;
};

double grid_energy(const GridProblem& problem, const GridField& field);
double grid_smoothed_energy(const GridProblem& problem, const GridField& field, double mu);

MinimizeResult minimize(const GridProblem& problem, const GridField& init,
                        const MinimizeOptions& options);

}  // namespace mvhom
