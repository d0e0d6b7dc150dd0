#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mvhom/bv_rep.hpp"
#include "mvhom/grid.hpp"
#include "mvhom/grid_energy.hpp"
#include "mvhom/integrand.hpp"
#include "mvhom/manifold.hpp"

namespace mvhom {

enum class BoundaryCondition { Dirichlet, Free };

/// Direct minimization setup for F_eps(u) = int_Omega f(x/eps, grad u) dx over
/// a cube Omega. Dirichlet data: u = a on the face x_1 = lo, u = b on x_1 = hi.
struct EpsExperiment {
  std::shared_ptr<const Density> f;
  Manifold manifold;
  Box domain;
  /// Positive and strictly decreasing.
  std::vector<double> eps;
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  Vec a = Vec();
  Vec b = Vec();
  /// Grid nodes per period of the eps-cell (at least 16).
  int nodes_per_period = 16;
  double mu = 1e-3;
  int max_iterations = 50000;
  int threads = 1;
};

struct FepsResult {
  double eps = 0.0;
  GridField field;
  /// Unsmoothed discrete energy of the returned field.
  double energy = 0.0;
  double initial_energy = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Largest distance of a nodal value from M.
  double max_manifold_defect = 0.0;
  /// Smoothed energies of accepted iterates, per continuation stage.
  std::vector<std::vector<double>> histories;
};

/// Grid discretizing the experiment at scale eps.
Grid feps_grid(const EpsExperiment& exp, double eps);
/// Discrete F_eps of a nodal field.
double feps_energy(const EpsExperiment& exp, double eps, const GridField& field);
/// Minimizes the discrete F_eps; `init` defaults to the geodesic interpolation
/// between a and b along x_1. Dirichlet nodes keep their initial values.
FepsResult minimize_feps(const EpsExperiment& exp, double eps, const GridField* init = nullptr);

/// Recovery-style competitor: u sampled at the nodes, with every jump replaced
/// by its geodesic profile across a layer of the given width.
GridField recovery_competitor(const BVMap& u, const Grid& grid, double width);

struct GammaPoint {
  double eps = 0.0;
  double competitor_energy = 0.0;
  double minimized_energy = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct GammaTolerances {
  double relative = 0.02;
  double absolute = 1e-3;
};

struct GammaReport {
  std::vector<GammaPoint> points;
  double fhom_reference = 0.0;
  /// min over eps of the minimized energy minus F_hom(u).
  double liminf_gap = 0.0;
  /// Competitor energy at the smallest eps minus F_hom(u).
  double recovery_gap = 0.0;
  /// Minimized energy at the smallest eps minus F_hom(u).
  double final_gap = 0.0;
  bool lower_bound_pass = false;
  bool recovery_pass = false;
  bool final_pass = false;
  bool converged = true;
};

/// Runs the eps schedule for the target u: competitor energies, minimized
/// energies warm-started from the competitor, and gaps against F_hom(u).
/// Layer width defaults to eps^(1/2).
GammaReport recovery_diagnostic(const EpsExperiment& exp, const BVMap& u,
                                const DensityEvaluators& densities,
                                const GammaTolerances& tol = {},
                                const QuadratureOptions& quadrature = {},
                                double width_exponent = 0.5);

struct ProjectionOptions {
  int shifts = 64;
  double radius = 0.25;
  std::uint64_t seed = 0;
};

enum class ProjectionStatus { Ok, DegenerateField };

struct ProjectionResult {
  GridField field;
  ProjectionStatus status = ProjectionStatus::Ok;
  std::string message;
  Vec shift;
  double mass_in = 0.0;
  double mass_out = 0.0;
  double ratio = 1.0;
  /// Nodes that were already on M and were copied unchanged.
  long fixed_nodes = 0;
};

/// Discrete gradient mass h^N sum_cells |D_h v| with forward differences.
double gradient_mass(const GridField& v);

/// Maps a field with values in the convex hull of a sphere onto the sphere
/// by radial projection from a sampled shift a, followed by the inverse of
/// that projection restricted to M; keeps the shift with least gradient mass.
ProjectionResult averaged_projection(const GridField& v, const Manifold& m,
                                     const ProjectionOptions& options = {});

}  // namespace mvhom
