#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "mvhom/cell_solver.hpp"
#include "mvhom/grid_energy.hpp"
#include "mvhom/integrand.hpp"
#include "mvhom/manifold.hpp"

namespace mvhom {

enum class InterfaceClass {
  /// Pure jump data u_{a,b,nu} on the boundary of t Q_nu, energy / t^(N-1).
  Jump,
  /// Boundary trace gamma(x . nu / eps) on the boundary of Q_nu, unscaled.
  Geodesic,
};

struct JumpCellSpec {
  /// Recession density f^inf.
  std::shared_ptr<const Density> density;
  Manifold manifold;
  Vec a;
  Vec b;
  /// Columns nu_1, ..., nu_N; orthonormal.
  MatN basis;
  InterfaceClass cls = InterfaceClass::Jump;
  /// Cell multiplier for the jump class; eps = 1/t for the geodesic class.
  int t = 1;
  /// Grid cells per unit length (jump class) or per eps-period (geodesic
  /// class); must be even.
  int n = 64;
  double mu = 1e-3;
  int max_iterations = 50000;
};

struct InterfaceSolution {
  double value = 0.0;
  double value_mu = 0.0;
  double value_mu_half = 0.0;
  double initial_value = 0.0;
  GridField field;
  InterfaceClass profile = InterfaceClass::Jump;
  int iterations = 0;
  bool converged = false;
  /// Smoothed energies of accepted iterates, per continuation stage.
  std::vector<std::vector<double>> histories;
};

/// Orthonormal completion of nu_1 by Gram-Schmidt on the standard basis,
/// starting with the first standard vector not parallel to nu_1. Column 0
/// is nu_1.
MatN complete_basis(const VecN& nu);

InterfaceSolution solve_jump_cell(const JumpCellSpec& spec);
InterfaceSolution solve_geodesic_cell(const JumpCellSpec& spec);

struct ThetaOptions {
  std::vector<int> schedule{1, 2, 4};
  int n = 64;
  double mu = 1e-3;
  int max_iterations = 50000;
  /// Also solve the geodesic-boundary class at eps = 1 / t_max.
  bool cross_check = true;
  /// Relative agreement required between the two classes.
  double route_tolerance = 0.03;
};

struct ThetaEstimate {
  DensityEstimate estimate;
  bool cross_checked = false;
  double geodesic_value = 0.0;
  double route_gap = 0.0;
  bool routes_agree = true;
};

/// Surface density along the doubling t schedule of jump cells.
ThetaEstimate theta_hom(std::shared_ptr<const Density> f_inf, const Manifold& m, const Vec& a,
                        const Vec& b, const VecN& nu, const ThetaOptions& options = {});
/// Same with an explicit completing basis (column 0 must be nu).
ThetaEstimate theta_hom(std::shared_ptr<const Density> f_inf, const Manifold& m, const Vec& a,
                        const Vec& b, const MatN& basis, const ThetaOptions& options);

struct BasisReport {
  std::vector<double> values;
  double max_deviation = 0.0;
};

BasisReport basis_independence_probe(std::shared_ptr<const Density> f_inf, const Manifold& m,
                                     const Vec& a, const Vec& b,
                                     const std::vector<MatN>& bases,
                                     const ThetaOptions& options);

struct RegularityReport {
  std::vector<double> values;
  /// max |theta_i - theta_j| / (|a_i - a_j| + |b_i - b_j|) over distinct pairs.
  double max_lipschitz = 0.0;
  /// max theta_i / |a_i - b_i| over pairs with a_i != b_i.
  double max_ratio = 0.0;
  bool finite = true;
  bool within_thresholds = true;
};

RegularityReport regularity_probe(std::shared_ptr<const Density> f_inf, const Manifold& m,
                                  const std::vector<std::pair<Vec, Vec>>& pairs, const VecN& nu,
                                  const ThetaOptions& options,
                                  double lipschitz_threshold = HUGE_VAL,
                                  double ratio_threshold = HUGE_VAL);

}  // namespace mvhom
