#include "mvhom/interface_solver.hpp"

#include <algorithm>
#include <cmath>

#include "mvhom/errors.hpp"

namespace mvhom {

namespace {

// xi -> h(y, xi R^T): the density seen in grid coordinates z with x = R z.
class RotatedDensity final : public Density {
 public:
  RotatedDensity(std::shared_ptr<const Density> f, MatN r) : f_(std::move(f)), r_(std::move(r)) {
    const int d = f_->ambient_dim();
    const int n = static_cast<int>(r_.rows());
    kron_ = MatFlat::Zero(d * n, d * n);
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        kron_.block(j * d, k * d, d, d) = r_(j, k) * MatD::Identity(d, d);
      }
    }
  }

  int domain_dim() const override { return f_->domain_dim(); }
  int ambient_dim() const override { return f_->ambient_dim(); }
  bool y_independent() const override { return f_->y_independent(); }

  double value(const VecN& y, const Mat& xi) const override {
    return f_->value(y, Mat(xi * r_.transpose()));
  }

  double smoothed(const VecN& y, const Mat& xi, double mu, Mat* grad,
                  Curvature* curv) const override {
    Mat g;
    Curvature c;
    const double v =
        f_->smoothed(y, Mat(xi * r_.transpose()), mu, grad ? &g : nullptr, curv ? &c : nullptr);
    if (grad) *grad = g * r_;
    if (curv) {
      curv->majorizer = kron_.transpose() * c.majorizer * kron_;
      curv->hessian = kron_.transpose() * c.hessian * kron_;
    }
    return v;
  }

 private:
  std::shared_ptr<const Density> f_;
  MatN r_;
  MatFlat kron_;
};

void validate(const JumpCellSpec& spec) {
  if (!spec.density) throw Error("jump cell without density");
  const int nd = spec.density->domain_dim();
  if (spec.basis.rows() != nd || spec.basis.cols() != nd) throw Error("basis has wrong shape");
  if ((spec.basis.transpose() * spec.basis - MatN::Identity(nd, nd)).norm() > 1e-12) {
    throw Error("basis is not orthonormal");
  }
  if (spec.density->ambient_dim() != spec.manifold.ambient_dim()) {
    throw Error("density and manifold disagree on the ambient dimension");
  }
  if (!spec.manifold.contains(spec.a, 1e-10) || !spec.manifold.contains(spec.b, 1e-10)) {
    throw Error("phases must lie on the manifold");
  }
  if (spec.n < 2 || spec.n % 2 != 0) throw Error("jump cell resolution must be even");
  if (spec.t < 1) throw Error("cell multiplier must be at least 1");
}

std::shared_ptr<const Density> rotated(const JumpCellSpec& spec) {
  const int nd = spec.density->domain_dim();
  if ((spec.basis - MatN::Identity(nd, nd)).norm() == 0.0) return spec.density;
  return std::make_shared<RotatedDensity>(spec.density, spec.basis);
}

InterfaceSolution finish(const GridProblem& p, const GridField& init, const JumpCellSpec& spec,
                         InterfaceClass cls) {
  MinimizeOptions opt;
  opt.mu = spec.mu;
  opt.max_iterations = spec.max_iterations;
  opt.grad_scale = 1.0 + spec.manifold.geodesic_distance(ManifoldPoint{spec.a}, ManifoldPoint{spec.b});
  const MinimizeResult r = minimize(p, init, opt);
  InterfaceSolution sol;
  sol.value = r.value;
  sol.initial_value = r.initial_value;
  sol.value_mu = r.stages.empty() ? r.value : r.stages.front().value;
  sol.value_mu_half = r.stages.size() > 1 ? r.stages[1].value : sol.value_mu;
  sol.field = r.field;
  sol.profile = cls;
  sol.iterations = r.iterations;
  sol.converged = r.converged;
  for (const auto& st : r.stages) sol.histories.push_back(st.history);
  return sol;
}

}  // namespace

MatN complete_basis(const VecN& nu) {
  const int n = static_cast<int>(nu.size());
  if (std::abs(nu.norm() - 1.0) > 1e-12) throw Error("normal must be a unit vector");
  MatN basis = MatN::Zero(n, n);
  basis.col(0) = nu;
  int filled = 1;
  for (int k = 0; k < n && filled < n; ++k) {
    VecN e = VecN::Zero(n);
    e[k] = 1.0;
    for (int j = 0; j < filled; ++j) e -= e.dot(basis.col(j)) * basis.col(j);
    const double len = e.norm();
    if (len < 1e-8) continue;
    e /= len;
    // Re-orthogonalize once for accuracy.
    for (int j = 0; j < filled; ++j) e -= e.dot(basis.col(j)) * basis.col(j);
    basis.col(filled++) = e / e.norm();
  }
  return basis;
}

InterfaceSolution solve_jump_cell(const JumpCellSpec& spec) {
  validate(spec);
  const int nd = spec.density->domain_dim();
  const int d = spec.manifold.ambient_dim();
  const int cells = spec.t * spec.n;
  GridProblem p;
  p.grid = Grid(nd, cells, 1.0 / spec.n, VecN::Constant(nd, -0.5 * spec.t));
  p.density = rotated(spec);
  p.y_map = spec.basis;
  p.energy_scale = std::pow(static_cast<double>(spec.t), 1 - nd);
  p.manifold = spec.manifold;
  p.fixed.assign(static_cast<std::size_t>(p.grid.node_count()), 0);

  const Vec mid = spec.manifold.geodesic_interpolate(spec.b, spec.a, 0.5);
  GridField init(p.grid, d, true);
  for (long i = 0; i < p.grid.node_count(); ++i) {
    const auto m = p.grid.node_multi(i);
    p.fixed[i] = p.grid.on_boundary(i);
    // Nodes on the interface plane, boundary included, take the midpoint so
    // that (a, b, nu) and (b, a, -nu) give the same discrete problem.
    Vec v = m[0] > cells / 2 ? spec.a : spec.b;
    if (m[0] == cells / 2) v = mid;
    init.set(i, v);
  }
  return finish(p, init, spec, InterfaceClass::Jump);
}

InterfaceSolution solve_geodesic_cell(const JumpCellSpec& spec) {
  validate(spec);
  const int nd = spec.density->domain_dim();
  const int d = spec.manifold.ambient_dim();
  const double eps = 1.0 / spec.t;
  const int cells = spec.t * spec.n;
  GridProblem p;
  p.grid = Grid(nd, cells, 1.0 / cells, VecN::Constant(nd, -0.5));
  p.density = rotated(spec);
  p.y_map = spec.basis / eps;
  p.energy_scale = 1.0;
  p.manifold = spec.manifold;
  p.fixed.assign(static_cast<std::size_t>(p.grid.node_count()), 0);

  const GeodesicCurve gamma =
      spec.manifold.geodesic_profile(ManifoldPoint{spec.a}, ManifoldPoint{spec.b});
  GridField init(p.grid, d, true);
  for (long i = 0; i < p.grid.node_count(); ++i) {
    p.fixed[i] = p.grid.on_boundary(i);
    const double z1 = p.grid.node_position(i)[0];
    init.set(i, spec.manifold.project(gamma(z1 / eps)).coords);
  }
  return finish(p, init, spec, InterfaceClass::Geodesic);
}

ThetaEstimate theta_hom(std::shared_ptr<const Density> f_inf, const Manifold& m, const Vec& a,
                        const Vec& b, const VecN& nu, const ThetaOptions& options) {
  return theta_hom(std::move(f_inf), m, a, b, complete_basis(nu), options);
}

ThetaEstimate theta_hom(std::shared_ptr<const Density> f_inf, const Manifold& m, const Vec& a,
                        const Vec& b, const MatN& basis, const ThetaOptions& options) {
  if (options.schedule.empty()) throw Error("empty theta schedule");
  for (std::size_t i = 1; i < options.schedule.size(); ++i) {
    if (options.schedule[i] != 2 * options.schedule[i - 1]) {
      throw Error("theta schedule must be doubling");
    }
  }
  JumpCellSpec spec{f_inf, m, a, b, basis};
  spec.n = options.n;
  spec.mu = options.mu;
  spec.max_iterations = options.max_iterations;

  ThetaEstimate out;
  DensityEstimate& est = out.estimate;
  est.upper_bound = f_inf->y_independent();
  for (int t : options.schedule) {
    spec.t = t;
    const InterfaceSolution sol = solve_jump_cell(spec);
    TracePoint tp;
    tp.t = t;
    tp.value = sol.value;
    tp.value_mu = sol.value_mu;
    tp.value_mu_half = sol.value_mu_half;
    tp.iterations = sol.iterations;
    tp.converged = sol.converged;
    est.converged = est.converged && sol.converged;
    est.trace.push_back(tp);
  }
  est.value = est.trace.back().value;
  if (est.trace.size() > 1) {
    est.error_estimate = std::abs(est.trace.back().value - est.trace[est.trace.size() - 2].value);
  }
  if (options.cross_check) {
    spec.t = options.schedule.back();
    const InterfaceSolution geo = solve_geodesic_cell(spec);
    out.cross_checked = true;
    out.geodesic_value = geo.value;
    out.route_gap = std::abs(geo.value - est.value);
    const double scale = std::max(geo.value, est.value);
    out.routes_agree = out.route_gap <= options.route_tolerance * scale + 1e-3;
    est.converged = est.converged && geo.converged;
  }
  return out;
}

BasisReport basis_independence_probe(std::shared_ptr<const Density> f_inf, const Manifold& m,
                                     const Vec& a, const Vec& b,
                                     const std::vector<MatN>& bases,
                                     const ThetaOptions& options) {
  BasisReport rep;
  ThetaOptions opt = options;
  opt.cross_check = false;
  for (const auto& basis : bases) {
    if (!bases.empty() && (basis.col(0) - bases.front().col(0)).norm() > 1e-12) {
      throw Error("all bases must share the normal nu_1");
    }
    rep.values.push_back(theta_hom(f_inf, m, a, b, basis, opt).estimate.value);
  }
  for (double u : rep.values) {
    for (double v : rep.values) rep.max_deviation = std::max(rep.max_deviation, std::abs(u - v));
  }
  return rep;
}

RegularityReport regularity_probe(std::shared_ptr<const Density> f_inf, const Manifold& m,
                                  const std::vector<std::pair<Vec, Vec>>& pairs, const VecN& nu,
                                  const ThetaOptions& options, double lipschitz_threshold,
                                  double ratio_threshold) {
  if (pairs.size() < 10) throw Error("regularity probe needs at least 10 pairs");
  RegularityReport rep;
  ThetaOptions opt = options;
  opt.cross_check = false;
  for (const auto& [a, b] : pairs) {
    rep.values.push_back(theta_hom(f_inf, m, a, b, nu, opt).estimate.value);
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double chord = (pairs[i].first - pairs[i].second).norm();
    if (chord > 1e-12) rep.max_ratio = std::max(rep.max_ratio, rep.values[i] / chord);
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      const double dist = (pairs[i].first - pairs[j].first).norm() +
                          (pairs[i].second - pairs[j].second).norm();
      if (dist < 1e-12) continue;
      rep.max_lipschitz =
          std::max(rep.max_lipschitz, std::abs(rep.values[i] - rep.values[j]) / dist);
    }
  }
  rep.finite = std::isfinite(rep.max_lipschitz) && std::isfinite(rep.max_ratio);
  rep.within_thresholds =
      rep.finite && rep.max_lipschitz <= lipschitz_threshold && rep.max_ratio <= ratio_threshold;
  return rep;
}

}  // namespace mvhom
