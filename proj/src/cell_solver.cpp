#include "mvhom/cell_solver.hpp"

#include <algorithm>
#include <cmath>

#include "mvhom/errors.hpp"

namespace mvhom {

namespace {

GridField tile(const GridField& small, const Grid& big) {
  const int cells = small.grid().cells;
  GridField out(big, small.value_dim(), false);
  for (long i = 0; i < big.node_count(); ++i) {
    auto m = big.node_multi(i);
    for (int j = 0; j < big.dim; ++j) m[j] %= cells;
    out.set(i, small.value(small.grid().node_index(m)));
  }
  return out;
}

TracePoint trace_point(double t, const CellSolution& sol) {
  TracePoint p;
  p.t = t;
  p.value = sol.value;
  p.value_mu = sol.value_mu;
  p.value_mu_half = sol.value_mu_half;
  p.iterations = sol.iterations;
  p.converged = sol.converged;
  return p;
}

void check_schedule(const std::vector<int>& schedule) {
  if (schedule.empty()) throw Error("empty cell schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i] < 1) throw Error("cell multipliers must be positive");
    if (i > 0 && schedule[i] != 2 * schedule[i - 1]) {
      throw Error("cell schedule must be doubling");
    }
  }
}

}  // namespace

int default_cell_resolution(int domain_dim) {
  switch (domain_dim) {
    case 1:
      return 64;
    case 2:
      return 32;
    default:
      return 16;
  }
}

double cell_tolerance(const Mat& xi) { return 1e-3 * (1.0 + xi.norm()); }

CellSolution solve_cell(const CellProblemSpec& spec, const GridField* warm) {
  if (!spec.density) throw Error("cell problem without density");
  const int nd = spec.density->domain_dim();
  const int d = spec.density->ambient_dim();
  if (spec.n < 4) throw Error("cell resolution must be at least 4");
  if (spec.t < 1) throw Error("cell multiplier must be at least 1");
  if (spec.slope.rows() != d || spec.slope.cols() != nd) throw Error("slope has wrong shape");
  if (spec.basis.rows() != d) throw Error("corrector basis has wrong shape");
  const Eigen::MatrixXd proj = spec.basis * spec.basis.transpose();
  const Eigen::MatrixXd off = spec.slope - proj * spec.slope;
  if (off.norm() > 1e-10 * (1.0 + spec.slope.norm())) {
    throw Error("slope does not lie in the corrector space");
  }

  GridProblem p;
  p.grid = Grid(nd, spec.t * spec.n, 1.0 / spec.n, VecN::Zero(nd));
  p.density = spec.density;
  p.slope = spec.slope;
  p.energy_scale = std::pow(static_cast<double>(spec.t), -nd);
  p.basis = spec.basis;
  if (spec.mode == BoundaryMode::DirichletZero) {
    p.fixed.assign(static_cast<std::size_t>(p.grid.node_count()), 0);
    for (long i = 0; i < p.grid.node_count(); ++i) p.fixed[i] = p.grid.on_boundary(i);
  } else {
    p.periodic = {true, true, true};
  }

  GridField init(p.grid, d, false);
  if (warm) {
    if (warm->grid().node_count() != p.grid.node_count() || warm->value_dim() != d) {
      throw Error("warm start does not match the cell grid");
    }
    init = *warm;
    if (spec.mode == BoundaryMode::DirichletZero) {
      for (long i = 0; i < p.grid.node_count(); ++i) {
        if (p.fixed[i]) init.set(i, Vec::Zero(d));
      }
    }
  }

  MinimizeOptions opt;
  opt.mu = spec.mu;
  opt.max_iterations = spec.max_iterations;
  opt.grad_scale = 1.0 + spec.slope.norm();
  const MinimizeResult r = minimize(p, init, opt);

  CellSolution sol;
  sol.value = r.value;
  sol.value_mu = r.stages.empty() ? r.value : r.stages.front().value;
  sol.value_mu_half = r.stages.size() > 1 ? r.stages[1].value : sol.value_mu;
  sol.corrector = r.field;
  sol.iterations = r.iterations;
  sol.converged = r.converged;
  sol.grad_norm = r.grad_norm;
  return sol;
}

DensityEstimate tf_hom(std::shared_ptr<const Density> f, const Manifold& m,
                       const ManifoldPoint& s, const Mat& xi, const CellOptions& options) {
  check_schedule(options.schedule);
  if (!m.contains(s.coords, 1e-10)) throw Error("basepoint is not on the manifold");
  const Mat tangent = m.tangent_project(s, xi).columns;
  if ((tangent - xi).norm() > 1e-10 * (1.0 + xi.norm())) {
    throw Error("slope is not tangent at the basepoint");
  }
  CellProblemSpec spec;
  spec.density = f;
  spec.basis = m.tangent_basis(s);
  spec.slope = xi;
  spec.n = options.n > 0 ? options.n : default_cell_resolution(f->domain_dim());
  spec.mu = options.mu;
  spec.max_iterations = options.max_iterations;
  spec.mode = BoundaryMode::DirichletZero;

  DensityEstimate est;
  est.upper_bound = f->y_independent();
  GridField prev;
  for (std::size_t i = 0; i < options.schedule.size(); ++i) {
    spec.t = options.schedule[i];
    CellSolution sol;
    if (i == 0) {
      sol = solve_cell(spec);
    } else {
      const Grid big(f->domain_dim(), spec.t * spec.n, 1.0 / spec.n, VecN::Zero(f->domain_dim()));
      const GridField warm = tile(prev, big);
      sol = solve_cell(spec, &warm);
    }
    est.trace.push_back(trace_point(spec.t, sol));
    est.converged = est.converged && sol.converged;
    prev = std::move(sol.corrector);
  }
  est.value = est.trace.back().value;
  if (est.trace.size() > 1) {
    est.error_estimate = std::abs(est.trace.back().value - est.trace[est.trace.size() - 2].value);
  }
  return est;
}

DensityEstimate tf_hom_recession(std::shared_ptr<const Density> f, const Manifold& m,
                                 const ManifoldPoint& s, const Mat& xi,
                                 const std::vector<double>& scales, const CellOptions& options) {
  if (scales.empty()) throw Error("empty recession scale schedule");
  DensityEstimate est;
  est.upper_bound = f->y_independent();
  for (double lam : scales) {
    TracePoint p;
    p.t = lam;
    if (xi.norm() == 0.0) {
      p.converged = true;
    } else {
      const DensityEstimate e = tf_hom(f, m, s, Mat(lam * xi), options);
      p.value = e.value / lam;
      p.value_mu = e.trace.back().value_mu / lam;
      p.value_mu_half = e.trace.back().value_mu_half / lam;
      for (const auto& q : e.trace) p.iterations += q.iterations;
      p.converged = e.converged;
    }
    est.converged = est.converged && p.converged;
    est.trace.push_back(p);
  }
  const std::size_t first = est.trace.size() > 3 ? est.trace.size() - 3 : 0;
  est.value = 0.0;
  for (std::size_t i = first; i < est.trace.size(); ++i) {
    est.value = std::max(est.value, est.trace[i].value);
  }
  if (est.trace.size() > 1) {
    est.error_estimate =
        std::abs(est.trace.back().value - est.trace[est.trace.size() - 2].value);
  }
  return est;
}

DensityEstimate ginf_hom_periodic(const ExtendedIntegrand& g, const Vec& s, const Mat& xi,
                                  const CellOptions& options) {
  check_schedule(options.schedule);
  const int nd = g.base().domain_dim();
  const int d = g.base().ambient_dim();
  CellProblemSpec spec;
  spec.density = g.frozen(s, true);
  spec.basis = Eigen::MatrixXd::Identity(d, d);
  spec.slope = xi;
  spec.n = options.n > 0 ? options.n : default_cell_resolution(nd);
  spec.mu = options.mu;
  spec.max_iterations = options.max_iterations;
  spec.mode = BoundaryMode::Periodic;

  DensityEstimate est;
  est.upper_bound = spec.density->y_independent();
  GridField prev;
  for (std::size_t i = 0; i < options.schedule.size(); ++i) {
    spec.t = options.schedule[i];
    CellSolution sol;
    if (i == 0) {
      sol = solve_cell(spec);
    } else {
      const Grid big(nd, spec.t * spec.n, 1.0 / spec.n, VecN::Zero(nd));
      const GridField warm = tile(prev, big);
      sol = solve_cell(spec, &warm);
    }
    est.trace.push_back(trace_point(spec.t, sol));
    est.converged = est.converged && sol.converged;
    prev = std::move(sol.corrector);
  }
  est.value = est.trace.front().value;
  for (const auto& p : est.trace) est.value = std::min(est.value, p.value);
  if (est.trace.size() > 1) {
    est.error_estimate = std::abs(est.trace.back().value - est.trace[est.trace.size() - 2].value);
  }
  return est;
}

ConvexityReport rank_one_convexity_probe(const std::function<double(const Mat&)>& density,
                                         const Mat& xi, const Vec& a, const VecN& nu,
                                         std::vector<double> lambdas, double tol) {
  ConvexityReport rep;
  std::sort(lambdas.begin(), lambdas.end());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  rep.lambdas = lambdas;
  if (lambdas.size() < 3) {
    for (double l : lambdas) rep.values.push_back(density(xi + l * outer(a, nu)));
    return rep;
  }
  for (double l : lambdas) rep.values.push_back(density(xi + l * outer(a, nu)));
  for (std::size_t i = 1; i + 1 < lambdas.size(); ++i) {
    const double l0 = lambdas[i - 1];
    const double l1 = lambdas[i];
    const double l2 = lambdas[i + 1];
    const double w = (l2 - l1) / (l2 - l0);
    const double chord = w * rep.values[i - 1] + (1.0 - w) * rep.values[i + 1];
    const double excess = rep.values[i] - chord;
    rep.max_violation = std::max(rep.max_violation, excess);
    if (excess > tol) rep.violations.push_back({l1, excess});
  }
  return rep;
}

}  // namespace mvhom
