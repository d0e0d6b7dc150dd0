#include "mvhom/gamma_lab.hpp"

#include <algorithm>
#include <cmath>

#include "mvhom/errors.hpp"
#include "mvhom/parallel.hpp"
#include "mvhom/rng.hpp"

namespace mvhom {

namespace {

void validate(const EpsExperiment& exp) {
  const int n = static_cast<int>(exp.domain.lo.size());
  if (!exp.f) throw Error("experiment needs an integrand");
  if (n < 1 || n > kMaxDomain || exp.domain.hi.size() != n) throw Error("bad experiment domain");
  if (exp.f->domain_dim() != n) throw Error("integrand and domain dimensions differ");
  if (exp.f->ambient_dim() != exp.manifold.ambient_dim()) {
    throw Error("integrand and manifold dimensions differ");
  }
  const double side = exp.domain.hi[0] - exp.domain.lo[0];
  if (!(side > 0.0)) throw Error("experiment domain must be a nonempty cube");
  for (int i = 1; i < n; ++i) {
    if (std::abs(exp.domain.hi[i] - exp.domain.lo[i] - side) > 1e-12) {
      throw Error("experiment domain must be a cube");
    }
  }
  if (exp.nodes_per_period < 16) throw Error("grid must resolve the eps-cell (>= 16 nodes)");
  for (std::size_t i = 0; i < exp.eps.size(); ++i) {
    if (!(exp.eps[i] > 0.0)) throw Error("eps values must be positive");
    if (i > 0 && !(exp.eps[i] < exp.eps[i - 1])) throw Error("eps values must decrease");
  }
}

GridProblem feps_problem(const EpsExperiment& exp, double eps) {
  const int n = static_cast<int>(exp.domain.lo.size());
  GridProblem p;
  p.grid = feps_grid(exp, eps);
  p.density = exp.f;
  p.slope = Mat::Zero(exp.manifold.ambient_dim(), n);
  p.y_offset = VecN::Zero(n);
  p.y_map = MatN::Identity(n, n) / eps;
  p.energy_scale = 1.0;
  p.manifold = exp.manifold;
  p.fixed.assign(static_cast<std::size_t>(p.grid.node_count()), 0);
  if (exp.bc == BoundaryCondition::Dirichlet) {
    for (long i = 0; i < p.grid.node_count(); ++i) {
      const int i1 = p.grid.node_multi(i)[0];
      p.fixed[i] = i1 == 0 || i1 == p.grid.cells;
    }
  }
  return p;
}

GridField interpolated_field(const EpsExperiment& exp, const Grid& grid) {
  const Manifold& m = exp.manifold;
  if (exp.a.size() != m.ambient_dim() || exp.b.size() != m.ambient_dim() ||
      !m.contains(exp.a, 1e-10) || !m.contains(exp.b, 1e-10)) {
    throw Error("boundary values must lie on M");
  }
  GridField field(grid, m.ambient_dim(), true);
  for (long i = 0; i < grid.node_count(); ++i) {
    const double lambda = static_cast<double>(grid.node_multi(i)[0]) / grid.cells;
    field.set(i, m.project(m.geodesic_interpolate(exp.a, exp.b, lambda)).coords);
  }
  return field;
}

}  // namespace

Grid feps_grid(const EpsExperiment& exp, double eps) {
  validate(exp);
  const int n = static_cast<int>(exp.domain.lo.size());
  const double side = exp.domain.hi[0] - exp.domain.lo[0];
  const int cells = static_cast<int>(std::ceil(exp.nodes_per_period * side / eps - 1e-9));
  return Grid(n, cells, side / cells, exp.domain.lo);
}

double feps_energy(const EpsExperiment& exp, double eps, const GridField& field) {
  return grid_energy(feps_problem(exp, eps), field);
}

FepsResult minimize_feps(const EpsExperiment& exp, double eps, const GridField* init) {
  const GridProblem p = feps_problem(exp, eps);
  const GridField start = init ? *init : interpolated_field(exp, p.grid);
  if (start.grid().node_count() != p.grid.node_count()) throw Error("initial field grid mismatch");
  MinimizeOptions opt;
  opt.mu = exp.mu;
  opt.max_iterations = exp.max_iterations;
  const MinimizeResult r = minimize(p, start, opt);

  FepsResult out;
  out.eps = eps;
  out.field = r.field;
  out.energy = r.value;
  out.initial_energy = r.initial_value;
  out.iterations = r.iterations;
  out.converged = r.converged;
  for (const auto& s : r.stages) out.histories.push_back(s.history);
  for (long i = 0; i < out.field.size(); ++i) {
    out.max_manifold_defect =
        std::max(out.max_manifold_defect, exp.manifold.distance_to(out.field.value(i)));
  }
  return out;
}

GridField recovery_competitor(const BVMap& u, const Grid& grid, double width) {
  const Manifold& m = u.manifold();
  const BVRecipe& r = u.recipe();
  auto point = [&](double th) -> Vec { return std::cos(th) * r.p + std::sin(th) * r.q; };
  GridField field(grid, m.ambient_dim(), true);
  for (long i = 0; i < grid.node_count(); ++i) {
    const VecN x = grid.node_position(i);
    Vec value = u.value(x);
    for (const auto& j : r.jumps) {
      const double s = x.dot(j.normal) - j.offset;
      if (std::abs(s) >= 0.5 * width) continue;
      const double rest = u.theta(x) - (s > 0.0 ? j.height : 0.0);
      value = m.geodesic_interpolate(point(rest), point(rest + j.height), s / width + 0.5);
      break;
    }
    field.set(i, m.project(value).coords);
  }
  return field;
}

GammaReport recovery_diagnostic(const EpsExperiment& exp, const BVMap& u,
                                const DensityEvaluators& densities, const GammaTolerances& tol,
                                const QuadratureOptions& quadrature, double width_exponent) {
  validate(exp);
  if (exp.eps.empty()) throw Error("empty eps schedule");
  GammaReport rep;
  rep.fhom_reference = evaluate_fhom(u, densities, quadrature).total();
  rep.points = parallel_map<GammaPoint>(exp.eps.size(), exp.threads, [&](std::size_t k) {
    const double eps = exp.eps[k];
    const Grid grid = feps_grid(exp, eps);
    const GridField comp = recovery_competitor(u, grid, std::pow(eps, width_exponent));
    GammaPoint pt;
    pt.eps = eps;
    pt.competitor_energy = feps_energy(exp, eps, comp);
    const FepsResult r = minimize_feps(exp, eps, &comp);
    pt.minimized_energy = r.energy;
    pt.converged = r.converged;
    pt.iterations = r.iterations;
    return pt;
  });
  const double band = tol.absolute + tol.relative * rep.fhom_reference;
  double lowest = HUGE_VAL;
  for (const auto& pt : rep.points) {
    lowest = std::min(lowest, pt.minimized_energy);
    rep.converged = rep.converged && pt.converged;
  }
  rep.liminf_gap = lowest - rep.fhom_reference;
  rep.recovery_gap = rep.points.back().competitor_energy - rep.fhom_reference;
  rep.final_gap = rep.points.back().minimized_energy - rep.fhom_reference;
  rep.lower_bound_pass = rep.liminf_gap >= -band;
  rep.recovery_pass = std::abs(rep.recovery_gap) <= band;
  rep.final_pass = std::abs(rep.final_gap) <= band;
  return rep;
}

double gradient_mass(const GridField& v) {
  const Grid& g = v.grid();
  const double vol = std::pow(g.h, g.dim);
  double mass = 0.0;
  for (long c = 0; c < g.cell_count(); ++c) {
    const std::array<int, 3> base = g.cell_multi(c);
    const long i0 = g.node_index(base);
    const Vec v0 = v.value(i0);
    double sq = 0.0;
    for (int k = 0; k < g.dim; ++k) {
      std::array<int, 3> nb = base;
      ++nb[k];
      sq += ((v.value(g.node_index(nb)) - v0) / g.h).squaredNorm();
    }
    mass += vol * std::sqrt(sq);
  }
  return mass;
}

ProjectionResult averaged_projection(const GridField& v, const Manifold& m,
                                     const ProjectionOptions& options) {
  if (!m.is_sphere()) throw Error("averaged projection is implemented for spheres");
  if (v.value_dim() != m.ambient_dim()) throw Error("field and manifold dimensions differ");
  if (!(options.radius > 0.0 && options.radius < 1.0) || options.shifts < 1) {
    throw Error("shift radius must lie in (0, 1) and at least one shift is needed");
  }
  const long nodes = v.size();
  const int d = m.ambient_dim();
  std::vector<char> on_m(static_cast<std::size_t>(nodes));
  long count_on = 0;
  for (long i = 0; i < nodes; ++i) {
    const Vec x = v.value(i);
    if (x.norm() > 1.0 + 1e-10) throw Error("field leaves the convex hull of M");
    on_m[i] = m.distance_to(x) <= 1e-10;
    count_on += on_m[i];
  }

  ProjectionResult out;
  out.fixed_nodes = count_on;
  out.shift = Vec::Zero(d);
  out.mass_in = gradient_mass(v);
  if (count_on == nodes) {
    out.field = v;
    out.mass_out = out.mass_in;
    return out;
  }
  if (out.mass_in == 0.0) {
    out.status = ProjectionStatus::DegenerateField;
    out.message = "zero gradient mass with values off M; nearest-point projection used";
    out.field = GridField(v.grid(), d, true);
    for (long i = 0; i < nodes; ++i) {
      const Vec x = v.value(i);
      if (x.norm() == 0.0) throw Error("the origin has no nearest point on the sphere");
      out.field.set(i, x.normalized());
    }
    out.mass_out = gradient_mass(out.field);
    out.ratio = std::nan("");
    return out;
  }

  CounterRng rng(options.seed, 0x70726f6aull);
  bool found = false;
  for (int k = 0; k < options.shifts; ++k) {
    Vec a(d);
    for (int j = 0; j < d; ++j) a[j] = rng.normal();
    a *= options.radius * std::pow(rng.uniform(), 1.0 / d) / a.norm();
    GridField w(v.grid(), d, true);
    bool valid = true;
    for (long i = 0; i < nodes && valid; ++i) {
      const Vec x = v.value(i);
      if (on_m[i]) {
        w.set(i, x);
        continue;
      }
      const Vec diff = x - a;
      const double len = diff.norm();
      if (len < 1e-12) {
        valid = false;
        break;
      }
      const Vec e = diff / len;
      const double ae = a.dot(e);
      const double lambda = -ae + std::sqrt(ae * ae + 1.0 - a.squaredNorm());
      w.set(i, a + lambda * e);
    }
    if (!valid) continue;
    const double mass = gradient_mass(w);
    if (!found || mass < out.mass_out) {
      found = true;
      out.field = std::move(w);
      out.mass_out = mass;
      out.shift = a;
    }
  }
  if (!found) throw Error("every sampled shift hits a node of the field");
  out.ratio = out.mass_out / out.mass_in;
  return out;
}

}  // namespace mvhom
