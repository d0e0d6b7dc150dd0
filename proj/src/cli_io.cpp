#include "mvhom/cli_io.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "mvhom/bv_rep.hpp"
#include "mvhom/config.hpp"
#include "mvhom/errors.hpp"
#include "mvhom/gamma_lab.hpp"
#include "mvhom/integrand.hpp"
#include "mvhom/interface_solver.hpp"
#include "mvhom/manifold.hpp"
#include "mvhom/parallel.hpp"
#include "mvhom/rng.hpp"

namespace mvhom {

namespace {

using Json = nlohmann::ordered_json;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

Json to_json(const Eigen::MatrixXd& m) {
  if (m.cols() == 1) return Json(std::vector<double>(m.data(), m.data() + m.size()));
  Json rows = Json::array();
  for (long i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (long j = 0; j < m.cols(); ++j) r[j] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json to_json(const DensityEstimate& e) {
  Json j;
  j["value"] = e.value;
  j["error_estimate"] = e.error_estimate;
  j["upper_bound"] = e.upper_bound;
  j["converged"] = e.converged;
  Json trace = Json::array();
  for (const auto& p : e.trace) {
    trace.push_back({{"t", p.t},
                     {"value", p.value},
                     {"value_mu", p.value_mu},
                     {"value_mu_half", p.value_mu_half},
                     {"iterations", p.iterations},
                     {"converged", p.converged}});
  }
  j["trace"] = trace;
  return j;
}

void trace_rows(std::ostringstream& csv, const std::string& label, const DensityEstimate& e) {
  for (const auto& p : e.trace) {
    csv << label << ',' << num(p.t) << ',' << num(p.value) << ',' << num(p.value_mu) << ','
        << num(p.value_mu_half) << ',' << p.iterations << ',' << (p.converged ? 1 : 0) << '\n';
  }
}

struct Outcome {
  Json json = Json::object();
  std::string csv;
  bool converged = true;
  std::vector<std::pair<std::string, PlotSource>> plots;
};

struct Context {
  const Config& cfg;
  std::filesystem::path config_dir;
  std::uint64_t seed = 0;
  int threads = 1;
};

Manifold read_manifold(const Config& cfg) {
  const std::string kind = cfg.get_string("manifold.kind", "circle");
  if (kind == "circle") return Manifold::circle();
  if (kind == "sphere") {
    const long d = cfg.get_int("manifold.ambient_dim", 3);
    if (d < 2 || d > kMaxAmbient) {
      throw ConfigError("manifold.ambient_dim", cfg.line("manifold.ambient_dim"),
                        "ambient dimension must be in [2, 4]");
    }
    return Manifold::sphere(static_cast<int>(d));
  }
  throw ConfigError("manifold.kind", cfg.line("manifold.kind"), "expected circle or sphere");
}

Coefficient read_coefficient(const Context& ctx, const std::string& key, const std::string& dflt) {
  std::string expr = ctx.cfg.get_string(key, dflt);
  if (expr.rfind("table:", 0) == 0) {
    std::filesystem::path p = expr.substr(6);
    if (p.is_relative()) p = ctx.config_dir / p;
    expr = "table:" + p.string();
  }
  try {
    return Coefficient::parse(expr);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(key, ctx.cfg.line(key), e.what());
  }
}

std::shared_ptr<const Integrand> read_integrand(const Context& ctx, const Manifold& m) {
  const Config& cfg = ctx.cfg;
  const long n = cfg.get_int("integrand.domain_dim", 1);
  if (n < 1 || n > kMaxDomain) {
    throw ConfigError("integrand.domain_dim", cfg.line("integrand.domain_dim"),
                      "domain dimension must be in [1, 3]");
  }
  const int nd = static_cast<int>(n);
  const int d = m.ambient_dim();
  const std::string family = cfg.get_string("integrand.family", "weighted");
  const double offset = cfg.get_double("integrand.offset", 0.0);
  try {
    if (family == "weighted") {
      return std::make_shared<const Integrand>(
          Integrand::weighted_norm(nd, d, read_coefficient(ctx, "integrand.a", "1"), offset));
    }
    if (family == "anisotropic") {
      Vec e = cfg.get_vector("integrand.e");
      return std::make_shared<const Integrand>(
          Integrand::anisotropic(nd, d, read_coefficient(ctx, "integrand.a", "1"),
                                 read_coefficient(ctx, "integrand.b", "1"), e, offset));
    }
    if (family == "nonconvex") {
      return std::make_shared<const Integrand>(Integrand::smoothed_nonconvex(
          nd, d, read_coefficient(ctx, "integrand.a", "1"),
          cfg.get_double("integrand.strength"), offset));
    }
    if (family == "tabulated") {
      std::filesystem::path p = cfg.get_string("integrand.table");
      if (p.is_relative()) p = ctx.config_dir / p;
      return std::make_shared<const Integrand>(
          Integrand::tabulated(nd, d, read_coefficient_table(p)));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("integrand.family", cfg.line("integrand.family"), e.what());
  }
  throw ConfigError("integrand.family", cfg.line("integrand.family"),
                    "expected weighted, anisotropic, nonconvex or tabulated");
}

Vec read_point(const Config& cfg, const std::string& key, const Manifold& m) {
  const Vec v = cfg.get_vector(key);
  if (v.size() != m.ambient_dim() || !m.contains(v, 1e-10)) {
    throw ConfigError(key, cfg.line(key), "point must lie on the manifold");
  }
  return v;
}

VecN read_unit(const Config& cfg, const std::string& key, int n) {
  if (!cfg.has(key)) {
    VecN e = VecN::Zero(n);
    e[0] = 1.0;
    return e;
  }
  const VecN v = cfg.get_vector(key);
  if (v.size() != n || std::abs(v.norm() - 1.0) > 1e-10) {
    throw ConfigError(key, cfg.line(key), "expected a unit vector in R^N");
  }
  return v;
}

CellOptions read_cell_options(const Config& cfg, const std::string& prefix) {
  CellOptions o;
  o.schedule = cfg.get_ints(prefix + "schedule", o.schedule);
  o.n = static_cast<int>(cfg.get_int(prefix + "n", o.n));
  o.mu = cfg.get_double(prefix + "mu", o.mu);
  o.max_iterations = static_cast<int>(cfg.get_int(prefix + "max_iterations", o.max_iterations));
  return o;
}

ThetaOptions read_theta_options(const Config& cfg, const std::string& prefix) {
  ThetaOptions o;
  o.schedule = cfg.get_ints(prefix + "schedule", o.schedule);
  o.n = static_cast<int>(cfg.get_int(prefix + "n", o.n));
  o.mu = cfg.get_double(prefix + "mu", o.mu);
  o.max_iterations = static_cast<int>(cfg.get_int(prefix + "max_iterations", o.max_iterations));
  o.cross_check = cfg.get_bool(prefix + "cross_check", o.cross_check);
  o.route_tolerance = cfg.get_double(prefix + "route_tolerance", o.route_tolerance);
  return o;
}

Box read_box(const Config& cfg, const std::string& prefix, int n) {
  Box box{VecN::Zero(n), VecN::Ones(n)};
  if (cfg.has(prefix + "domain_lo")) box.lo = cfg.get_vector(prefix + "domain_lo");
  if (cfg.has(prefix + "domain_hi")) box.hi = cfg.get_vector(prefix + "domain_hi");
  if (box.lo.size() != n || box.hi.size() != n) {
    throw ConfigError(prefix + "domain_lo", cfg.line(prefix + "domain_lo"),
                      "domain corners must have N entries");
  }
  return box;
}

// Random point on the sphere and random tangent slope with log-uniform size.
std::pair<Vec, Mat> random_tangent(const Manifold& m, int n, CounterRng rng, double lo,
                                   double hi) {
  const int d = m.ambient_dim();
  Vec s(d);
  for (int i = 0; i < d; ++i) s[i] = rng.normal();
  s.normalize();
  Mat xi(d, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < d; ++i) xi(i, j) = rng.normal();
  }
  const ManifoldPoint p = m.project(s);
  xi = m.tangent_project(p, xi).columns;
  const double size = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * rng.uniform());
  xi *= size / xi.norm();
  return {p.coords, xi};
}

Outcome cmd_tfhom(const Context& ctx) {
  const Config& cfg = ctx.cfg;
  const Manifold m = read_manifold(cfg);
  const auto f = read_integrand(ctx, m);
  const int n = f->domain_dim();
  const CellOptions opt = read_cell_options(cfg, "tfhom.");
  const bool recession = cfg.get_bool("tfhom.recession", false);
  const std::vector<double> scales = cfg.get_doubles(
      "tfhom.recession_scales", {8, 16, 32, 64, 128, 256, 512, 1024});

  std::vector<std::pair<Vec, Mat>> samples;
  if (cfg.has("tfhom.random")) {
    const long k = cfg.get_int("tfhom.random");
    const double lo = cfg.get_double("tfhom.slope_min", 0.1);
    const double hi = cfg.get_double("tfhom.slope_max", 10.0);
    if (k < 1 || !(lo > 0.0 && hi >= lo)) {
      throw ConfigError("tfhom.random", cfg.line("tfhom.random"), "bad random sample range");
    }
    const CounterRng root(ctx.seed, 0x7466686full);
    for (long i = 0; i < k; ++i) samples.push_back(random_tangent(m, n, root.split(i), lo, hi));
  } else {
    const Vec s = read_point(cfg, "tfhom.s", m);
    const Mat xi = cfg.get_matrix("tfhom.xi");
    if (xi.rows() != m.ambient_dim() || xi.cols() != n) {
      throw ConfigError("tfhom.xi", cfg.line("tfhom.xi"), "xi must be a d x N matrix");
    }
    samples.emplace_back(s, xi);
  }

  const auto results = parallel_map<DensityEstimate>(samples.size(), ctx.threads, [&](std::size_t i) {
    const ManifoldPoint p{samples[i].first};
    return recession ? tf_hom_recession(f, m, p, samples[i].second, scales, opt)
                     : tf_hom(f, m, p, samples[i].second, opt);
  });

  Outcome out;
  std::ostringstream csv;
  csv << "sample,t,value,value_mu,value_mu_half,iterations,converged\n";
  Json list = Json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Json j = to_json(results[i]);
    j["s"] = to_json(samples[i].first);
    j["xi"] = to_json(samples[i].second);
    j["xi_norm"] = samples[i].second.norm();
    list.push_back(j);
    trace_rows(csv, std::to_string(i), results[i]);
    out.converged = out.converged && results[i].converged;
    out.plots.emplace_back("sample" + std::to_string(i), results[i]);
  }
  out.json["integrand"] = f->describe();
  out.json["recession"] = recession;
  out.json["samples"] = list;
  out.csv = csv.str();
  return out;
}

Outcome cmd_theta(const Context& ctx) {
  const Config& cfg = ctx.cfg;
  const Manifold m = read_manifold(cfg);
  const auto f = read_integrand(ctx, m);
  const auto finf = f->recession_density();
  const int n = f->domain_dim();
  const Vec a = read_point(cfg, "theta.a", m);
  const Vec b = read_point(cfg, "theta.b", m);
  const VecN nu = read_unit(cfg, "theta.nu", n);
  const ThetaOptions opt = read_theta_options(cfg, "theta.");
  const bool want_field = cfg.get_bool("theta.dump_field", false);

  const ThetaEstimate est = theta_hom(finf, m, a, b, nu, opt);
  Outcome out;
  out.json["integrand"] = f->describe();
  out.json["a"] = to_json(a);
  out.json["b"] = to_json(b);
  out.json["nu"] = to_json(nu);
  out.json["geodesic_distance"] = m.geodesic_distance(ManifoldPoint{a}, ManifoldPoint{b});
  out.json["estimate"] = to_json(est.estimate);
  out.json["cross_checked"] = est.cross_checked;
  out.json["geodesic_value"] = est.geodesic_value;
  out.json["route_gap"] = est.route_gap;
  out.json["routes_agree"] = est.routes_agree;
  std::ostringstream csv;
  csv << "instance,t,value,value_mu,value_mu_half,iterations,converged\n";
  trace_rows(csv, "0", est.estimate);
  out.csv = csv.str();
  out.converged = est.estimate.converged;
  out.plots.emplace_back("theta", est.estimate);
  if (want_field) {
    JumpCellSpec spec{finf, m, a, b, complete_basis(nu)};
    spec.t = opt.schedule.back();
    spec.n = opt.n;
    spec.mu = opt.mu;
    spec.max_iterations = opt.max_iterations;
    out.plots.emplace_back("cell", solve_jump_cell(spec).field);
  }
  return out;
}

BVMap read_recipe(const Config& cfg, const std::string& name, const Manifold& m, int n) {
  const std::string pre = "recipe." + name + ".";
  if (cfg.keys_with_prefix(pre).empty()) {
    throw ConfigError("recipe." + name, 0, "unresolved recipe reference");
  }
  BVRecipe r;
  r.domain = read_box(cfg, pre, n);
  r.p = cfg.get_vector(pre + "p");
  r.q = cfg.get_vector(pre + "q");
  r.theta0 = cfg.get_double(pre + "theta0", 0.0);
  if (cfg.has(pre + "slope")) r.slope = cfg.get_vector(pre + "slope");
  r.amplitude = cfg.get_double(pre + "amplitude", 0.0);
  if (cfg.has(pre + "wave")) r.wave = cfg.get_vector(pre + "wave");
  std::map<long, JumpRecipe> jumps;
  for (const auto& key : cfg.keys_with_prefix(pre + "jump.")) {
    const std::string rest = key.substr(pre.size() + 5);
    const auto dot = rest.find('.');
    if (dot == std::string::npos) throw ConfigError(key, cfg.line(key), "expected jump.<k>.<field>");
    const std::string idx = rest.substr(0, dot);
    const std::string jp = pre + "jump." + idx + ".";
    long k = 0;
    try {
      k = std::stol(idx);
    } catch (const std::exception&) {
      throw ConfigError(key, cfg.line(key), "jump index must be an integer");
    }
    if (jumps.count(k)) continue;
    JumpRecipe j;
    j.normal = cfg.get_vector(jp + "normal");
    j.offset = cfg.get_double(jp + "offset");
    j.height = cfg.get_double(jp + "height");
    jumps[k] = j;
  }
  for (auto& [k, j] : jumps) r.jumps.push_back(j);
  if (!cfg.keys_with_prefix(pre + "cantor.").empty()) {
    CantorRecipe c;
    c.normal = cfg.get_vector(pre + "cantor.normal");
    c.offset = cfg.get_double(pre + "cantor.offset", 0.0);
    c.length = cfg.get_double(pre + "cantor.length", 1.0);
    c.height = cfg.get_double(pre + "cantor.height");
    c.depth = static_cast<int>(cfg.get_int(pre + "cantor.depth", 12));
    r.cantor = c;
  }
  try {
    return build_bv(r, m);
  } catch (const InvalidRecipe& e) {
    throw ConfigError("recipe." + name, cfg.line(pre + "p"), e.what());
  }
}

DensityEvaluators read_densities(const Config& cfg, const std::string& prefix,
                                 std::shared_ptr<const Integrand> f, const Manifold& m) {
  const std::string kind = cfg.get_string(prefix + "densities", "stubs");
  if (kind == "stubs") return isotropic_stubs(m, cfg.get_double(prefix + "stub_scale", 1.0));
  if (kind == "solver") {
    SolverEvaluatorOptions o;
    o.cell = read_cell_options(cfg, prefix + "cell_");
    if (!cfg.has(prefix + "cell_schedule")) o.cell.schedule = {1, 2};
    if (!cfg.has(prefix + "cell_n")) o.cell.n = 16;
    o.recession_scales = cfg.get_doubles(prefix + "recession_scales", o.recession_scales);
    o.theta = read_theta_options(cfg, prefix + "theta_");
    if (!cfg.has(prefix + "theta_schedule")) o.theta.schedule = {1, 2};
    if (!cfg.has(prefix + "theta_n")) o.theta.n = 16;
    if (!cfg.has(prefix + "theta_cross_check")) o.theta.cross_check = false;
    o.max_slope = cfg.get_double(prefix + "max_slope", o.max_slope);
    return solver_evaluators(std::move(f), m, o);
  }
  throw ConfigError(prefix + "densities", cfg.line(prefix + "densities"),
                    "expected stubs or solver");
}

QuadratureOptions read_quadrature(const Config& cfg, const std::string& prefix) {
  QuadratureOptions q;
  q.points = static_cast<int>(cfg.get_int(prefix + "points", q.points));
  q.line_points = static_cast<int>(cfg.get_int(prefix + "line_points", q.line_points));
  return q;
}

Outcome cmd_fhom(const Context& ctx) {
  const Config& cfg = ctx.cfg;
  const Manifold m = read_manifold(cfg);
  const auto f = read_integrand(ctx, m);
  const BVMap u = read_recipe(cfg, cfg.get_string("fhom.recipe"), m, f->domain_dim());
  const DensityEvaluators dens = read_densities(cfg, "fhom.", f, m);
  const QuadratureOptions q = read_quadrature(cfg, "fhom.");
  const EnergyBreakdown e = evaluate_fhom(u, dens, q);
  const TangencyReport t = verify_tangency(u, q);
  const DerivativeDecomposition dec = u.decompose(q);

  Outcome out;
  out.json["integrand"] = f->describe();
  out.json["recipe"] = cfg.get_string("fhom.recipe");
  out.json["energy"] = {{"bulk", e.bulk}, {"surface", e.surface}, {"cantor", e.cantor},
                        {"total", e.total()}};
  out.json["variation"] = {{"ac", dec.ac_variation},
                           {"jump", dec.jump_variation},
                           {"cantor", dec.cantor_variation},
                           {"cantor_remainder", dec.cantor_remainder},
                           {"jump_measure", dec.jump_measure}};
  out.json["tangency"] = {{"passed", t.passed},
                          {"max_ac_defect", t.max_ac_defect},
                          {"max_cantor_defect", t.max_cantor_defect},
                          {"max_second_singular", t.max_second_singular},
                          {"max_value_defect", t.max_value_defect}};
  std::ostringstream csv;
  csv << "term,value\n"
      << "bulk," << num(e.bulk) << "\nsurface," << num(e.surface) << "\ncantor," << num(e.cantor)
      << "\ntotal," << num(e.total()) << '\n';
  out.csv = csv.str();
  return out;
}

Outcome cmd_gamma(const Context& ctx) {
  const Config& cfg = ctx.cfg;
  const Manifold m = read_manifold(cfg);
  const auto f = read_integrand(ctx, m);
  const int n = f->domain_dim();
  EpsExperiment exp{f, m, read_box(cfg, "gamma.", n), cfg.get_doubles("gamma.eps")};
  const std::string bc = cfg.get_string("gamma.bc", "dirichlet");
  if (bc == "dirichlet") {
    exp.bc = BoundaryCondition::Dirichlet;
  } else if (bc == "free") {
    exp.bc = BoundaryCondition::Free;
  } else {
    throw ConfigError("gamma.bc", cfg.line("gamma.bc"), "expected dirichlet or free");
  }
  exp.a = read_point(cfg, "gamma.a", m);
  exp.b = read_point(cfg, "gamma.b", m);
  exp.nodes_per_period = static_cast<int>(cfg.get_int("gamma.nodes_per_period", 16));
  exp.mu = cfg.get_double("gamma.mu", exp.mu);
  exp.max_iterations = static_cast<int>(cfg.get_int("gamma.max_iterations", exp.max_iterations));
  exp.threads = ctx.threads;
  try {
    feps_grid(exp, exp.eps.empty() ? 1.0 : exp.eps.front());
  } catch (const Error& e) {
    throw ConfigError("gamma.eps", cfg.line("gamma.eps"), e.what());
  }

  const auto runs = parallel_map<FepsResult>(exp.eps.size(), ctx.threads,
                                             [&](std::size_t k) { return minimize_feps(exp, exp.eps[k]); });
  Outcome out;
  out.json["integrand"] = f->describe();
  std::ostringstream csv;
  csv << "eps,cells,energy,initial_energy,iterations,converged,max_manifold_defect\n";
  Json pts = Json::array();
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const FepsResult& r = runs[k];
    csv << num(r.eps) << ',' << r.field.grid().cells << ',' << num(r.energy) << ','
        << num(r.initial_energy) << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ','
        << num(r.max_manifold_defect) << '\n';
    pts.push_back({{"eps", r.eps},
                   {"cells", r.field.grid().cells},
                   {"energy", r.energy},
                   {"initial_energy", r.initial_energy},
                   {"iterations", r.iterations},
                   {"converged", r.converged},
                   {"max_manifold_defect", r.max_manifold_defect}});
    out.converged = out.converged && r.converged;
    out.plots.emplace_back("eps" + std::to_string(k), r.field);
  }
  out.json["sweep"] = pts;
  if (cfg.has("gamma.target")) {
    const std::string name = cfg.get_string("gamma.target");
    const BVMap u = read_recipe(cfg, name, m, n);
    GammaTolerances tol;
    tol.relative = cfg.get_double("gamma.tol_relative", tol.relative);
    tol.absolute = cfg.get_double("gamma.tol_absolute", tol.absolute);
    const GammaReport rep =
        recovery_diagnostic(exp, u, read_densities(cfg, "gamma.", f, m), tol,
                            read_quadrature(cfg, "gamma."), cfg.get_double("gamma.width_exponent", 0.5));
    Json rp = Json::array();
    for (const auto& p : rep.points) {
      rp.push_back({{"eps", p.eps},
                    {"competitor_energy", p.competitor_energy},
                    {"minimized_energy", p.minimized_energy},
                    {"iterations", p.iterations},
                    {"converged", p.converged}});
    }
    out.json["recovery"] = {{"target", name},
                            {"fhom_reference", rep.fhom_reference},
                            {"points", rp},
                            {"liminf_gap", rep.liminf_gap},
                            {"recovery_gap", rep.recovery_gap},
                            {"final_gap", rep.final_gap},
                            {"lower_bound_pass", rep.lower_bound_pass},
                            {"recovery_pass", rep.recovery_pass},
                            {"final_pass", rep.final_pass}};
    out.converged = out.converged && rep.converged;
  }
  out.csv = csv.str();
  return out;
}

Outcome cmd_certify(const Context& ctx) {
  const Config& cfg = ctx.cfg;
  const Manifold m = read_manifold(cfg);
  const auto f = read_integrand(ctx, m);
  SamplerConfig sc;
  sc.samples = static_cast<int>(cfg.get_int("certify.samples", sc.samples));
  sc.min_slope = cfg.get_double("certify.min_slope", sc.min_slope);
  sc.max_slope = cfg.get_double("certify.max_slope", sc.max_slope);
  sc.seed = ctx.seed;
  const HypothesisReport r = certify(*f, sc);
  Outcome out;
  out.json["integrand"] = f->describe();
  out.json["report"] = {{"alpha_hat", r.alpha_hat},
                        {"beta_hat", r.beta_hat},
                        {"lip_hat", r.lip_hat},
                        {"recession_C", r.recession_C},
                        {"recession_q", r.recession_q},
                        {"periodicity_defect", r.periodicity_defect},
                        {"samples", r.samples},
                        {"recession_samples", r.recession_samples},
                        {"h1", r.h1},
                        {"h2", r.h2},
                        {"h3", r.h3},
                        {"h4", r.h4}};
  std::ostringstream csv;
  csv << "key,value\n"
      << "alpha_hat," << num(r.alpha_hat) << "\nbeta_hat," << num(r.beta_hat) << "\nlip_hat,"
      << num(r.lip_hat) << "\nrecession_C," << num(r.recession_C) << "\nrecession_q,"
      << num(r.recession_q) << "\nperiodicity_defect," << num(r.periodicity_defect) << "\nh1,"
      << r.h1 << "\nh2," << r.h2 << "\nh3," << r.h3 << "\nh4," << r.h4 << '\n';
  out.csv = csv.str();
  return out;
}

Outcome cmd_probes(const Context& ctx) {
  const Config& cfg = ctx.cfg;
  const Manifold m = read_manifold(cfg);
  const auto f = read_integrand(ctx, m);
  const int n = f->domain_dim();
  const std::string kind = cfg.get_string("probes.kind");
  Outcome out;
  out.json["integrand"] = f->describe();
  out.json["kind"] = kind;
  std::ostringstream csv;
  if (kind == "rank-one") {
    const Vec s = read_point(cfg, "probes.s", m);
    const Mat xi = cfg.get_matrix("probes.xi");
    const Vec a = cfg.get_vector("probes.a");
    const VecN nu = read_unit(cfg, "probes.nu", n);
    const CellOptions opt = read_cell_options(cfg, "probes.cell_");
    const std::vector<double> lambdas = cfg.get_doubles("probes.lambdas", {-1, -0.5, 0, 0.5, 1});
    const double tol = cfg.get_double("probes.tolerance", 1e-3);
    bool converged = true;
    const auto fn = [&](const Mat& x) {
      const DensityEstimate e = tf_hom(f, m, ManifoldPoint{s}, x, opt);
      converged = converged && e.converged;
      return e.value;
    };
    const ConvexityReport r = rank_one_convexity_probe(fn, xi, a, nu, lambdas, tol);
    out.converged = converged;
    csv << "lambda,value\n";
    for (std::size_t i = 0; i < r.lambdas.size(); ++i) {
      csv << num(r.lambdas[i]) << ',' << num(r.values[i]) << '\n';
    }
    Json v = Json::array();
    for (const auto& x : r.violations) v.push_back({{"lambda", x.lambda}, {"magnitude", x.magnitude}});
    out.json["lambdas"] = r.lambdas;
    out.json["values"] = r.values;
    out.json["violations"] = v;
    out.json["max_violation"] = r.max_violation;
  } else if (kind == "basis") {
    const Vec a = read_point(cfg, "probes.a", m);
    const Vec b = read_point(cfg, "probes.b", m);
    const VecN nu = read_unit(cfg, "probes.nu", n);
    const ThetaOptions opt = read_theta_options(cfg, "probes.theta_");
    MatN first = complete_basis(nu);
    MatN second = first;
    if (n > 1) second.col(n - 1) *= -1.0;
    const BasisReport r = basis_independence_probe(f->recession_density(), m, a, b, {first, second}, opt);
    csv << "completion,value\n";
    for (std::size_t i = 0; i < r.values.size(); ++i) csv << i << ',' << num(r.values[i]) << '\n';
    out.json["values"] = r.values;
    out.json["max_deviation"] = r.max_deviation;
  } else if (kind == "regularity") {
    const long count = cfg.get_int("probes.pairs", 10);
    const VecN nu = read_unit(cfg, "probes.nu", n);
    const ThetaOptions opt = read_theta_options(cfg, "probes.theta_");
    const CounterRng root(ctx.seed, 0x72656775ull);
    std::vector<std::pair<Vec, Vec>> pairs;
    for (long i = 0; i < count; ++i) {
      CounterRng r = root.split(i);
      Vec a(m.ambient_dim());
      Vec b(m.ambient_dim());
      for (int k = 0; k < a.size(); ++k) a[k] = r.normal();
      for (int k = 0; k < b.size(); ++k) b[k] = r.normal();
      pairs.emplace_back(a.normalized(), b.normalized());
    }
    const RegularityReport r = regularity_probe(f->recession_density(), m, pairs, nu, opt);
    csv << "pair,value,chord\n";
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      csv << i << ',' << num(r.values[i]) << ',' << num((pairs[i].first - pairs[i].second).norm())
          << '\n';
    }
    out.json["values"] = r.values;
    out.json["max_lipschitz"] = finite_or_null(r.max_lipschitz);
    out.json["max_ratio"] = finite_or_null(r.max_ratio);
    out.json["finite"] = r.finite;
  } else {
    throw ConfigError("probes.kind", cfg.line("probes.kind"),
                      "expected rank-one, basis or regularity");
  }
  out.csv = csv.str();
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream o(path, std::ios::binary | std::ios::trunc);
  if (!o) throw IoError("cannot write " + path.string());
  o << bytes;
  if (!o) throw IoError("failed writing " + path.string());
}

}  // namespace

int resolve_threads(int flag_value, const char* env_value) {
  if (env_value && *env_value) {
    char* end = nullptr;
    const long v = std::strtol(env_value, &end, 10);
    if (*end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1, flag_value);
}

PlotKind parse_plot_kind(const std::string& name) {
  if (name == "trace") return PlotKind::Trace;
  if (name == "field-1d") return PlotKind::Field1D;
  if (name == "interface-2d") return PlotKind::Interface2D;
  throw Error("unknown plot kind '" + name + "'");
}

std::string plot_kind_name(PlotKind kind) {
  switch (kind) {
    case PlotKind::Trace:
      return "trace";
    case PlotKind::Field1D:
      return "field-1d";
    case PlotKind::Interface2D:
      return "interface-2d";
  }
  return "";
}

std::string export_plotdata(const PlotSource& source, PlotKind kind) {
  std::ostringstream os;
  if (kind == PlotKind::Trace) {
    const auto* e = std::get_if<DensityEstimate>(&source);
    if (!e) throw KindMismatch("trace plots need a density estimate");
    os << "# t value\n";
    for (const auto& p : e->trace) os << num(p.t) << ' ' << num(p.value) << '\n';
    return os.str();
  }
  const auto* f = std::get_if<GridField>(&source);
  if (!f) throw KindMismatch(plot_kind_name(kind) + " plots need a nodal field");
  const Grid& g = f->grid();
  if (kind == PlotKind::Field1D) {
    if (g.dim != 1) throw KindMismatch("field-1d plots need a one-dimensional field");
    os << "# x";
    for (int i = 0; i < f->value_dim(); ++i) os << " u" << i + 1;
    os << '\n';
    for (long i = 0; i < f->size(); ++i) {
      os << num(g.node_position(i)[0]);
      const Vec v = f->value(i);
      for (int k = 0; k < v.size(); ++k) os << ' ' << num(v[k]);
      os << '\n';
    }
    return os.str();
  }
  if (g.dim != 2 || f->value_dim() < 2) {
    throw KindMismatch("interface-2d plots need a two-dimensional field with at least two components");
  }
  os << "# x1 x2 angle\n";
  for (long i = 0; i < f->size(); ++i) {
    const VecN x = g.node_position(i);
    const Vec v = f->value(i);
    os << num(x[0]) << ' ' << num(x[1]) << ' ' << num(std::atan2(v[1], v[0])) << '\n';
    if (g.node_multi(i)[1] == g.cells) os << '\n';
  }
  return os.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

int run(const RunRequest& request, std::ostream& err) {
  try {
    std::ifstream in(request.config, std::ios::binary);
    if (!in) throw IoError("cannot read config file " + request.config.string());
    std::ostringstream raw;
    raw << in.rdbuf();
    const std::string config_bytes = raw.str();
    const Config cfg = Config::parse(config_bytes);

    if (cfg.has("command") && cfg.get_string("command") != request.command) {
      throw ConfigError("command", cfg.line("command"),
                        "config is for '" + cfg.get_string("command") + "', not '" +
                            request.command + "'");
    }
    std::uint64_t seed = 0;
    if (cfg.has("seed")) seed = cfg.get_u64("seed");
    if (request.seed) {
      seed = *request.seed;
    } else if (!cfg.has("seed")) {
      throw ConfigError("seed", 0, "missing required key");
    }
    std::filesystem::path out_dir = request.out_dir;
    const std::string dir_key = cfg.get_string("output.dir", ".");
    if (out_dir.empty()) out_dir = dir_key;
    std::vector<PlotKind> kinds;
    if (cfg.has("output.plots")) {
      std::istringstream is(cfg.get_string("output.plots"));
      std::string item;
      while (std::getline(is, item, ',')) {
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        try {
          kinds.push_back(parse_plot_kind(item));
        } catch (const Error& e) {
          throw ConfigError("output.plots", cfg.line("output.plots"), e.what());
        }
      }
    }

    const Context ctx{cfg, request.config.parent_path(), seed, std::max(1, request.threads)};
    Outcome outcome;
    if (request.command == "tfhom") {
      outcome = cmd_tfhom(ctx);
    } else if (request.command == "theta") {
      outcome = cmd_theta(ctx);
    } else if (request.command == "fhom-eval") {
      outcome = cmd_fhom(ctx);
    } else if (request.command == "gamma-sweep") {
      outcome = cmd_gamma(ctx);
    } else if (request.command == "certify") {
      outcome = cmd_certify(ctx);
    } else if (request.command == "probes") {
      outcome = cmd_probes(ctx);
    } else {
      throw Error("unknown command '" + request.command + "'");
    }
    cfg.require_all_used();

    std::map<std::string, std::string> files;
    files["results.csv"] = outcome.csv;
    Json results;
    results["command"] = request.command;
    results["seed"] = seed;
    results["converged"] = outcome.converged;
    results["results"] = outcome.json;
    files["results.json"] = results.dump(2) + "\n";
    for (PlotKind kind : kinds) {
      std::vector<std::pair<std::string, std::string>> made;
      for (const auto& [label, src] : outcome.plots) {
        try {
          made.emplace_back(label, export_plotdata(src, kind));
        } catch (const KindMismatch&) {
        }
      }
      if (made.empty()) {
        throw KindMismatch("plot kind '" + plot_kind_name(kind) + "' does not match the results of '" +
                           request.command + "'");
      }
      for (const auto& [label, text] : made) {
        files[plot_kind_name(kind) + (made.size() > 1 ? "_" + label : "") + ".dat"] = text;
      }
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string());
    Json manifest;
    manifest["tool"] = "mvhom";
    manifest["version"] = kVersion;
    manifest["command"] = request.command;
    manifest["seed"] = seed;
    manifest["config_sha256"] = sha256_hex(config_bytes);
    Json listing = Json::array();
    for (const auto& [name, bytes] : files) {
      write_file(out_dir / name, bytes);
      listing.push_back({{"path", name}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
    }
    manifest["files"] = listing;
    write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    if (!outcome.converged) {
      err << "warning: at least one solve did not converge; results written\n";
      return kExitNonConvergence;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace mvhom
