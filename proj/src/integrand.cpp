#include "mvhom/integrand.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "mvhom/errors.hpp"
#include "mvhom/rng.hpp"

namespace mvhom {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kRecessionTail = 3;

std::vector<double> parse_args(const std::string& inner) {
  std::vector<double> out;
  std::stringstream ss(inner);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
    if (used != tok.size()) throw std::invalid_argument(tok);
    out.push_back(v);
  }
  return out;
}

void check_schedule(std::span<const double> schedule) {
  if (schedule.empty()) throw ScheduleTooShort("empty recession schedule");
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    if (!(schedule[i] > schedule[i - 1])) {
      throw ScheduleTooShort("recession schedule must be strictly increasing");
    }
  }
  if (schedule.back() < 1024.0) {
    throw ScheduleTooShort("recession schedule must reach t >= 2^10, got " +
                           std::to_string(schedule.back()));
  }
}

// Tail maximum of h(t xi)/t, returning the maximizing t.
template <class F>
double tail_max(std::span<const double> schedule, F&& h, double* arg = nullptr) {
  const std::size_t first = schedule.size() > kRecessionTail ? schedule.size() - kRecessionTail : 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = first; i < schedule.size(); ++i) {
    const double v = h(schedule[i]) / schedule[i];
    if (v > best) {
      best = v;
      if (arg) *arg = schedule[i];
    }
  }
  return best;
}

// Hessian of the Huber-smoothed Frobenius norm on vec(xi).
MatFlat huber_norm_hessian(const Mat& xi, double mu) {
  const long m = xi.size();
  const double r = xi.norm();
  if (r <= mu) return MatFlat::Identity(m, m) / mu;
  const Eigen::Map<const Eigen::VectorXd> v(xi.data(), m);
  return (MatFlat::Identity(m, m) - v * v.transpose() / (r * r)) / r;
}

// Numerical recession density used for tabulated and custom families. The
// smoothed form uses the Huber scaling identity H_{mu t}(t r)/t = H_mu(r).
class NumericRecession final : public Density {
 public:
  NumericRecession(Integrand base, std::vector<double> schedule)
      : base_(std::move(base)), schedule_(std::move(schedule)) {}

  int domain_dim() const override { return base_.domain_dim(); }
  int ambient_dim() const override { return base_.ambient_dim(); }
  bool y_independent() const override { return base_.y_independent(); }

  double value(const VecN& y, const Mat& xi) const override {
    return base_.recession(y, xi, schedule_);
  }

  double smoothed(const VecN& y, const Mat& xi, double mu, Mat* grad,
                  Curvature* curv) const override {
    double t_star = schedule_.back();
    tail_max(
        schedule_, [&](double t) { return base_.value(y, Mat(t * xi)); }, &t_star);
    const double v = base_.smoothed(y, Mat(t_star * xi), mu * t_star, grad, curv);
    if (curv) {
      curv->majorizer *= t_star;
      curv->hessian *= t_star;
    }
    return v / t_star;
  }

 private:
  Integrand base_;
  std::vector<double> schedule_;
};

class FrozenExtension final : public Density {
 public:
  FrozenExtension(std::shared_ptr<const Density> f, MatD proj, int n)
      : f_(std::move(f)), proj_(std::move(proj)), n_(n) {
    const int d = static_cast<int>(proj_.rows());
    comp_ = MatD::Identity(d, d) - proj_;
  }

  int domain_dim() const override { return n_; }
  int ambient_dim() const override { return static_cast<int>(proj_.rows()); }
  bool y_independent() const override { return f_->y_independent(); }

  double value(const VecN& y, const Mat& xi) const override {
    const Mat p = proj_ * xi;
    return f_->value(y, p) + (xi - p).norm();
  }

  double smoothed(const VecN& y, const Mat& xi, double mu, Mat* grad,
                  Curvature* curv) const override {
    const int d = ambient_dim();
    const Mat p = proj_ * xi;
    const Mat q = xi - p;
    Mat gf;
    Curvature cf;
    const double vf = f_->smoothed(y, p, mu, grad ? &gf : nullptr, curv ? &cf : nullptr);
    const double r = q.norm();
    const double w = 1.0 / std::max(r, mu);
    if (grad) *grad = proj_ * gf + w * (comp_ * q);
    if (curv) {
      MatFlat pb = MatFlat::Zero(d * n_, d * n_);
      MatFlat qb = MatFlat::Zero(d * n_, d * n_);
      for (int j = 0; j < n_; ++j) {
        pb.block(j * d, j * d, d, d) = proj_;
        qb.block(j * d, j * d, d, d) = comp_;
      }
      MatFlat hq = huber_norm_hessian(q, mu);
      curv->majorizer = pb * cf.majorizer * pb + w * qb * qb;
      curv->hessian = pb * cf.hessian * pb + qb * hq * qb;
    }
    return vf + huber(r, mu);
  }

 private:
  std::shared_ptr<const Density> f_;
  MatD proj_;
  MatD comp_;
  int n_;
};

double quintic_step(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

}  // namespace

// ---------------------------------------------------------------- Coefficient

Coefficient Coefficient::constant(double c) {
  Coefficient k;
  k.rep_ = Const{c};
  std::ostringstream os;
  os << c;
  k.text_ = os.str();
  return k;
}

Coefficient Coefficient::sine(double mean, double amp, int axis) {
  if (axis < 1 || axis > kMaxDomain) throw Error("sine coefficient axis out of range");
  Coefficient k;
  k.rep_ = Sine{mean, amp, axis - 1};
  std::ostringstream os;
  os << "sine(" << mean << "," << amp << "," << axis << ")";
  k.text_ = os.str();
  return k;
}

Coefficient Coefficient::cosine_product(double mean, double amp) {
  Coefficient k;
  k.rep_ = CosProd{mean, amp};
  std::ostringstream os;
  os << "cosprod(" << mean << "," << amp << ")";
  k.text_ = os.str();
  return k;
}

Coefficient Coefficient::table(Lattice lattice) {
  if (!lattice.periodic()) throw Error("coefficient tables must be periodic");
  Coefficient k;
  k.rep_ = std::move(lattice);
  k.text_ = "table";
  return k;
}

Coefficient Coefficient::parse(const std::string& expr) {
  std::string s;
  for (char c : expr) {
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  }
  if (s.rfind("table:", 0) == 0) {
    Coefficient k = table(read_coefficient_table(expr.substr(expr.find(':') + 1)));
    k.text_ = s;
    return k;
  }
  const auto open = s.find('(');
  if (open == std::string::npos) {
    std::size_t used = 0;
    const double c = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("bad coefficient '" + expr + "'");
    return constant(c);
  }
  if (s.back() != ')') throw std::invalid_argument("bad coefficient '" + expr + "'");
  const std::string name = s.substr(0, open);
  const auto args = parse_args(s.substr(open + 1, s.size() - open - 2));
  if (name == "sine" && args.size() == 3) {
    return sine(args[0], args[1], static_cast<int>(args[2]));
  }
  if (name == "cosprod" && args.size() == 2) return cosine_product(args[0], args[1]);
  if (name == "const" && args.size() == 1) return constant(args[0]);
  throw std::invalid_argument("unknown coefficient expression '" + expr + "'");
}

double Coefficient::operator()(const VecN& y) const {
  return std::visit(
      [&](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Const>) {
          return r.c;
        } else if constexpr (std::is_same_v<T, Sine>) {
          return r.mean + r.amp * std::sin(kTwoPi * y[std::min<int>(r.axis, y.size() - 1)]);
        } else if constexpr (std::is_same_v<T, CosProd>) {
          double p = 1.0;
          for (int i = 0; i < y.size(); ++i) p *= std::cos(kTwoPi * y[i]);
          return r.mean + r.amp * p;
        } else {
          return r(Eigen::VectorXd(y));
        }
      },
      rep_);
}

bool Coefficient::is_constant() const {
  if (const auto* c = std::get_if<Sine>(&rep_)) return c->amp == 0.0;
  if (const auto* c = std::get_if<CosProd>(&rep_)) return c->amp == 0.0;
  return std::holds_alternative<Const>(rep_);
}

std::string Coefficient::describe() const { return text_; }

// ------------------------------------------------------------------ Integrand

std::string family_name(Family f) {
  switch (f) {
    case Family::WeightedNorm:
      return "weighted-norm";
    case Family::Anisotropic:
      return "anisotropic";
    case Family::SmoothedNonconvex:
      return "smoothed-nonconvex";
    case Family::Tabulated:
      return "tabulated";
    case Family::Custom:
      return "custom";
  }
  return "unknown";
}

std::vector<double> default_recession_schedule() {
  std::vector<double> s;
  for (int k = 4; k <= 14; ++k) s.push_back(std::ldexp(1.0, k));
  return s;
}

Integrand Integrand::weighted_norm(int domain_dim, int ambient_dim, Coefficient a,
                                   double offset) {
  Integrand f;
  f.family_ = Family::WeightedNorm;
  f.n_ = domain_dim;
  f.d_ = ambient_dim;
  f.a_ = std::move(a);
  f.offset_ = offset;
  return f;
}

Integrand Integrand::anisotropic(int domain_dim, int ambient_dim, Coefficient a, Coefficient b,
                                 Vec e, double offset) {
  if (e.size() != ambient_dim) throw Error("anisotropy direction must live in R^d");
  Integrand f = weighted_norm(domain_dim, ambient_dim, std::move(a), offset);
  f.family_ = Family::Anisotropic;
  f.b_ = std::move(b);
  f.e_ = std::move(e);
  return f;
}

Integrand Integrand::smoothed_nonconvex(int domain_dim, int ambient_dim, Coefficient a,
                                        double strength, double offset) {
  if (strength < 0.0) throw Error("smoothed-nonconvex strength must be nonnegative");
  Integrand f = weighted_norm(domain_dim, ambient_dim, std::move(a), offset);
  f.family_ = Family::SmoothedNonconvex;
  f.strength_ = strength;
  return f;
}

Integrand Integrand::tabulated(int domain_dim, int ambient_dim, Lattice a) {
  if (a.dim() != domain_dim) throw Error("coefficient table dimension must equal N");
  Integrand f = weighted_norm(domain_dim, ambient_dim, Coefficient::table(std::move(a)));
  f.family_ = Family::Tabulated;
  return f;
}

Integrand Integrand::custom(int domain_dim, int ambient_dim, Callable fn, std::string name) {
  Integrand f;
  f.family_ = Family::Custom;
  f.n_ = domain_dim;
  f.d_ = ambient_dim;
  f.custom_ = std::move(fn);
  f.name_ = std::move(name);
  return f;
}

bool Integrand::y_independent() const {
  if (family_ == Family::Custom) return false;
  if (family_ == Family::Anisotropic) return a_.is_constant() && b_.is_constant();
  return a_.is_constant();
}

std::string Integrand::describe() const {
  std::ostringstream os;
  os << family_name(family_);
  if (family_ == Family::Custom) {
    os << "(" << name_ << ")";
    return os.str();
  }
  os << "(a=" << a_.describe();
  if (family_ == Family::Anisotropic) os << ", b=" << b_.describe();
  if (family_ == Family::SmoothedNonconvex) os << ", c=" << strength_;
  if (offset_ != 0.0) os << ", offset=" << offset_;
  os << ")";
  return os.str();
}

double Integrand::eval(const VecN& y, const Mat& xi) const {
  if (family_ == Family::Custom) return custom_(y, xi);
  const double r = xi.norm();
  double v = a_(y) * r + offset_;
  if (family_ == Family::Anisotropic) {
    const double bw = b_(y);
    for (int j = 0; j < xi.cols(); ++j) v += bw * std::abs(xi.col(j).dot(e_));
  } else if (family_ == Family::SmoothedNonconvex) {
    const double s = r * r;
    v += strength_ * s / (1.0 + s);
  }
  return v;
}

double Integrand::smoothed(const VecN& y, const Mat& xi, double mu, Mat* grad,
                           Curvature* curv) const {
  const int d = static_cast<int>(xi.rows());
  const int n = static_cast<int>(xi.cols());
  const int m = d * n;
  if (family_ == Family::Custom) {
    // Central differences; only used for small stubs.
    const double v = custom_(y, xi);
    if (grad) {
      grad->resize(d, n);
      constexpr double kStep = 1e-6;
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < d; ++i) {
          Mat p = xi;
          Mat q = xi;
          p(i, j) += kStep;
          q(i, j) -= kStep;
          (*grad)(i, j) = (custom_(y, p) - custom_(y, q)) / (2 * kStep);
        }
      }
    }
    if (curv) {
      curv->majorizer = MatFlat::Identity(m, m) / std::max(mu, 1e-12);
      curv->hessian = curv->majorizer;
    }
    return v;
  }
  const double r = xi.norm();
  const double aw = a_(y);
  const double w = aw / std::max(r, mu);
  double v = aw * huber(r, mu) + offset_;
  if (grad) *grad = w * xi;
  if (curv) {
    curv->majorizer = w * MatFlat::Identity(m, m);
    curv->hessian = aw * huber_norm_hessian(xi, mu);
  }
  if (family_ == Family::Anisotropic) {
    const double bw = b_(y);
    for (int j = 0; j < n; ++j) {
      const double z = xi.col(j).dot(e_);
      const double wz = bw / std::max(std::abs(z), mu);
      v += bw * huber(std::abs(z), mu);
      if (grad) grad->col(j) += wz * z * e_;
      if (curv) {
        const MatD ee = e_ * e_.transpose();
        curv->majorizer.block(j * d, j * d, d, d) += wz * ee;
        if (std::abs(z) <= mu) curv->hessian.block(j * d, j * d, d, d) += (bw / mu) * ee;
      }
    }
  } else if (family_ == Family::SmoothedNonconvex) {
    const double s = r * r;
    const double den = 1.0 + s;
    v += strength_ * s / den;
    const double ds = strength_ / (den * den);
    if (grad) *grad += 2.0 * ds * xi;
    if (curv) {
      curv->majorizer += 2.0 * ds * MatFlat::Identity(m, m);
      // Radial eigenvalue 2c(1-3s)/(1+s)^3 is clipped at zero.
      const Eigen::Map<const Eigen::VectorXd> vx(xi.data(), m);
      MatFlat hn = 2.0 * ds * MatFlat::Identity(m, m);
      if (s > 0.0) {
        const double radial = std::max(0.0, 2.0 * strength_ * (1.0 - 3.0 * s) / (den * den * den));
        hn += (radial - 2.0 * ds) * vx * vx.transpose() / s;
      }
      curv->hessian += hn;
    }
  }
  return v;
}

bool Integrand::has_closed_form_recession() const {
  return family_ != Family::Tabulated && family_ != Family::Custom;
}

double Integrand::recession(const VecN& y, const Mat& xi) const {
  if (has_closed_form_recession()) return recession_integrand().eval(y, xi);
  const auto schedule = default_recession_schedule();
  return recession(y, xi, schedule);
}

double Integrand::recession(const VecN& y, const Mat& xi, std::span<const double> schedule) const {
  check_schedule(schedule);
  if (has_closed_form_recession()) return recession_integrand().eval(y, xi);
  if (xi.norm() == 0.0) return 0.0;
  return tail_max(schedule, [&](double t) { return eval(y, Mat(t * xi)); });
}

Integrand Integrand::recession_integrand() const {
  if (!has_closed_form_recession()) {
    throw Error("recession of a " + family_name(family_) + " integrand has no closed form");
  }
  Integrand r = *this;
  r.offset_ = 0.0;
  if (family_ == Family::SmoothedNonconvex) {
    r.family_ = Family::WeightedNorm;
    r.strength_ = 0.0;
  }
  return r;
}

std::shared_ptr<const Density> Integrand::recession_density() const {
  if (has_closed_form_recession()) return std::make_shared<Integrand>(recession_integrand());
  return std::make_shared<NumericRecession>(*this, default_recession_schedule());
}

// --------------------------------------------------------- ExtendedIntegrand

ExtendedIntegrand::ExtendedIntegrand(std::shared_ptr<const Integrand> base, Manifold manifold)
    : base_(std::move(base)), manifold_(std::move(manifold)) {
  if (base_->ambient_dim() != manifold_.ambient_dim()) {
    throw Error("integrand and manifold disagree on the ambient dimension");
  }
  base_recession_ = base_->recession_density();
}

double ExtendedIntegrand::cutoff(const Vec& s) const {
  const double delta0 = manifold_.tube_radius();
  const double dist = manifold_.distance_to(s);
  return 1.0 - quintic_step((dist - 0.5 * delta0) / (0.25 * delta0));
}

MatD ExtendedIntegrand::projection(const Vec& s) const {
  const int d = manifold_.ambient_dim();
  const double chi = cutoff(s);
  if (chi == 0.0) return MatD::Zero(d, d);
  return chi * manifold_.tangent_projector(manifold_.project(s));
}

double ExtendedIntegrand::eval(const VecN& y, const Vec& s, const Mat& xi) const {
  const Mat p = projection(s) * xi;
  return base_->eval(y, p) + (xi - p).norm();
}

double ExtendedIntegrand::eval_recession(const VecN& y, const Vec& s, const Mat& xi) const {
  const Mat p = projection(s) * xi;
  return base_recession_->value(y, p) + (xi - p).norm();
}

std::shared_ptr<const Density> ExtendedIntegrand::frozen(const Vec& s, bool recession) const {
  std::shared_ptr<const Density> f = recession ? base_recession_ : base_;
  return std::make_shared<FrozenExtension>(std::move(f), projection(s), base_->domain_dim());
}

// ------------------------------------------------------------------- certify

namespace {

Mat random_direction(CounterRng& rng, int d, int n) {
  Mat xi(d, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < d; ++i) xi(i, j) = rng.normal();
  }
  const double r = xi.norm();
  return r > 0.0 ? Mat(xi / r) : random_direction(rng, d, n);
}

VecN random_cell_point(CounterRng& rng, int n) {
  VecN y(n);
  for (int i = 0; i < n; ++i) y[i] = rng.uniform();
  return y;
}

double log_uniform(CounterRng& rng, double lo, double hi) {
  return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}

}  // namespace

HypothesisReport certify(const Integrand& f, const SamplerConfig& config) {
  if (config.samples < 1000) throw Error("certify needs at least 10^3 samples");
  const int n = f.domain_dim();
  const int d = f.ambient_dim();
  CounterRng root(config.seed, 0x63657274);
  CounterRng growth = root.split(1);
  CounterRng lip = root.split(2);
  CounterRng rec = root.split(3);
  CounterRng per = root.split(4);

  HypothesisReport rep;
  rep.samples = config.samples;
  rep.alpha_hat = std::numeric_limits<double>::infinity();
  rep.beta_hat = 0.0;
  for (int k = 0; k < config.samples; ++k) {
    const VecN y = random_cell_point(growth, n);
    const double r = log_uniform(growth, config.min_slope, config.max_slope);
    const Mat xi = r * random_direction(growth, d, n);
    const double v = f.eval(y, xi);
    if (r >= 1.0) rep.alpha_hat = std::min(rep.alpha_hat, v / r);
    rep.beta_hat = std::max(rep.beta_hat, v / (1.0 + r));
  }
  // Make sure the coercivity estimate sees at least one |xi| >= 1 sample.
  if (!std::isfinite(rep.alpha_hat)) {
    const VecN y = random_cell_point(growth, n);
    rep.alpha_hat = f.eval(y, random_direction(growth, d, n));
  }
  // Smallest beta that also satisfies alpha <= beta; f <= beta (1 + |xi|) still holds.
  rep.beta_hat = std::max(rep.beta_hat, rep.alpha_hat);

  for (int k = 0; k < config.samples; ++k) {
    const VecN y = random_cell_point(lip, n);
    const Mat xi = log_uniform(lip, config.min_slope, config.max_slope) *
                   random_direction(lip, d, n);
    const Mat dxi = log_uniform(lip, 1e-3, 1.0) * random_direction(lip, d, n);
    const double q = std::abs(f.eval(y, xi + dxi) - f.eval(y, xi)) / dxi.norm();
    rep.lip_hat = std::max(rep.lip_hat, q);
  }

  for (int k = 0; k < config.samples; ++k) {
    VecN y = random_cell_point(per, n);
    const Mat xi = log_uniform(per, config.min_slope, config.max_slope) *
                   random_direction(per, d, n);
    const int axis = static_cast<int>(per.next_u64() % static_cast<std::uint64_t>(n));
    const double v0 = f.eval(y, xi);
    y[axis] += 1.0;
    const double v1 = f.eval(y, xi);
    rep.periodicity_defect = std::max(rep.periodicity_defect, std::abs(v1 - v0) / (1.0 + std::abs(v0)));
  }

  // Recession fit on |xi| in [10, 10^4].
  std::vector<double> mags;
  std::vector<double> diffs;
  for (int k = 0; k < config.samples; ++k) {
    const VecN y = random_cell_point(rec, n);
    const double r = log_uniform(rec, 10.0, 1e4);
    const Mat xi = r * random_direction(rec, d, n);
    mags.push_back(r);
    diffs.push_back(std::abs(f.eval(y, xi) - f.recession(y, xi)));
  }
  rep.recession_samples = static_cast<int>(mags.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  double max_rel = 0.0;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    max_rel = std::max(max_rel, diffs[k] / (1.0 + mags[k]));
    if (diffs[k] <= 1e-13 * (1.0 + mags[k])) continue;
    const double x = std::log(1.0 + mags[k]);
    const double yv = std::log(diffs[k] / (1.0 + mags[k]));
    sx += x;
    sy += yv;
    sxx += x * x;
    sxy += x * yv;
    ++m;
  }
  bool fit_ok = true;
  if (m < 2 || max_rel <= 1e-13) {
    rep.recession_q = 0.5;
  } else {
    const double den = m * sxx - sx * sx;
    const double slope = den > 0.0 ? (m * sxy - sx * sy) / den : -1.0;
    const double q = -slope;
    if (q >= 1.0 - 1e-3) {
      rep.recession_q = 0.5;  // bounded difference: any q in (0,1) works
    } else if (q <= 1e-3) {
      rep.recession_q = q;
      fit_ok = false;
    } else {
      rep.recession_q = q;
    }
  }
  // C must cover every slope, not only the fitted tail.
  for (int k = 0; k < config.samples; ++k) {
    const VecN y = random_cell_point(rec, n);
    const double r = log_uniform(rec, config.min_slope, 10.0);
    const Mat xi = r * random_direction(rec, d, n);
    mags.push_back(r);
    diffs.push_back(std::abs(f.eval(y, xi) - f.recession(y, xi)));
  }
  rep.recession_C = 0.0;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    rep.recession_C = std::max(
        rep.recession_C, diffs[k] / (1.0 + std::pow(mags[k], 1.0 - rep.recession_q)));
  }

  rep.h1 = rep.periodicity_defect <= (f.weight().is_table() ? 1e-9 : 1e-12);
  rep.h2 = rep.alpha_hat > 0.0 && std::isfinite(rep.beta_hat);
  rep.h3 = std::isfinite(rep.lip_hat);
  rep.h4 = fit_ok && rep.recession_q > 0.0 && rep.recession_q < 1.0 && std::isfinite(rep.recession_C);
  return rep;
}

}  // namespace mvhom
