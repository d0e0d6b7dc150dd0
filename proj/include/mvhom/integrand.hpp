#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mvhom/lattice.hpp"
#include "mvhom/linalg.hpp"
#include "mvhom/manifold.hpp"

namespace mvhom {

/// Huber regularization of |.|: r^2/(2 mu) below mu, r - mu/2 above.
inline double huber(double r, double mu) { return r <= mu ? 0.5 * r * r / mu : r - 0.5 * mu; }

/// 1-periodic scalar coefficient field on the unit cell.
class Coefficient {
 public:
  static Coefficient constant(double c);
  /// mean + amp * sin(2 pi y_axis), axis counted from 1.
  static Coefficient sine(double mean, double amp, int axis);
  /// mean + amp * prod_i cos(2 pi y_i).
  static Coefficient cosine_product(double mean, double amp);
  static Coefficient table(Lattice lattice);
  /// Parses "2.5", "sine(2,1,1)", "cosprod(2,0.5)" or "table:<path>".
  static Coefficient parse(const std::string& expr);

  double operator()(const VecN& y) const;
  bool is_constant() const;
  bool is_table() const { return std::holds_alternative<Lattice>(rep_); }
  std::string describe() const;

 private:
  struct Const {
    double c;
  };
  struct Sine {
    double mean, amp;
    int axis;
  };
  struct CosProd {
    double mean, amp;
  };
  std::variant<Const, Sine, CosProd, Lattice> rep_ = Const{1.0};
  std::string text_ = "1";
};

/// Second-order data of a smoothed density on vec(xi) (column-major).
///   majorizer: positive semidefinite M with
///     h(y, xi + eta) <= h(y, xi) + <grad, eta> + eta^T M eta / 2
///     (valid for the concave-in-|.|^2 building blocks used here)
///   hessian:   the Hessian with negative curvature clipped, hessian <= M.
struct Curvature {
  MatFlat majorizer;
  MatFlat hessian;
};

/// Energy density h(y, xi) on R^N x R^{d x N}, periodic in y.
///
/// `smoothed` replaces every |.| by its Huber regularization at level mu and
/// returns the gradient in xi and, optionally, its curvature.
class Density {
 public:
  virtual ~Density() = default;
  virtual int domain_dim() const = 0;
  virtual int ambient_dim() const = 0;
  virtual double value(const VecN& y, const Mat& xi) const = 0;
  virtual double smoothed(const VecN& y, const Mat& xi, double mu, Mat* grad,
                          Curvature* curv) const = 0;
  /// True when the density does not depend on y.
  virtual bool y_independent() const = 0;
};

enum class Family { WeightedNorm, Anisotropic, SmoothedNonconvex, Tabulated, Custom };

std::string family_name(Family f);

/// Default geometric schedule {2^4, ..., 2^14} for numerical recession.
std::vector<double> default_recession_schedule();

/// Periodic Caratheodory integrand f(y, xi) with linear growth.
///
/// Families:
///   weighted-norm        a(y)|xi| + c0
///   anisotropic          a(y)|xi| + b(y) sum_i |xi_i . e| + c0
///   smoothed-nonconvex   a(y)|xi| + c |xi|^2 / (1 + |xi|^2) + c0
///   tabulated            a(y)|xi| with a sampled on a lattice; recession is
///                        evaluated numerically over a schedule
///   custom               arbitrary callable (test stubs)
class Integrand final : public Density {
 public:
  using Callable = std::function<double(const VecN& y, const Mat& xi)>;

  static Integrand weighted_norm(int domain_dim, int ambient_dim, Coefficient a,
                                 double offset = 0.0);
  static Integrand anisotropic(int domain_dim, int ambient_dim, Coefficient a, Coefficient b,
                               Vec e, double offset = 0.0);
  static Integrand smoothed_nonconvex(int domain_dim, int ambient_dim, Coefficient a,
                                      double strength, double offset = 0.0);
  static Integrand tabulated(int domain_dim, int ambient_dim, Lattice a);
  static Integrand custom(int domain_dim, int ambient_dim, Callable f, std::string name);

  Family family() const { return family_; }
  int domain_dim() const override { return n_; }
  int ambient_dim() const override { return d_; }
  bool y_independent() const override;
  std::string describe() const;

  double value(const VecN& y, const Mat& xi) const override { return eval(y, xi); }
  double smoothed(const VecN& y, const Mat& xi, double mu, Mat* grad,
                  Curvature* curv) const override;

  double eval(const VecN& y, const Mat& xi) const;

  bool has_closed_form_recession() const;
  /// f^inf(y, xi); closed form where available, otherwise the tail maximum
  /// of f(y, t xi)/t over the default schedule.
  double recession(const VecN& y, const Mat& xi) const;
  /// f^inf via `schedule` for tabulated/custom families (closed form for the
  /// others). Throws ScheduleTooShort if the schedule is not increasing or
  /// ends below 2^10.
  double recession(const VecN& y, const Mat& xi, std::span<const double> schedule) const;

  /// f^inf as a density usable by the solvers.
  std::shared_ptr<const Density> recession_density() const;
  /// f^inf as an integrand (closed-form families only).
  Integrand recession_integrand() const;

  const Coefficient& weight() const { return a_; }

 private:
  Integrand() = default;

  Family family_ = Family::WeightedNorm;
  int n_ = 1;
  int d_ = 2;
  Coefficient a_;
  Coefficient b_;
  Vec e_;
  double strength_ = 0.0;
  double offset_ = 0.0;
  Callable custom_;
  std::string name_;
};

/// Tangential extension g(y,s,xi) = f(y, PP_s xi) + |xi - PP_s xi| with
/// PP_s = chi(s) P_{Pi(s)} and chi a quintic smoothstep cutoff that is 1 for
/// dist(s,M) <= delta0/2 and 0 for dist(s,M) >= 3 delta0/4.
class ExtendedIntegrand {
 public:
  ExtendedIntegrand(std::shared_ptr<const Integrand> base, Manifold manifold);

  const Integrand& base() const { return *base_; }
  const Manifold& manifold() const { return manifold_; }

  double cutoff(const Vec& s) const;
  /// chi(s) P_{Pi(s)}, a symmetric d x d matrix (zero off the cutoff support).
  MatD projection(const Vec& s) const;

  double eval(const VecN& y, const Vec& s, const Mat& xi) const;
  /// g^inf(y,s,xi) = f^inf(y, PP_s xi) + |xi - PP_s xi|.
  double eval_recession(const VecN& y, const Vec& s, const Mat& xi) const;

  /// xi -> g(y, s, xi) (or g^inf) at a frozen s.
  std::shared_ptr<const Density> frozen(const Vec& s, bool recession) const;

 private:
  std::shared_ptr<const Integrand> base_;
  std::shared_ptr<const Density> base_recession_;
  Manifold manifold_;
};

struct SamplerConfig {
  int samples = 2000;
  std::uint64_t seed = 1;
  double min_slope = 1e-2;
  double max_slope = 1e2;
};

/// Sampled estimates of the growth, Lipschitz and recession constants.
struct HypothesisReport {
  double alpha_hat = 0.0;
  double beta_hat = 0.0;
  double lip_hat = 0.0;
  double recession_C = 0.0;
  double recession_q = 0.0;
  double periodicity_defect = 0.0;
  int samples = 0;
  int recession_samples = 0;
  bool h1 = false;
  bool h2 = false;
  bool h3 = false;
  bool h4 = false;
};

HypothesisReport certify(const Integrand& f, const SamplerConfig& config);

}  // namespace mvhom
