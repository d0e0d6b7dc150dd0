#include "mvhom/grid_energy.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <limits>

#include "mvhom/errors.hpp"

namespace mvhom {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Block = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxAmbient, kMaxAmbient>;

class Engine {
 public:
  Engine(const GridProblem& p, const GridField& init) : p_(p), g_(p.grid) {
    if (!p_.density) throw Error("grid problem without density");
    n_ = g_.dim;
    d_ = p_.density->ambient_dim();
    if (p_.manifold && p_.manifold->ambient_dim() != d_) {
      throw Error("manifold and density disagree on the ambient dimension");
    }
    k_ = p_.manifold ? p_.manifold->intrinsic_dim() : static_cast<int>(p_.basis.cols());
    if (!p_.manifold && p_.basis.rows() != d_) throw Error("linear basis must have d rows");
    slope_ = p_.slope.size() == 0 ? Mat(Mat::Zero(d_, n_)) : p_.slope;

    const long nodes = g_.node_count();
    rep_.resize(static_cast<std::size_t>(nodes));
    for (long i = 0; i < nodes; ++i) {
      auto m = g_.node_multi(i);
      for (int j = 0; j < n_; ++j) {
        if (p_.periodic[j] && m[j] == g_.cells) m[j] = 0;
      }
      rep_[i] = g_.node_index(m);
    }
    unknown_.assign(static_cast<std::size_t>(nodes), -1);
    nunk_ = 0;
    bool any_fixed = false;
    for (long i = 0; i < nodes; ++i) {
      if (rep_[i] != i) continue;
      if (!p_.fixed.empty() && p_.fixed[i]) {
        any_fixed = true;
        continue;
      }
      unknown_[i] = nunk_++;
    }
    // A fully periodic linear problem is invariant under constant shifts.
    if (!any_fixed && !p_.manifold && nunk_ > 0) {
      for (long i = 0; i < nodes; ++i) {
        if (unknown_[i] >= 0) --unknown_[i];
      }
      unknown_[0] = -1;
      --nunk_;
    }

    corners_ = n_ == 1 ? 1 : (1 << n_);
    weight_ = std::pow(g_.h, n_) / corners_ * p_.energy_scale;
    const long cells = g_.cell_count();
    cell_y_.resize(static_cast<std::size_t>(cells));
    cell_base_.resize(static_cast<std::size_t>(cells));
    for (long c = 0; c < cells; ++c) {
      const VecN x = g_.cell_center(c);
      cell_y_[c] = (p_.y_offset.size() ? p_.y_offset : VecN(VecN::Zero(n_))) +
                   (p_.y_map.size() ? p_.y_map : MatN(MatN::Identity(n_, n_))) * x;
      const auto m = g_.cell_multi(c);
      cell_base_[c] = g_.node_index(m);
    }
    stride_[n_ - 1] = 1;
    for (int j = n_ - 2; j >= 0; --j) stride_[j] = stride_[j + 1] * g_.nodes_per_axis();

    u_.resize(static_cast<std::size_t>(nodes));
    for (long i = 0; i < nodes; ++i) u_[i] = init.value(rep_[i]);
  }

  long unknowns() const { return nunk_; }

  GridField field() const {
    GridField f(g_, d_, p_.manifold.has_value());
    for (long i = 0; i < g_.node_count(); ++i) f.set(i, u_[i]);
    return f;
  }

  double energy(double mu, bool smoothed) { return evaluate(u_, mu, smoothed, nullptr); }

  // Damped Newton iteration: the step solves (H + lambda M) d = -g with H the
  // clipped Hessian and M the majorizer; lambda adapts to the outcome of the
  // sufficient-decrease test, so the iteration interpolates between Newton
  // steps and majorize-minimize steps.
  StageResult run(double mu, const MinimizeOptions& opt) {
    StageResult st;
    st.mu = mu;
    if (nunk_ == 0) {
      st.converged = true;
      st.value = energy(mu, false);
      return st;
    }
    build_pattern();
    Eigen::SimplicialLDLT<SpMat> solver;
    bool analyzed = false;
    Eigen::VectorXd grad(nunk_ * k_);
    double e = evaluate(u_, mu, true, nullptr);
    st.history.push_back(e);
    const double gtol = opt.grad_tol * opt.grad_scale;
    const double etol = opt.model_tol * mu * opt.grad_scale;
    double lambda = 1.0;
    SpMat h = hm_;
    for (int it = 0; it < opt.max_iterations; ++it) {
      update_bases();
      grad.setZero();
      std::fill(hm_.valuePtr(), hm_.valuePtr() + hm_.nonZeros(), 0.0);
      std::fill(ht_.valuePtr(), ht_.valuePtr() + ht_.nonZeros(), 0.0);
      e = evaluate(u_, mu, true, &grad);
      double diag_max = 0.0;
      for (long r = 0; r < hm_.rows(); ++r) diag_max = std::max(diag_max, hm_.coeff(r, r));
      const double tau = 1e-13 * std::max(diag_max, 1e-300);
      bool accepted = false;
      double e_new = e;
      double dec2 = 0.0;
      std::vector<Vec> trial;
      for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
        const double* pt = ht_.valuePtr();
        const double* pm = hm_.valuePtr();
        double* ph = h.valuePtr();
        for (long q = 0; q < h.nonZeros(); ++q) ph[q] = pt[q] + lambda * pm[q];
        for (long r = 0; r < h.rows(); ++r) h.coeffRef(r, r) += tau;
        if (!analyzed) {
          solver.analyzePattern(h);
          analyzed = true;
        }
        solver.factorize(h);
        if (solver.info() != Eigen::Success) {
          lambda *= 4.0;
          continue;
        }
        const Eigen::VectorXd dir = -solver.solve(grad);
        dec2 = -grad.dot(dir);
        if (attempt == 0) {
          st.grad_norm = std::sqrt(std::max(dec2, 0.0));
          if (st.grad_norm < gtol || 0.5 * dec2 <= etol) break;
        }
        const double alpha = lambda > 16.0 ? 16.0 / lambda : 1.0;
        try {
          trial = step(dir, alpha);
          e_new = evaluate(trial, mu, true, nullptr);
        } catch (const OutOfTube&) {
          // Step left the retraction's domain; treat as a rejected step.
          e_new = std::numeric_limits<double>::infinity();
        }
        if (e_new <= e - 1e-4 * alpha * dec2) {
          accepted = true;
        } else {
          lambda *= 4.0;
        }
      }
      if (st.grad_norm < gtol || 0.5 * dec2 <= etol) {
        st.converged = true;
        break;
      }
      ++st.iterations;
      if (!accepted) break;
      lambda = std::max(lambda * 0.25, 1e-6);
      u_ = std::move(trial);
      st.history.push_back(e_new);
      if (e - e_new <= opt.rel_tol * std::max(std::abs(e), std::numeric_limits<double>::min())) {
        st.converged = true;
        break;
      }
    }
    st.value = energy(mu, false);
    return st;
  }

 private:
  long corner_node(long base, int pattern) const {
    long i = base;
    for (int j = 0; j < n_; ++j) {
      if (pattern & (1 << j)) i += stride_[j];
    }
    return i;
  }

  Vec edge(const Vec& lo, const Vec& hi, MatD* jac) const {
    if (p_.manifold) return p_.manifold->edge_vector(lo, hi, jac);
    if (jac) *jac = MatD::Identity(d_, d_);
    return hi - lo;
  }

  void update_bases() {
    if (!p_.manifold) return;
    bases_.resize(u_.size());
    for (std::size_t i = 0; i < u_.size(); ++i) {
      if (unknown_[i] >= 0) bases_[i] = p_.manifold->tangent_basis(ManifoldPoint{u_[i]});
    }
  }

  const Eigen::MatrixXd& basis_of(long node) const {
    return p_.manifold ? bases_[node] : p_.basis;
  }

  std::vector<Vec> step(const Eigen::VectorXd& dir, double alpha) const {
    std::vector<Vec> v = u_;
    for (long i = 0; i < static_cast<long>(v.size()); ++i) {
      const long id = unknown_[i];
      if (id < 0) continue;
      const Vec delta = alpha * basis_of(i) * dir.segment(id * k_, k_);
      if (p_.manifold) {
        v[i] = p_.manifold->project(u_[i] + delta).coords;
      } else {
        v[i] = u_[i] + delta;
      }
    }
    for (long i = 0; i < static_cast<long>(v.size()); ++i) {
      if (rep_[i] != i) v[i] = v[rep_[i]];
    }
    return v;
  }

  void build_pattern() {
    if (hm_.rows() == nunk_ * k_ && hm_.nonZeros() > 0) return;
    std::vector<Eigen::Triplet<double>> trip;
    const long cells = g_.cell_count();
    std::vector<long> ids;
    for (long c = 0; c < cells; ++c) {
      ids.clear();
      for (int pat = 0; pat < (1 << n_); ++pat) {
        const long id = unknown_[rep_[corner_node(cell_base_[c], pat)]];
        if (id >= 0) ids.push_back(id);
      }
      for (long a : ids) {
        for (long b : ids) {
          if (a < b) continue;
          for (int r = 0; r < k_; ++r) {
            for (int s = 0; s < k_; ++s) {
              if (a * k_ + r >= b * k_ + s) trip.emplace_back(a * k_ + r, b * k_ + s, 0.0);
            }
          }
        }
      }
    }
    for (long r = 0; r < nunk_ * k_; ++r) trip.emplace_back(r, r, 0.0);
    hm_.resize(nunk_ * k_, nunk_ * k_);
    hm_.setFromTriplets(trip.begin(), trip.end());
    hm_.makeCompressed();
    ht_ = hm_;
  }

  // With `grad` set, also accumulates the majorizer and clipped Hessian into
  // hm_ and ht_ (pattern from build_pattern, values zeroed by the caller).
  double evaluate(const std::vector<Vec>& u, double mu, bool smoothed,
                  Eigen::VectorXd* grad) {
    const long cells = g_.cell_count();
    const bool derivs = grad != nullptr;
    double total = 0.0;
    // edges[j][pattern without bit j]
    Vec edges[kMaxDomain][1 << kMaxDomain];
    MatD jacs[kMaxDomain][1 << kMaxDomain];
    Mat dgrad;
    Curvature curv;
    struct Entry {
      long id;
      int axis;
      Block jmat;  // d x k
    };
    std::vector<Entry> entries;
    entries.reserve(2 * kMaxDomain);
    for (long c = 0; c < cells; ++c) {
      const long base = cell_base_[c];
      for (int j = 0; j < n_; ++j) {
        for (int pat = 0; pat < (1 << n_); ++pat) {
          if (pat & (1 << j)) continue;
          const long lo = corner_node(base, pat);
          const long hi = lo + stride_[j];
          edges[j][pat] = edge(u[lo], u[hi], derivs ? &jacs[j][pat] : nullptr) / g_.h;
        }
      }
      for (int kappa = 0; kappa < corners_; ++kappa) {
        Mat xi = slope_;
        for (int j = 0; j < n_; ++j) xi.col(j) += edges[j][kappa & ~(1 << j)];
        const VecN& y = cell_y_[c];
        if (!smoothed) {
          total += p_.density->value(y, xi);
          continue;
        }
        const double v = p_.density->smoothed(y, xi, mu, derivs ? &dgrad : nullptr,
                                               derivs ? &curv : nullptr);
        total += v;
        if (!derivs) continue;
        entries.clear();
        for (int j = 0; j < n_; ++j) {
          const int pat = kappa & ~(1 << j);
          const long lo = corner_node(base, pat);
          const long hi = lo + stride_[j];
          for (int side = 0; side < 2; ++side) {
            const long node = rep_[side ? hi : lo];
            const long id = unknown_[node];
            if (id < 0) continue;
            const double sign = side ? 1.0 / g_.h : -1.0 / g_.h;
            entries.push_back({id, j, Block(sign * jacs[j][pat] * basis_of(node))});
          }
        }
        for (const auto& ea : entries) {
          grad->segment(ea.id * k_, k_).noalias() +=
              weight_ * ea.jmat.transpose() * dgrad.col(ea.axis);
          for (const auto& eb : entries) {
            if (ea.id < eb.id) continue;
            const Block bm = weight_ * ea.jmat.transpose() *
                             curv.majorizer.block(ea.axis * d_, eb.axis * d_, d_, d_) * eb.jmat;
            const Block bh = weight_ * ea.jmat.transpose() *
                             curv.hessian.block(ea.axis * d_, eb.axis * d_, d_, d_) * eb.jmat;
            for (int r = 0; r < k_; ++r) {
              for (int s = 0; s < k_; ++s) {
                const long row = ea.id * k_ + r;
                const long col = eb.id * k_ + s;
                if (row >= col) {
                  hm_.coeffRef(row, col) += bm(r, s);
                  ht_.coeffRef(row, col) += bh(r, s);
                }
              }
            }
          }
        }
      }
    }
    return total * weight_;
  }

  const GridProblem& p_;
  Grid g_;
  int n_ = 1;
  int d_ = 1;
  int k_ = 1;
  Mat slope_;
  std::vector<long> rep_;
  std::vector<long> unknown_;
  long nunk_ = 0;
  int corners_ = 1;
  double weight_ = 1.0;
  std::vector<VecN> cell_y_;
  std::vector<long> cell_base_;
  std::array<long, 3> stride_{1, 1, 1};
  std::vector<Vec> u_;
  std::vector<Eigen::MatrixXd> bases_;
  SpMat hm_;
  SpMat ht_;
};

}  // namespace

double grid_energy(const GridProblem& problem, const GridField& field) {
  return Engine(problem, field).energy(0.0, false);
}

double grid_smoothed_energy(const GridProblem& problem, const GridField& field, double mu) {
  return Engine(problem, field).energy(mu, true);
}

MinimizeResult minimize(const GridProblem& problem, const GridField& init,
                        const MinimizeOptions& options) {
  Engine engine(problem, init);
  MinimizeResult res;
  res.field = engine.field();
  res.initial_value = engine.energy(0.0, false);
  res.value = res.initial_value;
  res.converged = true;
  std::vector<double> mus{options.mu};
  if (options.continuation) mus.push_back(0.5 * options.mu);
  for (double mu : mus) {
    StageResult st = engine.run(mu, options);
    res.iterations += st.iterations;
    res.converged = res.converged && st.converged;
    res.grad_norm = st.grad_norm;
    if (st.value <= res.value) {
      res.value = st.value;
      res.field = engine.field();
    }
    res.stages.push_back(std::move(st));
  }
  return res;
}

}  // namespace mvhom
