#pragma once

#include <cassert>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "cpkl/types.hpp"

namespace cpkl {

/// One row subproblem
///
///   min_{b >= 0}  sum_r b_r - sum_j x_j log( sum_r b_r pi_rj )
///
/// where b is one row of B = A^(n) Lambda, x holds the row's nonzero counts and
/// pi holds the matching Pi columns (R x J).
template <typename Scalar>
struct RowProblem {
  VectorX<Scalar> b;
  VectorX<Scalar> x;
  MatrixX<Scalar> pi;

  Index rank() const { return b.size(); }
  Index nnz() const { return x.size(); }
};

struct SolverParams {
  double tau = 1e-8;
  double mu0 = 1e-5;
  double sigma = 1e-4;
  double beta = 0.5;
  double epsilon = 1e-3;
  int k_max = 50;
  int lbfgs_memory = 3;
  int max_backtracks = 10;
  /// Keep each row's L-BFGS pairs across outer iterations (PQN-R only).
  bool persist_lbfgs = false;

  static SolverParams pdnr() { return {}; }
  static SolverParams pqnr() {
    SolverParams p;
    p.epsilon = 1e-8;
    return p;
  }

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw Error(ErrorCode::InvalidArgument, what);
    };
    require(sigma > 0.0 && sigma < 1.0, "sigma must lie in (0,1)");
    require(beta > 0.0 && beta < 1.0, "beta must lie in (0,1)");
    require(tau > 0.0, "tau must be positive");
    require(mu0 >= 0.0, "mu0 must be nonnegative");
    require(epsilon >= 0.0, "epsilon must be nonnegative");
    require(lbfgs_memory >= 1, "lbfgs memory must be >= 1");
    require(k_max >= 1, "k_max must be >= 1");
    require(max_backtracks >= 0, "max_backtracks must be >= 0");
  }
};

struct RowSolveReport {
  int iterations = 0;
  double final_kkt = 0.0;
  int exact_zeros = 0;
  int backtrack_failures = 0;
  int fallback_steps = 0;
  /// Some count has an all-zero Pi column: no feasible b gives a finite objective.
  bool infeasible = false;
  bool converged = false;
};

template <typename Scalar>
struct RowSolveResult {
  VectorX<Scalar> b;
  RowSolveReport report;
};

// ---------------------------------------------------------------------------
// Objective and derivatives

template <typename Scalar>
Scalar f_row(const RowProblem<Scalar>& p, const VectorX<Scalar>& b) {
  Scalar f = b.sum();
  if (p.nnz() == 0) return f;
  const VectorX<Scalar> m = p.pi.transpose() * b;
  for (Index j = 0; j < m.size(); ++j) {
    if (!(m(j) > Scalar(0))) return std::numeric_limits<Scalar>::infinity();
    f -= p.x(j) * std::log(m(j));
  }
  return f;
}

template <typename Scalar>
Scalar f_row(const RowProblem<Scalar>& p) {
  return f_row(p, p.b);
}

/// f(b_new) - f(b) from log1p of the relative model change, accurate when the
/// change is far below the magnitude of f. Infinite if b_new zeroes the model.
template <typename Scalar>
Scalar f_row_change(const RowProblem<Scalar>& p, const VectorX<Scalar>& b, const VectorX<Scalar>& b_new) {
  const VectorX<Scalar> step = b_new - b;
  Scalar df = step.sum();
  if (p.nnz() == 0) return df;
  const VectorX<Scalar> m = p.pi.transpose() * b;
  const VectorX<Scalar> dm = p.pi.transpose() * step;
  for (Index j = 0; j < m.size(); ++j) {
    if (!(m(j) + dm(j) > Scalar(0))) return std::numeric_limits<Scalar>::infinity();
    df -= p.x(j) * std::log1p(dm(j) / m(j));
  }
  return df;
}

namespace detail {

template <typename Scalar>
VectorX<Scalar> model_values(const RowProblem<Scalar>& p, const VectorX<Scalar>& b) {
  VectorX<Scalar> m = p.pi.transpose() * b;
  if (((m.array() <= Scalar(0))).any())
    throw Error(ErrorCode::UndefinedAtZeroModel, "row model is zero at a positive count");
  return m;
}

}  // namespace detail

/// 1 - Pi (x ./ m).
template <typename Scalar>
VectorX<Scalar> grad_row(const RowProblem<Scalar>& p, const VectorX<Scalar>& b) {
  if (p.nnz() == 0) return VectorX<Scalar>::Ones(b.size());
  const VectorX<Scalar> m = detail::model_values(p, b);
  return VectorX<Scalar>::Ones(b.size()) - p.pi * (p.x.array() / m.array()).matrix();
}

template <typename Scalar>
VectorX<Scalar> grad_row(const RowProblem<Scalar>& p) {
  return grad_row(p, p.b);
}

/// Pi diag(x ./ m.^2) Pi^T.
template <typename Scalar>
MatrixX<Scalar> hess_row(const RowProblem<Scalar>& p, const VectorX<Scalar>& b) {
  if (p.nnz() == 0) return MatrixX<Scalar>::Zero(b.size(), b.size());
  const VectorX<Scalar> m = detail::model_values(p, b);
  const MatrixX<Scalar> w = p.pi * (p.x.array().sqrt() / m.array()).matrix().asDiagonal();
  MatrixX<Scalar> h = MatrixX<Scalar>::Zero(b.size(), b.size());
  h.template selfadjointView<Eigen::Lower>().rankUpdate(w);
  return h.template selfadjointView<Eigen::Lower>();
}

template <typename Scalar>
MatrixX<Scalar> hess_row(const RowProblem<Scalar>& p) {
  return hess_row(p, p.b);
}

/// Hessian block for the variables in `rows`.
template <typename Scalar>
MatrixX<Scalar> hess_row_block(const RowProblem<Scalar>& p, const VectorX<Scalar>& b, const std::vector<Index>& rows) {
  const auto k = static_cast<Index>(rows.size());
  if (p.nnz() == 0) return MatrixX<Scalar>::Zero(k, k);
  const VectorX<Scalar> m = detail::model_values(p, b);
  const MatrixX<Scalar> w = p.pi(rows, Eigen::all) * (p.x.array().sqrt() / m.array()).matrix().asDiagonal();
  MatrixX<Scalar> h = MatrixX<Scalar>::Zero(k, k);
  h.template selfadjointView<Eigen::Lower>().rankUpdate(w);
  return h.template selfadjointView<Eigen::Lower>();
}

/// max_r |min(b_r, g_r)|.
template <typename Scalar>
Scalar kkt_violation_row(const VectorX<Scalar>& b, const VectorX<Scalar>& g) {
  if (b.size() == 0) return Scalar(0);
  return b.cwiseMin(g).cwiseAbs().maxCoeff();
}

template <typename Scalar>
VectorX<Scalar> project_nonnegative(const VectorX<Scalar>& v) {
  return v.cwiseMax(Scalar(0));
}

// ---------------------------------------------------------------------------
// Two-metric partition

template <typename Scalar>
struct VariableSets {
  std::vector<Index> fixed;     // at zero with positive gradient; held at zero
  std::vector<Index> gradient;  // within threshold of zero with positive gradient
  std::vector<Index> free;      // everything else
  Scalar threshold = 0;         // min(w, epsilon)
  Scalar w = 0;                 // ||b - P+[b - g]||_2
};

template <typename Scalar>
VariableSets<Scalar> partition_variables(const VectorX<Scalar>& b, const VectorX<Scalar>& g, Scalar epsilon) {
  VariableSets<Scalar> sets;
  sets.w = (b - project_nonnegative<Scalar>(b - g)).norm();
  sets.threshold = std::min(sets.w, epsilon);
  for (Index r = 0; r < b.size(); ++r) {
    if (b(r) == Scalar(0) && g(r) > Scalar(0))
      sets.fixed.push_back(r);
    else if (b(r) > Scalar(0) && b(r) <= sets.threshold && g(r) > Scalar(0))
      sets.gradient.push_back(r);
    else
      sets.free.push_back(r);
  }
  return sets;
}

/// Solves (H_F + mu I) d = -g_F by Cholesky. Empty when the damped matrix is
/// not numerically positive definite.
template <typename Scalar>
std::optional<VectorX<Scalar>> damped_newton_direction(const MatrixX<Scalar>& h_free, const VectorX<Scalar>& g_free,
                                                       Scalar mu) {
  MatrixX<Scalar> damped = h_free;
  damped.diagonal().array() += mu;
  Eigen::LLT<MatrixX<Scalar>> llt(damped);
  if (llt.info() != Eigen::Success) return std::nullopt;
  VectorX<Scalar> d = llt.solve(-g_free);
  if (!d.allFinite()) return std::nullopt;
  return d;
}

/// Scatters the free-block step into a full direction: d_F on F, -g on G, 0 on A.
template <typename Scalar>
VectorX<Scalar> assemble_direction(const VectorX<Scalar>& d_free, const VectorX<Scalar>& g, const VariableSets<Scalar>& sets) {
  assert(static_cast<Index>(sets.free.size()) == d_free.size());
  VectorX<Scalar> d = VectorX<Scalar>::Zero(g.size());
  for (std::size_t k = 0; k < sets.free.size(); ++k) d(sets.free[k]) = d_free(static_cast<Index>(k));
  for (Index r : sets.gradient) d(r) = -g(r);
  return d;
}

// ---------------------------------------------------------------------------
// Projected Armijo search and damping

template <typename Scalar>
struct LineSearchResult {
  bool ok = false;
  Scalar alpha = 0;
  int backtracks = 0;
  VectorX<Scalar> b_next;
  Scalar f_next = 0;
  Scalar f_change = 0;  // f(b_next) - f(b)
};

/// Smallest t in [0, max_backtracks] with
///   f(P+[b + beta^t d]) - f(b) <= sigma (P+[b + beta^t d] - b)^T g.
/// An infinite trial objective fails the test and backtracks.
template <typename Scalar>
LineSearchResult<Scalar> armijo_projected_search(const RowProblem<Scalar>& p, const VectorX<Scalar>& b, Scalar f_b,
                                                 const VectorX<Scalar>& g, const VectorX<Scalar>& d,
                                                 const SolverParams& params) {
  LineSearchResult<Scalar> ls;
  Scalar alpha = 1;
  for (int t = 0; t <= params.max_backtracks; ++t, alpha *= Scalar(params.beta)) {
    VectorX<Scalar> trial = project_nonnegative<Scalar>(b + alpha * d);
    const Scalar change = f_row_change(p, b, trial);
    const Scalar rhs = Scalar(params.sigma) * (trial - b).dot(g);
    if (change <= rhs) {
      ls.ok = true;
      ls.alpha = alpha;
      ls.backtracks = t;
      ls.b_next = std::move(trial);
      ls.f_next = f_b + change;
      ls.f_change = change;
      return ls;
    }
  }
  ls.backtracks = params.max_backtracks;
  return ls;
}

/// Levenberg-Marquardt rule on rho = (f_new - f_old) / model_decrease.
template <typename Scalar>
Scalar update_damping(Scalar mu, Scalar f_old, Scalar f_new, Scalar model_decrease) {
  assert(model_decrease < Scalar(0));
  const Scalar rho = (f_new - f_old) / model_decrease;
  if (rho < Scalar(0.25)) return Scalar(3.5) * mu;
  if (rho > Scalar(0.75)) return Scalar(2) / Scalar(7) * mu;
  return mu;
}

// ---------------------------------------------------------------------------
// L-BFGS

template <typename Scalar>
class LbfgsStore {
 public:
  struct Pair {
    VectorX<Scalar> s;
    VectorX<Scalar> y;
    Scalar rho;  // 1 / s^T y
  };

  explicit LbfgsStore(int memory = 3) : memory_(memory) {}

  /// Appends (s, y) unless s^T y <= 1e-12 ||s|| ||y||; returns whether kept.
  bool update(const VectorX<Scalar>& s, const VectorX<Scalar>& y) {
    const Scalar sy = s.dot(y);
    if (!(sy > Scalar(1e-12) * s.norm() * y.norm())) {
      ++skipped_;
      return false;
    }
    if (static_cast<int>(pairs_.size()) == memory_) pairs_.pop_front();
    pairs_.push_back({s, y, Scalar(1) / sy});
    return true;
  }

  /// Initial inverse-Hessian scale s^T y / y^T y of the newest pair, 1 if empty.
  Scalar gamma() const {
    if (pairs_.empty()) return Scalar(1);
    const auto& p = pairs_.back();
    return Scalar(1) / (p.rho * p.y.squaredNorm());
  }

  /// Two-loop recursion: p = B g with B the inverse-Hessian approximation.
  VectorX<Scalar> direction(const VectorX<Scalar>& g) const {
    VectorX<Scalar> q = g;
    std::vector<Scalar> a(pairs_.size());
    for (std::size_t i = pairs_.size(); i-- > 0;) {
      a[i] = pairs_[i].rho * pairs_[i].s.dot(q);
      q -= a[i] * pairs_[i].y;
    }
    VectorX<Scalar> r = gamma() * q;
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      const Scalar beta = pairs_[i].rho * pairs_[i].y.dot(r);
      r += (a[i] - beta) * pairs_[i].s;
    }
    return r;
  }

  void clear() { pairs_.clear(); }
  std::size_t size() const { return pairs_.size(); }
  int memory() const { return memory_; }
  int skipped() const { return skipped_; }
  const std::deque<Pair>& pairs() const { return pairs_; }

 private:
  int memory_;
  std::deque<Pair> pairs_;
  int skipped_ = 0;
};

template <typename Scalar>
VectorX<Scalar> lbfgs_direction(const LbfgsStore<Scalar>& store, const VectorX<Scalar>& g) {
  return store.direction(g);
}

/// One multiplicative step b <- b .* Phi, Phi_r = sum_j x_j pi_rj / m_j = 1 - g_r.
template <typename Scalar>
VectorX<Scalar> multiplicative_step(const VectorX<Scalar>& b, const VectorX<Scalar>& g) {
  return b.cwiseProduct((VectorX<Scalar>::Ones(b.size()) - g).cwiseMax(Scalar(0)));
}

// ---------------------------------------------------------------------------
// Solvers

namespace detail {

enum class Method { DampedNewton, QuasiNewton };

template <typename Scalar>
RowSolveResult<Scalar> solve_two_metric(const RowProblem<Scalar>& p, const SolverParams& params, Method method,
                                        LbfgsStore<Scalar>* store) {
  RowSolveResult<Scalar> out;
  RowSolveReport& rep = out.report;
  VectorX<Scalar> b = project_nonnegative<Scalar>(p.b);
  Scalar f = f_row(p, b);
  if (!std::isfinite(f)) {
    const Scalar floor = Scalar(1e-10) * std::max(Scalar(1), p.x.sum());
    b = b.cwiseMax(floor);
    f = f_row(p, b);
    if (!std::isfinite(f)) {
      rep.infeasible = true;
      out.b = project_nonnegative<Scalar>(p.b);
      rep.final_kkt = std::numeric_limits<double>::infinity();
      return out;
    }
  }
  VectorX<Scalar> g = grad_row(p, b);
  Scalar mu = Scalar(params.mu0);
  const Scalar eps = Scalar(params.epsilon);

  auto try_multiplicative = [&](VectorX<Scalar>& b_next, Scalar& f_next) {
    VectorX<Scalar> cand = multiplicative_step(b, g);
    const Scalar change = f_row_change(p, b, cand);
    if (!(change <= Scalar(0)) || cand == b) return false;
    b_next = std::move(cand);
    f_next = f + change;
    return true;
  };
  auto try_steepest = [&](VectorX<Scalar>& b_next, Scalar& f_next) {
    auto ls = armijo_projected_search(p, b, f, g, VectorX<Scalar>(-g), params);
    if (!ls.ok || ls.b_next == b) return false;
    b_next = std::move(ls.b_next);
    f_next = ls.f_next;
    return true;
  };
  // Line-search and factorization failures take a multiplicative step; a step
  // that leaves b unchanged is retried along -g. Either falls back to the other.
  auto fallback = [&](VectorX<Scalar>& b_next, Scalar& f_next, bool multiplicative_first) {
    ++rep.fallback_steps;
    const bool moved = multiplicative_first
                           ? (try_multiplicative(b_next, f_next) || try_steepest(b_next, f_next))
                           : (try_steepest(b_next, f_next) || try_multiplicative(b_next, f_next));
    if (!moved) {
      b_next = b;
      f_next = f;
    }
  };

  Scalar kkt = kkt_violation_row(b, g);
  int k = 0;
  for (; k < params.k_max; ++k) {
    if (kkt <= Scalar(params.tau)) break;
    const auto sets = partition_variables(b, g, eps);

    VectorX<Scalar> d;
    Scalar model_decrease = 0;
    bool have_direction = true;
    if (method == Method::DampedNewton) {
      const VectorX<Scalar> g_free = g(sets.free);
      VectorX<Scalar> d_free(0);
      if (!sets.free.empty()) {
        const MatrixX<Scalar> h_free = hess_row_block(p, b, sets.free);
        auto step = damped_newton_direction(h_free, g_free, mu);
        for (int retry = 0; !step && retry < 5; ++retry) {
          mu = std::max(mu, Scalar(1e-10)) * Scalar(10);
          step = damped_newton_direction(h_free, g_free, mu);
        }
        if (step) {
          d_free = std::move(*step);
          model_decrease = d_free.dot(g_free) + Scalar(0.5) * d_free.dot(h_free * d_free);
        } else {
          have_direction = false;
        }
      }
      if (have_direction) d = assemble_direction(d_free, g, sets);
    } else {
      const VectorX<Scalar> pk = store->direction(g);
      const VectorX<Scalar> d_free = -pk(sets.free);
      d = assemble_direction(d_free, g, sets);
    }

    VectorX<Scalar> b_next;
    Scalar f_next = f;
    Scalar newton_change = 0;
    bool newton_step = false;
    if (have_direction && d.squaredNorm() > Scalar(0)) {
      auto ls = armijo_projected_search(p, b, f, g, d, params);
      if (!ls.ok) {
        ++rep.backtrack_failures;
        fallback(b_next, f_next, true);
      } else if (ls.b_next == b) {
        fallback(b_next, f_next, false);
      } else {
        b_next = std::move(ls.b_next);
        f_next = ls.f_next;
        newton_change = ls.f_change;
        newton_step = true;
      }
    } else {
      fallback(b_next, f_next, have_direction == false);
    }

    if (method == Method::DampedNewton && newton_step && model_decrease < Scalar(0))
      mu = update_damping(mu, Scalar(0), newton_change, model_decrease);

    VectorX<Scalar> g_next = grad_row(p, b_next);
    if (method == Method::QuasiNewton) store->update(b_next - b, g_next - g);
    const bool moved = b_next != b;
    b = std::move(b_next);
    f = f_next;
    g = std::move(g_next);
    kkt = kkt_violation_row(b, g);
    if (!moved) {
      ++k;
      break;
    }
  }
  rep.iterations = k;
  rep.final_kkt = static_cast<double>(kkt);
  rep.converged = kkt <= Scalar(params.tau);
  rep.exact_zeros = static_cast<int>((b.array() == Scalar(0)).count());
  out.b = std::move(b);
  return out;
}

}  // namespace detail

/// Projected damped Newton solver. Damping restarts at mu0 on every call.
template <typename Scalar>
RowSolveResult<Scalar> solve_row_pdnr(const RowProblem<Scalar>& problem, const SolverParams& params) {
  return detail::solve_two_metric<Scalar>(problem, params, detail::Method::DampedNewton, nullptr);
}

/// Projected quasi-Newton solver. Uses `store` when given (kept across calls
/// by the caller), otherwise a fresh store of params.lbfgs_memory pairs.
template <typename Scalar>
RowSolveResult<Scalar> solve_row_pqnr(const RowProblem<Scalar>& problem, const SolverParams& params,
                                      LbfgsStore<Scalar>* store = nullptr) {
  LbfgsStore<Scalar> local(params.lbfgs_memory);
  return detail::solve_two_metric<Scalar>(problem, params, detail::Method::QuasiNewton, store ? store : &local);
}

}  // namespace cpkl
