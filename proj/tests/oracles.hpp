#pragma once

// Independent reference computations used by the tests. Nothing here calls the
// library's numerical routines; only plain loops over dense data.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "cpkl/kruskal.hpp"
#include "cpkl/row_solver.hpp"
#include "cpkl/sparse_tensor.hpp"

namespace cpkl::oracle {

/// Enumerates every multi-index of a shape, mode 1 fastest.
inline void for_each_index(const std::vector<Index>& dims, const std::function<void(const std::vector<Index>&)>& fn) {
  std::vector<Index> idx(dims.size(), 0);
  while (true) {
    fn(idx);
    std::size_t k = 0;
    while (k < dims.size() && ++idx[k] == dims[k]) idx[k++] = 0;
    if (k == dims.size()) return;
  }
}

inline double dense_entry(const KruskalModel& m, const std::vector<Index>& idx) {
  double total = 0.0;
  for (Index r = 0; r < m.rank(); ++r) {
    double p = m.lambda(r);
    for (std::size_t n = 0; n < idx.size(); ++n) p *= m.factors[n](idx[n], r);
    total += p;
  }
  return total;
}

/// sum over all cells of m - x log m, by brute force.
inline double dense_kl(const KruskalModel& m, const SparseCountTensor& t) {
  std::vector<double> x(static_cast<std::size_t>(t.shape().num_cells()), 0.0);
  const auto& dims = t.shape().dims();
  auto linear = [&](const std::vector<Index>& idx) {
    std::size_t l = 0, stride = 1;
    for (std::size_t n = 0; n < idx.size(); ++n) {
      l += static_cast<std::size_t>(idx[n]) * stride;
      stride *= static_cast<std::size_t>(dims[n]);
    }
    return l;
  };
  for (Index e = 0; e < t.nnz(); ++e) {
    auto span = t.index(e);
    x[linear(std::vector<Index>(span.begin(), span.end()))] = static_cast<double>(t.count(e));
  }
  double f = 0.0;
  for_each_index(dims, [&](const std::vector<Index>& idx) {
    const double mi = dense_entry(m, idx);
    const double xi = x[linear(idx)];
    f += mi;
    if (xi > 0) f -= xi * std::log(mi);
  });
  return f;
}

/// Dense Khatri-Rao product of all factors except `mode`, in Kolda-Bader
/// column order (lowest remaining mode varies fastest), transposed to R x J.
inline Matrix dense_pi(const KruskalModel& m, Index mode) {
  Matrix kr = Matrix::Ones(1, m.rank());
  for (Index k = 0; k < m.ndims(); ++k) {
    if (k == mode) continue;
    const auto& a = m.factors[static_cast<std::size_t>(k)];
    // (A_k ⊙ KR): row (i_k, j_prev) at i_k * rows(KR) + j_prev.
    Matrix next(a.rows() * kr.rows(), m.rank());
    for (Index ik = 0; ik < a.rows(); ++ik)
      for (Index j = 0; j < kr.rows(); ++j)
        for (Index r = 0; r < m.rank(); ++r) next(ik * kr.rows() + j, r) = a(ik, r) * kr(j, r);
    kr = next;
  }
  return kr.transpose();
}

// ---------------------------------------------------------------------------
// Row subproblems

inline double f_row_ref(const Matrix& pi, const Vector& x, const Vector& b) {
  double f = 0.0;
  for (Index r = 0; r < b.size(); ++r) f += b(r);
  for (Index j = 0; j < x.size(); ++j) {
    double m = 0.0;
    for (Index r = 0; r < b.size(); ++r) m += b(r) * pi(r, j);
    if (m <= 0.0) return std::numeric_limits<double>::infinity();
    f -= x(j) * std::log(m);
  }
  return f;
}

inline Vector central_gradient(const std::function<double(const Vector&)>& f, const Vector& b, double h) {
  Vector g(b.size());
  for (Index r = 0; r < b.size(); ++r) {
    Vector bp = b, bm = b;
    bp(r) += h;
    bm(r) -= h;
    g(r) = (f(bp) - f(bm)) / (2 * h);
  }
  return g;
}

inline Matrix central_jacobian(const std::function<Vector(const Vector&)>& g, const Vector& b, double h) {
  Matrix jac(b.size(), b.size());
  for (Index r = 0; r < b.size(); ++r) {
    Vector bp = b, bm = b;
    bp(r) += h;
    bm(r) -= h;
    jac.col(r) = (g(bp) - g(bm)) / (2 * h);
  }
  return jac;
}

/// Random row problem with interior b; counts in 1..5, Pi entries in (0.05, 1).
inline RowProblem<double> random_row_problem(std::mt19937_64& gen, Index R, Index J) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::uniform_int_distribution<int> c(1, 5);
  RowProblem<double> p;
  p.b.resize(R);
  p.x.resize(J);
  p.pi.resize(R, J);
  for (Index r = 0; r < R; ++r) p.b(r) = u(gen) * 3;
  for (Index j = 0; j < J; ++j) {
    p.x(j) = c(gen);
    for (Index r = 0; r < R; ++r) p.pi(r, j) = u(gen);
  }
  return p;
}

/// Strictly convex instance: Pi has full row rank (J >= R, generic entries),
/// and a few entries are zeroed so some optima sit on the bound.
inline RowProblem<double> random_convex_problem(std::mt19937_64& gen, Index R, Index J) {
  RowProblem<double> p = random_row_problem(gen, R, J);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index j = 0; j < J; ++j)
    for (Index r = 0; r < R; ++r)
      if (u(gen) < 0.25 && p.pi.col(j).sum() - p.pi(r, j) > 0) p.pi(r, j) = 0.0;
  // Column sums of Pi larger than one push some optimal b_r to zero.
  for (Index r = 0; r < R; ++r)
    if (u(gen) < 0.3) p.pi.row(r) *= 4.0;
  return p;
}

/// Projected gradient with a fixed tiny step, many iterations. Deliberately
/// naive: no line search, no curvature.
inline Vector projected_gradient_oracle(const RowProblem<double>& p, long iterations, double step) {
  Vector b = p.b.cwiseMax(1e-3);
  auto grad = [&](const Vector& v) {
    Vector g = Vector::Ones(v.size());
    for (Index j = 0; j < p.x.size(); ++j) {
      double m = 0.0;
      for (Index r = 0; r < v.size(); ++r) m += v(r) * p.pi(r, j);
      for (Index r = 0; r < v.size(); ++r) g(r) -= p.x(j) * p.pi(r, j) / m;
    }
    return g;
  };
  for (long k = 0; k < iterations; ++k) {
    Vector next = (b - step * grad(b)).cwiseMax(0.0);
    // Keep the model positive at every count.
    bool ok = true;
    for (Index j = 0; j < p.x.size(); ++j)
      if (p.pi.col(j).dot(next) <= 0.0) ok = false;
    if (!ok) break;
    b = next;
  }
  return b;
}

/// Dense BFGS inverse update H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T
/// applied once to gamma * I.
inline Matrix dense_bfgs_inverse(const std::vector<std::pair<Vector, Vector>>& pairs, double gamma, Index n) {
  Matrix h = gamma * Matrix::Identity(n, n);
  for (const auto& [s, y] : pairs) {
    const double rho = 1.0 / s.dot(y);
    const Matrix left = Matrix::Identity(n, n) - rho * s * y.transpose();
    h = left * h * left.transpose() + rho * s * s.transpose();
  }
  return h;
}

// ---------------------------------------------------------------------------
// Scoring

/// Best mean congruence over all permutations of an R x R matrix.
inline double exhaustive_best_score(const Matrix& c) {
  std::vector<Index> perm(static_cast<std::size_t>(c.rows()));
  std::iota(perm.begin(), perm.end(), Index{0});
  double best = -std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (Index r = 0; r < c.rows(); ++r) s += c(r, perm[static_cast<std::size_t>(r)]);
    best = std::max(best, s / static_cast<double>(c.rows()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Cosine-product matrix computed with explicit loops.
inline Matrix congruence_ref(const KruskalModel& a, const KruskalModel& b) {
  Matrix c = Matrix::Ones(a.rank(), b.rank());
  for (Index n = 0; n < a.ndims(); ++n) {
    const auto& fa = a.factors[static_cast<std::size_t>(n)];
    const auto& fb = b.factors[static_cast<std::size_t>(n)];
    for (Index r = 0; r < a.rank(); ++r)
      for (Index s = 0; s < b.rank(); ++s) {
        double dot = 0, na = 0, nb = 0;
        for (Index i = 0; i < fa.rows(); ++i) {
          dot += fa(i, r) * fb(i, s);
          na += fa(i, r) * fa(i, r);
          nb += fb(i, s) * fb(i, s);
        }
        c(r, s) *= dot / std::sqrt(na * nb);
      }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Random instances

inline KruskalModel random_model(std::mt19937_64& gen, const std::vector<Index>& dims, Index R) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  KruskalModel m(Shape(dims), R);
  for (Index r = 0; r < R; ++r) m.lambda(r) = 1.0 + 10.0 * u(gen);
  for (auto& a : m.factors)
    for (Index i = 0; i < a.rows(); ++i)
      for (Index r = 0; r < R; ++r) a(i, r) = u(gen);
  return m;
}

inline SparseCountTensor random_tensor(std::mt19937_64& gen, const std::vector<Index>& dims, Index nnz, int max_count = 9) {
  std::vector<CountEntry> entries;
  std::vector<std::vector<Index>> seen;
  std::uniform_int_distribution<int> c(1, max_count);
  while (static_cast<Index>(entries.size()) < nnz) {
    std::vector<Index> idx;
    for (Index d : dims) idx.push_back(std::uniform_int_distribution<Index>(0, d - 1)(gen));
    if (std::find(seen.begin(), seen.end(), idx) != seen.end()) continue;
    seen.push_back(idx);
    entries.push_back({idx, c(gen)});
  }
  return SparseCountTensor::validate(Shape(dims), std::move(entries));
}

}  // namespace cpkl::oracle
