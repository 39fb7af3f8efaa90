#include "cpkl/eval.hpp"

#include <algorithm>

#include "cpkl/driver.hpp"

namespace cpkl {

namespace {

void require_same_layout(const KruskalModel& a, const KruskalModel& b) {
  if (a.rank() != b.rank()) throw Error(ErrorCode::ShapeMismatch, "models have different ranks");
  if (a.ndims() != b.ndims()) throw Error(ErrorCode::ShapeMismatch, "models have different numbers of modes");
  for (Index n = 0; n < a.ndims(); ++n)
    if (a.factors[static_cast<std::size_t>(n)].rows() != b.factors[static_cast<std::size_t>(n)].rows())
      throw Error(ErrorCode::ShapeMismatch, "models have different dimensions");
}

Matrix unit_columns(const FactorMatrix& a, const Vector& lambda) {
  Matrix u = a;
  for (Index r = 0; r < u.cols(); ++r) {
    const double norm = u.col(r).norm();
    if (norm > 0.0 && lambda(r) != 0.0)
      u.col(r) /= norm;
    else
      u.col(r).setZero();
  }
  return u;
}

}  // namespace

Matrix congruence_matrix(const KruskalModel& a, const KruskalModel& b) {
  require_same_layout(a, b);
  Matrix c = Matrix::Ones(a.rank(), b.rank());
  for (Index n = 0; n < a.ndims(); ++n) {
    const Matrix ua = unit_columns(a.factors[static_cast<std::size_t>(n)], a.lambda);
    const Matrix ub = unit_columns(b.factors[static_cast<std::size_t>(n)], b.lambda);
    c.array() *= (ua.transpose() * ub).array();
  }
  return c;
}

ScoreReport score_greedy(const KruskalModel& a, const KruskalModel& b) {
  const Matrix c = congruence_matrix(a, b);
  const Index R = c.rows();
  ScoreReport report;
  report.permutation.assign(static_cast<std::size_t>(R), -1);
  report.per_component.assign(static_cast<std::size_t>(R), 0.0);
  std::vector<bool> row_used(static_cast<std::size_t>(R), false);
  std::vector<bool> col_used(static_cast<std::size_t>(R), false);
  for (Index step = 0; step < R; ++step) {
    Index best_r = -1;
    Index best_s = -1;
    for (Index r = 0; r < R; ++r) {
      if (row_used[static_cast<std::size_t>(r)]) continue;
      for (Index s = 0; s < R; ++s) {
        if (col_used[static_cast<std::size_t>(s)]) continue;
        if (best_r < 0 || c(r, s) > c(best_r, best_s)) {
          best_r = r;
          best_s = s;
        }
      }
    }
    row_used[static_cast<std::size_t>(best_r)] = true;
    col_used[static_cast<std::size_t>(best_s)] = true;
    report.permutation[static_cast<std::size_t>(best_r)] = best_s;
    report.per_component[static_cast<std::size_t>(best_r)] = c(best_r, best_s);
  }
  double total = 0.0;
  for (double v : report.per_component) total += v;
  report.score = R > 0 ? total / static_cast<double>(R) : 0.0;
  return report;
}

ZeroCounts exact_zero_count(const KruskalModel& model, const std::vector<double>& thresholds) {
  ZeroCounts z;
  for (const auto& a : model.factors) {
    const Index count = (a.array() == 0.0).count();
    z.per_factor.push_back(count);
    z.total += count;
  }
  for (double t : thresholds) {
    Index below = 0;
    for (const auto& a : model.factors) below += (a.array() < t).count();
    z.below_threshold.emplace_back(t, below);
  }
  return z;
}

KktReport full_kkt_violation(const SparseCountTensor& tensor, const KruskalModel& model, int workers) {
  if (!(model.shape() == tensor.shape())) throw Error(ErrorCode::ShapeMismatch, "model and tensor shapes differ");
  KktReport report;
  for (Index n = 0; n < tensor.ndims(); ++n) {
    const double v = mode_kkt_violation(tensor, build_mode_index(tensor, n), model, workers);
    report.per_mode.push_back(v);
    report.global = std::max(report.global, v);
  }
  return report;
}

}  // namespace cpkl
