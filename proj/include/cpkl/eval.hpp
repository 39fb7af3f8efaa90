#pragma once

#include <utility>
#include <vector>

#include "cpkl/kruskal.hpp"
#include "cpkl/sparse_tensor.hpp"

namespace cpkl {

struct ScoreReport {
  double score = 0.0;
  /// permutation[r] is the component of the second model matched to component r
  /// of the first.
  std::vector<Index> permutation;
  std::vector<double> per_component;  // congruence product of each matched pair
};

/// R x R matrix of congruence products prod_n cos(a_r^(n), b_s^(n)) between
/// l2-normalized columns. Weights are ignored; components with lambda = 0 or a
/// zero column score 0 against everything.
Matrix congruence_matrix(const KruskalModel& a, const KruskalModel& b);

/// Greedy matching on the congruence matrix: repeatedly take the largest
/// remaining entry (lowest row, then column, on ties) and strike its row and
/// column. Score is the mean of the picked products. Throws ShapeMismatch.
ScoreReport score_greedy(const KruskalModel& a, const KruskalModel& b);

struct ZeroCounts {
  std::vector<Index> per_factor;
  Index total = 0;
  /// (threshold, number of entries strictly below it) over all factors.
  std::vector<std::pair<double, Index>> below_threshold;
};

/// Entries literally equal to zero, plus counts under each threshold.
ZeroCounts exact_zero_count(const KruskalModel& model, const std::vector<double>& thresholds = {1e-3, 1e-4, 1e-5});

struct KktReport {
  std::vector<double> per_mode;
  double global = 0.0;
};

/// Row-subproblem KKT violation recomputed for every row of every mode.
KktReport full_kkt_violation(const SparseCountTensor& tensor, const KruskalModel& model, int workers = 1);

}  // namespace cpkl
