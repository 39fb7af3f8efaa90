#pragma once

#include <span>
#include <vector>

#include "cpkl/sparse_tensor.hpp"
#include "cpkl/types.hpp"

namespace cpkl {

/// CP model [lambda; A^(1), ..., A^(N)] with A^(n) of size I_n x R.
struct KruskalModel {
  Vector lambda;
  std::vector<FactorMatrix> factors;

  KruskalModel() = default;
  KruskalModel(const Shape& shape, Index rank);

  Index rank() const { return lambda.size(); }
  Index ndims() const { return static_cast<Index>(factors.size()); }
  Shape shape() const;
  /// Every factor column sums to one within `tol`, all entries nonnegative.
  bool is_normalized(double tol = 1e-12) const;
};

/// Rescales every factor column to unit l1 norm, absorbing the scale into
/// lambda. A column that is identically zero cannot be rescaled: its component
/// gets lambda_r = 0 and the column is set to 1/I_n. Returns those components.
std::vector<Index> normalize(KruskalModel& model);

/// Pi columns for the given mode and reduced indices (each holds the N-1
/// indices of the other modes, 0-based). Result is R x J, column j holding
/// pi_rj = prod_{k != n} A^(k)(i_k, r).
Matrix pi_columns(const KruskalModel& model, Index mode, std::span<const std::vector<Index>> reduced_indices);

/// Pi columns for a subset of tensor entries; out is resized to R x entries.size().
void pi_columns(const KruskalModel& model, const SparseCountTensor& tensor, Index mode,
                std::span<const Index> entries, Matrix& out);

/// m_i = sum_r lambda_r prod_n A^(n)(i_n, r).
double model_entry(const KruskalModel& model, std::span<const Index> index);

/// sum_i m_i - sum_{x_i > 0} x_i log m_i, or +inf when a positive count meets
/// a zero model value. Column sums are used for the first term, so the model
/// need not be normalized.
double kl_objective(const KruskalModel& model, const SparseCountTensor& tensor);

}  // namespace cpkl
