#include "cpkl/kruskal.hpp"

#include <cmath>
#include <limits>

namespace cpkl {

KruskalModel::KruskalModel(const Shape& shape, Index rank) : lambda(Vector::Ones(rank)) {
  for (Index n = 0; n < shape.ndims(); ++n) factors.emplace_back(FactorMatrix::Zero(shape[n], rank));
}

Shape KruskalModel::shape() const {
  std::vector<Index> dims;
  for (const auto& a : factors) dims.push_back(a.rows());
  return Shape(std::move(dims));
}

bool KruskalModel::is_normalized(double tol) const {
  if ((lambda.array() < 0.0).any()) return false;
  for (const auto& a : factors) {
    if ((a.array() < 0.0).any()) return false;
    if (((a.colwise().sum().array() - 1.0).abs() > tol).any()) return false;
  }
  return true;
}

std::vector<Index> normalize(KruskalModel& model) {
  std::vector<Index> dead;
  for (Index r = 0; r < model.rank(); ++r) {
    bool zero_column = false;
    for (auto& a : model.factors) {
      const double s = a.col(r).sum();
      if (s > 0.0) {
        a.col(r) /= s;
        model.lambda(r) *= s;
      } else {
        a.col(r).setConstant(1.0 / static_cast<double>(a.rows()));
        zero_column = true;
      }
    }
    if (zero_column) {
      model.lambda(r) = 0.0;
      dead.push_back(r);
    }
  }
  return dead;
}

Matrix pi_columns(const KruskalModel& model, Index mode, std::span<const std::vector<Index>> reduced_indices) {
  const Index N = model.ndims();
  Matrix pi = Matrix::Ones(model.rank(), static_cast<Index>(reduced_indices.size()));
  for (Index j = 0; j < pi.cols(); ++j) {
    const auto& idx = reduced_indices[static_cast<std::size_t>(j)];
    if (static_cast<Index>(idx.size()) != N - 1) throw Error(ErrorCode::IndexOutOfRange, "reduced index has wrong length");
    Index pos = 0;
    for (Index k = 0; k < N; ++k) {
      if (k == mode) continue;
      const Index i = idx[static_cast<std::size_t>(pos++)];
      const auto& a = model.factors[static_cast<std::size_t>(k)];
      if (i < 0 || i >= a.rows()) throw Error(ErrorCode::IndexOutOfRange, "reduced index outside shape");
      pi.col(j).array() *= a.row(i).transpose().array();
    }
  }
  return pi;
}

void pi_columns(const KruskalModel& model, const SparseCountTensor& tensor, Index mode,
                std::span<const Index> entries, Matrix& out) {
  out.setOnes(model.rank(), static_cast<Index>(entries.size()));
  for (Index j = 0; j < out.cols(); ++j) {
    const Index e = entries[static_cast<std::size_t>(j)];
    for (Index k = 0; k < model.ndims(); ++k) {
      if (k == mode) continue;
      out.col(j).array() *= model.factors[static_cast<std::size_t>(k)].row(tensor.index(e, k)).transpose().array();
    }
  }
}

double model_entry(const KruskalModel& model, std::span<const Index> index) {
  if (static_cast<Index>(index.size()) != model.ndims()) throw Error(ErrorCode::IndexOutOfRange, "index has wrong length");
  Vector prod = model.lambda;
  for (Index n = 0; n < model.ndims(); ++n) {
    const auto& a = model.factors[static_cast<std::size_t>(n)];
    const Index i = index[static_cast<std::size_t>(n)];
    if (i < 0 || i >= a.rows()) throw Error(ErrorCode::IndexOutOfRange, "index outside shape");
    prod.array() *= a.row(i).transpose().array();
  }
  return prod.sum();
}

double kl_objective(const KruskalModel& model, const SparseCountTensor& tensor) {
  Vector mass = model.lambda;
  for (const auto& a : model.factors) mass.array() *= a.colwise().sum().transpose().array();
  double f = mass.sum();
  for (Index e = 0; e < tensor.nnz(); ++e) {
    const double m = model_entry(model, tensor.index(e));
    if (m <= 0.0) return std::numeric_limits<double>::infinity();
    f -= static_cast<double>(tensor.count(e)) * std::log(m);
  }
  return f;
}

}  // namespace cpkl
