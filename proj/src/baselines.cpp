#include "cpkl/baselines.hpp"

#include <cmath>
#include <limits>

#include "parallel.hpp"

namespace cpkl {

namespace {

struct RowData {
  Vector x;
  Matrix pi;
};

RowData row_data(const SparseCountTensor& tensor, const ModeIndex& rows, const KruskalModel& model, Index i) {
  RowData d;
  const auto entries = rows.row(i);
  pi_columns(model, tensor, rows.mode, entries, d.pi);
  d.x.resize(static_cast<Index>(entries.size()));
  for (std::size_t j = 0; j < entries.size(); ++j) d.x(static_cast<Index>(j)) = static_cast<double>(tensor.count(entries[j]));
  return d;
}

double row_objective(const RowData& d, const Vector& b) {
  double f = b.sum();
  if (d.x.size() == 0) return f;
  const Vector m = d.pi.transpose() * b;
  for (Index j = 0; j < m.size(); ++j) {
    if (!(m(j) > 0.0)) return std::numeric_limits<double>::infinity();
    f -= d.x(j) * std::log(m(j));
  }
  return f;
}

}  // namespace

double mode_objective(const SparseCountTensor& tensor, const ModeIndex& rows, const KruskalModel& model,
                      const FactorMatrix& b) {
  double f = 0.0;
  for (Index i = 0; i < rows.rows(); ++i) f += row_objective(row_data(tensor, rows, model, i), b.row(i).transpose());
  return f;
}

MuModeResult mu_solve_mode(const SparseCountTensor& tensor, const ModeIndex& rows, const KruskalModel& model,
                           const MuParams& params, bool record_objective, int workers) {
  if (params.inner_iterations < 1) throw Error(ErrorCode::InvalidArgument, "inner_iterations must be >= 1");
  const Index n = rows.mode;
  MuModeResult out;
  out.b = model.factors[static_cast<std::size_t>(n)] * model.lambda.asDiagonal();
  out.b = out.b.cwiseMax(params.clamp);

  // Per-row objective histories, summed afterwards so the result is independent of workers.
  std::vector<std::vector<double>> history(record_objective ? static_cast<std::size_t>(rows.rows()) : 0);
  detail::parallel_for(rows.rows(), workers, [&](Index i) {
    const RowData d = row_data(tensor, rows, model, i);
    Vector b = out.b.row(i).transpose();
    if (record_objective) history[static_cast<std::size_t>(i)].push_back(row_objective(d, b));
    for (int it = 0; it < params.inner_iterations; ++it) {
      if (d.x.size() == 0) {
        b.setZero();
      } else {
        const Vector m = d.pi.transpose() * b;
        const Vector phi = d.pi * (d.x.array() / m.array()).matrix();
        b = b.cwiseProduct(phi);
      }
      if (record_objective) history[static_cast<std::size_t>(i)].push_back(row_objective(d, b));
    }
    out.b.row(i) = b.transpose();
  });
  if (record_objective) {
    out.objective_history.assign(static_cast<std::size_t>(params.inner_iterations) + 1, 0.0);
    for (const auto& h : history)
      for (std::size_t k = 0; k < h.size(); ++k) out.objective_history[k] += h[k];
  }
  return out;
}

}  // namespace cpkl
