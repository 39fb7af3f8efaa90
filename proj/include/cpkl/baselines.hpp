#pragma once

#include <vector>

#include "cpkl/kruskal.hpp"
#include "cpkl/sparse_tensor.hpp"

namespace cpkl {

struct MuParams {
  int inner_iterations = 10;
  /// Entries of B are raised to at least this value before the first update.
  double clamp = 1e-16;
};

struct MuModeResult {
  FactorMatrix b;  // I_n x R, equals A^(n) Lambda after the updates
  /// Mode objective before the first and after every inner iteration (filled
  /// only when requested).
  std::vector<double> objective_history;
};

/// Plain KL multiplicative update on the mode-n block subproblem:
/// B <- B .* Phi, Phi_ir = sum_{j in nz(i)} x_ij pi_rj / (b_i . pi_j), repeated
/// inner_iterations times. The model is read, not modified.
MuModeResult mu_solve_mode(const SparseCountTensor& tensor, const ModeIndex& rows, const KruskalModel& model,
                           const MuParams& params, bool record_objective = false, int workers = 1);

/// Block-subproblem objective sum_{i,r} b_ir - sum_nz x log (b_i . pi_j) for mode
/// rows.mode with Pi built from the model's other factors.
double mode_objective(const SparseCountTensor& tensor, const ModeIndex& rows, const KruskalModel& model,
                      const FactorMatrix& b);

}  // namespace cpkl
