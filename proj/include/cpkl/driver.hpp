#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpkl/baselines.hpp"
#include "cpkl/kruskal.hpp"
#include "cpkl/row_solver.hpp"
#include "cpkl/sparse_tensor.hpp"

namespace cpkl {

enum class Method { PDNR, PQNR, MU };

Method parse_method(const std::string& name);
std::string to_string(Method method);

struct FitConfig {
  Method method = Method::PDNR;
  Index rank = 1;
  int outer_max = 200;
  double tau = 1e-4;
  std::optional<double> time_limit;  // seconds
  SolverParams solver = SolverParams::pdnr();
  MuParams mu;
  std::uint64_t seed = 0;
  /// Modes swept each outer iteration (0-based); empty means all modes in order.
  std::vector<Index> modes;
  int workers = 1;

  void validate() const;
};

struct TraceRow {
  int outer = 0;
  std::vector<double> mode_kkt;  // max row violation per mode, end of sweep
  double kkt_max = 0.0;
  double objective = 0.0;
  Index exact_zeros = 0;
  double seconds = 0.0;
  int ls_failures = 0;
  int fallbacks = 0;
};

struct FitTrace {
  std::vector<TraceRow> rows;
};

struct FitResult {
  KruskalModel model;
  FitTrace trace;
  bool converged = false;
  double final_kkt = 0.0;
  std::vector<Index> dead_components;
};

/// Factors drawn uniform on (0,1) from the seeded stream (mode by mode, row-major),
/// lambda = 1, then normalized.
KruskalModel init_model(const Shape& shape, Index rank, std::uint64_t seed);

struct ModeSolveStats {
  std::vector<RowSolveReport> reports;  // one per row; empty rows get a default report
  int ls_failures = 0;
  int fallbacks = 0;
  std::vector<Index> dead_components;
  bool timed_out = false;
};

/// Per-row solver state that may outlive one mode solve.
struct ModeSolveState {
  std::vector<LbfgsStore<double>> lbfgs;  // one per row when persisting
};

/// Solves the mode-n block subproblem row by row and writes the result back:
/// lambda <- column sums of B*, A^(n) <- B* Lambda^-1. Expects a normalized model.
ModeSolveStats solve_mode(const SparseCountTensor& tensor, const ModeIndex& rows, KruskalModel& model,
                          const FitConfig& config, ModeSolveState* state = nullptr,
                          std::optional<double> deadline = std::nullopt);

ModeSolveStats solve_mode(const SparseCountTensor& tensor, KruskalModel& model, Index mode, const FitConfig& config);

/// Largest row KKT violation over every row of mode `rows.mode`, including
/// rows without data (their gradient is all ones).
double mode_kkt_violation(const SparseCountTensor& tensor, const ModeIndex& rows, const KruskalModel& model,
                          int workers = 1);

Index exact_zero_total(const KruskalModel& model);

/// Alternating sweeps until every mode's KKT violation is <= tau, outer_max
/// sweeps, or the time limit.
FitResult fit(const SparseCountTensor& tensor, const FitConfig& config);
FitResult fit(const SparseCountTensor& tensor, const FitConfig& config, KruskalModel initial);

}  // namespace cpkl
