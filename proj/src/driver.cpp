#include "cpkl/driver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <limits>

#include "cpkl/rng.hpp"
#include "parallel.hpp"

namespace cpkl {

Method parse_method(const std::string& name) {
  if (name == "pdnr" || name == "PDNR" || name == "PDN-R") return Method::PDNR;
  if (name == "pqnr" || name == "PQNR" || name == "PQN-R") return Method::PQNR;
  if (name == "mu" || name == "MU") return Method::MU;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + name + "' (expected pdnr, pqnr or mu)");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::PDNR: return "pdnr";
    case Method::PQNR: return "pqnr";
    case Method::MU: return "mu";
  }
  return "?";
}

void FitConfig::validate() const {
  if (rank < 1) throw Error(ErrorCode::InvalidArgument, "rank must be >= 1");
  if (outer_max < 1) throw Error(ErrorCode::InvalidArgument, "outer_max must be >= 1");
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be positive");
  if (time_limit && !(*time_limit > 0.0)) throw Error(ErrorCode::InvalidArgument, "time_limit must be positive");
  if (workers < 1) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
  solver.validate();
  if (mu.inner_iterations < 1) throw Error(ErrorCode::InvalidArgument, "inner_iterations must be >= 1");
}

KruskalModel init_model(const Shape& shape, Index rank, std::uint64_t seed) {
  KruskalModel model(shape, rank);
  CounterRng rng(seed);
  for (auto& a : model.factors)
    for (Index i = 0; i < a.rows(); ++i)
      for (Index r = 0; r < rank; ++r) a(i, r) = rng.uniform_open();
  normalize(model);
  return model;
}

namespace {

using Clock = std::chrono::steady_clock;

RowProblem<double> make_row_problem(const SparseCountTensor& tensor, const ModeIndex& rows, const KruskalModel& model,
                                    Index i) {
  RowProblem<double> p;
  const auto entries = rows.row(i);
  p.b = model.factors[static_cast<std::size_t>(rows.mode)].row(i).transpose().cwiseProduct(model.lambda);
  pi_columns(model, tensor, rows.mode, entries, p.pi);
  p.x.resize(static_cast<Index>(entries.size()));
  for (std::size_t j = 0; j < entries.size(); ++j) p.x(static_cast<Index>(j)) = static_cast<double>(tensor.count(entries[j]));
  return p;
}

/// lambda <- column sums of B, A^(n) <- B Lambda^-1; zero columns become uniform.
std::vector<Index> write_back(KruskalModel& model, Index mode, const FactorMatrix& b) {
  std::vector<Index> dead;
  auto& a = model.factors[static_cast<std::size_t>(mode)];
  for (Index r = 0; r < model.rank(); ++r) {
    const double s = b.col(r).sum();
    if (s > 0.0) {
      a.col(r) = b.col(r) / s;
      model.lambda(r) = s;
    } else {
      a.col(r).setConstant(1.0 / static_cast<double>(a.rows()));
      model.lambda(r) = 0.0;
      dead.push_back(r);
    }
  }
  return dead;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

ModeSolveStats solve_mode(const SparseCountTensor& tensor, const ModeIndex& rows, KruskalModel& model,
                          const FitConfig& config, ModeSolveState* state, std::optional<double> deadline) {
  const Index mode = rows.mode;
  const Index n_rows = rows.rows();
  ModeSolveStats stats;
  stats.reports.resize(static_cast<std::size_t>(n_rows));

  FactorMatrix b;
  if (config.method == Method::MU) {
    b = mu_solve_mode(tensor, rows, model, config.mu, false, config.workers).b;
  } else {
    b = model.factors[static_cast<std::size_t>(mode)] * model.lambda.asDiagonal();
    const bool persist = config.method == Method::PQNR && config.solver.persist_lbfgs && state != nullptr;
    if (persist && static_cast<Index>(state->lbfgs.size()) != n_rows)
      state->lbfgs.assign(static_cast<std::size_t>(n_rows), LbfgsStore<double>(config.solver.lbfgs_memory));
    const auto start = Clock::now();
    std::atomic<bool> timed_out{false};

    detail::parallel_for(n_rows, config.workers, [&](Index i) {
      auto& report = stats.reports[static_cast<std::size_t>(i)];
      if (rows.row_size(i) == 0) {
        b.row(i).setZero();
        report.converged = true;
        report.exact_zeros = static_cast<int>(model.rank());
        return;
      }
      if (deadline && seconds_since(start) > *deadline) {
        timed_out = true;
        return;
      }
      const RowProblem<double> p = make_row_problem(tensor, rows, model, i);
      RowSolveResult<double> res =
          config.method == Method::PDNR
              ? solve_row_pdnr(p, config.solver)
              : solve_row_pqnr(p, config.solver, persist ? &state->lbfgs[static_cast<std::size_t>(i)] : nullptr);
      b.row(i) = res.b.transpose();
      report = res.report;
    });
    stats.timed_out = timed_out;
  }
  for (const auto& r : stats.reports) {
    stats.ls_failures += r.backtrack_failures;
    stats.fallbacks += r.fallback_steps;
  }
  stats.dead_components = write_back(model, mode, b);
  return stats;
}

ModeSolveStats solve_mode(const SparseCountTensor& tensor, KruskalModel& model, Index mode, const FitConfig& config) {
  return solve_mode(tensor, build_mode_index(tensor, mode), model, config);
}

double mode_kkt_violation(const SparseCountTensor& tensor, const ModeIndex& rows, const KruskalModel& model,
                          int workers) {
  std::vector<double> per_row(static_cast<std::size_t>(rows.rows()), 0.0);
  detail::parallel_for(rows.rows(), workers, [&](Index i) {
    const RowProblem<double> p = make_row_problem(tensor, rows, model, i);
    if (!std::isfinite(f_row(p))) {
      per_row[static_cast<std::size_t>(i)] = std::numeric_limits<double>::infinity();
      return;
    }
    per_row[static_cast<std::size_t>(i)] = kkt_violation_row(p.b, grad_row(p));
  });
  return per_row.empty() ? 0.0 : *std::max_element(per_row.begin(), per_row.end());
}

Index exact_zero_total(const KruskalModel& model) {
  Index zeros = 0;
  for (const auto& a : model.factors) zeros += (a.array() == 0.0).count();
  return zeros;
}

FitResult fit(const SparseCountTensor& tensor, const FitConfig& config) {
  return fit(tensor, config, init_model(tensor.shape(), config.rank, config.seed));
}

FitResult fit(const SparseCountTensor& tensor, const FitConfig& config, KruskalModel initial) {
  config.validate();
  if (tensor.nnz() == 0) throw Error(ErrorCode::InvalidArgument, "cannot fit an empty tensor");
  if (!(initial.shape() == tensor.shape())) throw Error(ErrorCode::ShapeMismatch, "initial model shape differs from tensor");
  if (initial.rank() != config.rank) throw Error(ErrorCode::ShapeMismatch, "initial model rank differs from config");

  std::vector<Index> modes = config.modes;
  if (modes.empty())
    for (Index n = 0; n < tensor.ndims(); ++n) modes.push_back(n);
  for (Index n : modes)
    if (n < 0 || n >= tensor.ndims()) throw Error(ErrorCode::InvalidArgument, "mode out of range");

  std::vector<ModeIndex> indices;
  for (Index n = 0; n < tensor.ndims(); ++n) indices.push_back(build_mode_index(tensor, n));
  std::vector<ModeSolveState> states(static_cast<std::size_t>(tensor.ndims()));

  FitResult result;
  result.model = std::move(initial);
  result.dead_components = normalize(result.model);
  const auto start = Clock::now();

  auto record = [&](int outer, int ls_failures, int fallbacks) {
    TraceRow row;
    row.outer = outer;
    for (Index n : modes)
      row.mode_kkt.push_back(mode_kkt_violation(tensor, indices[static_cast<std::size_t>(n)], result.model, config.workers));
    row.kkt_max = *std::max_element(row.mode_kkt.begin(), row.mode_kkt.end());
    row.objective = kl_objective(result.model, tensor);
    row.exact_zeros = exact_zero_total(result.model);
    row.seconds = seconds_since(start);
    row.ls_failures = ls_failures;
    row.fallbacks = fallbacks;
    result.trace.rows.push_back(std::move(row));
    return result.trace.rows.back().kkt_max;
  };

  record(0, 0, 0);
  for (int outer = 1; outer <= config.outer_max; ++outer) {
    int ls_failures = 0;
    int fallbacks = 0;
    bool out_of_time = false;
    for (Index n : modes) {
      std::optional<double> remaining;
      if (config.time_limit) remaining = *config.time_limit - seconds_since(start);
      auto stats = solve_mode(tensor, indices[static_cast<std::size_t>(n)], result.model, config,
                              &states[static_cast<std::size_t>(n)], remaining);
      ls_failures += stats.ls_failures;
      fallbacks += stats.fallbacks;
      if (stats.timed_out || (config.time_limit && seconds_since(start) > *config.time_limit)) {
        out_of_time = true;
        break;
      }
    }
    const double kkt = record(outer, ls_failures, fallbacks);
    result.final_kkt = kkt;
    if (kkt <= config.tau) {
      result.converged = true;
      break;
    }
    if (out_of_time) break;
  }
  result.dead_components.clear();
  for (Index r = 0; r < result.model.rank(); ++r)
    if (result.model.lambda(r) == 0.0) result.dead_components.push_back(r);
  return result;
}

}  // namespace cpkl
