#pragma once

#include <filesystem>
#include <iosfwd>

#include <nlohmann/json.hpp>

#include "cpkl/driver.hpp"
#include "cpkl/kruskal.hpp"
#include "cpkl/sparse_tensor.hpp"

namespace cpkl {

/// COO text: a header `N I_1 ... I_N`, then `i_1 ... i_N count` per nonzero,
/// 1-based and whitespace separated. Lines starting with '#' are skipped.
SparseCountTensor read_coo(std::istream& in);
SparseCountTensor read_coo(const std::filesystem::path& path);
void write_coo(std::ostream& out, const SparseCountTensor& tensor);
void write_coo(const std::filesystem::path& path, const SparseCountTensor& tensor);

/// {"dims": [...], "R": R, "lambda": [...], "factors": [[[row], ...], ...]}.
/// Factors are stored row-major as arrays of rows; a flat row-major array of
/// length I_n * R is also accepted on read.
nlohmann::json model_to_json(const KruskalModel& model);
KruskalModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const KruskalModel& model);
KruskalModel load_model(const std::filesystem::path& path);

/// Header `outer,mode_kkt_max,objective,exact_zeros,seconds,ls_failures,fallbacks`.
void write_trace_csv(std::ostream& out, const FitTrace& trace);
void write_trace_csv(const std::filesystem::path& path, const FitTrace& trace);

}  // namespace cpkl
