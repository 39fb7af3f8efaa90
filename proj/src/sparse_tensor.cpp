#include "cpkl/sparse_tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace cpkl {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DuplicateIndex: return "DuplicateIndex";
    case ErrorCode::NonpositiveCount: return "NonpositiveCount";
    case ErrorCode::InvalidShape: return "InvalidShape";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UndefinedAtZeroModel: return "UndefinedAtZeroModel";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

namespace {

std::string format_index(std::span<const Index> index) {
  std::ostringstream os;
  os << '(';
  for (std::size_t k = 0; k < index.size(); ++k) os << (k ? "," : "") << index[k] + 1;
  os << ')';
  return os.str();
}

}  // namespace

Shape::Shape(std::vector<Index> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw Error(ErrorCode::InvalidShape, "tensor needs at least 2 modes");
  for (Index d : dims_)
    if (d < 1) throw Error(ErrorCode::InvalidShape, "every dimension must be >= 1");
}

double Shape::num_cells() const {
  double cells = 1.0;
  for (Index d : dims_) cells *= static_cast<double>(d);
  return cells;
}

bool Shape::contains(std::span<const Index> index) const {
  if (static_cast<Index>(index.size()) != ndims()) return false;
  for (Index n = 0; n < ndims(); ++n)
    if (index[static_cast<std::size_t>(n)] < 0 || index[static_cast<std::size_t>(n)] >= (*this)[n]) return false;
  return true;
}

SparseCountTensor SparseCountTensor::validate(Shape shape, std::vector<CountEntry> entries) {
  for (const auto& e : entries) {
    if (!shape.contains(e.index))
      throw Error(ErrorCode::IndexOutOfRange, "entry " + format_index(e.index) + " outside shape");
    if (e.count <= 0)
      throw Error(ErrorCode::NonpositiveCount, "entry " + format_index(e.index) + " has count " + std::to_string(e.count));
  }
  std::sort(entries.begin(), entries.end(),
            [](const CountEntry& a, const CountEntry& b) { return a.index < b.index; });
  for (std::size_t e = 1; e < entries.size(); ++e)
    if (entries[e].index == entries[e - 1].index)
      throw Error(ErrorCode::DuplicateIndex, "entry " + format_index(entries[e].index) + " appears twice");

  SparseCountTensor t;
  t.shape_ = std::move(shape);
  const auto N = static_cast<std::size_t>(t.shape_.ndims());
  t.indices_.reserve(entries.size() * N);
  t.counts_.reserve(entries.size());
  for (auto& e : entries) {
    t.indices_.insert(t.indices_.end(), e.index.begin(), e.index.end());
    t.counts_.push_back(e.count);
  }
  return t;
}

Index mode_column_index(const Shape& shape, Index mode, std::span<const Index> index) {
  if (!shape.contains(index)) throw Error(ErrorCode::IndexOutOfRange, "index " + format_index(index) + " outside shape");
  if (mode < 0 || mode >= shape.ndims()) throw Error(ErrorCode::IndexOutOfRange, "mode out of range");
  Index j = 0;
  Index stride = 1;
  for (Index k = 0; k < shape.ndims(); ++k) {
    if (k == mode) continue;
    j += index[static_cast<std::size_t>(k)] * stride;
    stride *= shape[k];
  }
  return j;
}

ModeIndex build_mode_index(const SparseCountTensor& tensor, Index mode) {
  if (mode < 0 || mode >= tensor.ndims()) throw Error(ErrorCode::IndexOutOfRange, "mode out of range");
  ModeIndex mi;
  mi.mode = mode;
  const Index rows = tensor.dim(mode);
  mi.row_ptr.assign(static_cast<std::size_t>(rows) + 1, 0);
  for (Index e = 0; e < tensor.nnz(); ++e) ++mi.row_ptr[static_cast<std::size_t>(tensor.index(e, mode)) + 1];
  std::partial_sum(mi.row_ptr.begin(), mi.row_ptr.end(), mi.row_ptr.begin());
  mi.entries.resize(static_cast<std::size_t>(tensor.nnz()));
  std::vector<Index> fill(mi.row_ptr.begin(), mi.row_ptr.end() - 1);
  for (Index e = 0; e < tensor.nnz(); ++e)
    mi.entries[static_cast<std::size_t>(fill[static_cast<std::size_t>(tensor.index(e, mode))]++)] = e;
  return mi;
}

std::vector<ModeRowGroup> group_by_mode(const SparseCountTensor& tensor, Index mode) {
  const ModeIndex mi = build_mode_index(tensor, mode);
  std::vector<ModeRowGroup> groups;
  for (Index i = 0; i < mi.rows(); ++i) {
    if (mi.row_size(i) == 0) continue;
    ModeRowGroup g;
    g.mode = mode;
    g.row = i;
    for (Index e : mi.row(i)) {
      std::vector<Index> reduced;
      for (Index k = 0; k < tensor.ndims(); ++k)
        if (k != mode) reduced.push_back(tensor.index(e, k));
      g.reduced_indices.push_back(std::move(reduced));
      g.counts.push_back(tensor.count(e));
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

std::int64_t total_count(const SparseCountTensor& tensor) {
  return std::accumulate(tensor.counts().begin(), tensor.counts().end(), std::int64_t{0});
}

double density(const SparseCountTensor& tensor) {
  if (tensor.nnz() == 0) return 0.0;
  return static_cast<double>(tensor.nnz()) / tensor.shape().num_cells();
}

}  // namespace cpkl
