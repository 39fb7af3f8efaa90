#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cpkl/types.hpp"

namespace cpkl {

/// Tensor dimensions I_1 x ... x I_N with N >= 2 and every I_n >= 1.
class Shape {
 public:
  Shape() = default;
  explicit Shape(std::vector<Index> dims);

  Index ndims() const { return static_cast<Index>(dims_.size()); }
  Index operator[](Index n) const { return dims_[static_cast<std::size_t>(n)]; }
  const std::vector<Index>& dims() const { return dims_; }
  /// Product of all dimensions, as a double (can exceed 2^63 for large shapes).
  double num_cells() const;
  bool contains(std::span<const Index> index) const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<Index> dims_;
};

struct CountEntry {
  std::vector<Index> index;  // 0-based
  std::int64_t count = 0;
};

/// N-way COO tensor of strictly positive integer counts.
///
/// Indices are 0-based in memory; the text format is 1-based. Entries are kept
/// sorted lexicographically by multi-index (mode 1 most significant), which
/// makes every grouping derived from the tensor deterministic. Immutable after
/// construction.
class SparseCountTensor {
 public:
  SparseCountTensor() = default;

  /// Validates and sorts. Throws IndexOutOfRange, DuplicateIndex or
  /// NonpositiveCount.
  static SparseCountTensor validate(Shape shape, std::vector<CountEntry> entries);

  const Shape& shape() const { return shape_; }
  Index ndims() const { return shape_.ndims(); }
  Index dim(Index n) const { return shape_[n]; }
  Index nnz() const { return static_cast<Index>(counts_.size()); }

  std::span<const Index> index(Index e) const {
    return {indices_.data() + e * ndims(), static_cast<std::size_t>(ndims())};
  }
  Index index(Index e, Index n) const { return indices_[static_cast<std::size_t>(e * ndims() + n)]; }
  std::int64_t count(Index e) const { return counts_[static_cast<std::size_t>(e)]; }
  const std::vector<std::int64_t>& counts() const { return counts_; }

 private:
  Shape shape_;
  std::vector<Index> indices_;  // nnz x N, row-major
  std::vector<std::int64_t> counts_;
};

/// Column of the mode-n unfolding holding `index` (Kolda-Bader ordering,
/// 0-based): j = sum_{k != n} i_k * prod_{m < k, m != n} I_m.
Index mode_column_index(const Shape& shape, Index mode, std::span<const Index> index);

/// CSR-like view of a tensor's entries grouped by their mode-n index.
/// Entries of row i are entries[row_ptr[i] .. row_ptr[i+1]), in tensor order.
struct ModeIndex {
  Index mode = 0;
  std::vector<Index> row_ptr;
  std::vector<Index> entries;

  Index rows() const { return static_cast<Index>(row_ptr.size()) - 1; }
  Index row_size(Index i) const { return row_ptr[static_cast<std::size_t>(i) + 1] - row_ptr[static_cast<std::size_t>(i)]; }
  std::span<const Index> row(Index i) const {
    return {entries.data() + row_ptr[static_cast<std::size_t>(i)], static_cast<std::size_t>(row_size(i))};
  }
};

ModeIndex build_mode_index(const SparseCountTensor& tensor, Index mode);

struct ModeRowGroup {
  Index mode = 0;
  Index row = 0;
  std::vector<std::vector<Index>> reduced_indices;  // N-1 other-mode indices each
  std::vector<std::int64_t> counts;
};

/// One group per nonempty mode-n row, sorted by row.
std::vector<ModeRowGroup> group_by_mode(const SparseCountTensor& tensor, Index mode);

std::int64_t total_count(const SparseCountTensor& tensor);
/// nnz / prod I_n.
double density(const SparseCountTensor& tensor);

}  // namespace cpkl
