#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cpkl/kruskal.hpp"
#include "cpkl/sparse_tensor.hpp"

namespace cpkl {

struct GenConfig {
  Shape dims;
  Index rank = 1;
  std::int64_t samples = 1;
  double boost_fraction = 0.2;
  double boost_scale = 10.0;  // boosted entries are 1 + boost_scale * R * x
  double small_value = 0.1;
  std::optional<double> collinearity_alpha;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Number of boosted entries in a column of length `rows`: ceil(fraction * rows).
Index boosted_per_column(double fraction, Index rows);

/// Sparse ground-truth model, normalized with sum(lambda) = 1.
///
/// Draw order on the seed's stream: for each mode, for each column, the
/// boosted positions (partial Fisher-Yates) followed by their values; then
/// lambda. The optional collinearity modifier a_r <- a_1 + alpha a_r (r >= 2)
/// is applied before normalization.
KruskalModel generate_model(const GenConfig& config);

struct SampledTensor {
  SparseCountTensor tensor;
  KruskalModel model;  // lambda rescaled so sum(lambda) = S
};

/// S independent draws: a component from lambda, then one index per mode from
/// that component's column; each draw adds one to its cell.
SampledTensor sample_tensor(const KruskalModel& model, std::int64_t samples, std::uint64_t seed);

/// Seed used for sampling when a single config seed drives generation.
std::uint64_t sampling_seed(std::uint64_t seed);

/// generate_model followed by sample_tensor(model, S, sampling_seed(seed)).
SampledTensor generate(const GenConfig& config);

struct CollinearityStats {
  std::vector<double> all_pairs;    // per mode: mean cosine over all column pairs
  std::vector<double> first_pairs;  // per mode: mean cosine between column 1 and the others
  double mean_all_pairs() const;
  double mean_first_pairs() const;
};

CollinearityStats collinearity_stats(const KruskalModel& model);

}  // namespace cpkl
