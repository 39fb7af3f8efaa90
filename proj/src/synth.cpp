#include "cpkl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpkl/rng.hpp"

namespace cpkl {

namespace {

/// Scales w so that its entries sum to `total` exactly in any summation order:
/// entries are rounded to multiples of a power of two q with total / q < 2^46,
/// so every partial sum is representable, and the largest entry takes the
/// remainder. Relative change per entry is below 1e-13.
void rescale_to_sum(Vector& w, double total) {
  w *= total / w.sum();
  const double q = std::ldexp(1.0, std::ilogb(total) - 45);
  for (auto& v : w) v = std::round(v / q) * q;
  Index big = 0;
  w.maxCoeff(&big);
  w(big) = 0.0;
  w(big) = total - w.sum();
}

}  // namespace

DiscreteSampler::DiscreteSampler(std::span<const double> weights) : cdf_(weights.size()) {
  std::partial_sum(weights.begin(), weights.end(), cdf_.begin());
  if (cdf_.empty() || !(cdf_.back() > 0.0)) throw Error(ErrorCode::InvalidArgument, "sampler needs positive total weight");
}

std::size_t DiscreteSampler::operator()(CounterRng& rng) const {
  const double u = rng.uniform() * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
}

void GenConfig::validate() const {
  if (dims.ndims() < 2) throw Error(ErrorCode::InvalidShape, "dims must have at least 2 modes");
  if (rank < 1) throw Error(ErrorCode::InvalidArgument, "rank must be >= 1");
  if (samples < 1) throw Error(ErrorCode::InvalidArgument, "samples must be >= 1");
  if (!(boost_fraction > 0.0 && boost_fraction <= 1.0)) throw Error(ErrorCode::InvalidArgument, "boost_fraction must lie in (0,1]");
  if (!(boost_scale >= 0.0)) throw Error(ErrorCode::InvalidArgument, "boost_scale must be >= 0");
  if (!(small_value > 0.0)) throw Error(ErrorCode::InvalidArgument, "small_value must be positive");
}

Index boosted_per_column(double fraction, Index rows) {
  // The slack keeps products like 0.2 * 30 = 6.000000000000001 from rounding up.
  const auto k = static_cast<Index>(std::ceil(fraction * static_cast<double>(rows) - 1e-9));
  return std::clamp<Index>(k, 1, rows);
}

KruskalModel generate_model(const GenConfig& config) {
  config.validate();
  const Index R = config.rank;
  KruskalModel model(config.dims, R);
  CounterRng rng(config.seed);
  const double boost = config.boost_scale * static_cast<double>(R);

  for (auto& a : model.factors) {
    const Index rows = a.rows();
    const Index k = boosted_per_column(config.boost_fraction, rows);
    std::vector<Index> perm(static_cast<std::size_t>(rows));
    for (Index r = 0; r < R; ++r) {
      std::iota(perm.begin(), perm.end(), Index{0});
      for (Index t = 0; t < k; ++t) {
        const auto pick = t + static_cast<Index>(rng.below(static_cast<std::uint64_t>(rows - t)));
        std::swap(perm[static_cast<std::size_t>(t)], perm[static_cast<std::size_t>(pick)]);
      }
      a.col(r).setConstant(config.small_value);
      for (Index t = 0; t < k; ++t) a(perm[static_cast<std::size_t>(t)], r) = 1.0 + boost * rng.uniform_open();
    }
  }
  for (Index r = 0; r < R; ++r) model.lambda(r) = rng.uniform_open();

  if (config.collinearity_alpha) {
    const double alpha = *config.collinearity_alpha;
    for (auto& a : model.factors)
      for (Index r = 1; r < R; ++r) a.col(r) = a.col(0) + alpha * a.col(r);
  }

  normalize(model);
  rescale_to_sum(model.lambda, 1.0);
  return model;
}

std::uint64_t sampling_seed(std::uint64_t seed) { return seed ^ 0xA0761D6478BD642FULL; }

SampledTensor sample_tensor(const KruskalModel& model, std::int64_t samples, std::uint64_t seed) {
  if (samples < 1) throw Error(ErrorCode::InvalidArgument, "samples must be >= 1");
  const Shape shape = model.shape();
  if (shape.num_cells() >= 1.8e19) throw Error(ErrorCode::InvalidShape, "shape too large for linear cell keys");
  const Index N = shape.ndims();
  const Index R = model.rank();

  CounterRng rng(seed);
  const DiscreteSampler pick_component({model.lambda.data(), static_cast<std::size_t>(R)});
  // Column samplers per mode and component; factors are row-major, so copy columns out.
  std::vector<std::vector<DiscreteSampler>> pick_index(static_cast<std::size_t>(N));
  for (Index n = 0; n < N; ++n) {
    const auto& a = model.factors[static_cast<std::size_t>(n)];
    for (Index r = 0; r < R; ++r) {
      const Vector col = a.col(r);
      pick_index[static_cast<std::size_t>(n)].emplace_back(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
    }
  }

  std::vector<std::uint64_t> keys(static_cast<std::size_t>(samples));
  for (auto& key : keys) {
    const std::size_t r = pick_component(rng);
    std::uint64_t k = 0;
    for (Index n = 0; n < N; ++n)
      k = k * static_cast<std::uint64_t>(shape[n]) + pick_index[static_cast<std::size_t>(n)][r](rng);
    key = k;
  }
  std::sort(keys.begin(), keys.end());

  std::vector<CountEntry> entries;
  for (std::size_t s = 0; s < keys.size();) {
    std::size_t t = s;
    while (t < keys.size() && keys[t] == keys[s]) ++t;
    CountEntry e;
    e.index.resize(static_cast<std::size_t>(N));
    std::uint64_t k = keys[s];
    for (Index n = N - 1; n >= 0; --n) {
      e.index[static_cast<std::size_t>(n)] = static_cast<Index>(k % static_cast<std::uint64_t>(shape[n]));
      k /= static_cast<std::uint64_t>(shape[n]);
    }
    e.count = static_cast<std::int64_t>(t - s);
    entries.push_back(std::move(e));
    s = t;
  }

  SampledTensor out{SparseCountTensor::validate(shape, std::move(entries)), model};
  rescale_to_sum(out.model.lambda, static_cast<double>(samples));
  return out;
}

SampledTensor generate(const GenConfig& config) {
  return sample_tensor(generate_model(config), config.samples, sampling_seed(config.seed));
}

namespace {

double cosine(const Vector& x, const Vector& y) {
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0) return 0.0;
  return x.dot(y) / (nx * ny);
}

}  // namespace

double CollinearityStats::mean_all_pairs() const {
  return all_pairs.empty() ? 0.0 : std::accumulate(all_pairs.begin(), all_pairs.end(), 0.0) / static_cast<double>(all_pairs.size());
}

double CollinearityStats::mean_first_pairs() const {
  return first_pairs.empty() ? 0.0 : std::accumulate(first_pairs.begin(), first_pairs.end(), 0.0) / static_cast<double>(first_pairs.size());
}

CollinearityStats collinearity_stats(const KruskalModel& model) {
  CollinearityStats stats;
  const Index R = model.rank();
  for (const auto& a : model.factors) {
    double all = 0.0;
    double first = 0.0;
    Index pairs = 0;
    for (Index r = 0; r < R; ++r)
      for (Index s = r + 1; s < R; ++s) {
        const double c = cosine(a.col(r), a.col(s));
        all += c;
        ++pairs;
        if (r == 0) first += c;
      }
    stats.all_pairs.push_back(pairs ? all / static_cast<double>(pairs) : 1.0);
    stats.first_pairs.push_back(R > 1 ? first / static_cast<double>(R - 1) : 1.0);
  }
  return stats;
}

}  // namespace cpkl
