#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "cpkl/rng.hpp"
#include "cpkl/synth.hpp"

using namespace cpkl;

namespace {

GenConfig config(std::vector<Index> dims, Index R, std::int64_t S, std::uint64_t seed) {
  GenConfig c;
  c.dims = Shape(std::move(dims));
  c.rank = R;
  c.samples = S;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Rng, ReferenceValues) {
  // SplitMix64 with seed 0: the canonical first outputs.
  CounterRng rng(0);
  EXPECT_EQ(rng.next_u64(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng.next_u64(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(rng.next_u64(), 0x06C45D188009454FULL);
  EXPECT_EQ(rng.counter(), 3u);
}

TEST(Rng, BoundedAndUniformRanges) {
  CounterRng rng(5);
  std::vector<int> hist(7, 0);
  for (int k = 0; k < 70000; ++k) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    ++hist[v];
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
}

TEST(Rng, DiscreteSamplerFollowsWeights) {
  const std::vector<double> w = {1.0, 0.0, 3.0};
  DiscreteSampler pick(w);
  CounterRng rng(1);
  std::vector<int> hist(3, 0);
  for (int k = 0; k < 40000; ++k) ++hist[pick(rng)];
  EXPECT_EQ(hist[1], 0);
  EXPECT_NEAR(hist[2] / 40000.0, 0.75, 0.01);
  EXPECT_THROW(DiscreteSampler(std::vector<double>{0.0, 0.0}), Error);
}

TEST(BoostCount, CeilingRule) {
  EXPECT_EQ(boosted_per_column(0.2, 10), 2);
  EXPECT_EQ(boosted_per_column(0.2, 30), 6);
  EXPECT_EQ(boosted_per_column(0.2, 11), 3);
  EXPECT_EQ(boosted_per_column(0.1, 5), 1);
  EXPECT_EQ(boosted_per_column(0.01, 3), 1);
  EXPECT_EQ(boosted_per_column(1.0, 4), 4);
}

TEST(GenerateModel, DeterministicAndNormalized) {
  const auto c = config({10, 12, 7}, 4, 100, 42);
  const auto a = generate_model(c);
  const auto b = generate_model(c);
  EXPECT_EQ(a.lambda, b.lambda);
  for (std::size_t n = 0; n < 3; ++n) EXPECT_EQ(a.factors[n], b.factors[n]);
  EXPECT_EQ(a.lambda.sum(), 1.0);
  EXPECT_TRUE(a.is_normalized(1e-12));
  auto other = c;
  other.seed = 43;
  EXPECT_NE(generate_model(other).factors[0], a.factors[0]);
}

TEST(GenerateModel, BoostedEntriesPerColumn) {
  // Before normalization small entries are 0.1 and boosted ones exceed 1, so
  // after normalization each column has exactly two distinct "large" values.
  const auto m = generate_model(config({10, 10, 10}, 3, 10, 7));
  for (const auto& a : m.factors)
    for (Index r = 0; r < 3; ++r) {
      const double small = a.col(r).minCoeff();
      Index boosted = 0;
      for (Index i = 0; i < a.rows(); ++i)
        if (a(i, r) > small * 5) ++boosted;
        else EXPECT_NEAR(a(i, r), small, 1e-15);
      EXPECT_EQ(boosted, 2);
    }
}

TEST(SampleTensor, CountsAndRescaledWeights) {
  for (std::int64_t S : {1, 17, 5000}) {
    const auto data = generate(config({6, 5, 4}, 3, S, 3));
    EXPECT_EQ(total_count(data.tensor), S);
    EXPECT_EQ(data.model.lambda.sum(), static_cast<double>(S));
    EXPECT_EQ(std::accumulate(data.model.lambda.begin(), data.model.lambda.end(), 0.0), static_cast<double>(S));
    EXPECT_TRUE(data.model.is_normalized(1e-12));
    if (S == 1) {
      ASSERT_EQ(data.tensor.nnz(), 1);
      EXPECT_EQ(data.tensor.count(0), 1);
    }
  }
}

TEST(SampleTensor, Deterministic) {
  const auto c = config({8, 9, 10}, 3, 2000, 11);
  const auto a = generate(c);
  const auto b = generate(c);
  ASSERT_EQ(a.tensor.nnz(), b.tensor.nnz());
  for (Index e = 0; e < a.tensor.nnz(); ++e) {
    EXPECT_EQ(a.tensor.count(e), b.tensor.count(e));
    for (Index n = 0; n < 3; ++n) EXPECT_EQ(a.tensor.index(e, n), b.tensor.index(e, n));
  }
}

TEST(SampleTensor, FrequenciesMatchProbabilities) {
  KruskalModel m(Shape({2, 2}), 1);
  m.lambda(0) = 1.0;
  m.factors[0] << 0.3, 0.7;
  m.factors[1] << 0.6, 0.4;
  const std::int64_t S = 1000000;
  const auto data = sample_tensor(m, S, 99);
  double worst = 0.0;
  for (Index e = 0; e < data.tensor.nnz(); ++e) {
    const double p = m.factors[0](data.tensor.index(e, 0), 0) * m.factors[1](data.tensor.index(e, 1), 0);
    worst = std::max(worst, std::abs(static_cast<double>(data.tensor.count(e)) / S - p));
  }
  EXPECT_EQ(data.tensor.nnz(), 4);
  EXPECT_LE(worst, 0.005);
}

TEST(Collinearity, IdenticalAndDisjointColumns) {
  KruskalModel same(Shape({3, 3}), 2);
  for (auto& a : same.factors) a << 1, 1, 2, 2, 0, 0;
  EXPECT_NEAR(collinearity_stats(same).mean_all_pairs(), 1.0, 1e-15);
  KruskalModel disjoint(Shape({2, 2}), 2);
  for (auto& a : disjoint.factors) a << 1, 0, 0, 1;
  EXPECT_EQ(collinearity_stats(disjoint).mean_all_pairs(), 0.0);
}

TEST(Collinearity, ModifierRaisesCosines) {
  auto c = config({50, 50, 50}, 10, 10, 1);
  c.boost_fraction = 0.1;
  const double plain = collinearity_stats(generate_model(c)).mean_all_pairs();
  c.collinearity_alpha = 0.5;
  const double mixed = collinearity_stats(generate_model(c)).mean_all_pairs();
  EXPECT_GT(mixed, plain + 0.3);
}

TEST(GenConfig, Validation) {
  auto c = config({5, 5}, 2, 10, 0);
  EXPECT_NO_THROW(c.validate());
  c.samples = 0;
  EXPECT_THROW(c.validate(), Error);
  c = config({5, 5}, 2, 10, 0);
  c.boost_fraction = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = config({5, 5}, 0, 10, 0);
  EXPECT_THROW(c.validate(), Error);
}

TEST(Collinearity, PublishedBandAtTenPercentBoost) {
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto c = config({50, 50, 50}, 10, 10, seed);
    c.boost_fraction = 0.1;
    c.collinearity_alpha = 0.5;
    total += collinearity_stats(generate_model(c)).mean_all_pairs();
  }
  const double mean = total / 10.0;
  EXPECT_NEAR(mean, 0.83, 0.05) << "mean all-pairs cosine " << mean;
}
