#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cpkl/kruskal.hpp"
#include "oracles.hpp"

using namespace cpkl;

TEST(Normalize, SingleColumn) {
  KruskalModel m(Shape({2, 1}), 1);
  m.lambda << 1.0;
  m.factors[0] << 2.0, 2.0;
  m.factors[1] << 1.0;
  EXPECT_TRUE(normalize(m).empty());
  EXPECT_DOUBLE_EQ(m.lambda(0), 4.0);
  EXPECT_DOUBLE_EQ(m.factors[0](0, 0), 0.5);
  EXPECT_DOUBLE_EQ(m.factors[0](1, 0), 0.5);
}

TEST(Normalize, IdempotentAndPreservesTensor) {
  std::mt19937_64 gen(11);
  KruskalModel m = oracle::random_model(gen, {4, 5, 6}, 3);
  std::vector<std::vector<Index>> probes;
  std::vector<double> before;
  for (int k = 0; k < 10; ++k) {
    std::vector<Index> idx{static_cast<Index>(gen() % 4), static_cast<Index>(gen() % 5), static_cast<Index>(gen() % 6)};
    probes.push_back(idx);
    before.push_back(oracle::dense_entry(m, idx));
  }
  normalize(m);
  EXPECT_TRUE(m.is_normalized());
  for (std::size_t k = 0; k < probes.size(); ++k)
    EXPECT_NEAR(oracle::dense_entry(m, probes[k]), before[k], 1e-10 * before[k]);
  const KruskalModel once = m;
  normalize(m);
  EXPECT_LE((m.lambda - once.lambda).cwiseAbs().maxCoeff(), 1e-12 * once.lambda.maxCoeff());
  for (std::size_t n = 0; n < m.factors.size(); ++n)
    EXPECT_LE((m.factors[n] - once.factors[n]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Normalize, ZeroColumnIsReportedNotFatal) {
  KruskalModel m(Shape({3, 2}), 2);
  m.factors[0] << 1, 0, 1, 0, 1, 0;
  m.factors[1] << 1, 1, 1, 1;
  const auto dead = normalize(m);
  ASSERT_EQ(dead, (std::vector<Index>{1}));
  EXPECT_EQ(m.lambda(1), 0.0);
  EXPECT_DOUBLE_EQ(m.factors[0](0, 1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.lambda(0), 6.0);
}

TEST(PiColumns, TwoWayIsOtherFactorRow) {
  KruskalModel m(Shape({1, 2}), 2);
  m.factors[1] << 0.3, 0.7, 0.7, 0.3;
  const std::vector<std::vector<Index>> red{{0}};
  const Matrix pi = pi_columns(m, 0, red);
  EXPECT_DOUBLE_EQ(pi(0, 0), 0.3);
  EXPECT_DOUBLE_EQ(pi(1, 0), 0.7);
}

TEST(PiColumns, ProductOfScalars) {
  KruskalModel m(Shape({1, 1, 1}), 1);
  m.factors[1] << 0.2;
  m.factors[2] << 0.5;
  const std::vector<std::vector<Index>> red{{0, 0}};
  EXPECT_DOUBLE_EQ(pi_columns(m, 0, red)(0, 0), 0.1);
  const std::vector<std::vector<Index>> bad{{0, 1}};
  EXPECT_THROW(pi_columns(m, 0, bad), Error);
}

TEST(PiColumns, MatchesDenseKhatriRao) {
  std::mt19937_64 gen(5);
  KruskalModel m = oracle::random_model(gen, {3, 4, 2}, 3);
  normalize(m);
  const Shape s = m.shape();
  for (Index n = 0; n < 3; ++n) {
    const Matrix dense = oracle::dense_pi(m, n);
    std::vector<std::vector<Index>> reduced(static_cast<std::size_t>(dense.cols()));
    oracle::for_each_index(s.dims(), [&](const std::vector<Index>& idx) {
      if (idx[static_cast<std::size_t>(n)] != 0) return;
      std::vector<Index> red;
      for (Index k = 0; k < 3; ++k)
        if (k != n) red.push_back(idx[static_cast<std::size_t>(k)]);
      reduced[static_cast<std::size_t>(mode_column_index(s, n, idx))] = red;
    });
    const Matrix pi = pi_columns(m, n, reduced);
    EXPECT_LE((pi - dense).cwiseAbs().maxCoeff(), 1e-15) << "mode " << n;
    // Each row of Pi (length J_n) sums to one for normalized factors.
    EXPECT_LE((pi.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);
  }
}

TEST(ModelEntry, ClosedForms) {
  KruskalModel m(Shape({2, 2, 2}), 1);
  m.lambda << 2.0;
  for (auto& a : m.factors) a.setConstant(0.5);
  const std::vector<Index> idx{1, 0, 1};
  EXPECT_DOUBLE_EQ(model_entry(m, idx), 0.25);
  m.lambda.setZero();
  EXPECT_EQ(model_entry(m, idx), 0.0);
}

TEST(ModelEntry, ConsistentWithPiColumns) {
  std::mt19937_64 gen(9);
  KruskalModel m = oracle::random_model(gen, {3, 3, 4}, 4);
  oracle::for_each_index({3, 3, 4}, [&](const std::vector<Index>& idx) {
    const std::vector<std::vector<Index>> red{{idx[1], idx[2]}};
    const Vector pi = pi_columns(m, 0, red).col(0);
    double via_pi = 0.0;
    for (Index r = 0; r < 4; ++r) via_pi += m.lambda(r) * pi(r) * m.factors[0](idx[0], r);
    EXPECT_NEAR(model_entry(m, idx), via_pi, 1e-12 * via_pi);
    EXPECT_GE(model_entry(m, idx), 0.0);
  });
}

TEST(KlObjective, EmptyTensorIsLambdaSum) {
  std::mt19937_64 gen(1);
  KruskalModel m = oracle::random_model(gen, {3, 4}, 2);
  normalize(m);
  auto t = SparseCountTensor::validate(Shape({3, 4}), {});
  EXPECT_NEAR(kl_objective(m, t), m.lambda.sum(), 1e-12 * m.lambda.sum());
}

TEST(KlObjective, ScalarCase) {
  KruskalModel m(Shape({1, 1, 1}), 1);
  m.lambda << 2.0;
  for (auto& a : m.factors) a.setOnes();
  auto t = SparseCountTensor::validate(Shape({1, 1, 1}), {{{0, 0, 0}, 2}});
  EXPECT_DOUBLE_EQ(kl_objective(m, t), 2.0 - 2.0 * std::log(2.0));
}

TEST(KlObjective, InfiniteWhenModelMissesACount) {
  KruskalModel m(Shape({2, 2}), 1);
  m.factors[0] << 1, 0;
  m.factors[1] << 1, 0;
  auto t = SparseCountTensor::validate(Shape({2, 2}), {{{1, 1}, 1}});
  EXPECT_TRUE(std::isinf(kl_objective(m, t)));
}

TEST(KlObjective, MatchesDenseEvaluationAndIsNormalizationInvariant) {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 5; ++trial) {
    KruskalModel m = oracle::random_model(gen, {4, 3, 5}, 3);
    auto t = oracle::random_tensor(gen, {4, 3, 5}, 20);
    const double dense = oracle::dense_kl(m, t);
    const double before = kl_objective(m, t);
    EXPECT_NEAR(before, dense, 1e-10 * std::abs(dense));
    normalize(m);
    EXPECT_NEAR(kl_objective(m, t), before, 1e-8 * std::abs(before));
  }
}
