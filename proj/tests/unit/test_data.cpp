#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "test_util.hpp"

namespace mfai {
namespace {

using testing::random_matrix;

MaskedMatrix full(std::size_t n, std::size_t m) {
  return MaskedMatrix::from_dense(Eigen::MatrixXd::Random(static_cast<Eigen::Index>(n),
                                                          static_cast<Eigen::Index>(m)));
}

TEST(MaskedMatrix, RejectsOutOfRangeAndDuplicates) {
  EXPECT_THROW(MaskedMatrix(2, 2, {{2, 0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(MaskedMatrix(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}}), std::invalid_argument);
}

TEST(MaskedMatrix, SortsCellsAndBuildsAdjacency) {
  const MaskedMatrix y(3, 2, {{2, 1, 5.0}, {0, 1, 2.0}, {0, 0, 1.0}, {1, 0, 3.0}});
  ASSERT_EQ(y.n_observed(), 4u);
  EXPECT_EQ(y.cells()[0], (Cell{0, 0}));
  EXPECT_EQ(y.cells()[3], (Cell{2, 1}));
  EXPECT_EQ(y.row_end(0) - y.row_begin(0), 2u);
  EXPECT_EQ(y.row_end(1) - y.row_begin(1), 1u);
  EXPECT_EQ(y.col_positions(1).size(), 2u);
  EXPECT_EQ(*y.at(2, 1), 5.0);
  EXPECT_FALSE(y.at(2, 0).has_value());
  EXPECT_DOUBLE_EQ(y.missing_ratio(), 2.0 / 6.0);
}

TEST(MaskedMatrix, FromDenseTreatsNanAsMissing) {
  Eigen::MatrixXd d(2, 2);
  d << 1, std::nan(""), 3, 4;
  const auto y = MaskedMatrix::from_dense(d);
  EXPECT_EQ(y.n_observed(), 3u);
  EXPECT_FALSE(y.is_observed(0, 1));
  EXPECT_EQ(y.to_dense(-1.0)(0, 1), -1.0);
}

TEST(MaskEntries, ZeroRatioIsIdentity) {
  const auto y = full(4, 4);
  EXPECT_EQ(mask_entries(y, 0.0, 3), y);
}

TEST(MaskEntries, HalfOfTenByTenIsDeterministic) {
  const auto y = full(10, 10);
  const auto a = mask_entries(y, 0.5, 7);
  const auto b = mask_entries(y, 0.5, 7);
  EXPECT_EQ(a.n_observed(), 50u);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.indices(), mask_entries(y, 0.5, 8).indices());
}

TEST(MaskEntries, RemovedSetIsDisjointFromSurvivors) {
  // 80 observed cells out of 100
  std::vector<Entry> entries;
  for (std::uint32_t r = 0; r < 10; ++r) {
    for (std::uint32_t c = 0; c < 10; ++c) {
      if ((r * 10 + c) % 5 != 0) entries.push_back({r, c, static_cast<double>(r * 10 + c)});
    }
  }
  const MaskedMatrix y(10, 10, entries);
  ASSERT_EQ(y.n_observed(), 80u);
  const auto masked = mask_entries(y, 0.25, 11);
  EXPECT_EQ(masked.n_observed(), 60u);
  const std::set<Cell> before(y.cells().begin(), y.cells().end());
  const std::set<Cell> after(masked.cells().begin(), masked.cells().end());
  std::size_t removed = 0;
  for (const auto& c : before) {
    if (!after.count(c)) ++removed;
  }
  EXPECT_EQ(removed, 20u);
  for (const auto& c : after) {
    ASSERT_TRUE(before.count(c));
    EXPECT_EQ(*masked.at(c.row, c.col), *y.at(c.row, c.col));
  }
}

TEST(MaskEntries, RejectsBadRatios) {
  const auto y = full(3, 3);
  EXPECT_THROW(mask_entries(y, 1.0, 1), std::invalid_argument);
  EXPECT_THROW(mask_entries(y, -0.1, 1), std::invalid_argument);
  const MaskedMatrix one(3, 3, {{1, 1, 2.0}});
  EXPECT_THROW(mask_entries(one, 0.6, 1), std::invalid_argument);
}

TEST(SplitObserved, HalfOfHundred) {
  const auto y = full(10, 10);
  const auto [train, test] = split_observed(y.indices(), 0.5, 1);
  EXPECT_EQ(train.size(), 50u);
  EXPECT_EQ(test.size(), 50u);
}

TEST(SplitObserved, MinimalCase) {
  const IndexSet cells{{0, 0}, {1, 1}};
  const auto [train, test] = split_observed(cells, 0.5, 9);
  ASSERT_EQ(train.size(), 1u);
  ASSERT_EQ(test.size(), 1u);
  EXPECT_NE(train[0], test[0]);
}

TEST(SplitObserved, NinetyPercentOfTen) {
  IndexSet cells;
  for (std::uint32_t i = 0; i < 10; ++i) cells.push_back({i, i});
  const auto [train, test] = split_observed(cells, 0.9, 4);
  EXPECT_EQ(train.size(), 9u);
  EXPECT_EQ(test.size(), 1u);
  std::set<Cell> all(train.begin(), train.end());
  all.insert(test.begin(), test.end());
  EXPECT_EQ(all, std::set<Cell>(cells.begin(), cells.end()));
}

TEST(SplitObserved, PartitionsEverySizeUpToAThousand) {
  for (std::size_t n = 2; n <= 1000; n += (n < 50 ? 1 : 37)) {
    IndexSet cells;
    for (std::uint32_t i = 0; i < n; ++i) cells.push_back({i / 7, i % 7});
    for (const double ratio : {0.1, 0.5, 0.83}) {
      const auto [train, test] = split_observed(cells, ratio, n);
      const auto want = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
      if (want >= 1 && want < n) ASSERT_EQ(train.size(), want) << n;
      ASSERT_EQ(train.size() + test.size(), n);
      std::set<Cell> seen(train.begin(), train.end());
      ASSERT_EQ(seen.size(), train.size());
      for (const auto& c : test) ASSERT_TRUE(seen.insert(c).second) << "overlap at size " << n;
      ASSERT_EQ(seen, std::set<Cell>(cells.begin(), cells.end()));
      ASSERT_TRUE(std::is_sorted(train.begin(), train.end()));
    }
  }
}

TEST(SplitObserved, DeterministicAndRejectsTinySets) {
  const auto y = full(6, 6);
  EXPECT_EQ(split_observed(y.indices(), 0.3, 5), split_observed(y.indices(), 0.3, 5));
  EXPECT_THROW(split_observed(IndexSet{{0, 0}}, 0.5, 1), std::invalid_argument);
  EXPECT_THROW(split_observed(y.indices(), 1.0, 1), std::invalid_argument);
}

TEST(Rmse, IdentityIsZero) {
  const auto y = random_matrix(5, 5, 0.2, 3);
  EXPECT_EQ(rmse(y, y, y.indices()), 0.0);
}

TEST(Rmse, HandArithmetic) {
  Eigen::MatrixXd pred(1, 2);
  pred << 1, 2;
  Eigen::MatrixXd truth(1, 2);
  truth << 2, 4;
  const IndexSet cells{{0, 0}, {0, 1}};
  EXPECT_NEAR(rmse(pred, truth, cells), std::sqrt(5.0 / 2.0), 1e-15);
  EXPECT_NEAR(rmse(pred, truth, cells), 1.58113883, 1e-8);
}

TEST(Rmse, MatchesScalarLoop) {
  const Eigen::MatrixXd pred = Eigen::MatrixXd::Random(5, 5);
  const auto truth = random_matrix(5, 5, 0.3, 17);
  const IndexSet eval = truth.indices();
  double sum = 0.0;
  for (const auto& c : eval) {
    const double d = pred(c.row, c.col) - *truth.at(c.row, c.col);
    sum += d * d;
  }
  EXPECT_NEAR(rmse(pred, truth, eval), std::sqrt(sum / static_cast<double>(eval.size())), 1e-12);
}

TEST(Rmse, EmptyEvalSetThrows) {
  const auto y = full(2, 2);
  EXPECT_THROW(rmse(y, y, IndexSet{}), std::invalid_argument);
}

TEST(Rmse, NonNegativeOnRandomInputs) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = random_matrix(4, 6, 0.0, s);
    const auto b = random_matrix(4, 6, 0.0, s + 100);
    EXPECT_GE(rmse(a, b, a.indices()), 0.0);
  }
}

}  // namespace
}  // namespace mfai
