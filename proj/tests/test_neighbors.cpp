#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "jacest/neighbors.hpp"
#include "test_util.hpp"

using namespace jacest;

namespace {

PointCloud line(std::initializer_list<double> xs) {
  PointCloud X(1, Eigen::Index(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) X(0, i++) = x;
  return X;
}

std::vector<int> brute_force_neighbors(const PointCloud& X, int i, int k, double r) {
  std::vector<Neighbor> all;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double d2 = squared_distance(X.col(j), X.col(i));
    if (d2 > 0 && std::sqrt(d2) < r) all.push_back({d2, int(j)});
  }
  std::sort(all.begin(), all.end());
  std::vector<int> out;
  for (std::size_t t = 0; t < all.size() && int(t) < k; ++t) out.push_back(all[t].index);
  return out;
}

}  // namespace

TEST(NearestNeighbors, RadiusCutoff) {
  const PointCloud X = line({0.0, 1.0, 3.0});
  EXPECT_EQ(nearest_neighbors(X, 0, 2, 1.5), std::vector<int>({1}));
}

TEST(NearestNeighbors, InfiniteRadius) {
  const PointCloud X = line({0.0, 1.0, 3.0});
  EXPECT_EQ(nearest_neighbors(X, 1, 2, kInfinity), std::vector<int>({0, 2}));
}

TEST(NearestNeighbors, CoincidentPointExcluded) {
  PointCloud X(2, 3);
  X << 0, 0, 1, 0, 0, 0;
  EXPECT_EQ(nearest_neighbors(X, 0, 2, kInfinity), std::vector<int>({2}));
}

TEST(NearestNeighbors, TiesBrokenByIndex) {
  const PointCloud X = line({0.0, 1.0, -1.0, 2.0, -2.0});
  EXPECT_EQ(nearest_neighbors(X, 0, 3, kInfinity), std::vector<int>({1, 2, 3}));
}

TEST(NearestNeighbors, RadiusIsStrict) {
  const PointCloud X = line({0.0, 1.0});
  EXPECT_TRUE(nearest_neighbors(X, 0, 5, 1.0).empty());
}

TEST(NearestNeighbors, RejectsBadArguments) {
  const PointCloud X = line({0.0, 1.0});
  EXPECT_THROW(nearest_neighbors(X, 2, 1, 1.0), InvalidArgument);
  EXPECT_THROW(nearest_neighbors(X, 0, 0, 1.0), InvalidArgument);
  EXPECT_THROW(nearest_neighbors(X, 0, 1, 0.0), InvalidArgument);
}

TEST(KdTree, MatchesBruteForceOnRandomClouds) {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<int> nd(2, 200), dd(1, 5), kd(1, 40);
  std::uniform_real_distribution<double> rd(0.05, 1.5);
  for (int trial = 0; trial < 120; ++trial) {
    const int n = nd(rng), d = dd(rng), k = kd(rng);
    PointCloud X = jacest::testing::random_matrix(d, n, rng);
    if (trial % 4 == 0) {
      // Snap to a coarse lattice to force exact ties and duplicates.
      X = (X * 3).array().round() / 3;
    }
    const double r = trial % 3 == 0 ? kInfinity : rd(rng);
    const KdTree tree(X);
    for (int i = 0; i < n; ++i) {
      ASSERT_EQ(nearest_neighbors(tree, i, k, r), brute_force_neighbors(X, i, k, r))
          << "trial " << trial << " point " << i;
    }
  }
}

TEST(KdTree, HighDimensionFallsBackToScan) {
  std::mt19937_64 rng(4);
  const PointCloud X = jacest::testing::random_matrix(12, 60, rng);
  const KdTree tree(X);
  for (int i = 0; i < 60; ++i) EXPECT_EQ(nearest_neighbors(tree, i, 5, kInfinity), brute_force_neighbors(X, i, 5, kInfinity));
}

TEST(BuildPairs, SmallLine) {
  const PointCloud X = line({0.0, 1.0, 3.0});
  const Eigen::MatrixXd Y = X;
  const TrainingPairs D = build_pairs(X, Y, 1, 1.5);
  EXPECT_EQ(D.pairs, (std::vector<IndexPair>{{0, 1}, {1, 0}}));
}

TEST(BuildPairs, CompleteGraph) {
  std::mt19937_64 rng(1);
  const PointCloud X = jacest::testing::random_matrix(2, 9, rng);
  const TrainingPairs D = build_pairs(X, Eigen::MatrixXd::Zero(1, 9), 8, kInfinity);
  EXPECT_EQ(D.size(), 9u * 8u);
}

TEST(BuildPairs, SecantSlope) {
  const PointCloud X = line({0.0, 1.0});
  const TrainingPairs D = build_pairs(X, 2 * X, 1, kInfinity);
  ASSERT_EQ(D.size(), 2u);
  EXPECT_EQ(D.pairs[0], (IndexPair{0, 1}));
  EXPECT_EQ(D.direction(0, 0), 1.0);
  EXPECT_EQ(D.delta(0, 0), 2.0);
}

TEST(BuildPairs, EmptySetIsAnError) {
  const PointCloud X = line({0.0, 1.0, 3.0});
  try {
    build_pairs(X, X, 1, 0.5);
    FAIL() << "expected EmptyTrainingSet";
  } catch (const EmptyTrainingSet& e) {
    EXPECT_NE(std::string(e.what()).find("r_max"), std::string::npos);
  }
  EXPECT_THROW(build_pairs(X, Eigen::MatrixXd::Zero(1, 2), 1, 2.0), ShapeError);
}

TEST(BuildPairs, AsymmetryWitness) {
  // 0 -> 1 is kept (1 is 0's nearest), but 1's nearest is 2, so 1 -> 0 is not.
  const PointCloud X = line({0.0, 1.0, 1.5});
  const TrainingPairs D = build_pairs(X, X, 1, kInfinity);
  const std::set<IndexPair> s(D.pairs.begin(), D.pairs.end());
  EXPECT_TRUE(s.count({0, 1}));
  EXPECT_FALSE(s.count({1, 0}));
}

TEST(BuildPairs, CachedRowsReproduceDifferences) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud X = jacest::testing::random_matrix(3, 150, rng);
    const Eigen::MatrixXd Y = jacest::testing::random_matrix(2, 150, rng, 5.0);
    const int k = 1 + trial * 3;
    NeighborStats stats;
    const TrainingPairs D = build_pairs(X, Y, k, 0.6, &stats);
    EXPECT_GE(D.size(), 1u);
    EXPECT_LE(D.size(), std::size_t(150 * k));
    for (std::size_t t = 0; t < D.size(); ++t) {
      const auto [i, j] = D.pairs[t];
      const auto col = Eigen::Index(t);
      const double norm = (X.col(j) - X.col(i)).norm();
      EXPECT_NE(i, j);
      EXPECT_LT(norm, 0.6);
      EXPECT_GE(norm, stats.min_distance);
      EXPECT_LE(norm, stats.max_distance);
      EXPECT_NEAR(D.direction.col(col).norm(), 1.0, 1e-12);
      EXPECT_LE((D.direction.col(col) * norm - (X.col(j) - X.col(i))).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LE((D.delta.col(col) * norm - (Y.col(j) - Y.col(i))).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_EQ(D.base.col(col), X.col(i));
    }
    EXPECT_TRUE(std::is_sorted(D.pairs.begin(), D.pairs.end(),
                               [](const IndexPair& a, const IndexPair& b) { return a.i < b.i; }));
  }
}

TEST(BuildPairs, PairCountBoundsWhenEveryPointHasANeighbor) {
  std::mt19937_64 rng(2);
  const PointCloud X = jacest::testing::random_matrix(2, 400, rng);
  const TrainingPairs D = build_pairs(X, Eigen::MatrixXd::Zero(1, 400), 10, kInfinity);
  EXPECT_EQ(D.size(), 4000u);
  const TrainingPairs Dr = build_pairs(X, Eigen::MatrixXd::Zero(1, 400), 10, 0.5);
  const auto lists = neighbor_lists(X, 10, 0.5);
  const bool all_have = std::all_of(lists.begin(), lists.end(), [](const auto& l) { return !l.empty(); });
  ASSERT_TRUE(all_have);
  EXPECT_GE(Dr.size(), 400u);
  EXPECT_LE(Dr.size(), 4000u);
}

TEST(ShufflePairs, SingletonUnchanged) {
  const PointCloud X = line({0.0, 1.0, 5.0});
  const TrainingPairs D = build_pairs(X, X, 1, 1.5);
  TrainingPairs one = permute_pairs(D, {0});
  const TrainingPairs s = shuffle_pairs(one, 99);
  EXPECT_EQ(s.pairs, one.pairs);
  EXPECT_EQ(s.direction, one.direction);
}

TEST(ShufflePairs, DeterministicAndPreservesMultiset) {
  std::mt19937_64 rng(3);
  const PointCloud X = jacest::testing::random_matrix(2, 300, rng);
  const Eigen::MatrixXd Y = jacest::testing::random_matrix(1, 300, rng);
  const TrainingPairs D = build_pairs(X, Y, 8, kInfinity);
  const TrainingPairs a = shuffle_pairs(D, 42), b = shuffle_pairs(D, 42), c = shuffle_pairs(D, 43);
  EXPECT_EQ(a.pairs, b.pairs);
  EXPECT_EQ(a.delta, b.delta);
  EXPECT_NE(a.pairs, c.pairs);
  EXPECT_NE(a.pairs, D.pairs);
  auto sorted = [](std::vector<IndexPair> p) {
    std::sort(p.begin(), p.end());
    return p;
  };
  EXPECT_EQ(sorted(a.pairs), sorted(D.pairs));
  // Cached rows travel with their pair.
  for (std::size_t t = 0; t < a.size(); ++t) {
    const auto [i, j] = a.pairs[t];
    const double norm = (X.col(j) - X.col(i)).norm();
    EXPECT_NEAR(a.delta(0, Eigen::Index(t)), (Y(0, j) - Y(0, i)) / norm, 1e-15);
  }
}
