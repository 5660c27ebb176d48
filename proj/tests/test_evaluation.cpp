#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "jacest/evaluation.hpp"
#include "test_util.hpp"

using namespace jacest;

TEST(Frobenius, Examples) {
  EXPECT_EQ(frobenius(Eigen::RowVector2d(3, 4)), 5.0);
  EXPECT_EQ(frobenius(Eigen::Matrix2d::Zero()), 0.0);
  EXPECT_EQ(frobenius(Eigen::Matrix2d::Ones()), 2.0);
}

TEST(EDelta, ExcludesZeroJacobianStrictly) {
  Eigen::MatrixXd est(2, 2), truth(2, 2);
  est << 1.1, 0, 0, 0;
  truth << 1, 0, 0, 0;
  const ErrorReport r = relative_error_report(est, truth, 0.0);
  EXPECT_EQ(r.retained, 1u);
  EXPECT_EQ(r.total, 2u);
  EXPECT_NEAR(r.value_percent, 10.0, 1e-12);
  EXPECT_THROW(relative_error_report(est, truth, 1.0), EmptyFilteredSet);
}

TEST(EDelta, OracleAgainstItselfIsZero) {
  const auto& f = find_function("F0");
  const Eigen::MatrixXd S = sample_domain("F0", 2000, 3);
  const Eigen::MatrixXd truth = oracle_jacobians_flat([&](const Eigen::VectorXd& x) { return f.analytic_jacobian(x); }, S);
  for (double delta : {0.0, 0.001, 0.01, 0.1}) EXPECT_EQ(relative_error_report(truth, truth, delta).value_percent, 0.0);
}

TEST(EDelta, ConstantEstimatorOnLinearMap) {
  const Eigen::Matrix2d A{{2, -1}, {0.5, 3}};
  const TrainedEstimator est = jacest::testing::constant_estimator(A);
  const auto oracle = [&](const Eigen::VectorXd& x) { return analytic_jacobian("linear", x); };
  const auto reports = e_delta_sweep(est, oracle, sample_domain("linear", 500, 1), {0, 0.001, 0.01, 0.1});
  ASSERT_EQ(reports.size(), 4u);
  for (const auto& r : reports) {
    EXPECT_EQ(r.value_percent, 0.0);
    EXPECT_EQ(r.retained, 500u);
  }
}

TEST(EDelta, RetainedShrinksWithDeltaAndPermutationInvariant) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd truth = jacest::testing::random_matrix(2, 1000, rng, 0.3);
  const Eigen::MatrixXd est = truth + jacest::testing::random_matrix(2, 1000, rng, 0.01);
  std::size_t last = 1001;
  for (double delta = 0; delta < 0.35; delta += 0.02) {
    const ErrorReport r = relative_error_report(est, truth, delta);
    EXPECT_LE(r.retained, last);
    last = r.retained;
  }
  std::vector<int> perm(1000);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd pe(2, 1000), pt(2, 1000);
  for (int i = 0; i < 1000; ++i) {
    pe.col(i) = est.col(perm[std::size_t(i)]);
    pt.col(i) = truth.col(perm[std::size_t(i)]);
  }
  const double a = relative_error_report(est, truth, 0.05).value_percent;
  EXPECT_NEAR(relative_error_report(pe, pt, 0.05).value_percent, a, 1e-12 * a);
}

TEST(EStarDelta, ArithmeticExample) {
  // Pair (0 -> 1): F(b)=2, F(a)=1, J(a)(b-a)=0.5 -> |2-1.5|/2.
  // Pair (1 -> 0): F(b)=1, F(a)=2, J(a)(b-a)=-1.25 -> |1-0.75|/1.
  PointCloud XV(1, 2);
  XV << 0, 1;
  const Eigen::MatrixXd YV = (Eigen::MatrixXd(1, 2) << 1, 2).finished();
  const Eigen::MatrixXd J = (Eigen::MatrixXd(1, 2) << 0.5, 1.25).finished();
  const ErrorReport r = e_star_delta_from_jacobians(J, XV, YV, 0.01, 1, kInfinity);
  EXPECT_EQ(r.metric, Metric::e_star_delta);
  EXPECT_EQ(r.retained, 2u);
  EXPECT_NEAR(r.value_percent, 25.0, 1e-12);
  // Raising delta past F(0) = 1 leaves only the first pair, also 25%.
  const ErrorReport r2 = e_star_delta_from_jacobians(J, XV, YV, 1.0, 1, kInfinity);
  EXPECT_EQ(r2.retained, 1u);
  EXPECT_EQ(r2.total, 2u);
  EXPECT_NEAR(r2.value_percent, 25.0, 1e-12);
  EXPECT_THROW(e_star_delta_from_jacobians(J, XV, YV, 2.0, 1, kInfinity), EmptyFilteredSet);
}

TEST(EStarDelta, ExactLinearEstimatorIsZero) {
  const Eigen::Matrix2d A{{2, -1}, {0.5, 3}};
  const TrainedEstimator est = jacest::testing::constant_estimator(A);
  std::mt19937_64 rng(2);
  const PointCloud XV = jacest::testing::random_matrix(2, 400, rng);
  const Eigen::MatrixXd YV = A * XV;
  const ErrorReport r = e_star_delta(est, XV, YV, 0.01, 30, 0.5);
  EXPECT_GT(r.retained, 0u);
  EXPECT_NEAR(r.value_percent, 0.0, 1e-10);
}

TEST(EStarDelta, InvariantUnderSamplePermutation) {
  std::mt19937_64 rng(12);
  const PointCloud XV = jacest::testing::random_matrix(2, 300, rng);
  const Eigen::MatrixXd YV = XV.colwise().squaredNorm();
  const Eigen::MatrixXd J = 2 * XV + jacest::testing::random_matrix(2, 300, rng, 0.05);
  std::vector<int> perm(300);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  PointCloud px(2, 300);
  Eigen::MatrixXd py(1, 300), pj(2, 300);
  for (int i = 0; i < 300; ++i) {
    px.col(i) = XV.col(perm[std::size_t(i)]);
    py.col(i) = YV.col(perm[std::size_t(i)]);
    pj.col(i) = J.col(perm[std::size_t(i)]);
  }
  const ErrorReport a = e_star_delta_from_jacobians(J, XV, YV, 0.01, 10, 0.4);
  const ErrorReport b = e_star_delta_from_jacobians(pj, px, py, 0.01, 10, 0.4);
  EXPECT_EQ(a.retained, b.retained);
  EXPECT_NEAR(a.value_percent, b.value_percent, 1e-10 * a.value_percent);
}

TEST(FieldExport, ConstantField) {
  const FieldGrid grid{Box::cube(2, -1, 1), {2, 2}};
  const FieldRows rows = export_vector_field([](const Eigen::VectorXd&) { return Eigen::MatrixXd::Constant(1, 2, 7.0); },
                                             grid, 1);
  ASSERT_EQ(rows.rows.rows(), 4);
  EXPECT_EQ(rows.header, (std::vector<std::string>{"x0", "x1", "j00", "j01"}));
  for (Eigen::Index r = 0; r < 4; ++r) EXPECT_EQ(rows.rows.row(r).tail(2), Eigen::RowVector2d(7, 7));
  EXPECT_EQ(rows.rows.row(0).head(2), Eigen::RowVector2d(-0.5, -0.5));
  EXPECT_EQ(rows.rows.row(1).head(2), Eigen::RowVector2d(-0.5, 0.5));
}

TEST(FieldExport, OracleGridOverF0) {
  const auto& f = find_function("F0");
  const JacobianFn oracle = [&](const Eigen::VectorXd& x) { return f.analytic_jacobian(x); };
  const FieldRows rows = export_vector_field(oracle, FieldGrid{f.domain, {20, 20}}, 1, &f.domain);
  EXPECT_EQ(rows.rows.rows(), 400);
  // An odd resolution puts the center cell at the origin.
  const FieldRows odd = export_vector_field(oracle, FieldGrid{f.domain, {21, 21}}, 1, &f.domain);
  const Eigen::RowVectorXd center = odd.rows.row(220);
  EXPECT_EQ(center[0], 0.0);
  EXPECT_EQ(center[1], 0.0);
  EXPECT_NEAR(center[2], 1.0, 1e-15);
  EXPECT_NEAR(center[3], 0.0, 1e-15);
}

TEST(FieldExport, DifferenceOfIdenticalFieldsIsZero) {
  const Eigen::Matrix2d A{{2, -1}, {0.5, 3}};
  const TrainedEstimator est = jacest::testing::constant_estimator(A);
  const auto& f = find_function("linear");
  const JacobianFn diff = [&](const Eigen::VectorXd& x) { return Eigen::MatrixXd(predict_jacobian(est, x) - f.analytic_jacobian(x)); };
  const FieldRows rows = export_vector_field(diff, FieldGrid{f.domain, {5, 4}}, 2, &f.domain);
  EXPECT_EQ(rows.rows.rows(), 20);
  EXPECT_EQ(rows.rows.rightCols(4).cwiseAbs().maxCoeff(), 0.0);
}

TEST(FieldExport, NodeOutsideDomainThrows) {
  const auto& f = find_function("F1");
  const JacobianFn oracle = [&](const Eigen::VectorXd& x) { return f.jacobian(x); };
  EXPECT_THROW(export_vector_field(oracle, FieldGrid{Box::cube(2, -2, 2), {4, 4}}, 1, &f.domain), DomainError);
}
