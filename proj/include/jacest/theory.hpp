#pragma once

// Numerical checks of the convergence result: the error-bound constant, the
// coefficient bound for near-orthogonal bases, density and neighbor-geometry
// diagnostics, and an empirical check of sup ||J_hat - J|| <= C * eps.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "jacest/errors.hpp"
#include "jacest/estimator.hpp"
#include "jacest/neighbors.hpp"
#include "jacest/network.hpp"

namespace jacest {

/// Constants entering the bound. Unset values make the bound unavailable.
struct BoundInputs {
  std::optional<double> L;        // Hessian operator-norm bound of F
  std::optional<double> L_prime;  // Lipschitz constant of the estimator
  std::optional<double> alpha;    // near-orthogonality parameter, in (0, 1)
  std::optional<double> R;        // neighbor radius in units of epsilon
  std::optional<double> epsilon;  // density / training-loss scale
  int d = 0;

  std::vector<std::string> missing(bool need_epsilon) const {
    std::vector<std::string> out;
    if (!L) out.push_back("L");
    if (!L_prime) out.push_back("L_prime");
    if (!alpha) out.push_back("alpha");
    if (!R) out.push_back("R");
    if (need_epsilon && !epsilon) out.push_back("epsilon");
    if (d <= 0) out.push_back("d");
    return out;
  }
};

namespace detail {

inline void require_all(const BoundInputs& b, bool need_epsilon) {
  const auto miss = b.missing(need_epsilon);
  if (miss.empty()) return;
  std::string list;
  for (const auto& m : miss) list += (list.empty() ? "" : ", ") + m;
  throw InvalidArgument("bound constants unavailable: " + list);
}

}  // namespace detail

/// C = (L + L') + d / sqrt(1 - alpha) * (1 + L R / 2)
inline double theorem_constant(const BoundInputs& b) {
  detail::require_all(b, false);
  const double alpha = *b.alpha;
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("theorem_constant: alpha must lie in (0, 1)");
  if (*b.L < 0 || *b.L_prime < 0 || *b.R <= 0) {
    throw InvalidArgument("theorem_constant: L, L' must be non-negative and R positive");
  }
  return (*b.L + *b.L_prime) + double(b.d) / std::sqrt(1.0 - alpha) * (1.0 + *b.L * *b.R / 2.0);
}

struct CoefficientBoundReport {
  double max_coefficient = 0.0;
  double bound = 0.0;
  std::size_t violations = 0;
  std::size_t trials = 0;
};

/// Expands random unit vectors in the basis B (unit columns with pairwise
/// |<b_i, b_j>| <= alpha/d) and records the largest coefficient against
/// (1 - alpha)^{-1/2}.
inline CoefficientBoundReport coefficient_bound_check(const Eigen::MatrixXd& B, double alpha, std::size_t trials,
                                                      std::uint64_t seed) {
  const Eigen::Index d = B.rows();
  if (B.cols() != d || d == 0) throw ShapeError("coefficient_bound_check: B must be square");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("coefficient_bound_check: alpha must lie in (0, 1)");
  for (Eigen::Index i = 0; i < d; ++i) {
    if (std::abs(B.col(i).norm() - 1.0) > 1e-10) throw InvalidArgument("coefficient_bound_check: columns must be unit vectors");
    for (Eigen::Index j = i + 1; j < d; ++j) {
      if (std::abs(B.col(i).dot(B.col(j))) > alpha / double(d) + 1e-15) {
        throw InvalidArgument("coefficient_bound_check: columns are not near-orthogonal enough for alpha");
      }
    }
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
  if (!(std::abs(lu.determinant()) > 0.0)) throw NumericError("coefficient_bound_check: basis is singular");

  CoefficientBoundReport rep;
  rep.bound = 1.0 / std::sqrt(1.0 - alpha);
  rep.trials = trials;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd y(d);
  for (std::size_t t = 0; t < trials; ++t) {
    for (Eigen::Index k = 0; k < d; ++k) y[k] = gauss(rng);
    y.normalize();
    const Eigen::VectorXd coeffs = lu.solve(y);
    const double m = coeffs.cwiseAbs().maxCoeff();
    rep.max_coefficient = std::max(rep.max_coefficient, m);
    if (m > rep.bound + 1e-9) ++rep.violations;
  }
  return rep;
}

/// Greedy search among the k_max nearest neighbors of X[index] within `radius`
/// for d directions with pairwise |cosine| <= alpha/d. Returns their indices or
/// nothing when no such system is found.
inline std::optional<std::vector<int>> find_near_orthogonal_neighbors(const KdTree& tree, int index, int k_max,
                                                                      double radius, double alpha) {
  const auto& X = tree.points();
  const Eigen::Index d = X.rows();
  const double limit = alpha / double(d);
  std::vector<int> accepted;
  std::vector<Eigen::VectorXd> dirs;
  for (int j : nearest_neighbors(tree, index, k_max, radius)) {
    const Eigen::VectorXd u = (X.col(j) - X.col(index)).normalized();
    bool ok = true;
    for (const auto& v : dirs) {
      if (std::abs(u.dot(v)) > limit) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    accepted.push_back(j);
    dirs.push_back(u);
    if (Eigen::Index(accepted.size()) == d) return accepted;
  }
  return std::nullopt;
}

inline std::optional<std::vector<int>> find_near_orthogonal_neighbors(const PointCloud& X, int index, int k_max,
                                                                      double radius, double alpha) {
  return find_near_orthogonal_neighbors(KdTree(X), index, k_max, radius, alpha);
}

/// Fraction of sample points that admit a near-orthogonal neighbor system.
inline double near_orthogonal_success_rate(const PointCloud& X, int k_max, double radius, double alpha) {
  const KdTree tree(X);
  std::size_t ok = 0;
  for (Eigen::Index i = 0; i < X.cols(); ++i)
    if (find_near_orthogonal_neighbors(tree, int(i), k_max, radius, alpha)) ++ok;
  return X.cols() == 0 ? 0.0 : double(ok) / double(X.cols());
}

/// max over probes of the distance to the nearest sample point.
inline double epsilon_density(const PointCloud& X, const Eigen::MatrixXd& probes) {
  if (X.cols() == 0) throw InvalidArgument("epsilon_density: empty sample");
  if (probes.cols() == 0) throw InvalidArgument("epsilon_density: no probe points");
  const KdTree tree(X);
  double worst = 0.0;
  for (Eigen::Index p = 0; p < probes.cols(); ++p) {
    const auto nn = tree.query(probes.col(p), {1, kInfinity, false});
    worst = std::max(worst, std::sqrt(nn.front().dist2));
  }
  return worst;
}

/// max over training pairs of ||F(y) - F(x) - J_hat(x)(y - x)|| / ||y - x||,
/// i.e. the largest residual norm ||v - J_hat u||.
inline double training_residual_max(const TrainedEstimator& est, const TrainingPairs& D) {
  const Eigen::MatrixXd pred = predict_jacobians_flat(est, D.base);
  LossBatch all{D.base, D.direction, D.delta};
  const Eigen::MatrixXd r = jacobian_residuals(pred, all);
  return r.colwise().norm().maxCoeff();
}

struct BoundCheckReport {
  double max_operator_error = 0.0;
  double constant = 0.0;
  double epsilon = 0.0;
  double bound = 0.0;  // constant * epsilon
  bool holds = false;
};

/// Compares max_x ||J_hat(x) - J(x)|| (operator norm) over S with C * eps.
template <class Oracle>
BoundCheckReport empirical_bound_check(const TrainedEstimator& est, const Oracle& jacobian, const BoundInputs& b,
                                       const Eigen::MatrixXd& S) {
  detail::require_all(b, true);
  if (S.cols() == 0) throw InvalidArgument("empirical_bound_check: empty point set");
  BoundCheckReport rep;
  rep.constant = theorem_constant(b);
  rep.epsilon = *b.epsilon;
  rep.bound = rep.constant * rep.epsilon;
  const Eigen::MatrixXd estimate = predict_jacobians_flat(est, S);
  const int c = est.codomain_dim(), d = est.domain_dim();
  for (Eigen::Index i = 0; i < S.cols(); ++i) {
    const Eigen::MatrixXd diff = unflatten_jacobian(estimate.col(i), c, d) - jacobian(Eigen::VectorXd(S.col(i)));
    rep.max_operator_error = std::max(rep.max_operator_error, operator_norm(diff));
  }
  rep.holds = rep.max_operator_error <= rep.bound;
  return rep;
}

}  // namespace jacest
