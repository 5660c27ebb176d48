#pragma once

// Error metrics for a trained estimator and grid export of Jacobian fields.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jacest/errors.hpp"
#include "jacest/estimator.hpp"
#include "jacest/neighbors.hpp"
#include "jacest/testbed.hpp"

namespace jacest {

enum class Metric { e_delta, e_star_delta };

inline std::string_view to_string(Metric m) { return m == Metric::e_delta ? "E_delta" : "E_star_delta"; }

struct ErrorReport {
  Metric metric = Metric::e_delta;
  double delta = 0.0;
  double value_percent = 0.0;
  std::size_t retained = 0;
  std::size_t total = 0;
};

/// Euclidean norm of the row-concatenated entries.
inline double frobenius(const Eigen::Ref<const Eigen::MatrixXd>& m) { return m.norm(); }

/// Average relative Frobenius error over points with ||J|| > delta, given flat
/// (c*d x M) estimates and truths. Permuting the columns does not change the
/// result beyond summation rounding.
inline ErrorReport relative_error_report(const Eigen::MatrixXd& estimate_flat, const Eigen::MatrixXd& truth_flat,
                                         double delta) {
  if (estimate_flat.rows() != truth_flat.rows() || estimate_flat.cols() != truth_flat.cols()) {
    throw ShapeError("e_delta: estimate and truth shapes differ");
  }
  if (truth_flat.cols() == 0) throw InvalidArgument("e_delta: empty point set");
  ErrorReport rep{Metric::e_delta, delta, 0.0, 0, std::size_t(truth_flat.cols())};
  double sum = 0.0;
  for (Eigen::Index i = 0; i < truth_flat.cols(); ++i) {
    const double norm = truth_flat.col(i).norm();
    if (!(norm > delta)) continue;
    sum += (estimate_flat.col(i) - truth_flat.col(i)).norm() / norm;
    ++rep.retained;
  }
  if (rep.retained == 0) {
    throw EmptyFilteredSet("e_delta: no points with ||J|| > " + std::to_string(delta));
  }
  rep.value_percent = 100.0 * sum / double(rep.retained);
  return rep;
}

/// Flat analytic Jacobians at every column of S.
template <class Oracle>
Eigen::MatrixXd oracle_jacobians_flat(const Oracle& jacobian, const Eigen::MatrixXd& S) {
  Eigen::MatrixXd out;
  for (Eigen::Index i = 0; i < S.cols(); ++i) {
    const Eigen::VectorXd flat = flatten_jacobian(jacobian(Eigen::VectorXd(S.col(i))));
    if (i == 0) out.resize(flat.size(), S.cols());
    out.col(i) = flat;
  }
  return out;
}

/// E_delta for several thresholds at once; the network is evaluated once.
template <class Oracle>
std::vector<ErrorReport> e_delta_sweep(const TrainedEstimator& est, const Oracle& jacobian, const Eigen::MatrixXd& S,
                                       const std::vector<double>& deltas) {
  if (S.cols() == 0) throw InvalidArgument("e_delta: empty point set");
  const Eigen::MatrixXd estimate = predict_jacobians_flat(est, S);
  const Eigen::MatrixXd truth = oracle_jacobians_flat(jacobian, S);
  std::vector<ErrorReport> out;
  for (double delta : deltas) out.push_back(relative_error_report(estimate, truth, delta));
  return out;
}

template <class Oracle>
ErrorReport e_delta(const TrainedEstimator& est, const Oracle& jacobian, const Eigen::MatrixXd& S, double delta) {
  return e_delta_sweep(est, jacobian, S, {delta}).front();
}

/// E*_delta from estimated Jacobians at the validation inputs (flat, c*d x N_V).
/// Pairs (a, b) come from the training neighbor routine restricted to X_V.
inline ErrorReport e_star_delta_from_jacobians(const Eigen::MatrixXd& jacobians_flat, const PointCloud& XV,
                                               const Eigen::MatrixXd& YV, double delta, int k_max, double r_max) {
  if (XV.cols() < 2) throw InvalidArgument("e_star_delta: need at least two validation samples");
  if (YV.cols() != XV.cols() || jacobians_flat.cols() != XV.cols()) {
    throw ShapeError("e_star_delta: validation inputs, outputs and Jacobians must align");
  }
  const int d = int(XV.rows());
  const int c = int(YV.rows());
  if (jacobians_flat.rows() != Eigen::Index(c) * d) throw ShapeError("e_star_delta: Jacobian size mismatch");
  const auto lists = neighbor_lists(XV, k_max, r_max);
  ErrorReport rep{Metric::e_star_delta, delta, 0.0, 0, 0};
  double sum = 0.0;
  for (std::size_t a = 0; a < lists.size(); ++a) {
    const auto ia = Eigen::Index(a);
    const Eigen::MatrixXd J = unflatten_jacobian(jacobians_flat.col(ia), c, d);
    for (int b : lists[a]) {
      ++rep.total;
      const double fb = YV.col(b).norm();
      if (!(fb > delta)) continue;
      const Eigen::VectorXd linear = YV.col(ia) + J * (XV.col(b) - XV.col(ia));
      sum += (YV.col(b) - linear).norm() / fb;
      ++rep.retained;
    }
  }
  if (rep.retained == 0) {
    throw EmptyFilteredSet("e_star_delta: no validation pairs with ||F(b)|| > " + std::to_string(delta));
  }
  rep.value_percent = 100.0 * sum / double(rep.retained);
  return rep;
}

inline ErrorReport e_star_delta(const TrainedEstimator& est, const PointCloud& XV, const Eigen::MatrixXd& YV,
                                double delta, int k_max, double r_max) {
  return e_star_delta_from_jacobians(predict_jacobians_flat(est, XV), XV, YV, delta, k_max, r_max);
}

/// Tensor grid with `resolution[k]` cell-centered nodes along each axis of `box`,
/// so every node lies strictly inside the box.
struct FieldGrid {
  Box box;
  std::vector<int> resolution;

  int dim() const { return box.dim(); }

  Eigen::Index node_count() const {
    Eigen::Index n = 1;
    for (int r : resolution) n *= r;
    return n;
  }

  /// Nodes with the first axis varying slowest.
  Eigen::MatrixXd nodes() const {
    if (int(resolution.size()) != dim()) throw ShapeError("field grid: resolution/box dimension mismatch");
    for (int r : resolution)
      if (r <= 0) throw InvalidArgument("field grid: resolution must be positive");
    Eigen::MatrixXd out(dim(), node_count());
    std::vector<int> idx(resolution.size(), 0);
    for (Eigen::Index n = 0; n < out.cols(); ++n) {
      for (int k = 0; k < dim(); ++k) {
        const double width = box.hi[k] - box.lo[k];
        out(k, n) = box.lo[k] + (2.0 * idx[std::size_t(k)] + 1.0) * width / (2.0 * resolution[std::size_t(k)]);
      }
      for (int k = dim() - 1; k >= 0; --k) {
        if (++idx[std::size_t(k)] < resolution[std::size_t(k)]) break;
        idx[std::size_t(k)] = 0;
      }
    }
    return out;
  }
};

/// A Jacobian-valued function of position, e.g. an estimator or an oracle.
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct FieldRows {
  std::vector<std::string> header;
  Eigen::MatrixXd rows;  // one row per node: coordinates then row-major entries
};

/// Evaluates a c x d field at every grid node. `domain`, when given, must
/// contain every node.
inline FieldRows export_vector_field(const JacobianFn& field, const FieldGrid& grid, int c,
                                     const Box* domain = nullptr) {
  const Eigen::MatrixXd nodes = grid.nodes();
  const int d = grid.dim();
  FieldRows out;
  for (int k = 0; k < d; ++k) out.header.push_back("x" + std::to_string(k));
  for (int r = 0; r < c; ++r)
    for (int k = 0; k < d; ++k) out.header.push_back("j" + std::to_string(r) + std::to_string(k));
  out.rows.resize(nodes.cols(), d + Eigen::Index(c) * d);
  for (Eigen::Index n = 0; n < nodes.cols(); ++n) {
    const Eigen::VectorXd x = nodes.col(n);
    if (domain && !domain->contains(x)) {
      throw DomainError("export_vector_field: grid node outside the function domain");
    }
    const Eigen::MatrixXd J = field(x);
    if (J.rows() != c || J.cols() != d) throw ShapeError("export_vector_field: field has wrong shape");
    out.rows.row(n).head(d) = x.transpose();
    out.rows.row(n).tail(Eigen::Index(c) * d) = flatten_jacobian(J).transpose();
  }
  return out;
}

}  // namespace jacest
