#pragma once

// End-to-end training of the Jacobian estimator: neighbor pairs, shuffling,
// batch finalization, and the Adam training loop; plus prediction.

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jacest/errors.hpp"
#include "jacest/neighbors.hpp"
#include "jacest/network.hpp"

namespace jacest {

struct EstimatorConfig {
  int d = 2;
  int c = 1;
  std::vector<int> layers{100, 100, 50, 20};
  int k_max = 30;
  double r_max = 0.5;  // kInfinity disables the radius cutoff
  int batch_size = 50;
  int epochs = 50;
  double lr = 1e-4;
  double max_w = 0.0;  // 0 disables the max-norm constraint
  std::uint64_t seed = 0;

  void validate() const {
    if (d <= 0 || c <= 0) throw InvalidArgument("config: d and c must be positive");
    for (int h : layers)
      if (h <= 0) throw InvalidArgument("config: hidden layer widths must be positive");
    if (k_max <= 0) throw InvalidArgument("config: k_max must be positive");
    if (!(r_max > 0)) throw InvalidArgument("config: r_max must be positive");
    if (batch_size <= 0) throw InvalidArgument("config: batch_size must be positive");
    if (epochs <= 0) throw InvalidArgument("config: epochs must be positive");
    if (!(lr > 0)) throw InvalidArgument("config: lr must be positive");
    if (!(max_w >= 0)) throw InvalidArgument("config: max_w must be non-negative");
  }

  friend bool operator==(const EstimatorConfig&, const EstimatorConfig&) = default;
};

struct TrainedEstimator {
  Network net;
  EstimatorConfig config;
  std::vector<double> loss_trace;  // per-epoch mean of batch losses

  int domain_dim() const { return net.input_dim(); }
  int codomain_dim() const { return net.output_dim() / net.input_dim(); }
};

/// Splits D into equally sized batches. When |D| < batch_size the batch size
/// shrinks to |D|; otherwise D is padded by repeating its leading entries until
/// the batch size divides it.
inline std::vector<LossBatch> finalize_batches(const TrainingPairs& D, int batch_size, int* final_batch_size = nullptr) {
  const auto n = Eigen::Index(D.size());
  if (n == 0) throw EmptyTrainingSet("finalize_batches: no training pairs");
  if (batch_size <= 0) throw InvalidArgument("finalize_batches: batch size must be positive");
  Eigen::Index b = batch_size;
  if (n < b) b = n;
  const Eigen::Index rem = n % b;
  const Eigen::Index padded = rem == 0 ? n : n + (b - rem);
  if (final_batch_size) *final_batch_size = int(b);

  std::vector<LossBatch> batches;
  batches.reserve(std::size_t(padded / b));
  for (Eigen::Index start = 0; start < padded; start += b) {
    LossBatch lb;
    lb.base.resize(D.base.rows(), b);
    lb.direction.resize(D.direction.rows(), b);
    lb.delta.resize(D.delta.rows(), b);
    for (Eigen::Index t = 0; t < b; ++t) {
      const Eigen::Index src = (start + t) % n;  // wraps into the head for padding
      lb.base.col(t) = D.base.col(src);
      lb.direction.col(t) = D.direction.col(src);
      lb.delta.col(t) = D.delta.col(src);
    }
    batches.push_back(std::move(lb));
  }
  return batches;
}

/// Trains the estimator on samples X (d x N) and Y (c x N). Progress lines are
/// written to `log` when given.
inline TrainedEstimator fit(const PointCloud& X, const Eigen::MatrixXd& Y, const EstimatorConfig& config,
                            std::ostream* log = nullptr) {
  config.validate();
  if (X.rows() != config.d) throw ShapeError("fit: inputs have dimension " + std::to_string(X.rows()) + ", config says " + std::to_string(config.d));
  if (Y.rows() != config.c) throw ShapeError("fit: outputs have dimension " + std::to_string(Y.rows()) + ", config says " + std::to_string(config.c));
  if (X.cols() != Y.cols()) throw ShapeError("fit: X and Y have different sample counts");
  if (X.cols() < 2) throw InvalidArgument("fit: need at least two samples");

  std::mt19937_64 rng(config.seed);
  TrainedEstimator est;
  est.config = config;
  est.net = make_network(config.d, config.c, config.layers, rng);

  if (log) {
    *log << "Preparing data from sample\n"
         << "Input shape (" << X.cols() << ", " << X.rows() << ")\n"
         << "Output shape (" << Y.cols() << ", " << Y.rows() << ")\n";
  }
  NeighborStats stats;
  const TrainingPairs D = shuffle_pairs(build_pairs(X, Y, config.k_max, config.r_max, &stats), rng);
  int final_batch = 0;
  const auto batches = finalize_batches(D, config.batch_size, &final_batch);
  if (log) {
    *log << "Minimal distance : " << stats.min_distance << "\n"
         << "Average distance : " << stats.avg_distance << "\n"
         << "Maximal distance : " << stats.max_distance << "\n"
         << "Number of training pairs: " << D.size() << "\n"
         << "Number of training data points: " << batches.size() * std::size_t(final_batch) << "\n"
         << "Finalized batch size: " << final_batch << "\n";
  }

  AdamState adam = AdamState::for_params(est.net.params);
  LayerParams grads = LayerParams::zeros_like(est.net.params);
  GradientWorkspace ws;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double sum = 0.0;
    for (const auto& batch : batches) {
      const double loss = loss_and_gradient(est.net, batch, grads, ws);
      if (!std::isfinite(loss)) {
        throw NumericError("fit: non-finite loss at epoch " + std::to_string(epoch + 1) +
                           "; try a smaller learning rate or enable max_w");
      }
      sum += loss;
      adam_step(est.net.params, grads, adam, config.lr);
      apply_max_norm(est.net.params, config.max_w);
    }
    est.loss_trace.push_back(sum / double(batches.size()));
    if (log) *log << "Epoch " << epoch + 1 << "/" << config.epochs << " - loss: " << est.loss_trace.back() << "\n" << std::flush;
  }
  return est;
}

/// Reshapes a flat row-major (c*d) vector into a c x d matrix.
inline Eigen::MatrixXd unflatten_jacobian(const Eigen::Ref<const Eigen::VectorXd>& flat, int c, int d) {
  if (flat.size() != Eigen::Index(c) * d) throw ShapeError("unflatten_jacobian: size mismatch");
  Eigen::MatrixXd m(c, d);
  for (int k = 0; k < c; ++k)
    for (int l = 0; l < d; ++l) m(k, l) = flat[Eigen::Index(k) * d + l];
  return m;
}

inline Eigen::VectorXd flatten_jacobian(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  Eigen::VectorXd flat(m.size());
  for (Eigen::Index k = 0; k < m.rows(); ++k)
    for (Eigen::Index l = 0; l < m.cols(); ++l) flat[k * m.cols() + l] = m(k, l);
  return flat;
}

inline Eigen::MatrixXd predict_jacobian(const TrainedEstimator& est, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != est.domain_dim()) {
    throw ShapeError("predict_jacobian: expected a point in R^" + std::to_string(est.domain_dim()));
  }
  return unflatten_jacobian(forward(est.net, x), est.codomain_dim(), est.domain_dim());
}

/// Flat predictions (c*d x M) for M points, evaluated in chunks.
inline Eigen::MatrixXd predict_jacobians_flat(const TrainedEstimator& est, const Eigen::MatrixXd& points,
                                              Eigen::Index chunk = 4096) {
  if (points.rows() != est.domain_dim()) throw ShapeError("predict: dimension mismatch");
  Eigen::MatrixXd out(est.net.output_dim(), points.cols());
  for (Eigen::Index s = 0; s < points.cols(); s += chunk) {
    const Eigen::Index len = std::min(chunk, points.cols() - s);
    out.middleCols(s, len) = forward_batch(est.net, points.middleCols(s, len));
  }
  return out;
}

/// Samples (x, F(x)) as columns of two matrices.
struct SampleSet {
  Eigen::MatrixXd inputs;   // d x N
  Eigen::MatrixXd outputs;  // c x N

  Eigen::Index size() const { return inputs.cols(); }
};

/// Linearizes around the nearest sample: Y[y] + J(X[y]) (x - X[y]).
inline Eigen::VectorXd predict_function(const TrainedEstimator& est, const SampleSet& sample, const KdTree& tree,
                                        const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (sample.size() == 0) throw InvalidArgument("predict_function: empty sample");
  if (x.size() != est.domain_dim()) throw ShapeError("predict_function: dimension mismatch");
  const auto nn = tree.query(x, {1, kInfinity, false});
  const Eigen::Index y = nn.front().index;
  const Eigen::VectorXd dx = x - sample.inputs.col(y);
  return sample.outputs.col(y) + predict_jacobian(est, sample.inputs.col(y)) * dx;
}

inline Eigen::VectorXd predict_function(const TrainedEstimator& est, const SampleSet& sample,
                                        const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (sample.size() == 0) throw InvalidArgument("predict_function: empty sample");
  return predict_function(est, sample, KdTree(sample.inputs), x);
}

}  // namespace jacest
