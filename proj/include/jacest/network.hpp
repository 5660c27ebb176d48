#pragma once

// Dense feed-forward network used as the Jacobian estimator, together with the
// linear-approximation loss, its hand-derived gradient, Adam and the max-norm
// weight constraint.
//
// Shapes follow Eigen's column-major convention: a batch of inputs is a
// (d x B) matrix with one sample per column, and layer j maps n_{j-1} -> n_j
// through a (n_j x n_{j-1}) weight matrix.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "jacest/errors.hpp"

namespace jacest {

enum class Activation { swish, identity };

inline std::string_view to_string(Activation a) {
  return a == Activation::swish ? "swish" : "identity";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "swish") return Activation::swish;
  if (s == "identity") return Activation::identity;
  throw FormatError("unknown activation '" + std::string(s) + "'");
}

/// Upper bound on |swish'(x)| over the real line (true supremum ~1.0998).
inline constexpr double kSwishLipschitz = 1.1;

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double swish(double x) { return x * sigmoid(x); }

inline double swish_derivative(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

/// Per-layer weights and biases. Used both for parameters and for gradients.
struct LayerParams {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static LayerParams zeros_like(const LayerParams& other) {
    LayerParams p;
    for (const auto& w : other.weights) p.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : other.biases) p.biases.push_back(Eigen::VectorXd::Zero(b.size()));
    return p;
  }
};

struct Network {
  /// [n_0 = d, n_1, ..., n_out = c*d]
  std::vector<int> layer_dims;
  LayerParams params;
  std::vector<Activation> activations;

  std::size_t num_layers() const { return params.weights.size(); }
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }

  /// Throws ShapeError if the matrices do not chain or the output layer is not identity.
  void validate() const {
    const std::size_t n = params.weights.size();
    if (layer_dims.size() != n + 1 || params.biases.size() != n || activations.size() != n || n == 0) {
      throw ShapeError("network: layer count mismatch");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (layer_dims[j] <= 0 || layer_dims[j + 1] <= 0) throw ShapeError("network: non-positive layer width");
      const auto& w = params.weights[j];
      if (w.rows() != layer_dims[j + 1] || w.cols() != layer_dims[j]) {
        throw ShapeError("network: weight matrix " + std::to_string(j) + " has wrong shape");
      }
      if (params.biases[j].size() != layer_dims[j + 1]) {
        throw ShapeError("network: bias vector " + std::to_string(j) + " has wrong length");
      }
      if (!w.allFinite() || !params.biases[j].allFinite()) {
        throw NumericError("network: non-finite parameter in layer " + std::to_string(j));
      }
    }
    if (activations.back() != Activation::identity) {
      throw ShapeError("network: output layer must use the identity activation");
    }
  }
};

/// Builds a network d -> hidden... -> c*d with swish hidden layers and a linear
/// output layer. Weights are Glorot-uniform, biases zero.
template <class Rng>
Network make_network(int d, int c, const std::vector<int>& hidden, Rng& rng) {
  if (d <= 0 || c <= 0) throw InvalidArgument("make_network: dimensions must be positive");
  Network net;
  net.layer_dims.push_back(d);
  for (int h : hidden) {
    if (h <= 0) throw InvalidArgument("make_network: hidden widths must be positive");
    net.layer_dims.push_back(h);
  }
  net.layer_dims.push_back(c * d);
  for (std::size_t j = 1; j < net.layer_dims.size(); ++j) {
    const int fan_in = net.layer_dims[j - 1];
    const int fan_out = net.layer_dims[j];
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Eigen::MatrixXd w(fan_out, fan_in);
    // Fill row by row so the draw order matches the row-major file layout.
    for (int r = 0; r < fan_out; ++r)
      for (int k = 0; k < fan_in; ++k) w(r, k) = dist(rng);
    net.params.weights.push_back(std::move(w));
    net.params.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    net.activations.push_back(j + 1 == net.layer_dims.size() ? Activation::identity : Activation::swish);
  }
  return net;
}

namespace detail {

/// Vectorized logistic sigmoid. exp(-z) may overflow to inf for very negative
/// z, which correctly yields 0.
inline void sigmoid_into(const Eigen::MatrixXd& z, Eigen::MatrixXd& out) {
  out.array() = (1.0 + (-z.array()).exp()).inverse();
}

inline void activate_inplace(Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::swish) {
    Eigen::MatrixXd s;
    sigmoid_into(z, s);
    z.array() *= s.array();
  }
}

}  // namespace detail

/// Evaluates the network on a batch of inputs (d x B); returns (c*d x B).
inline Eigen::MatrixXd forward_batch(const Network& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
  if (inputs.rows() != net.input_dim()) {
    throw ShapeError("forward: expected input dimension " + std::to_string(net.input_dim()) + ", got " +
                     std::to_string(inputs.rows()));
  }
  Eigen::MatrixXd a = inputs;
  for (std::size_t j = 0; j < net.num_layers(); ++j) {
    Eigen::MatrixXd z = net.params.weights[j] * a;
    z.colwise() += net.params.biases[j];
    detail::activate_inplace(z, net.activations[j]);
    a = std::move(z);
  }
  return a;
}

inline Eigen::VectorXd forward(const Network& net, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return forward_batch(net, x);
}

/// Rows of the loss: base point x_i, unit direction u and scaled difference v,
/// stored column-wise.
struct LossBatch {
  Eigen::MatrixXd base;       // d x B
  Eigen::MatrixXd direction;  // d x B, unit columns
  Eigen::MatrixXd delta;      // c x B

  Eigen::Index size() const { return base.cols(); }
  int domain_dim() const { return int(base.rows()); }
  int codomain_dim() const { return int(delta.rows()); }

  void validate() const {
    if (base.cols() == 0) throw InvalidArgument("loss batch is empty");
    if (direction.rows() != base.rows() || direction.cols() != base.cols() || delta.cols() != base.cols()) {
      throw ShapeError("loss batch: inconsistent shapes");
    }
  }
};

/// Residuals r = v - J(x) u for every row, given flat predictions (c*d x B)
/// interpreted row-major as c x d matrices.
inline Eigen::MatrixXd jacobian_residuals(const Eigen::Ref<const Eigen::MatrixXd>& predicted,
                                          const LossBatch& batch) {
  batch.validate();
  const int d = batch.domain_dim();
  const int c = batch.codomain_dim();
  if (predicted.rows() != Eigen::Index(c) * d || predicted.cols() != batch.size()) {
    throw ShapeError("jacobian_loss: predictions do not align with the batch");
  }
  Eigen::MatrixXd r = batch.delta;
  for (int k = 0; k < c; ++k) {
    r.row(k) -= (predicted.middleRows(Eigen::Index(k) * d, d).array() * batch.direction.array()).colwise().sum().matrix();
  }
  return r;
}

/// Mean over rows and codomain components of (v - J u)^2.
inline double jacobian_loss(const Eigen::Ref<const Eigen::MatrixXd>& predicted, const LossBatch& batch) {
  const Eigen::MatrixXd r = jacobian_residuals(predicted, batch);
  return r.squaredNorm() / double(r.size());
}

/// Scratch buffers reused across training steps.
struct GradientWorkspace {
  std::vector<Eigen::MatrixXd> pre;   // z_j
  std::vector<Eigen::MatrixXd> post;  // a_j, post[0] is the input
  std::vector<Eigen::MatrixXd> sig;   // sigmoid(z_j) for swish layers
  Eigen::MatrixXd residual;
  Eigen::MatrixXd upstream;
  Eigen::MatrixXd next;
};

/// Computes the loss and writes its exact gradient into `grads`.
/// `grads` must already be shaped like the network parameters.
inline double loss_and_gradient(const Network& net, const LossBatch& batch, LayerParams& grads,
                                GradientWorkspace& ws) {
  batch.validate();
  const std::size_t n = net.num_layers();
  const int d = batch.domain_dim();
  const int c = batch.codomain_dim();
  if (d != net.input_dim() || Eigen::Index(c) * d != net.output_dim()) {
    throw ShapeError("loss_gradient: batch dimensions do not match the network");
  }
  ws.pre.resize(n);
  ws.post.resize(n + 1);
  ws.sig.resize(n);
  ws.post[0] = batch.base;
  for (std::size_t j = 0; j < n; ++j) {
    ws.pre[j].noalias() = net.params.weights[j] * ws.post[j];
    ws.pre[j].colwise() += net.params.biases[j];
    if (net.activations[j] == Activation::swish) {
      detail::sigmoid_into(ws.pre[j], ws.sig[j]);
      ws.post[j + 1].array() = ws.pre[j].array() * ws.sig[j].array();
    } else {
      ws.post[j + 1] = ws.pre[j];
    }
  }
  const Eigen::MatrixXd& predicted = ws.post[n];
  ws.residual = jacobian_residuals(predicted, batch);
  const double count = double(ws.residual.size());
  const double loss = ws.residual.squaredNorm() / count;

  // dL/dP(k*d+l, b) = -2/(B c) r_{k b} u_{l b}
  ws.upstream.resize(predicted.rows(), predicted.cols());
  const double scale = -2.0 / count;
  for (int k = 0; k < c; ++k) {
    ws.upstream.middleRows(Eigen::Index(k) * d, d) =
        scale * (batch.direction.array().rowwise() * ws.residual.row(k).array()).matrix();
  }

  for (std::size_t jj = n; jj-- > 0;) {
    if (net.activations[jj] == Activation::swish) {
      const auto& s = ws.sig[jj].array();
      ws.upstream.array() *= s * (1.0 + ws.pre[jj].array() * (1.0 - s));
    }
    grads.weights[jj].noalias() = ws.upstream * ws.post[jj].transpose();
    grads.biases[jj] = ws.upstream.rowwise().sum();
    if (jj > 0) {
      ws.next.noalias() = net.params.weights[jj].transpose() * ws.upstream;
      std::swap(ws.upstream, ws.next);
    }
  }
  return loss;
}

inline LayerParams loss_gradient(const Network& net, const LossBatch& batch) {
  LayerParams grads = LayerParams::zeros_like(net.params);
  GradientWorkspace ws;
  loss_and_gradient(net, batch, grads, ws);
  return grads;
}

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

struct AdamState {
  LayerParams first_moment;
  LayerParams second_moment;
  std::int64_t step = 0;
  AdamSettings settings;

  static AdamState for_params(const LayerParams& params, AdamSettings s = {}) {
    return AdamState{LayerParams::zeros_like(params), LayerParams::zeros_like(params), 0, s};
  }
};

namespace detail {

template <class Param>
void adam_update(Param& theta, const Param& g, Param& m, Param& v, double b1, double b2, double step_size,
                 double eps) {
  m = b1 * m + (1.0 - b1) * g;
  v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
  theta.array() -= step_size * m.array() / (v.array().sqrt() + eps);
}

}  // namespace detail

/// One Adam update in the bias-corrected step-size form:
///   lr_t = lr * sqrt(1 - b2^t) / (1 - b1^t);  theta -= lr_t * m / (sqrt(v) + eps)
inline void adam_step(LayerParams& params, const LayerParams& grads, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw InvalidArgument("adam_step: learning rate must be positive");
  if (grads.weights.size() != params.weights.size() || grads.biases.size() != params.biases.size() ||
      state.first_moment.weights.size() != params.weights.size()) {
    throw ShapeError("adam_step: gradient/state shape mismatch");
  }
  for (std::size_t j = 0; j < grads.weights.size(); ++j) {
    if (grads.weights[j].rows() != params.weights[j].rows() || grads.weights[j].cols() != params.weights[j].cols() ||
        grads.biases[j].size() != params.biases[j].size()) {
      throw ShapeError("adam_step: gradient shape mismatch in layer " + std::to_string(j));
    }
    if (!grads.weights[j].allFinite()) throw NumericError("adam_step: non-finite gradient in weights[" + std::to_string(j) + "]");
    if (!grads.biases[j].allFinite()) throw NumericError("adam_step: non-finite gradient in biases[" + std::to_string(j) + "]");
  }
  const auto& s = state.settings;
  state.step += 1;
  const double t = double(state.step);
  const double step_size = lr * std::sqrt(1.0 - std::pow(s.beta2, t)) / (1.0 - std::pow(s.beta1, t));
  for (std::size_t j = 0; j < params.weights.size(); ++j) {
    detail::adam_update(params.weights[j], grads.weights[j], state.first_moment.weights[j],
                        state.second_moment.weights[j], s.beta1, s.beta2, step_size, s.epsilon);
    detail::adam_update(params.biases[j], grads.biases[j], state.first_moment.biases[j],
                        state.second_moment.biases[j], s.beta1, s.beta2, step_size, s.epsilon);
  }
}

/// Rescales every neuron's incoming-weight vector (a row of W) to norm <= max_w.
/// max_w == 0 disables the constraint. Biases are left alone.
inline void apply_max_norm(LayerParams& params, double max_w) {
  if (max_w < 0.0) throw InvalidArgument("apply_max_norm: max_w must be non-negative");
  if (max_w == 0.0) return;
  for (auto& w : params.weights) {
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      const double norm = w.row(r).norm();
      if (!(norm > max_w)) continue;
      w.row(r) *= max_w / norm;
      // Rounding can leave the norm an ulp above max_w; shrink until it is not,
      // so a second application is a no-op.
      while (w.row(r).norm() > max_w) w.row(r) *= 1.0 - std::numeric_limits<double>::epsilon();
    }
  }
}

/// Largest singular value.
inline double operator_norm(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

/// Certified Lipschitz constant of x -> net(x): product of layer operator norms
/// times the activation slope bound. Valid for the reshaped c x d output under
/// the operator norm, since that is dominated by the Euclidean norm of the flat output.
inline double lipschitz_upper_bound(const Network& net) {
  double bound = 1.0;
  for (std::size_t j = 0; j < net.num_layers(); ++j) {
    const double slope = net.activations[j] == Activation::swish ? kSwishLipschitz : 1.0;
    bound *= operator_norm(net.params.weights[j]) * slope;
  }
  return bound;
}

}  // namespace jacest
