#pragma once

// Benchmark functions with hand-derived Jacobians, a central-difference
// oracle, box samplers and Gaussian output noise.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jacest/errors.hpp"
#include "jacest/network.hpp"

namespace jacest {

/// Axis-aligned open box (lo, hi) in R^d.
struct Box {
  Eigen::VectorXd lo, hi;

  int dim() const { return int(lo.size()); }

  bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != lo.size()) return false;
    for (Eigen::Index k = 0; k < x.size(); ++k)
      if (!(x[k] > lo[k] && x[k] < hi[k])) return false;
    return true;
  }

  static Box cube(int d, double lo, double hi) {
    return {Eigen::VectorXd::Constant(d, lo), Eigen::VectorXd::Constant(d, hi)};
  }
};

struct TestFunction {
  std::string name;
  int d = 0;
  int c = 0;
  Box domain;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> value;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
  /// Closed-form bound on max_i ||H_i|| over the domain, where known.
  std::optional<double> hessian_bound;
  /// False for the functions with singular or non-differentiable points.
  bool twice_differentiable = true;

  void check_point(const Eigen::VectorXd& x) const {
    if (x.size() != d) {
      throw ShapeError(name + ": expected a point in R^" + std::to_string(d) + ", got R^" + std::to_string(x.size()));
    }
    if (!domain.contains(x)) {
      std::ostringstream os;
      os << name << ": point (" << x.transpose() << ") is outside the domain";
      throw DomainError(os.str());
    }
  }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const {
    check_point(x);
    return value(x);
  }

  Eigen::MatrixXd analytic_jacobian(const Eigen::VectorXd& x) const {
    check_point(x);
    return jacobian(x);
  }

  /// Evaluates every column of a (d x N) matrix.
  Eigen::MatrixXd evaluate_all(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd Y(c, X.cols());
    for (Eigen::Index i = 0; i < X.cols(); ++i) Y.col(i) = evaluate(X.col(i));
    return Y;
  }
};

namespace detail {

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(Eigen::Index(v.size()));
  Eigen::Index k = 0;
  for (double t : v) out[k++] = t;
  return out;
}

inline Eigen::MatrixXd mat(int rows, int cols, std::initializer_list<double> row_major) {
  Eigen::MatrixXd m(rows, cols);
  auto it = row_major.begin();
  for (int r = 0; r < rows; ++r)
    for (int k = 0; k < cols; ++k) m(r, k) = *it++;
  return m;
}

inline TestFunction make(std::string name, int d, int c, Box box,
                         std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f,
                         std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> j,
                         std::optional<double> hessian_bound = std::nullopt, bool smooth = true) {
  return TestFunction{std::move(name), d, c, std::move(box), std::move(f), std::move(j), hessian_bound, smooth};
}

inline std::vector<TestFunction> build_bank() {
  using V = Eigen::VectorXd;
  std::vector<TestFunction> bank;

  bank.push_back(make(
      "F0", 2, 1, Box::cube(2, -2, 2),
      [](const V& p) {
        const double x = p[0], y = p[1];
        return vec({x * std::exp(-x * x - y * y)});
      },
      [](const V& p) {
        const double x = p[0], y = p[1], e = std::exp(-x * x - y * y);
        return mat(1, 2, {e * (1 - 2 * x * x), -2 * x * y * e});
      }));

  bank.push_back(make(
      "F1", 2, 1, Box::cube(2, -1, 1), [](const V& p) { return vec({p[0] * p[1]}); },
      [](const V& p) { return mat(1, 2, {p[1], p[0]}); }, 1.0));

  bank.push_back(make(
      "F2", 2, 1, Box::cube(2, 0, 2),
      [](const V& p) {
        const double x = p[0], y = p[1];
        return vec({x * x * x + 2 * x * y * y});
      },
      [](const V& p) {
        const double x = p[0], y = p[1];
        return mat(1, 2, {3 * x * x + 2 * y * y, 4 * x * y});
      }));

  bank.push_back(make(
      "F3", 2, 1, Box::cube(2, 0, 2),
      [](const V& p) {
        const double x = p[0], y = p[1];
        return vec({std::log(1 + x * x * y)});
      },
      [](const V& p) {
        const double x = p[0], y = p[1], q = 1 + x * x * y;
        return mat(1, 2, {2 * x * y / q, x * x / q});
      }));

  bank.push_back(make(
      "F4", 2, 1, Box::cube(2, -1, 1),
      [](const V& p) {
        const double x = p[0], y = p[1];
        return vec({(x + y) / (x * x + x * y * y + 1)});
      },
      [](const V& p) {
        const double x = p[0], y = p[1], q = x * x + x * y * y + 1, s = x + y;
        return mat(1, 2, {(q - s * (2 * x + y * y)) / (q * q), (q - s * 2 * x * y) / (q * q)});
      }));

  bank.push_back(make(
      "F5", 2, 1, Box::cube(2, -1, 1),
      [](const V& p) {
        const double x = p[0], y = p[1];
        return vec({std::cos(x * x) + std::cos(y * y) + 3 * x});
      },
      [](const V& p) {
        const double x = p[0], y = p[1];
        return mat(1, 2, {-2 * x * std::sin(x * x) + 3, -2 * y * std::sin(y * y)});
      }));

  bank.push_back(make(
      "F6", 2, 1, Box::cube(2, 0, 3),
      [](const V& p) {
        const double x = p[0], y = p[1];
        return vec({std::sqrt(1 + x) + x * std::sqrt(1 + y)});
      },
      [](const V& p) {
        const double x = p[0], y = p[1];
        return mat(1, 2, {0.5 / std::sqrt(1 + x) + std::sqrt(1 + y), 0.5 * x / std::sqrt(1 + y)});
      }));

  bank.push_back(make(
      "F7", 2, 1, Box::cube(2, -3, 3),
      [](const V& p) { return vec({std::atan(p[0] + p[1] * p[1])}); },
      [](const V& p) {
        const double s = p[0] + p[1] * p[1], q = 1 / (1 + s * s);
        return mat(1, 2, {q, 2 * p[1] * q});
      }));

  bank.push_back(make(
      "F8", 3, 2, Box::cube(3, -1, 1),
      [](const V& p) {
        const double x = p[0], y = p[1], z = p[2];
        return vec({x * (x + y) + y * y + z * x, x * y * z});
      },
      [](const V& p) {
        const double x = p[0], y = p[1], z = p[2];
        return mat(2, 3, {2 * x + y + z, x + 2 * y, x,  //
                          y * z, x * z, x * y});
      }));

  bank.push_back(make(
      "F9", 3, 3, Box::cube(3, -1, 1),
      [](const V& p) {
        const double x = p[0], y = p[1], z = p[2];
        return vec({std::sin(x * y) + std::sin(z * y), std::cos(x + y) + std::cos(x + z), x + y + z});
      },
      [](const V& p) {
        const double x = p[0], y = p[1], z = p[2];
        const double cxy = std::cos(x * y), czy = std::cos(z * y);
        const double sxy = std::sin(x + y), sxz = std::sin(x + z);
        return mat(3, 3, {y * cxy, x * cxy + z * czy, y * czy,  //
                          -sxy - sxz, -sxy, -sxz,               //
                          1, 1, 1});
      }));

  // R^4 -> R^3.
  bank.push_back(make(
      "F10", 4, 3, Box::cube(4, -1, 1),
      [](const V& p) {
        const double x = p[0], y = p[1], z = p[2], t = p[3];
        return vec({std::sin(x * y), std::cos(x * z) + std::cos(y * t), 0.1 * (x + y)});
      },
      [](const V& p) {
        const double x = p[0], y = p[1], z = p[2], t = p[3];
        const double cxy = std::cos(x * y), sxz = std::sin(x * z), syt = std::sin(y * t);
        return mat(3, 4, {y * cxy, x * cxy, 0, 0,              //
                          -z * sxz, -t * syt, -x * sxz, -y * syt,  //
                          0.1, 0.1, 0, 0});
      }));

  bank.push_back(make(
      "F11", 5, 2, Box::cube(5, -1, 1),
      [](const V& p) {
        const double x = p[0], y = p[1], z = p[2], t = p[3], w = p[4];
        return vec({x * (z + t) + y * w, (x + y) * std::exp(-z * z - w * w - t)});
      },
      [](const V& p) {
        const double x = p[0], y = p[1], z = p[2], t = p[3], w = p[4];
        const double e = std::exp(-z * z - w * w - t), s = x + y;
        return mat(2, 5, {z + t, w, x, x, y,  //
                          e, e, -2 * z * s * e, -s * e, -2 * w * s * e});
      }));

  bank.push_back(make(
      "F12", 5, 1, Box::cube(5, -1, 1),
      [](const V& p) {
        const double x = p[0], y = p[1], z = p[2], t = p[3], w = p[4];
        return vec({std::exp(-x * x - x * y / 2 - 1.5 * z * z - t + w)});
      },
      [](const V& p) {
        const double x = p[0], y = p[1], z = p[2], t = p[3], w = p[4];
        const double e = std::exp(-x * x - x * y / 2 - 1.5 * z * z - t + w);
        return mat(1, 5, {(-2 * x - y / 2) * e, -x / 2 * e, -3 * z * e, -e, e});
      }));

  // Fixtures with exactly known Hessian bounds.
  bank.push_back(make(
      "linear", 2, 2, Box::cube(2, -1, 1),
      [](const V& p) { return vec({2 * p[0] - p[1], 0.5 * p[0] + 3 * p[1]}); },
      [](const V&) { return mat(2, 2, {2, -1, 0.5, 3}); }, 0.0));

  bank.push_back(make(
      "quadratic", 2, 1, Box::cube(2, -1, 1), [](const V& p) { return vec({p[0] * p[0] + p[1] * p[1]}); },
      [](const V& p) { return mat(1, 2, {2 * p[0], 2 * p[1]}); }, 2.0));

  // Functions with Jacobian singularities. The Jacobian raises SingularPoint
  // on the singular set instead of returning a value.
  bank.push_back(make(
      "sqrt_sum", 2, 1, Box::cube(2, 0, 1),
      [](const V& p) { return vec({std::sqrt(p[0] + p[1])}); },
      [](const V& p) {
        const double s = p[0] + p[1];
        if (!(s > 0)) throw SingularPoint("sqrt_sum: Jacobian undefined where x + y = 0");
        const double g = 0.5 / std::sqrt(s);
        return mat(1, 2, {g, g});
      },
      std::nullopt, false));

  bank.push_back(make(
      "radial", 2, 1, Box::cube(2, -1, 1), [](const V& p) { return vec({std::hypot(p[0], p[1])}); },
      [](const V& p) {
        const double r = std::hypot(p[0], p[1]);
        if (r == 0) throw SingularPoint("radial: Jacobian undefined at the origin");
        return mat(1, 2, {p[0] / r, p[1] / r});
      },
      std::nullopt, false));

  bank.push_back(make(
      "abs_sum", 2, 1, Box::cube(2, -1, 1), [](const V& p) { return vec({std::abs(p[0]) + std::abs(p[1])}); },
      [](const V& p) {
        if (p[0] == 0 || p[1] == 0) throw SingularPoint("abs_sum: Jacobian undefined on the coordinate axes");
        return mat(1, 2, {p[0] > 0 ? 1.0 : -1.0, p[1] > 0 ? 1.0 : -1.0});
      },
      std::nullopt, false));

  return bank;
}

}  // namespace detail

/// The full function bank, built once.
inline const std::vector<TestFunction>& function_bank() {
  static const std::vector<TestFunction> bank = detail::build_bank();
  return bank;
}

/// The thirteen benchmark functions F0..F12 only.
inline std::vector<const TestFunction*> benchmark_functions() {
  std::vector<const TestFunction*> out;
  for (const auto& f : function_bank())
    if (f.name.size() >= 2 && f.name[0] == 'F') out.push_back(&f);
  return out;
}

inline const TestFunction& find_function(const std::string& name) {
  for (const auto& f : function_bank())
    if (f.name == name) return f;
  throw InvalidArgument("unknown function '" + name + "'");
}

inline Eigen::VectorXd eval_test_function(const std::string& name, const Eigen::VectorXd& x) {
  return find_function(name).evaluate(x);
}

inline Eigen::MatrixXd analytic_jacobian(const std::string& name, const Eigen::VectorXd& x) {
  return find_function(name).analytic_jacobian(x);
}

/// Central differences, one column per input coordinate.
template <class F>
Eigen::MatrixXd fd_jacobian(const F& f, const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::MatrixXd jac;
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    xp[k] = x[k] + h;
    xm[k] = x[k] - h;
    const Eigen::VectorXd diff = (f(xp) - f(xm)) / (2 * h);
    if (k == 0) jac.resize(diff.size(), x.size());
    jac.col(k) = diff;
    xp[k] = x[k];
    xm[k] = x[k];
  }
  return jac;
}

/// N uniform draws from the open box, one column per point.
template <class Rng>
Eigen::MatrixXd sample_box(const Box& box, Eigen::Index n, Rng& rng) {
  const int d = box.dim();
  Eigen::MatrixXd X(d, n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (;;) {
      for (int k = 0; k < d; ++k) X(k, i) = box.lo[k] + (box.hi[k] - box.lo[k]) * unit(rng);
      if (box.contains(X.col(i))) break;
    }
  }
  return X;
}

inline Eigen::MatrixXd sample_domain(const std::string& name, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_box(find_function(name).domain, n, rng);
}

struct NoiseSpec {
  double sigma = 0.01;
  std::uint64_t seed = 0;
};

inline Eigen::MatrixXd add_noise(const Eigen::MatrixXd& Y, const NoiseSpec& spec) {
  if (spec.sigma < 0) throw InvalidArgument("add_noise: sigma must be non-negative");
  if (spec.sigma == 0) return Y;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.sigma);
  Eigen::MatrixXd out = Y;
  for (Eigen::Index i = 0; i < out.cols(); ++i)
    for (Eigen::Index k = 0; k < out.rows(); ++k) out(k, i) += noise(rng);
  return out;
}

/// Sampled estimate of max_i ||H_i|| using central differences of the analytic
/// Jacobian, for functions without a closed-form bound.
inline double sampled_hessian_bound(const TestFunction& f, Eigen::Index samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double h = 1e-5;
  // Shrink the box so x +- h stays inside.
  Box inner = f.domain;
  inner.lo.array() += 2 * h;
  inner.hi.array() -= 2 * h;
  const Eigen::MatrixXd X = sample_box(inner, samples, rng);
  double best = 0.0;
  for (Eigen::Index s = 0; s < X.cols(); ++s) {
    const Eigen::VectorXd x = X.col(s);
    std::vector<Eigen::MatrixXd> hess(std::size_t(f.c), Eigen::MatrixXd(f.d, f.d));
    Eigen::VectorXd xp = x, xm = x;
    for (int k = 0; k < f.d; ++k) {
      xp[k] += h;
      xm[k] -= h;
      const Eigen::MatrixXd dj = (f.jacobian(xp) - f.jacobian(xm)) / (2 * h);
      for (int i = 0; i < f.c; ++i) hess[std::size_t(i)].col(k) = dj.row(i).transpose();
      xp[k] = x[k];
      xm[k] = x[k];
    }
    for (auto& H : hess) best = std::max(best, operator_norm(0.5 * (H + H.transpose())));
  }
  return best;
}

}  // namespace jacest
