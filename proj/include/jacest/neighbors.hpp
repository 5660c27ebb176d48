#pragma once

// Exact k-nearest-neighbor search and construction of the training pairs.
//
// Neighbor order is lexicographic in (squared distance, index). Points that
// coincide with the query are never neighbors and do not use up one of the k
// slots. The radius cutoff is strict: ||X[j] - X[i]|| < r_max.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <queue>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "jacest/errors.hpp"

namespace jacest {

/// A cloud of N points in R^d, one column per point.
using PointCloud = Eigen::MatrixXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Neighbor {
  double dist2;
  int index;
  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
  }
};

inline double squared_distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

struct QueryOptions {
  int k = 1;
  double radius = kInfinity;     // strict cutoff on the Euclidean distance
  bool skip_coincident = false;  // drop candidates at distance exactly zero
};

namespace detail {

/// Bounded max-heap of the k best candidates under Neighbor ordering.
class BestK {
 public:
  explicit BestK(int k) : k_(k) {}

  bool full() const { return int(heap_.size()) >= k_; }
  const Neighbor& worst() const { return heap_.front(); }

  void offer(Neighbor n) {
    if (k_ <= 0) return;
    if (!full()) {
      heap_.push_back(n);
      std::push_heap(heap_.begin(), heap_.end());
    } else if (n < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = n;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  /// Candidates strictly farther than this bound can never enter.
  double admission_bound(double radius2) const {
    return full() ? std::min(heap_.front().dist2, radius2) : radius2;
  }

  std::vector<Neighbor> sorted() && {
    std::sort(heap_.begin(), heap_.end());
    return std::move(heap_);
  }

 private:
  int k_;
  std::vector<Neighbor> heap_;
};

inline bool admissible(double dist2, const QueryOptions& opt) {
  if (opt.skip_coincident && dist2 == 0.0) return false;
  if (std::isinf(opt.radius)) return true;
  return std::sqrt(dist2) < opt.radius;
}

}  // namespace detail

/// O(N) scan; the reference against which the tree is tested.
inline std::vector<Neighbor> brute_force_knn(const PointCloud& points, const Eigen::Ref<const Eigen::VectorXd>& query,
                                             const QueryOptions& opt) {
  detail::BestK best(opt.k);
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    const double d2 = squared_distance(points.col(j), query);
    if (detail::admissible(d2, opt)) best.offer({d2, int(j)});
  }
  return std::move(best).sorted();
}

/// Static kd-tree over a point cloud. Keeps a reference to the points; the
/// cloud must outlive the tree.
class KdTree {
 public:
  static constexpr int kLeafSize = 16;
  /// Above this dimension queries fall back to a linear scan.
  static constexpr int kMaxTreeDim = 10;

  explicit KdTree(const PointCloud& points) : points_(&points) {
    index_.resize(std::size_t(points.cols()));
    std::iota(index_.begin(), index_.end(), 0);
    if (points.cols() > 0 && points.rows() <= kMaxTreeDim) {
      nodes_.reserve(2 * std::size_t(points.cols()) / kLeafSize + 2);
      build(0, int(points.cols()));
    }
  }

  KdTree(PointCloud&&) = delete;

  const PointCloud& points() const { return *points_; }

  std::vector<Neighbor> query(const Eigen::Ref<const Eigen::VectorXd>& q, const QueryOptions& opt) const {
    if (q.size() != points_->rows()) throw ShapeError("knn query: dimension mismatch");
    if (nodes_.empty()) return brute_force_knn(*points_, q, opt);
    detail::BestK best(opt.k);
    const double radius2 = std::isinf(opt.radius) ? kInfinity : opt.radius * opt.radius;
    search(0, q, opt, radius2, best);
    return std::move(best).sorted();
  }

 private:
  struct Node {
    int begin, end;      // range in index_
    int left = -1, right = -1;
    int axis = -1;
    double split = 0.0;
    Eigen::VectorXd lo, hi;  // bounding box
  };

  int build(int begin, int end) {
    const int id = int(nodes_.size());
    nodes_.push_back(Node{begin, end, -1, -1, -1, 0.0, {}, {}});
    const auto& pts = *points_;
    Eigen::VectorXd lo = pts.col(index_[begin]);
    Eigen::VectorXd hi = lo;
    for (int t = begin + 1; t < end; ++t) {
      lo = lo.cwiseMin(pts.col(index_[t]));
      hi = hi.cwiseMax(pts.col(index_[t]));
    }
    if (end - begin > kLeafSize) {
      Eigen::Index axis = 0;
      (hi - lo).maxCoeff(&axis);
      if (hi[axis] > lo[axis]) {
        const int mid = begin + (end - begin) / 2;
        std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end,
                         [&](int a, int b) { return pts(axis, a) < pts(axis, b); });
        const double split = pts(axis, index_[mid]);
        const int l = build(begin, mid);
        const int r = build(mid, end);
        nodes_[id].left = l;
        nodes_[id].right = r;
        nodes_[id].axis = int(axis);
        nodes_[id].split = split;
      }
    }
    nodes_[id].lo = std::move(lo);
    nodes_[id].hi = std::move(hi);
    return id;
  }

  static double box_distance2(const Node& n, const Eigen::Ref<const Eigen::VectorXd>& q) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < q.size(); ++k) {
      double t = 0.0;
      if (q[k] < n.lo[k]) t = n.lo[k] - q[k];
      else if (q[k] > n.hi[k]) t = q[k] - n.hi[k];
      s += t * t;
    }
    return s;
  }

  void search(int id, const Eigen::Ref<const Eigen::VectorXd>& q, const QueryOptions& opt, double radius2,
              detail::BestK& best) const {
    const Node& n = nodes_[std::size_t(id)];
    // Box distance is a lower bound; keep ties so equal-distance points with a
    // smaller index still get a chance.
    if (box_distance2(n, q) > best.admission_bound(radius2) * (1.0 + 1e-12)) return;
    if (n.left < 0) {
      const auto& pts = *points_;
      for (int t = n.begin; t < n.end; ++t) {
        const int j = index_[std::size_t(t)];
        const double d2 = squared_distance(pts.col(j), q);
        if (detail::admissible(d2, opt)) best.offer({d2, j});
      }
      return;
    }
    const bool go_left = q[n.axis] < n.split;
    search(go_left ? n.left : n.right, q, opt, radius2, best);
    search(go_left ? n.right : n.left, q, opt, radius2, best);
  }

  const PointCloud* points_;
  std::vector<int> index_;
  std::vector<Node> nodes_;
};

/// Indices of the k_max nearest neighbors of X[i] that are distinct from X[i]
/// and strictly within r_max, ascending by distance then index.
inline std::vector<int> nearest_neighbors(const KdTree& tree, int i, int k_max, double r_max) {
  const auto& X = tree.points();
  if (i < 0 || i >= X.cols()) throw InvalidArgument("nearest_neighbors: index out of range");
  if (k_max <= 0) throw InvalidArgument("nearest_neighbors: k_max must be positive");
  if (!(r_max > 0.0)) throw InvalidArgument("nearest_neighbors: r_max must be positive");
  const auto found = tree.query(X.col(i), {k_max, r_max, true});
  std::vector<int> out;
  out.reserve(found.size());
  for (const auto& n : found) out.push_back(n.index);
  return out;
}

inline std::vector<int> nearest_neighbors(const PointCloud& X, int i, int k_max, double r_max) {
  return nearest_neighbors(KdTree(X), i, k_max, r_max);
}

struct IndexPair {
  int i, j;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
  friend auto operator<=>(const IndexPair&, const IndexPair&) = default;
};

/// The list D of directed pairs with cached unit directions
/// u = (X[j]-X[i])/|X[j]-X[i]| and scaled differences v = (Y[j]-Y[i])/|X[j]-X[i]|.
struct TrainingPairs {
  std::vector<IndexPair> pairs;
  Eigen::MatrixXd base;       // d x |D|, X[i]
  Eigen::MatrixXd direction;  // d x |D|
  Eigen::MatrixXd delta;      // c x |D|

  std::size_t size() const { return pairs.size(); }
};

struct NeighborStats {
  double min_distance = 0.0;
  double avg_distance = 0.0;
  double max_distance = 0.0;
};

/// All neighbor lists in ascending i order.
inline std::vector<std::vector<int>> neighbor_lists(const PointCloud& X, int k_max, double r_max) {
  const KdTree tree(X);
  std::vector<std::vector<int>> lists(std::size_t(X.cols()));
  for (Eigen::Index i = 0; i < X.cols(); ++i) lists[std::size_t(i)] = nearest_neighbors(tree, int(i), k_max, r_max);
  return lists;
}

inline TrainingPairs build_pairs(const PointCloud& X, const Eigen::MatrixXd& Y, int k_max, double r_max,
                                 NeighborStats* stats = nullptr) {
  if (X.cols() != Y.cols()) throw ShapeError("build_pairs: X and Y have different sample counts");
  if (X.cols() < 2) throw InvalidArgument("build_pairs: need at least two samples");
  const auto lists = neighbor_lists(X, k_max, r_max);
  std::size_t total = 0;
  for (const auto& l : lists) total += l.size();
  if (total == 0) {
    throw EmptyTrainingSet("no admissible neighbor pairs; increase r_max or k_max");
  }
  TrainingPairs D;
  D.pairs.reserve(total);
  D.base.resize(X.rows(), Eigen::Index(total));
  D.direction.resize(X.rows(), Eigen::Index(total));
  D.delta.resize(Y.rows(), Eigen::Index(total));
  double dmin = kInfinity, dmax = 0.0, dsum = 0.0;
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < lists.size(); ++i) {
    for (int j : lists[i]) {
      const Eigen::VectorXd dx = X.col(j) - X.col(Eigen::Index(i));
      const double norm = dx.norm();
      D.pairs.push_back({int(i), j});
      D.base.col(col) = X.col(Eigen::Index(i));
      D.direction.col(col) = dx / norm;
      D.delta.col(col) = (Y.col(j) - Y.col(Eigen::Index(i))) / norm;
      dmin = std::min(dmin, norm);
      dmax = std::max(dmax, norm);
      dsum += norm;
      ++col;
    }
  }
  if (stats) *stats = {dmin, dsum / double(total), dmax};
  return D;
}

/// Applies a permutation to D: entry t of the result is entry perm[t] of D.
inline TrainingPairs permute_pairs(const TrainingPairs& D, const std::vector<std::size_t>& perm) {
  TrainingPairs out;
  out.pairs.resize(perm.size());
  out.base.resize(D.base.rows(), Eigen::Index(perm.size()));
  out.direction.resize(D.direction.rows(), Eigen::Index(perm.size()));
  out.delta.resize(D.delta.rows(), Eigen::Index(perm.size()));
  for (std::size_t t = 0; t < perm.size(); ++t) {
    const auto s = perm[t];
    out.pairs[t] = D.pairs[s];
    out.base.col(Eigen::Index(t)) = D.base.col(Eigen::Index(s));
    out.direction.col(Eigen::Index(t)) = D.direction.col(Eigen::Index(s));
    out.delta.col(Eigen::Index(t)) = D.delta.col(Eigen::Index(s));
  }
  return out;
}

template <class Rng>
TrainingPairs shuffle_pairs(const TrainingPairs& D, Rng& rng) {
  std::vector<std::size_t> perm(D.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  return permute_pairs(D, perm);
}

inline TrainingPairs shuffle_pairs(const TrainingPairs& D, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return shuffle_pairs(D, rng);
}

}  // namespace jacest
