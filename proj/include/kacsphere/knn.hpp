#ifndef KACSPHERE_KNN_HPP
#define KACSPHERE_KNN_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <vector>

#include "core/error.hpp"

namespace kacsphere {

/// Static kd-tree over n points of dimension dim (row-major), for k-nearest-neighbour queries.
class KdTree {
 public:
  KdTree(std::span<const double> points, int dim, std::size_t leaf_size = 16)
      : pts_(points), dim_(dim), leaf_(leaf_size) {
    if (dim < 1 || points.size() % std::size_t(dim) != 0) throw ShapeError("points must be n x dim");
    const std::size_t n = points.size() / std::size_t(dim);
    idx_.resize(n);
    std::iota(idx_.begin(), idx_.end(), std::size_t(0));
    nodes_.reserve(2 * n / std::max<std::size_t>(1, leaf_) + 2);
    if (n > 0) build(0, n);
  }

  std::size_t size() const { return idx_.size(); }

  /// Distance from point `self` to its k-th nearest other point.
  double kth_neighbour_distance(std::size_t self, int k) const {
    if (k < 1 || std::size_t(k) >= size()) throw ParameterError("k must be in [1, n-1]");
    std::priority_queue<double> heap;
    search(0, &pts_[self * std::size_t(dim_)], self, std::size_t(k), heap);
    return std::sqrt(heap.top());
  }

 private:
  struct Node {
    std::size_t begin, end;
    int axis = -1;
    double split = 0.0;
    std::size_t left = 0, right = 0;
  };

  double coord(std::size_t i, int a) const { return pts_[i * std::size_t(dim_) + std::size_t(a)]; }

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= leaf_) return id;
    int axis = 0;
    double best = -1.0;
    for (int a = 0; a < dim_; ++a) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t i = begin; i < end; ++i) {
        lo = std::min(lo, coord(idx_[i], a));
        hi = std::max(hi, coord(idx_[i], a));
      }
      if (hi - lo > best) {
        best = hi - lo;
        axis = a;
      }
    }
    if (!(best > 0.0)) return id;
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(idx_.begin() + std::ptrdiff_t(begin), idx_.begin() + std::ptrdiff_t(mid),
                     idx_.begin() + std::ptrdiff_t(end),
                     [&](std::size_t x, std::size_t y) { return coord(x, axis) < coord(y, axis); });
    const double split = coord(idx_[mid], axis);
    const std::size_t l = build(begin, mid);
    const std::size_t r = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  void search(std::size_t node, const double* q, std::size_t self, std::size_t k,
              std::priority_queue<double>& heap) const {
    const Node& nd = nodes_[node];
    if (nd.axis < 0) {
      for (std::size_t i = nd.begin; i < nd.end; ++i) {
        const std::size_t p = idx_[i];
        if (p == self) continue;
        double d2 = 0.0;
        for (int a = 0; a < dim_; ++a) {
          const double t = coord(p, a) - q[a];
          d2 += t * t;
        }
        if (heap.size() < k) heap.push(d2);
        else if (d2 < heap.top()) {
          heap.pop();
          heap.push(d2);
        }
      }
      return;
    }
    const double diff = q[nd.axis] - nd.split;
    const std::size_t near = diff < 0.0 ? nd.left : nd.right;
    const std::size_t far = diff < 0.0 ? nd.right : nd.left;
    search(near, q, self, k, heap);
    if (heap.size() < k || diff * diff <= heap.top()) search(far, q, self, k, heap);
  }

  std::span<const double> pts_;
  int dim_;
  std::size_t leaf_;
  std::vector<std::size_t> idx_;
  std::vector<Node> nodes_;
};

}  // namespace kacsphere

#endif
