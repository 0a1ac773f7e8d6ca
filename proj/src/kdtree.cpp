#include "clouddict/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace clouddict {

KdTree::KdTree(std::span<const Eigen::Vector3d> points, int leaf_size)
    : points_(points.begin(), points.end()), order_(points.size()), leaf_size_(std::max(1, leaf_size)) {
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{0.0, begin, end, -1, -1, -1});
  if (end - begin <= static_cast<std::uint32_t>(leaf_size_)) return id;

  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (auto i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident

  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = points_[a][axis], pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  // Left holds coordinates <= split, right holds coordinates >= split.
  const double split = points_[order_[mid]][axis];
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::vector<std::uint32_t> KdTree::radius_search(const Eigen::Vector3d& query, double radius) const {
  std::vector<std::uint32_t> out;
  if (nodes_.empty()) return out;
  const double r2 = radius * radius;
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (node.axis < 0) {
      for (auto i = node.begin; i < node.end; ++i) {
        const auto idx = order_[i];
        if ((points_[idx] - query).squaredNorm() <= r2) out.push_back(idx);
      }
      continue;
    }
    // A subtree is pruned only when every point in it provably has a squared
    // distance > r2 under the same rounding as the leaf test.
    const double diff = query[node.axis] - node.split;
    const bool prune_left = diff > 0.0 && diff * diff > r2;
    const bool prune_right = diff < 0.0 && diff * diff > r2;
    if (!prune_left) stack.push_back(node.left);
    if (!prune_right) stack.push_back(node.right);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::pair<std::uint32_t, double> KdTree::nearest(const Eigen::Vector3d& query) const {
  std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
  double best_d2 = std::numeric_limits<double>::infinity();
  if (nodes_.empty()) return {best, best_d2};
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (node.axis < 0) {
      for (auto i = node.begin; i < node.end; ++i) {
        const auto idx = order_[i];
        const double d2 = (points_[idx] - query).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
          best_d2 = d2;
          best = idx;
        }
      }
      continue;
    }
    const double diff = query[node.axis] - node.split;
    const auto near = diff <= 0.0 ? node.left : node.right;
    const auto far = diff <= 0.0 ? node.right : node.left;
    // Far side visited first so the near side pops next.
    if (diff * diff <= best_d2) stack.push_back(far);
    stack.push_back(near);
  }
  return {best, best_d2};
}

}  // namespace clouddict
