#ifndef CLOUDDICT_KDTREE_HPP
#define CLOUDDICT_KDTREE_HPP

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace clouddict {

/// Static 3D kd-tree over a point set. Queries use the same squared-distance
/// arithmetic as a linear scan, so results match brute force exactly.
/// Immutable after construction; concurrent queries are safe.
class KdTree {
 public:
  explicit KdTree(std::span<const Eigen::Vector3d> points, int leaf_size = 16);

  /// Indices i with ||points[i] - query||^2 <= radius^2, sorted ascending.
  std::vector<std::uint32_t> radius_search(const Eigen::Vector3d& query, double radius) const;

  /// Index of the closest point and its squared distance (lowest index on ties).
  std::pair<std::uint32_t, double> nearest(const Eigen::Vector3d& query) const;

  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    double split = 0.0;
    std::uint32_t begin = 0, end = 0;  // range in order_ for leaves
    std::int32_t left = -1, right = -1;
    int axis = -1;  // -1 for leaves
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  int leaf_size_;
};

}  // namespace clouddict

#endif  // CLOUDDICT_KDTREE_HPP
