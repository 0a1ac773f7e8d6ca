#ifndef CLOUDDICT_GEOMETRY_HPP
#define CLOUDDICT_GEOMETRY_HPP

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "clouddict/cloud_io.hpp"
#include "clouddict/kdtree.hpp"

namespace clouddict {

using Index = std::uint32_t;

/// Right-handed orthonormal tangent frame {tangent_u, tangent_v, normal}
/// anchored at the neighborhood centroid.
struct Frame {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d tangent_u = Eigen::Vector3d::UnitX();
  Eigen::Vector3d tangent_v = Eigen::Vector3d::UnitY();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();

  Eigen::Matrix3d rotation() const {
    Eigen::Matrix3d r;
    r << tangent_u, tangent_v, normal;
    return r;
  }
};

/// One local signal: heights `values` (w) sampled at `grid` (u, v), both in
/// units of `scale`, with grid rows inside [-1,1]^2.
struct Patch {
  Frame frame;
  Eigen::MatrixX2d grid;
  Eigen::VectorXd values;
  double scale = 1.0;
  std::vector<Index> indices;

  Eigen::Index size() const { return values.size(); }
};

/// Indices within `radius` of point `center`, inclusive, ascending.
std::vector<Index> neighbors(const KdTree& tree, const PointCloud& cloud, Index center, double radius);
std::vector<Index> neighbors(const PointCloud& cloud, Index center, double radius);

/// Flips `v` so its largest-magnitude component is positive (first axis wins ties).
Eigen::Vector3d canonical_sign(const Eigen::Vector3d& v);

/// PCA plane fit. The normal is the smallest-eigenvalue eigenvector of the
/// covariance and tangent_u the largest, both sign-canonicalized;
/// tangent_v = normal x tangent_u. Throws DegeneratePatch for fewer than
/// three points or a covariance of rank < 2.
Frame fit_frame(std::span<const Eigen::Vector3d> points);

/// Expresses the given neighbors of `cloud` in their PCA frame.
///
/// Coordinates are divided by scale = max(radius, largest |u| or |v| offset
/// from the centroid), which keeps the grid inside [-1,1]^2 even when the
/// centroid is off the ball center.
Patch make_patch(const PointCloud& cloud, std::vector<Index> indices, double radius);

Patch extract_patch(const KdTree& tree, const PointCloud& cloud, Index center, double radius);
Patch extract_patch(const PointCloud& cloud, Index center, double radius);

/// origin + scale * (u * tangent_u + v * tangent_v + w * normal) per grid row.
std::vector<Eigen::Vector3d> patch_to_world(const Patch& patch, const Eigen::Ref<const Eigen::VectorXd>& new_values);

enum class CenterStrategy { all, poisson_stride };

/// `all` returns every index. `poisson_stride` walks points in index order and
/// selects every point not yet within `radius` of a selected center, so every
/// point ends up covered.
std::vector<Index> select_patch_centers(const KdTree& tree, const PointCloud& cloud, double radius,
                                        CenterStrategy strategy);
std::vector<Index> select_patch_centers(const PointCloud& cloud, double radius, CenterStrategy strategy);

}  // namespace clouddict

#endif  // CLOUDDICT_GEOMETRY_HPP
