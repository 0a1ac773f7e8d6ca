#include "clouddict/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "clouddict/errors.hpp"

namespace clouddict {

namespace {

void check_query(const PointCloud& cloud, Index center, double radius) {
  if (center >= cloud.size()) throw InvalidArgument("center index " + std::to_string(center) + " out of range");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidArgument("radius must be finite and > 0");
}

}  // namespace

std::vector<Index> neighbors(const KdTree& tree, const PointCloud& cloud, Index center, double radius) {
  check_query(cloud, center, radius);
  return tree.radius_search(cloud.points[center], radius);
}

std::vector<Index> neighbors(const PointCloud& cloud, Index center, double radius) {
  return neighbors(KdTree(cloud.points), cloud, center, radius);
}

Eigen::Vector3d canonical_sign(const Eigen::Vector3d& v) {
  int axis = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(v[i]) > std::abs(v[axis])) axis = i;
  return v[axis] < 0.0 ? Eigen::Vector3d(-v) : v;
}

Frame fit_frame(std::span<const Eigen::Vector3d> points) {
  if (points.size() < 3)
    throw DegeneratePatch("frame fit needs at least 3 points, got " + std::to_string(points.size()));

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = p - centroid;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d& lambda = eig.eigenvalues();  // ascending
  if (!(lambda[2] > 0.0) || lambda[1] <= 1e-12 * lambda[2])
    throw DegeneratePatch("points are collinear or coincident; cannot fit a plane");

  Frame frame;
  frame.origin = centroid;
  frame.normal = canonical_sign(eig.eigenvectors().col(0).normalized());
  Eigen::Vector3d u = eig.eigenvectors().col(2);
  u -= u.dot(frame.normal) * frame.normal;
  frame.tangent_u = canonical_sign(u.normalized());
  frame.tangent_v = frame.normal.cross(frame.tangent_u).normalized();
  return frame;
}

Patch make_patch(const PointCloud& cloud, std::vector<Index> indices, double radius) {
  std::vector<Eigen::Vector3d> local;
  local.reserve(indices.size());
  for (auto i : indices) local.push_back(cloud.points[i]);

  Patch patch;
  patch.frame = fit_frame(local);
  const auto n = static_cast<Eigen::Index>(local.size());
  Eigen::Matrix3Xd coords(3, n);
  const Eigen::Matrix3d rt = patch.frame.rotation().transpose();
  for (Eigen::Index i = 0; i < n; ++i) coords.col(i) = rt * (local[i] - patch.frame.origin);

  const double extent = coords.topRows<2>().cwiseAbs().maxCoeff();
  patch.scale = std::max(radius, extent);
  patch.grid = coords.topRows<2>().transpose() / patch.scale;
  patch.values = coords.row(2).transpose() / patch.scale;
  patch.indices = std::move(indices);
  return patch;
}

Patch extract_patch(const KdTree& tree, const PointCloud& cloud, Index center, double radius) {
  return make_patch(cloud, neighbors(tree, cloud, center, radius), radius);
}

Patch extract_patch(const PointCloud& cloud, Index center, double radius) {
  return extract_patch(KdTree(cloud.points), cloud, center, radius);
}

std::vector<Eigen::Vector3d> patch_to_world(const Patch& patch, const Eigen::Ref<const Eigen::VectorXd>& new_values) {
  if (new_values.size() != patch.grid.rows())
    throw DimensionMismatch("patch_to_world: " + std::to_string(new_values.size()) + " values for " +
                            std::to_string(patch.grid.rows()) + " grid points");
  const Frame& f = patch.frame;
  std::vector<Eigen::Vector3d> out;
  out.reserve(static_cast<std::size_t>(new_values.size()));
  for (Eigen::Index i = 0; i < new_values.size(); ++i)
    out.push_back(f.origin +
                  patch.scale * (patch.grid(i, 0) * f.tangent_u + patch.grid(i, 1) * f.tangent_v + new_values[i] * f.normal));
  return out;
}

std::vector<Index> select_patch_centers(const KdTree& tree, const PointCloud& cloud, double radius,
                                        CenterStrategy strategy) {
  if (!(radius > 0.0)) throw InvalidArgument("radius must be > 0");
  std::vector<Index> centers;
  const auto n = static_cast<Index>(cloud.size());
  if (strategy == CenterStrategy::all) {
    centers.resize(n);
    for (Index i = 0; i < n; ++i) centers[i] = i;
    return centers;
  }
  std::vector<char> covered(n, 0);
  for (Index i = 0; i < n; ++i) {
    if (covered[i]) continue;
    centers.push_back(i);
    for (auto j : tree.radius_search(cloud.points[i], radius)) covered[j] = 1;
  }
  return centers;
}

std::vector<Index> select_patch_centers(const PointCloud& cloud, double radius, CenterStrategy strategy) {
  return select_patch_centers(KdTree(cloud.points), cloud, radius, strategy);
}

}  // namespace clouddict
