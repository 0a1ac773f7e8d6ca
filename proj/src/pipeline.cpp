#include "clouddict/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "clouddict/errors.hpp"
#include "clouddict/kdtree.hpp"
#include "clouddict/parallel.hpp"

namespace clouddict {

namespace {

struct PatchEstimate {
  std::vector<Index> indices;
  std::vector<Eigen::Vector3d> points;
  double rms_residual = 0.0;
};

double covering_radius(double radius, CenterStrategy strategy, double spacing) {
  return strategy == CenterStrategy::all ? radius : radius * spacing;
}

std::optional<Patch> try_patch(const KdTree& tree, const PointCloud& cloud, Index center, double radius,
                               std::size_t min_points) {
  auto members = neighbors(tree, cloud, center, radius);
  if (members.size() < min_points) return std::nullopt;
  try {
    return make_patch(cloud, std::move(members), radius);
  } catch (const DegeneratePatch&) {
    return std::nullopt;
  }
}

}  // namespace

void DenoiseParams::validate() const {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidArgument("radius must be finite and > 0");
  if (!(center_spacing > 0.0 && center_spacing <= 1.0)) throw InvalidArgument("center_spacing must lie in (0, 1]");
  if (min_patch_points < 3) throw InvalidArgument("min_patch_points must be >= 3");
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be >= 0");
  if (!(lambda_scale > 0.0)) throw InvalidArgument("lambda_scale must be > 0");
  pursuit.validate();
  if (solver == Solver::relaxed && noise_sigma == 0.0 && !(pursuit.lambda > 0.0))
    throw InvalidArgument("relaxed solver needs lambda > 0 or a noise sigma");
}

DenoiseResult denoise(const PointCloud& cloud, const DictionaryD& dict, const DenoiseParams& params) {
  params.validate();
  if (cloud.empty()) throw InvalidArgument("cannot denoise an empty cloud");

  const KdTree tree(cloud.points);
  const auto centers = select_patch_centers(
      tree, cloud, covering_radius(params.radius, params.center_strategy, params.center_spacing), params.center_strategy);
  const std::size_t min_points =
      static_cast<std::size_t>(std::max(params.min_patch_points, params.pursuit.sparsity_L + 1));

  std::vector<std::optional<PatchEstimate>> estimates(centers.size());
  parallel_for(centers.size(), params.threads, [&](std::size_t c) {
    auto patch = try_patch(tree, cloud, centers[c], params.radius, min_points);
    if (!patch) return;
    PursuitParams pursuit = params.pursuit;
    if (params.solver == Solver::relaxed && params.noise_sigma > 0.0)
      pursuit.lambda = params.lambda_scale * (params.noise_sigma / patch->scale) *
                       std::sqrt(static_cast<double>(patch->size()));
    const CodedPatch coded = code_patch(*patch, dict, pursuit, params.solver);
    const Eigen::VectorXd heights = reconstruct_signal(dict, coded.code, patch->grid);
    PatchEstimate est;
    est.points = patch_to_world(*patch, heights);
    est.rms_residual = patch->scale * coded.residual.norm() / std::sqrt(static_cast<double>(patch->size()));
    est.indices = std::move(patch->indices);
    estimates[c] = std::move(est);
  });

  // Sequential merge in center order keeps the sums independent of threading.
  DenoiseResult result;
  auto& report = result.report;
  report.per_point_coverage.assign(cloud.size(), 0);
  std::vector<Eigen::Vector3d> sums(cloud.size(), Eigen::Vector3d::Zero());
  double residual_sum = 0.0;
  for (const auto& est : estimates) {
    if (!est) {
      ++report.n_skipped;
      continue;
    }
    ++report.n_patches;
    residual_sum += est->rms_residual;
    for (std::size_t k = 0; k < est->indices.size(); ++k) {
      sums[est->indices[k]] += est->points[k];
      ++report.per_point_coverage[est->indices[k]];
    }
  }
  report.mean_residual = report.n_patches ? residual_sum / static_cast<double>(report.n_patches) : 0.0;

  result.cloud.name = cloud.name;
  result.cloud.points.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto count = report.per_point_coverage[i];
    if (count == 0) {
      result.cloud.points[i] = cloud.points[i];
      ++report.n_uncovered;
    } else {
      result.cloud.points[i] = sums[i] / static_cast<double>(count);
    }
  }
  return result;
}

std::vector<Patch> extract_patches(const PointCloud& cloud, double radius, CenterStrategy strategy, double spacing,
                                   int min_points, int threads) {
  if (!(radius > 0.0)) throw InvalidArgument("radius must be > 0");
  if (!(spacing > 0.0 && spacing <= 1.0)) throw InvalidArgument("spacing must lie in (0, 1]");
  if (cloud.empty()) return {};
  const KdTree tree(cloud.points);
  const auto centers = select_patch_centers(tree, cloud, covering_radius(radius, strategy, spacing), strategy);
  const auto min_pts = static_cast<std::size_t>(std::max(3, min_points));
  std::vector<std::optional<Patch>> found(centers.size());
  parallel_for(centers.size(), threads,
               [&](std::size_t c) { found[c] = try_patch(tree, cloud, centers[c], radius, min_pts); });
  std::vector<Patch> patches;
  for (auto& p : found)
    if (p) patches.push_back(std::move(*p));
  return patches;
}

std::string to_key_value(const DenoiseReport& report) {
  std::uint64_t total = 0;
  std::uint32_t lo = 0, hi = 0;
  if (!report.per_point_coverage.empty()) {
    lo = *std::min_element(report.per_point_coverage.begin(), report.per_point_coverage.end());
    hi = *std::max_element(report.per_point_coverage.begin(), report.per_point_coverage.end());
  }
  for (auto c : report.per_point_coverage) total += c;
  const double mean =
      report.per_point_coverage.empty() ? 0.0 : static_cast<double>(total) / report.per_point_coverage.size();
  std::ostringstream out;
  out << "n_points " << report.per_point_coverage.size() << '\n'
      << "n_patches " << report.n_patches << '\n'
      << "n_skipped " << report.n_skipped << '\n'
      << "n_uncovered " << report.n_uncovered << '\n'
      << "coverage_total " << total << '\n'
      << "coverage_min " << lo << '\n'
      << "coverage_max " << hi << '\n'
      << "coverage_mean " << format_double(mean) << '\n'
      << "mean_residual " << format_double(report.mean_residual) << '\n';
  return out.str();
}

double chamfer_distance(const PointCloud& a, const PointCloud& b, int threads) {
  if (a.empty() || b.empty()) throw InvalidArgument("chamfer distance needs two non-empty clouds");
  auto directed = [threads](const PointCloud& from, const PointCloud& to) {
    const KdTree tree(to.points);
    std::vector<double> d(from.size());
    parallel_for(from.size(), threads, [&](std::size_t i) { d[i] = std::sqrt(tree.nearest(from.points[i]).second); });
    double sum = 0.0;
    for (double v : d) sum += v;
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * (directed(a, b) + directed(b, a));
}

double distance_to_surface(const Eigen::Vector3d& p, Shape shape) {
  switch (shape) {
    case Shape::plane: return std::abs(p.z());
    case Shape::sphere: return std::abs(p.norm() - 1.0);
    case Shape::saddle: break;
  }
  // Closest point on z = (x^2 - y^2)/2 by damped Newton on the squared
  // distance over the parameter plane, starting from (p.x, p.y).
  auto sq_dist = [&](const Eigen::Vector2d& s) {
    return (Eigen::Vector3d(s.x(), s.y(), saddle_height(s.x(), s.y())) - p).squaredNorm();
  };
  Eigen::Vector2d s(p.x(), p.y());
  double f = sq_dist(s);
  for (int it = 0; it < 100; ++it) {
    const double dz = saddle_height(s.x(), s.y()) - p.z();
    const Eigen::Vector2d grad(s.x() - p.x() + dz * s.x(), s.y() - p.y() - dz * s.y());
    Eigen::Matrix2d hess;
    hess << 1.0 + s.x() * s.x() + dz, -s.x() * s.y(), -s.x() * s.y(), 1.0 + s.y() * s.y() - dz;
    Eigen::Vector2d step;
    Eigen::LLT<Eigen::Matrix2d> llt(hess);
    if (llt.info() == Eigen::Success)
      step = -llt.solve(grad);
    else
      step = -grad;
    double t = 1.0;
    Eigen::Vector2d next = s + step;
    double f_next = sq_dist(next);
    while (f_next > f && t > 1e-12) {
      t *= 0.5;
      next = s + t * step;
      f_next = sq_dist(next);
    }
    if (f_next > f) break;
    const bool done = (next - s).norm() <= 1e-15 * (1.0 + s.norm());
    s = next;
    f = f_next;
    if (done) break;
  }
  return std::sqrt(f);
}

double rmse_to_surface(const PointCloud& cloud, Shape shape) {
  if (cloud.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : cloud.points) {
    const double d = distance_to_surface(p, shape);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(cloud.size()));
}

}  // namespace clouddict
