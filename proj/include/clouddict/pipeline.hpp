#ifndef CLOUDDICT_PIPELINE_HPP
#define CLOUDDICT_PIPELINE_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "clouddict/basis.hpp"
#include "clouddict/cloud_io.hpp"
#include "clouddict/geometry.hpp"
#include "clouddict/pursuit.hpp"

namespace clouddict {

struct DenoiseParams {
  double radius = 0.1;
  CenterStrategy center_strategy = CenterStrategy::poisson_stride;
  double center_spacing = 0.5;  // poisson_stride covering radius, as a fraction of `radius`
  PursuitParams pursuit;
  Solver solver = Solver::relaxed;
  int min_patch_points = 3;
  // When > 0, the relaxed solver uses a per-patch weight
  // lambda = lambda_scale * (noise_sigma / scale) * sqrt(patch points)
  // instead of pursuit.lambda.
  double noise_sigma = 0.0;
  double lambda_scale = 1.5;
  int threads = 0;

  void validate() const;
};

struct DenoiseReport {
  std::size_t n_patches = 0;
  std::size_t n_skipped = 0;
  std::size_t n_uncovered = 0;
  std::vector<std::uint32_t> per_point_coverage;
  double mean_residual = 0.0;  // mean RMS coding residual per patch, world units
};

struct DenoiseResult {
  PointCloud cloud;
  DenoiseReport report;
};

/// Extracts patches at the selected centers, codes each against `dict`,
/// maps the reconstructed heights back to world space, and replaces every
/// point by the mean of its estimates. Uncovered points are passed through.
/// Output is independent of `params.threads`.
DenoiseResult denoise(const PointCloud& cloud, const DictionaryD& dict, const DenoiseParams& params);

/// Patches at the selected centers with at least `min_points` members;
/// degenerate neighborhoods are dropped. Used to build training sets.
std::vector<Patch> extract_patches(const PointCloud& cloud, double radius, CenterStrategy strategy, double spacing,
                                   int min_points, int threads = 0);

/// Flat `key value` lines.
std::string to_key_value(const DenoiseReport& report);

/// Symmetric Chamfer distance: (mean NN distance a->b + mean b->a) / 2.
double chamfer_distance(const PointCloud& a, const PointCloud& b, int threads = 0);

/// Unsigned distance to the analytic surface of a synthetic shape.
double distance_to_surface(const Eigen::Vector3d& p, Shape shape);

double rmse_to_surface(const PointCloud& cloud, Shape shape);

}  // namespace clouddict

#endif  // CLOUDDICT_PIPELINE_HPP
