#ifndef CLOUDDICT_CLOUD_IO_HPP
#define CLOUDDICT_CLOUD_IO_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace clouddict {

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::string name;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

enum class CloudFormat { xyz, ply_ascii };

/// ".ply" maps to ASCII PLY, everything else to XYZ.
CloudFormat format_from_path(const std::filesystem::path& path);

/// Parses vertex positions in file order. Throws ParseError (with line number)
/// on malformed input and UnsupportedFormat on binary PLY.
PointCloud parse_cloud(std::istream& in, CloudFormat format);
PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud read_cloud(const std::filesystem::path& path);

/// Writes shortest round-trip decimal representations, so reading the file
/// back reproduces every coordinate bit for bit.
void write_cloud(const PointCloud& cloud, std::ostream& out, CloudFormat format);
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);

enum class Shape { plane, sphere, saddle };

Shape parse_shape(std::string_view name);
std::string_view shape_name(Shape shape);

/// Height of the synthetic saddle z = (x^2 - y^2) / 2.
inline double saddle_height(double x, double y) { return 0.5 * (x * x - y * y); }

/// n points sampled from an analytic surface, deterministic in `seed`:
///  - plane:  (x, y) uniform on [-1,1]^2, z = 0
///  - sphere: uniform on the unit sphere (z uniform on [-1,1], azimuth uniform)
///  - saddle: (x, y) uniform on [-1,1]^2, z = saddle_height(x, y)
PointCloud synth_cloud(Shape shape, std::size_t n, std::uint64_t seed);

struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Adds i.i.d. N(0, sigma^2) to every coordinate.
PointCloud add_noise(const PointCloud& cloud, const NoiseSpec& spec);

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace clouddict

#endif  // CLOUDDICT_CLOUD_IO_HPP
