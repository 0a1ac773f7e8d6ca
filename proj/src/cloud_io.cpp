#include "clouddict/cloud_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "clouddict/errors.hpp"
#include "clouddict/random.hpp"

namespace clouddict {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

double parse_coordinate(std::string_view token, std::size_t line_no) {
  double value = 0.0;
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw ParseError(line_no, "invalid number '" + std::string(token) + "'");
  if (!std::isfinite(value)) throw ParseError(line_no, "non-finite coordinate '" + std::string(token) + "'");
  return value;
}

bool is_blank(std::string_view line) { return split_ws(line).empty(); }

PointCloud parse_xyz(std::istream& in) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty() || tokens.front().front() == '#') continue;
    if (tokens.size() != 3)
      throw ParseError(line_no, "expected 3 coordinates, found " + std::to_string(tokens.size()));
    cloud.points.emplace_back(parse_coordinate(tokens[0], line_no), parse_coordinate(tokens[1], line_no),
                              parse_coordinate(tokens[2], line_no));
  }
  return cloud;
}

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<std::string> properties;
  bool has_list = false;
};

PointCloud parse_ply(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || split_ws(line) != std::vector<std::string_view>{"ply"})
    throw ParseError(1, "missing 'ply' magic line");

  std::vector<PlyElement> elements;
  bool saw_format = false;
  bool saw_end = false;
  while (next_line()) {
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    const auto& key = tokens.front();
    if (key == "comment" || key == "obj_info") continue;
    if (key == "format") {
      if (tokens.size() != 3) throw ParseError(line_no, "malformed format line");
      if (tokens[1] == "binary_little_endian" || tokens[1] == "binary_big_endian")
        throw UnsupportedFormat("binary PLY is not supported (" + std::string(tokens[1]) + ")");
      if (tokens[1] != "ascii") throw ParseError(line_no, "unknown PLY format '" + std::string(tokens[1]) + "'");
      saw_format = true;
    } else if (key == "element") {
      if (tokens.size() != 3) throw ParseError(line_no, "malformed element line");
      PlyElement element;
      element.name = tokens[1];
      std::size_t count = 0;
      const auto [ptr, ec] = std::from_chars(tokens[2].data(), tokens[2].data() + tokens[2].size(), count);
      if (ec != std::errc() || ptr != tokens[2].data() + tokens[2].size())
        throw ParseError(line_no, "invalid element count '" + std::string(tokens[2]) + "'");
      element.count = count;
      elements.push_back(std::move(element));
    } else if (key == "property") {
      if (elements.empty()) throw ParseError(line_no, "property before any element");
      if (tokens.size() >= 2 && tokens[1] == "list") {
        elements.back().has_list = true;
        elements.back().properties.emplace_back(tokens.back());
      } else {
        if (tokens.size() != 3) throw ParseError(line_no, "malformed property line");
        elements.back().properties.emplace_back(tokens[2]);
      }
    } else if (key == "end_header") {
      saw_end = true;
      break;
    } else {
      throw ParseError(line_no, "unexpected header keyword '" + std::string(key) + "'");
    }
  }
  if (!saw_format) throw ParseError(line_no, "missing format line");
  if (!saw_end) throw ParseError(line_no, "missing end_header");

  PointCloud cloud;
  bool found_vertex = false;
  for (const auto& element : elements) {
    if (element.name != "vertex") {
      // Rows of other elements are skipped line by line.
      for (std::size_t r = 0; r < element.count; ++r) {
        do {
          if (!next_line())
            throw ParseError(line_no, "unexpected end of file in element '" + element.name + "'");
        } while (is_blank(line));
      }
      continue;
    }
    if (found_vertex) throw ParseError(line_no, "duplicate vertex element");
    found_vertex = true;
    if (element.has_list) throw ParseError(line_no, "list properties on vertex are not supported");
    std::ptrdiff_t ix = -1, iy = -1, iz = -1;
    for (std::size_t p = 0; p < element.properties.size(); ++p) {
      const auto& name = element.properties[p];
      if (name == "x") ix = static_cast<std::ptrdiff_t>(p);
      if (name == "y") iy = static_cast<std::ptrdiff_t>(p);
      if (name == "z") iz = static_cast<std::ptrdiff_t>(p);
    }
    if (ix < 0 || iy < 0 || iz < 0) throw ParseError(0, "vertex element lacks x/y/z properties");
    cloud.points.reserve(element.count);
    for (std::size_t r = 0; r < element.count; ++r) {
      do {
        if (!next_line())
          throw ParseError(line_no + 1, "missing vertex row " + std::to_string(r + 1) + " of " +
                                            std::to_string(element.count));
      } while (is_blank(line));
      const auto tokens = split_ws(line);
      if (tokens.size() != element.properties.size())
        throw ParseError(line_no, "vertex row " + std::to_string(r + 1) + " has " + std::to_string(tokens.size()) +
                                      " values, expected " + std::to_string(element.properties.size()));
      cloud.points.emplace_back(parse_coordinate(tokens[ix], line_no), parse_coordinate(tokens[iy], line_no),
                                parse_coordinate(tokens[iz], line_no));
    }
  }
  if (!found_vertex) throw ParseError(0, "no vertex element in header");
  return cloud;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

CloudFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".ply" ? CloudFormat::ply_ascii : CloudFormat::xyz;
}

PointCloud parse_cloud(std::istream& in, CloudFormat format) {
  return format == CloudFormat::xyz ? parse_xyz(in) : parse_ply(in);
}

PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  PointCloud cloud = parse_cloud(in, format);
  cloud.name = path.stem().string();
  return cloud;
}

PointCloud read_cloud(const std::filesystem::path& path) { return read_cloud(path, format_from_path(path)); }

void write_cloud(const PointCloud& cloud, std::ostream& out, CloudFormat format) {
  if (format == CloudFormat::ply_ascii) {
    out << "ply\nformat ascii 1.0\n";
    if (!cloud.name.empty()) out << "comment " << cloud.name << '\n';
    out << "element vertex " << cloud.size() << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  }
  for (const auto& p : cloud.points)
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  std::ostringstream buffer;
  write_cloud(cloud, buffer, format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << buffer.str();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Shape parse_shape(std::string_view name) {
  if (name == "plane") return Shape::plane;
  if (name == "sphere") return Shape::sphere;
  if (name == "saddle") return Shape::saddle;
  throw InvalidArgument("unknown shape '" + std::string(name) + "' (expected plane, sphere or saddle)");
}

std::string_view shape_name(Shape shape) {
  switch (shape) {
    case Shape::plane: return "plane";
    case Shape::sphere: return "sphere";
    case Shape::saddle: return "saddle";
  }
  return "";
}

PointCloud synth_cloud(Shape shape, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("synth_cloud needs n >= 1");
  Rng rng(seed);
  PointCloud cloud;
  cloud.name = std::string(shape_name(shape));
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (shape) {
      case Shape::plane: {
        const double x = rng.uniform(-1.0, 1.0);
        const double y = rng.uniform(-1.0, 1.0);
        cloud.points.emplace_back(x, y, 0.0);
        break;
      }
      case Shape::sphere: {
        const double z = rng.uniform(-1.0, 1.0);
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        Eigen::Vector3d p(r * std::cos(phi), r * std::sin(phi), z);
        cloud.points.push_back(p.normalized());
        break;
      }
      case Shape::saddle: {
        const double x = rng.uniform(-1.0, 1.0);
        const double y = rng.uniform(-1.0, 1.0);
        cloud.points.emplace_back(x, y, saddle_height(x, y));
        break;
      }
    }
  }
  return cloud;
}

PointCloud add_noise(const PointCloud& cloud, const NoiseSpec& spec) {
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) throw InvalidArgument("noise sigma must be finite and >= 0");
  PointCloud noisy = cloud;
  if (spec.sigma == 0.0) return noisy;
  Rng rng(spec.seed);
  for (auto& p : noisy.points) {
    const double dx = rng.normal(), dy = rng.normal(), dz = rng.normal();
    p += spec.sigma * Eigen::Vector3d(dx, dy, dz);
  }
  return noisy;
}

}  // namespace clouddict
