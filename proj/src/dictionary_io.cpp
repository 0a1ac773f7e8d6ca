#include "clouddict/dictionary_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "clouddict/cloud_io.hpp"

namespace clouddict {

namespace {

std::vector<std::string> tokens_of(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string t; ss >> t;) out.push_back(t);
  return out;
}

template <typename T>
bool parse_number(const std::string& token, T& value) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

}  // namespace

void write_dictionary(const DictionaryD& dict, std::ostream& out) {
  out << "CDICT v1\n";
  out << "basis cos " << dict.basis().max_freq_u << ' ' << dict.basis().max_freq_v << '\n';
  out << "atoms " << dict.atoms() << '\n';
  const auto& a = dict.coeffs();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index m = 0; m < a.cols(); ++m) {
      if (m) out << ' ';
      out << format_double(a(i, m));
    }
    out << '\n';
  }
}

void write_dictionary(const DictionaryD& dict, const std::filesystem::path& path) {
  std::ostringstream buffer;
  write_dictionary(dict, buffer);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << buffer.str();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

DictionaryD parse_dictionary(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next() || tokens_of(line) != std::vector<std::string>{"CDICT", "v1"})
    throw ParseError(1, "expected header line 'CDICT v1', found '" + line + "'");

  if (!next()) throw ParseError(2, "missing 'basis cos K K'' line");
  auto t = tokens_of(line);
  BasisSpec spec;
  if (t.size() != 4 || t[0] != "basis" || t[1] != "cos" || !parse_number(t[2], spec.max_freq_u) ||
      !parse_number(t[3], spec.max_freq_v) || spec.max_freq_u < 0 || spec.max_freq_v < 0)
    throw ParseError(2, "expected 'basis cos K K'', found '" + line + "'");

  if (!next()) throw ParseError(3, "missing 'atoms M' line");
  t = tokens_of(line);
  long atoms = 0;
  if (t.size() != 2 || t[0] != "atoms" || !parse_number(t[1], atoms) || atoms < 1)
    throw ParseError(3, "expected 'atoms M' with M >= 1, found '" + line + "'");

  Eigen::MatrixXd coeffs(spec.size(), atoms);
  for (Eigen::Index i = 0; i < coeffs.rows(); ++i) {
    if (!next())
      throw ParseError(line_no + 1, "missing coefficient row " + std::to_string(i + 1) + " of " +
                                        std::to_string(coeffs.rows()));
    t = tokens_of(line);
    if (static_cast<long>(t.size()) != atoms)
      throw ParseError(line_no, "expected " + std::to_string(atoms) + " coefficients, found " +
                                    std::to_string(t.size()));
    for (long m = 0; m < atoms; ++m) {
      double v = 0.0;
      if (!parse_number(t[m], v) || !std::isfinite(v))
        throw ParseError(line_no, "invalid coefficient '" + t[m] + "'");
      coeffs(i, m) = v;
    }
  }
  while (next())
    if (!tokens_of(line).empty()) throw ParseError(line_no, "trailing data after coefficient rows");
  return DictionaryD(spec, std::move(coeffs));
}

DictionaryD read_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return parse_dictionary(in);
}

}  // namespace clouddict
