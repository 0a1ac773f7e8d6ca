#ifndef CLOUDDICT_DICTIONARY_IO_HPP
#define CLOUDDICT_DICTIONARY_IO_HPP

#include <filesystem>
#include <iosfwd>

#include "clouddict/basis.hpp"

namespace clouddict {

// CDICT v1 text format:
//   CDICT v1
//   basis cos K K'
//   atoms M
//   N rows of M coefficients (row = flat basis index)
// Coefficients are written in shortest round-trip form, so a read after a
// write reproduces the dictionary exactly.

void write_dictionary(const DictionaryD& dict, std::ostream& out);
void write_dictionary(const DictionaryD& dict, const std::filesystem::path& path);

/// Throws ParseError naming the offending line.
DictionaryD parse_dictionary(std::istream& in);
DictionaryD read_dictionary(const std::filesystem::path& path);

}  // namespace clouddict

#endif  // CLOUDDICT_DICTIONARY_IO_HPP
