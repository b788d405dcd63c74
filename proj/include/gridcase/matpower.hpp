#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "gridcase/network.hpp"

namespace gridcase::matpower {

using Row = std::vector<double>;
using Table = std::vector<Row>;

/// Raw contents of a MATPOWER `.m` case file, before any unit conversion.
struct CaseFile {
  std::string name;
  double base_mva = 100.0;
  Table bus;
  Table gen;
  Table branch;
  Table gencost;
  std::vector<std::string> genfuel;   // optional `mpc.genfuel` cell array
  std::vector<std::string> comments;  // `%` lines in file order, marker stripped

  bool operator==(const CaseFile&) const = default;
};

/// Syntax or schema problem, with 1-based position when it is known.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

CaseFile parse(std::string_view text);
CaseFile read_file(const std::string& path);

/// Semantic network in per unit. Throws DataError for unsupported content.
Network lower(const CaseFile& file);

/// Inverse of `lower`; `comments` become header comment lines.
CaseFile build(const Network& net, std::vector<std::string> comments = {});

/// Text form of a case file. `parse(write_case(c)) == c` holds exactly.
std::string write_case(const CaseFile& file);

std::string write(const Network& net, const std::vector<std::string>& provenance = {});

/// Shortest decimal text that parses back to the same double (`Inf`, `-Inf` for infinities).
std::string format_number(double value);

}  // namespace gridcase::matpower
