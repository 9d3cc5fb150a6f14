#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stlmtl/formula.hpp"

namespace stlmtl {

/// Raised for malformed formula text. Line and column are 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line, int column);

  int line() const { return line_; }
  int column() const { return column_; }
  /// Message without the position prefix.
  const std::string& detail() const { return detail_; }

 private:
  int line_;
  int column_;
  std::string detail_;
};

/// Parses the textual STL dialect.
///
///   formula    := disj ("=>" formula)?
///   disj       := conj ("or" conj)*
///   conj       := until ("and" until)*
///   until      := unary ("U" "[" num "," num "]" unary)?
///   unary      := "not" unary | ("G" | "F") "[" num "," num "]" unary | primary
///   primary    := "true" | comparison | "(" formula ")"
///   comparison := expr cmp expr (cmp expr)?      cmp in {>=, <=, >, <}
///
/// Expressions are polynomials of total degree <= 2 over `var_names`
/// built from numbers, identifiers, + - * / and integer powers. Strict
/// comparisons are read as non-strict. `#` starts a line comment.
Formula parse(std::string_view text, const std::vector<std::string>& var_names);

/// Prints a formula in the dialect accepted by `parse`. Numbers use the
/// shortest representation that round-trips exactly.
std::string pretty_print(const Formula& f, const std::vector<std::string>& var_names);

/// Shortest round-trip decimal form of a double.
std::string format_number(double v);

}  // namespace stlmtl
