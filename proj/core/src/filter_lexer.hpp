#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "trident/filter.hpp"

namespace trident::filter {

enum class TokenKind {
  end,
  dot,        // .
  dot_dot,    // ..
  field,      // .name
  ident,      // name, keywords included
  string,     // decoded string literal
  number,
  variable,   // $name
  format,     // @name
  punct,      // operators and brackets, text holds the spelling
};

struct Token {
  TokenKind kind = TokenKind::end;
  std::string text;   // spelling (identifier, field name, decoded string, operator)
  std::string raw;    // source slice, used in error messages
  json number;
  SourceLocation location;
  bool is(std::string_view p) const { return kind == TokenKind::punct && text == p; }
  bool is_ident(std::string_view name) const { return kind == TokenKind::ident && text == name; }
};

/// Splits rule source into tokens; `#` starts a comment running to end of
/// line. Throws CompileError on malformed literals and string interpolation.
std::vector<Token> tokenize(std::string_view source);

}  // namespace trident::filter
