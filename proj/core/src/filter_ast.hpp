#pragma once

#include <memory>
#include <string>
#include <vector>

#include "trident/filter.hpp"
#include "trident/regex.hpp"

namespace trident::filter {

enum class Builtin {
  select,
  test,
  contains,
  startswith,
  endswith,
  ascii_downcase,
  ascii_upcase,
  length,
  tostring,
  strings,
  numbers,
  objects,
  arrays,
  type,
  not_,
};

enum class CompareOp { eq, ne, lt, le, gt, ge };

struct Node {
  enum class Kind {
    identity,
    literal,
    field,      // target . key
    index,      // target [ expr ]
    iterate,    // target []
    try_,       // body ?
    pipe,       // lhs | rhs
    collect,    // [ body ]
    object,     // { key: value, ... }
    compare,    // lhs op rhs
    and_,
    or_,
    alternative,  // lhs // rhs
    builtin,
    call,       // helper def
  };

  Kind kind = Kind::identity;
  SourceLocation location;

  std::shared_ptr<const Node> lhs;  // target / body / left operand
  std::shared_ptr<const Node> rhs;  // index expr / right operand
  std::vector<std::shared_ptr<const Node>> args;

  json value;           // literal
  std::string key;      // field name
  bool optional = false;  // trailing `?` on field/index/iterate

  CompareOp op = CompareOp::eq;
  Builtin builtin = Builtin::select;
  std::size_t def_index = 0;  // call target

  // Object construction: keys are either constant (key_exprs[i] == nullptr,
  // object_keys[i] set) or computed.
  std::vector<std::string> object_keys;
  std::vector<std::shared_ptr<const Node>> key_exprs;

  // test() with literal pattern/flags is compiled once at parse time; a
  // compile failure is kept as a message and raised at evaluation.
  std::shared_ptr<const regex::Regex> regex;
  std::string regex_error;
};

using NodePtr = std::shared_ptr<const Node>;

struct Definition {
  std::string name;
  NodePtr body;
};

struct Program {
  std::vector<Definition> defs;  // entry point is defs.back()
};

std::string describe(const Node& node, const Program& program);

}  // namespace trident::filter
