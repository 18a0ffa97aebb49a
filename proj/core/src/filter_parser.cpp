#include <algorithm>
#include <array>
#include <sstream>

#include "filter_ast.hpp"
#include "filter_lexer.hpp"

namespace trident::filter {
namespace {

struct BuiltinSpec {
  std::string_view name;
  Builtin builtin;
  int min_args;
  int max_args;
};

constexpr std::array<BuiltinSpec, 15> kBuiltins = {{
    {"select", Builtin::select, 1, 1},
    {"test", Builtin::test, 1, 2},
    {"contains", Builtin::contains, 1, 1},
    {"startswith", Builtin::startswith, 1, 1},
    {"endswith", Builtin::endswith, 1, 1},
    {"ascii_downcase", Builtin::ascii_downcase, 0, 0},
    {"ascii_upcase", Builtin::ascii_upcase, 0, 0},
    {"length", Builtin::length, 0, 0},
    {"tostring", Builtin::tostring, 0, 0},
    {"strings", Builtin::strings, 0, 0},
    {"numbers", Builtin::numbers, 0, 0},
    {"objects", Builtin::objects, 0, 0},
    {"arrays", Builtin::arrays, 0, 0},
    {"type", Builtin::type, 0, 0},
    {"not", Builtin::not_, 0, 0},
}};

constexpr std::array<std::string_view, 16> kKeywords = {
    "def", "if", "then", "elif", "else", "end", "as", "reduce", "foreach",
    "try", "catch", "label", "import", "include", "__loc__", "and"};

bool is_keyword(std::string_view s) {
  return std::find(kKeywords.begin(), kKeywords.end(), s) != kKeywords.end() || s == "or";
}

const BuiltinSpec* find_builtin(std::string_view name) {
  for (const auto& b : kBuiltins) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

std::shared_ptr<Node> node(Node::Kind kind, SourceLocation loc) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->location = loc;
  return n;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  std::shared_ptr<Program> parse_program() {
    auto program = std::make_shared<Program>();
    program_ = program.get();
    if (!cur().is_ident("def")) fail("expected 'def' at start of rule");
    while (cur().is_ident("def")) parse_def();
    if (cur().kind == TokenKind::ident && cur().text == program->defs.back().name &&
        peek(1).kind == TokenKind::end) {
      ++pos_;  // trailing invocation of the entry point
    }
    if (cur().kind != TokenKind::end) fail("expected 'def' or end of rule");
    return program;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  const Token& peek(std::size_t k) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }

  [[noreturn]] void fail(const std::string& message) const { fail_at(cur(), message); }
  [[noreturn]] static void fail_at(const Token& t, const std::string& message) {
    std::string token = t.kind == TokenKind::end ? "<end>" : t.raw;
    throw CompileError(message, t.location, token);
  }

  void expect(std::string_view punct, const char* context) {
    if (!cur().is(punct)) fail(std::string("expected '") + std::string(punct) + "' " + context);
    ++pos_;
  }

  void parse_def() {
    ++pos_;  // def
    if (cur().kind != TokenKind::ident || is_keyword(cur().text)) fail("expected rule name after 'def'");
    Definition def;
    def.name = cur().text;
    for (const auto& d : program_->defs) {
      if (d.name == def.name) fail("duplicate definition of '" + def.name + "'");
    }
    ++pos_;
    if (cur().is("(")) fail("function parameters are not supported");
    expect(":", "after rule name");
    defining_ = def.name;
    def.body = parse_pipe();
    defining_.clear();
    expect(";", "to end definition");
    program_->defs.push_back(std::move(def));
  }

  NodePtr parse_pipe() {
    NodePtr lhs = parse_alternative();
    if (cur().is(",")) fail("the comma operator is not supported");
    if (cur().is("=") || cur().is("|=") || cur().is("+=") || cur().is("-=") ||
        cur().is("*=") || cur().is("/=") || cur().is("%=") || cur().is("//=")) {
      fail("assignment operators are not supported");
    }
    if (cur().is_ident("as")) fail("variable binding is not supported");
    if (cur().is("|")) {
      auto n = node(Node::Kind::pipe, cur().location);
      ++pos_;
      n->lhs = lhs;
      n->rhs = parse_pipe();
      return n;
    }
    return lhs;
  }

  NodePtr parse_alternative() {
    NodePtr lhs = parse_or();
    if (cur().is("?//")) fail("destructuring alternative is not supported");
    if (cur().is("//")) {
      auto n = node(Node::Kind::alternative, cur().location);
      ++pos_;
      n->lhs = lhs;
      n->rhs = parse_alternative();
      return n;
    }
    return lhs;
  }

  NodePtr parse_or() {
    NodePtr lhs = parse_and();
    while (cur().is_ident("or")) {
      auto n = node(Node::Kind::or_, cur().location);
      ++pos_;
      n->lhs = lhs;
      n->rhs = parse_and();
      lhs = n;
    }
    return lhs;
  }

  NodePtr parse_and() {
    NodePtr lhs = parse_comparison();
    while (cur().is_ident("and")) {
      auto n = node(Node::Kind::and_, cur().location);
      ++pos_;
      n->lhs = lhs;
      n->rhs = parse_comparison();
      lhs = n;
    }
    return lhs;
  }

  bool comparison_op(CompareOp& op) const {
    const Token& t = cur();
    if (t.kind != TokenKind::punct) return false;
    if (t.text == "==") op = CompareOp::eq;
    else if (t.text == "!=") op = CompareOp::ne;
    else if (t.text == "<") op = CompareOp::lt;
    else if (t.text == "<=") op = CompareOp::le;
    else if (t.text == ">") op = CompareOp::gt;
    else if (t.text == ">=") op = CompareOp::ge;
    else return false;
    return true;
  }

  NodePtr parse_comparison() {
    NodePtr lhs = parse_arith();
    CompareOp op;
    if (!comparison_op(op)) return lhs;
    auto n = node(Node::Kind::compare, cur().location);
    ++pos_;
    n->op = op;
    n->lhs = lhs;
    n->rhs = parse_arith();
    if (comparison_op(op)) fail("comparison operators are non-associative");
    return n;
  }

  NodePtr parse_arith() {
    NodePtr term = parse_unary();
    if (cur().is("+") || cur().is("-") || cur().is("*") || cur().is("/") || cur().is("%")) {
      fail("arithmetic operators are not supported");
    }
    return term;
  }

  NodePtr parse_unary() {
    if (cur().is("-")) {
      if (peek(1).kind != TokenKind::number) fail("arithmetic operators are not supported");
      ++pos_;
      auto n = node(Node::Kind::literal, cur().location);
      const json& v = cur().number;
      n->value = v.is_number_integer() ? json(-v.get<std::int64_t>()) : json(-v.get<double>());
      ++pos_;
      return parse_suffixes(n);
    }
    return parse_postfix();
  }

  NodePtr parse_postfix() { return parse_suffixes(parse_primary()); }

  // Postfix chain: .name, ."str", [ ], [expr], and `?`. A `?` directly after
  // a field/index/iterate suppresses only that step's errors; after any
  // other term it wraps the whole term.
  NodePtr parse_suffixes(NodePtr target) {
    for (;;) {
      const Token& t = cur();
      if (t.kind == TokenKind::field) {
        target = field(target, t.text, t.location);
        ++pos_;
      } else if (t.kind == TokenKind::dot && peek(1).kind == TokenKind::string) {
        target = field(target, peek(1).text, t.location);
        pos_ += 2;
      } else if (t.kind == TokenKind::dot && peek(1).is("[")) {
        ++pos_;
      } else if (t.is("[")) {
        target = bracket(target);
      } else if (t.is("?")) {
        auto kind = target->kind;
        if ((kind == Node::Kind::field || kind == Node::Kind::index ||
             kind == Node::Kind::iterate) &&
            !target->optional) {
          auto copy = std::make_shared<Node>(*target);
          copy->optional = true;
          target = copy;
        } else {
          auto n = node(Node::Kind::try_, t.location);
          n->lhs = target;
          target = n;
        }
        ++pos_;
      } else if (t.kind == TokenKind::dot_dot) {
        fail("recursive descent '..' is not supported");
      } else {
        return target;
      }
    }
  }

  NodePtr field(NodePtr target, std::string key, SourceLocation loc) {
    auto n = node(Node::Kind::field, loc);
    n->lhs = std::move(target);
    n->key = std::move(key);
    return n;
  }

  NodePtr bracket(NodePtr target) {
    SourceLocation loc = cur().location;
    ++pos_;  // [
    if (cur().is("]")) {
      ++pos_;
      auto n = node(Node::Kind::iterate, loc);
      n->lhs = std::move(target);
      return n;
    }
    if (cur().is(":")) fail("array slices are not supported");
    NodePtr index = parse_pipe();
    if (cur().is(":")) fail("array slices are not supported");
    expect("]", "to close index");
    auto n = node(Node::Kind::index, loc);
    n->lhs = std::move(target);
    n->rhs = std::move(index);
    return n;
  }

  NodePtr identity(SourceLocation loc) { return node(Node::Kind::identity, loc); }

  NodePtr parse_primary() {
    const Token& t = cur();
    switch (t.kind) {
      case TokenKind::dot: {
        ++pos_;
        if (cur().kind == TokenKind::string) {
          auto n = field(identity(t.location), cur().text, t.location);
          ++pos_;
          return n;
        }
        return identity(t.location);
      }
      case TokenKind::field: {
        ++pos_;
        return field(identity(t.location), t.text, t.location);
      }
      case TokenKind::dot_dot:
        fail("recursive descent '..' is not supported");
      case TokenKind::string: {
        auto n = node(Node::Kind::literal, t.location);
        n->value = t.text;
        ++pos_;
        return n;
      }
      case TokenKind::number: {
        auto n = node(Node::Kind::literal, t.location);
        n->value = t.number;
        ++pos_;
        return n;
      }
      case TokenKind::variable:
        fail("variables are not supported");
      case TokenKind::format:
        fail("format strings are not supported");
      case TokenKind::ident:
        return parse_identifier();
      case TokenKind::punct:
        if (t.is("(")) {
          ++pos_;
          NodePtr inner = parse_pipe();
          expect(")", "to close parenthesis");
          return inner;
        }
        if (t.is("[")) {
          ++pos_;
          auto n = node(Node::Kind::collect, t.location);
          if (cur().is("]")) {
            ++pos_;
            auto lit = node(Node::Kind::literal, t.location);
            lit->value = json::array();
            return lit;
          }
          n->lhs = parse_pipe();
          expect("]", "to close array construction");
          return n;
        }
        if (t.is("{")) return parse_object();
        fail("unexpected token");
      case TokenKind::end:
        fail("unexpected end of rule");
    }
    fail("unexpected token");
  }

  NodePtr parse_identifier() {
    const Token& t = cur();
    const std::string& name = t.text;
    if (name == "true" || name == "false" || name == "null") {
      auto n = node(Node::Kind::literal, t.location);
      n->value = name == "null" ? json(nullptr) : json(name == "true");
      ++pos_;
      return n;
    }
    if (is_keyword(name)) fail("unsupported construct '" + name + "'");

    for (std::size_t i = 0; i < program_->defs.size(); ++i) {
      if (program_->defs[i].name == name) {
        if (peek(1).is("(")) fail("helper '" + name + "' takes no arguments");
        auto n = node(Node::Kind::call, t.location);
        n->def_index = i;
        ++pos_;
        return n;
      }
    }
    if (name == defining_) fail("recursive definitions are not supported");

    const BuiltinSpec* spec = find_builtin(name);
    if (!spec) {
      if (peek(1).is("(")) fail("unsupported builtin '" + name + "'");
      fail("unsupported builtin or undefined function '" + name + "'");
    }
    auto n = node(Node::Kind::builtin, t.location);
    n->builtin = spec->builtin;
    ++pos_;
    if (cur().is("(")) {
      ++pos_;
      n->args.push_back(parse_pipe());
      while (cur().is(";")) {
        ++pos_;
        n->args.push_back(parse_pipe());
      }
      expect(")", "to close argument list");
    }
    int argc = static_cast<int>(n->args.size());
    if (argc < spec->min_args || argc > spec->max_args) {
      throw CompileError(name + "/" + std::to_string(argc) + " is not defined", t.location, name);
    }
    if (n->builtin == Builtin::test) precompile_regex(*n);
    return n;
  }

  static void precompile_regex(Node& n) {
    const Node& pattern = *n.args[0];
    if (pattern.kind != Node::Kind::literal || !pattern.value.is_string()) return;
    std::string flags;
    if (n.args.size() == 2) {
      const Node& f = *n.args[1];
      if (f.kind != Node::Kind::literal) return;
      if (f.value.is_string()) {
        flags = f.value.get<std::string>();
      } else if (!f.value.is_null()) {
        return;
      }
    }
    try {
      n.regex = std::make_shared<const regex::Regex>(
          regex::Regex::compile(pattern.value.get<std::string>(), flags));
    } catch (const regex::RegexError& e) {
      n.regex_error = e.what();
    }
  }

  // { key: value, ... } where value is a term or a pipe of terms.
  NodePtr parse_object() {
    auto n = node(Node::Kind::object, cur().location);
    ++pos_;  // {
    if (cur().is("}")) {
      ++pos_;
      return n;
    }
    for (;;) {
      const Token& k = cur();
      std::string key;
      NodePtr key_expr;
      bool shorthand_ok = false;
      if (k.kind == TokenKind::ident || k.kind == TokenKind::string) {
        key = k.text;
        shorthand_ok = true;
        ++pos_;
      } else if (k.kind == TokenKind::variable) {
        fail("variables are not supported");
      } else if (k.is("(")) {
        ++pos_;
        key_expr = parse_pipe();
        expect(")", "to close computed key");
      } else {
        fail("expected object key");
      }
      NodePtr value;
      if (cur().is(":")) {
        ++pos_;
        value = parse_object_value();
      } else if (shorthand_ok) {
        value = field(identity(k.location), key, k.location);
      } else {
        fail("expected ':' after computed key");
      }
      n->object_keys.push_back(key);
      n->key_exprs.push_back(key_expr);
      n->args.push_back(value);
      if (cur().is(",")) {
        ++pos_;
        continue;
      }
      expect("}", "to close object construction");
      return n;
    }
  }

  NodePtr parse_object_value() {
    NodePtr lhs = parse_unary();
    if (cur().is("|")) {
      auto n = node(Node::Kind::pipe, cur().location);
      ++pos_;
      n->lhs = lhs;
      n->rhs = parse_object_value();
      return n;
    }
    return lhs;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  Program* program_ = nullptr;
  std::string defining_;
};

const char* builtin_name(Builtin b) {
  for (const auto& spec : kBuiltins) {
    if (spec.builtin == b) return spec.name.data();
  }
  return "?";
}

const char* compare_name(CompareOp op) {
  switch (op) {
    case CompareOp::eq: return "==";
    case CompareOp::ne: return "!=";
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::gt: return ">";
    case CompareOp::ge: return ">=";
  }
  return "?";
}

}  // namespace

std::string describe(const Node& n, const Program& program) {
  auto sub = [&](const NodePtr& p) { return describe(*p, program); };
  const char* opt = n.optional ? "?" : "";
  switch (n.kind) {
    case Node::Kind::identity:
      return ".";
    case Node::Kind::literal:
      return n.value.dump();
    case Node::Kind::field:
      if (n.lhs->kind == Node::Kind::identity) return std::string("(field") + opt + " " + n.key + ")";
      return std::string("(field") + opt + " " + n.key + " " + sub(n.lhs) + ")";
    case Node::Kind::index:
      return std::string("(index") + opt + " " + sub(n.lhs) + " " + sub(n.rhs) + ")";
    case Node::Kind::iterate:
      return std::string("(iterate") + opt + " " + sub(n.lhs) + ")";
    case Node::Kind::try_:
      return "(try " + sub(n.lhs) + ")";
    case Node::Kind::pipe:
      return "(pipe " + sub(n.lhs) + " " + sub(n.rhs) + ")";
    case Node::Kind::collect:
      return "(collect " + sub(n.lhs) + ")";
    case Node::Kind::object: {
      std::string out = "(object";
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        out += " (";
        out += n.key_exprs[i] ? sub(n.key_exprs[i]) : n.object_keys[i];
        out += " " + sub(n.args[i]) + ")";
      }
      return out + ")";
    }
    case Node::Kind::compare:
      return std::string("(") + compare_name(n.op) + " " + sub(n.lhs) + " " + sub(n.rhs) + ")";
    case Node::Kind::and_:
      return "(and " + sub(n.lhs) + " " + sub(n.rhs) + ")";
    case Node::Kind::or_:
      return "(or " + sub(n.lhs) + " " + sub(n.rhs) + ")";
    case Node::Kind::alternative:
      return "(// " + sub(n.lhs) + " " + sub(n.rhs) + ")";
    case Node::Kind::builtin: {
      std::string out = std::string("(") + builtin_name(n.builtin);
      for (const auto& a : n.args) out += " " + sub(a);
      return out + ")";
    }
    case Node::Kind::call:
      return "(call " + program.defs[n.def_index].name + ")";
  }
  return "?";
}

FilterAst::FilterAst(std::shared_ptr<const Program> program) : program_(std::move(program)) {}

const std::string& FilterAst::rule_name() const { return program_->defs.back().name; }

std::string FilterAst::describe() const {
  const auto& entry = program_->defs.back();
  return "(def " + entry.name + " " + filter::describe(*entry.body, *program_) + ")";
}

FilterAst parse_filter(std::string_view source) {
  Parser parser(tokenize(source));
  return FilterAst(parser.parse_program());
}

}  // namespace trident::filter
