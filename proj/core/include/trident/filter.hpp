#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace trident::filter {

using json = nlohmann::json;

struct SourceLocation {
  int line = 1;
  int column = 1;
  bool operator==(const SourceLocation&) const = default;
};

/// Syntax error or construct outside the supported jq subset.
class CompileError : public std::runtime_error {
 public:
  CompileError(const std::string& message, SourceLocation location, std::string token);
  const SourceLocation& location() const noexcept { return location_; }
  const std::string& token() const noexcept { return token_; }
  /// The message without the "line:col" prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  SourceLocation location_;
  std::string token_;
  std::string detail_;
};

struct Node;
struct Program;

/// A parsed detection rule: one or more `def name: body;` blocks, the last
/// of which is the entry point. Immutable and shareable across threads.
class FilterAst {
 public:
  const std::string& rule_name() const;
  /// S-expression rendering of the entry body, e.g.
  /// (collect (pipe (iterate? (field data)) (select (== (field x) 1)))).
  std::string describe() const;

 private:
  friend FilterAst parse_filter(std::string_view source);
  friend struct Evaluator;
  explicit FilterAst(std::shared_ptr<const Program> program);
  std::shared_ptr<const Program> program_;
};

/// Parses a rule written in the supported jq subset. Throws CompileError.
FilterAst parse_filter(std::string_view source);

/// Evaluation limits. Time is a wall-clock budget measured from the start
/// of evaluate(); max_steps bounds the number of node visits.
struct Budget {
  std::chrono::nanoseconds time = std::chrono::seconds(10);
  std::optional<std::uint64_t> max_steps;
};

struct RuntimeError {
  std::string message;
  SourceLocation location;
};

struct Timeout {
  std::uint64_t steps = 0;
};

/// Exactly one of: the output stream, a runtime error, or a timeout.
using EvalOutcome = std::variant<std::vector<json>, RuntimeError, Timeout>;

/// Evaluates `ast` against `doc`. Never mutates `doc`; reentrant.
EvalOutcome evaluate(const FilterAst& ast, const json& doc, const Budget& budget = {});

enum class MatchResult { match, no_match, error, timeout };

/// Non-empty output is a match, except a single empty-array value ([[]]),
/// which carries no evidence.
MatchResult rule_matches(const EvalOutcome& outcome);

std::string_view to_string(MatchResult result);

}  // namespace trident::filter
