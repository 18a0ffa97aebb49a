#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

namespace trident::regex {

class RegexError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear-time regular expressions (Pike VM, no backtracking).
///
/// Syntax follows the Perl-flavoured dialect jq exposes through test():
/// alternation, groups ((...), (?:...), (?<name>...), inline (?imx-imx) and
/// (?i:...)), greedy and lazy quantifiers including {n}, {n,}, {n,m},
/// classes with ranges, negation and POSIX [:name:] items, \d \w \s \h and
/// their negations, \b \B \A \z \Z anchors. Lookaround, backreferences,
/// possessive quantifiers and \p{..} properties raise RegexError.
///
/// `^` anchors at the start of the subject and `$` at the end or before a
/// final newline. Matching runs over UTF-8 code points.
class Regex {
 public:
  /// flags: any of "gixnpsl". Only i (case-insensitive), x (extended) and
  /// p/s (dot matches newline for p) change matching; g, n, l are accepted
  /// and ignored since only existence of a match is computed.
  static Regex compile(std::string_view pattern, std::string_view flags = {});

  /// True if any substring of `subject` matches.
  bool search(std::string_view subject) const;

  std::size_t program_size() const noexcept;

  struct Program;

 private:
  explicit Regex(std::shared_ptr<const Program> program);
  std::shared_ptr<const Program> program_;
};

}  // namespace trident::regex
