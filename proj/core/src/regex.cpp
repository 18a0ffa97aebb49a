#include "trident/regex.hpp"

#include <algorithm>
#include <utility>
#include <vector>

namespace trident::regex {
namespace {

constexpr char32_t kInfinite = 0xFFFFFFFF;
constexpr int kMaxRepeat = 1000;
constexpr std::size_t kMaxProgram = 200000;

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    auto b0 = static_cast<unsigned char>(s[i]);
    int extra = b0 < 0x80 ? 0 : (b0 >> 5) == 0x6 ? 1 : (b0 >> 4) == 0xE ? 2 : (b0 >> 3) == 0x1E ? 3 : -1;
    if (extra < 0) {
      out.push_back(b0);
      ++i;
      continue;
    }
    char32_t cp = extra == 0 ? b0 : (b0 & (0x3F >> extra));
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      if (i + k >= s.size()) { ok = false; break; }
      auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) { ok = false; break; }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(b0);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(extra) + 1;
  }
  return out;
}

// Simple one-to-one case mapping: ASCII, Latin-1 supplement, Greek, Cyrillic.
char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

char32_t to_upper(char32_t c) {
  if (c >= 'a' && c <= 'z') return c - 32;
  if (c >= 0xE0 && c <= 0xFE && c != 0xF7) return c - 32;
  if (c >= 0x3B1 && c <= 0x3C9 && c != 0x3C2) return c - 32;
  if (c >= 0x430 && c <= 0x44F) return c - 32;
  if (c >= 0x450 && c <= 0x45F) return c - 80;
  return c;
}

bool is_word(char32_t c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '_';
}

struct CharClass {
  std::vector<std::pair<char32_t, char32_t>> ranges;
  bool negated = false;
  bool icase = false;

  bool contains_raw(char32_t c) const {
    for (auto [lo, hi] : ranges) {
      if (c >= lo && c <= hi) return true;
    }
    return false;
  }
  bool matches(char32_t c) const {
    bool in = contains_raw(c) ||
              (icase && (contains_raw(to_lower(c)) || contains_raw(to_upper(c))));
    return in != negated;
  }
};

enum class AssertKind { start_text, end_text, end_text_or_newline, word_boundary, not_word_boundary };

struct Node {
  enum class Kind { empty, char_class, any, concat, alternate, repeat, assertion };
  Kind kind = Kind::empty;
  CharClass cls;
  bool dotall = false;
  std::vector<std::unique_ptr<Node>> children;
  int min = 0;
  char32_t max = 0;
  AssertKind assertion = AssertKind::start_text;
};

using NodePtr = std::unique_ptr<Node>;

NodePtr make(Node::Kind kind) {
  auto n = std::make_unique<Node>();
  n->kind = kind;
  return n;
}

struct Options {
  bool icase = false;
  bool extended = false;
  bool dotall = false;
};

void add_class(CharClass& cls, char kind) {
  auto& r = cls.ranges;
  switch (kind) {
    case 'd':
      r.emplace_back('0', '9');
      break;
    case 'w':
      r.emplace_back('a', 'z');
      r.emplace_back('A', 'Z');
      r.emplace_back('0', '9');
      r.emplace_back('_', '_');
      break;
    case 's':
      r.emplace_back(' ', ' ');
      r.emplace_back('\t', '\r');
      break;
    case 'h':
      r.emplace_back('0', '9');
      r.emplace_back('a', 'f');
      r.emplace_back('A', 'F');
      break;
  }
}

// Complement of a set of ranges over the code point space.
std::vector<std::pair<char32_t, char32_t>> complement(std::vector<std::pair<char32_t, char32_t>> r) {
  std::sort(r.begin(), r.end());
  std::vector<std::pair<char32_t, char32_t>> out;
  char32_t next = 0;
  for (auto [lo, hi] : r) {
    if (lo > next) out.emplace_back(next, lo - 1);
    if (hi + 1 > next) next = hi + 1;
  }
  if (next <= 0x10FFFF) out.emplace_back(next, 0x10FFFF);
  return out;
}

class Parser {
 public:
  Parser(std::u32string pattern, Options options) : p_(std::move(pattern)) {
    opts_.push_back(options);
  }

  NodePtr parse() {
    NodePtr node = parse_alternation();
    if (pos_ < p_.size()) {
      if (p_[pos_] == ')') fail("unmatched close parenthesis");
      fail("unexpected character");
    }
    return node;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw RegexError("invalid regex at offset " + std::to_string(pos_) + ": " + what);
  }

  Options& opts() { return opts_.back(); }
  bool at_end() const { return pos_ >= p_.size(); }
  char32_t peek() const { return p_[pos_]; }

  void skip_extended() {
    if (!opts().extended) return;
    while (!at_end()) {
      char32_t c = peek();
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
        ++pos_;
      } else if (c == '#') {
        while (!at_end() && peek() != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  NodePtr parse_alternation() {
    std::vector<NodePtr> alts;
    alts.push_back(parse_concat());
    while (!at_end() && peek() == '|') {
      ++pos_;
      alts.push_back(parse_concat());
    }
    if (alts.size() == 1) return std::move(alts.front());
    auto n = make(Node::Kind::alternate);
    n->children = std::move(alts);
    return n;
  }

  NodePtr parse_concat() {
    auto n = make(Node::Kind::concat);
    for (;;) {
      skip_extended();
      if (at_end() || peek() == '|' || peek() == ')') break;
      NodePtr atom = parse_atom();
      if (!atom) continue;  // inline option group or comment
      atom = parse_quantifiers(std::move(atom));
      n->children.push_back(std::move(atom));
    }
    return n;
  }

  bool try_parse_braces(int& lo, char32_t& hi) {
    // {n}, {n,}, {n,m}; anything else leaves `{` literal.
    std::size_t p = pos_ + 1;
    auto digits = [&](int& out) {
      std::size_t start = p;
      long v = 0;
      while (p < p_.size() && p_[p] >= '0' && p_[p] <= '9') {
        v = v * 10 + (p_[p] - '0');
        if (v > 100000) v = 100000;
        ++p;
      }
      out = static_cast<int>(v);
      return p > start;
    };
    int a = 0;
    if (!digits(a)) return false;
    int b = a;
    bool unbounded = false;
    if (p < p_.size() && p_[p] == ',') {
      ++p;
      if (!digits(b)) unbounded = true;
    }
    if (p >= p_.size() || p_[p] != '}') return false;
    pos_ = p + 1;
    lo = a;
    hi = unbounded ? kInfinite : static_cast<char32_t>(b);
    return true;
  }

  NodePtr parse_quantifiers(NodePtr atom) {
    for (;;) {
      skip_extended();
      if (at_end()) return atom;
      char32_t c = peek();
      int lo = 0;
      char32_t hi = 0;
      if (c == '*') {
        lo = 0, hi = kInfinite, ++pos_;
      } else if (c == '+') {
        lo = 1, hi = kInfinite, ++pos_;
      } else if (c == '?') {
        lo = 0, hi = 1, ++pos_;
      } else if (c == '{') {
        if (!try_parse_braces(lo, hi)) return atom;
      } else {
        return atom;
      }
      if (hi != kInfinite && static_cast<int>(hi) < lo) fail("invalid repeat range");
      if (lo > kMaxRepeat || (hi != kInfinite && hi > static_cast<char32_t>(kMaxRepeat))) {
        fail("repeat count too large");
      }
      if (atom->kind == Node::Kind::assertion) fail("target of repeat operator is invalid");
      if (!at_end() && peek() == '?') {
        ++pos_;  // lazy: same language, same match existence
      } else if (!at_end() && peek() == '+') {
        fail("possessive quantifiers are not supported");
      }
      auto rep = make(Node::Kind::repeat);
      rep->min = lo;
      rep->max = hi;
      rep->children.push_back(std::move(atom));
      atom = std::move(rep);
    }
  }

  NodePtr literal(char32_t c) {
    auto n = make(Node::Kind::char_class);
    n->cls.ranges.emplace_back(c, c);
    n->cls.icase = opts().icase;
    return n;
  }

  NodePtr assertion(AssertKind k) {
    auto n = make(Node::Kind::assertion);
    n->assertion = k;
    return n;
  }

  NodePtr parse_atom() {
    char32_t c = peek();
    switch (c) {
      case '(':
        return parse_group();
      case '[': {
        ++pos_;
        auto n = make(Node::Kind::char_class);
        n->cls = parse_class();
        return n;
      }
      case '.': {
        ++pos_;
        auto n = make(Node::Kind::any);
        n->dotall = opts().dotall;
        return n;
      }
      case '^':
        ++pos_;
        return assertion(AssertKind::start_text);
      case '$':
        ++pos_;
        return assertion(AssertKind::end_text_or_newline);
      case '\\':
        return parse_escape();
      case '*':
      case '+':
      case '?':
        fail("target of repeat operator is not specified");
      default:
        ++pos_;
        return literal(c);
    }
  }

  NodePtr parse_group() {
    ++pos_;  // '('
    Options inner = opts();
    bool scoped = true;
    if (!at_end() && peek() == '?') {
      ++pos_;
      if (at_end()) fail("end pattern in group");
      char32_t k = peek();
      if (k == ':') {
        ++pos_;
      } else if (k == '=' || k == '!') {
        fail("lookahead is not supported");
      } else if (k == '>') {
        fail("atomic groups are not supported");
      } else if (k == '#') {
        while (!at_end() && peek() != ')') ++pos_;
        if (at_end()) fail("end pattern in group");
        ++pos_;
        return nullptr;
      } else if (k == '<' || k == 'P' || k == '\'') {
        if (k == 'P') ++pos_;
        if (at_end()) fail("end pattern in group");
        char32_t open = peek();
        if (open == '<' && pos_ + 1 < p_.size() && (p_[pos_ + 1] == '=' || p_[pos_ + 1] == '!')) {
          fail("lookbehind is not supported");
        }
        if (open != '<' && open != '\'') fail("undefined group option");
        char32_t close = open == '<' ? '>' : '\'';
        ++pos_;
        std::size_t start = pos_;
        while (!at_end() && peek() != close) ++pos_;
        if (at_end() || pos_ == start) fail("invalid group name");
        ++pos_;
      } else {
        // (?imx-imx) or (?imx-imx:...)
        bool on = true;
        for (;;) {
          if (at_end()) fail("end pattern in group");
          char32_t f = peek();
          if (f == '-') {
            on = false;
          } else if (f == 'i') {
            inner.icase = on;
          } else if (f == 'x') {
            inner.extended = on;
          } else if (f == 'm') {
            inner.dotall = on;
          } else if (f == ')' || f == ':') {
            break;
          } else {
            fail("undefined group option");
          }
          ++pos_;
        }
        if (peek() == ')') {
          ++pos_;
          opts() = inner;  // applies to the rest of the enclosing group
          return nullptr;
        }
        ++pos_;  // ':'
      }
    }
    (void)scoped;
    opts_.push_back(inner);
    NodePtr body = parse_alternation();
    opts_.pop_back();
    if (at_end() || peek() != ')') fail("end pattern with unmatched parenthesis");
    ++pos_;
    return body;
  }

  char32_t parse_hex(std::size_t max_digits, bool braced) {
    char32_t v = 0;
    std::size_t n = 0;
    while (!at_end() && n < max_digits) {
      char32_t c = peek();
      int d = (c >= '0' && c <= '9') ? int(c - '0')
              : (c >= 'a' && c <= 'f') ? int(c - 'a' + 10)
              : (c >= 'A' && c <= 'F') ? int(c - 'A' + 10)
                                       : -1;
      if (d < 0) break;
      v = v * 16 + static_cast<char32_t>(d);
      ++pos_;
      ++n;
    }
    if (n == 0) fail("invalid code point value");
    if (braced) {
      if (at_end() || peek() != '}') fail("invalid code point value");
      ++pos_;
    }
    return v;
  }

  // Escape shared by atoms and class items. Returns true and sets `cls`
  // for class escapes; otherwise sets `literal_out`.
  bool parse_escape_common(CharClass& cls, char32_t& literal_out) {
    ++pos_;  // '\'
    if (at_end()) fail("end pattern at escape");
    char32_t c = peek();
    ++pos_;
    switch (c) {
      case 'd': case 'w': case 's': case 'h':
        add_class(cls, static_cast<char>(c));
        return true;
      case 'D': case 'W': case 'S': case 'H': {
        CharClass tmp;
        add_class(tmp, static_cast<char>(c - 'A' + 'a'));
        cls.ranges = complement(tmp.ranges);
        return true;
      }
      case 'n': literal_out = '\n'; return false;
      case 't': literal_out = '\t'; return false;
      case 'r': literal_out = '\r'; return false;
      case 'f': literal_out = '\f'; return false;
      case 'v': literal_out = '\v'; return false;
      case 'a': literal_out = 0x07; return false;
      case 'e': literal_out = 0x1B; return false;
      case '0': literal_out = 0; return false;
      case 'x':
        if (!at_end() && peek() == '{') {
          ++pos_;
          literal_out = parse_hex(8, true);
        } else {
          literal_out = parse_hex(2, false);
        }
        return false;
      case 'u':
        literal_out = parse_hex(4, false);
        return false;
      case 'p': case 'P':
        fail("unicode properties are not supported");
      case 'k': case 'g':
        fail("backreferences and subexpression calls are not supported");
      default:
        if (c >= '1' && c <= '9') fail("backreferences are not supported");
        if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) {
          --pos_;
          fail("invalid escape '\\" + std::string(1, static_cast<char>(c)) + "'");
        }
        literal_out = c;
        return false;
    }
  }

  NodePtr parse_escape() {
    if (pos_ + 1 < p_.size()) {
      switch (p_[pos_ + 1]) {
        case 'b': pos_ += 2; return assertion(AssertKind::word_boundary);
        case 'B': pos_ += 2; return assertion(AssertKind::not_word_boundary);
        case 'A': pos_ += 2; return assertion(AssertKind::start_text);
        case 'z': pos_ += 2; return assertion(AssertKind::end_text);
        case 'Z': pos_ += 2; return assertion(AssertKind::end_text_or_newline);
        case 'G': pos_ += 2; return assertion(AssertKind::start_text);
        default: break;
      }
    }
    CharClass cls;
    char32_t lit = 0;
    if (parse_escape_common(cls, lit)) {
      auto n = make(Node::Kind::char_class);
      n->cls = std::move(cls);
      return n;
    }
    return literal(lit);
  }

  bool parse_posix(CharClass& cls) {
    // At "[:" inside a class.
    std::size_t end = p_.find(U":]", pos_ + 2);
    if (end == std::u32string::npos) return false;
    std::u32string name32 = p_.substr(pos_ + 2, end - pos_ - 2);
    bool negate = !name32.empty() && name32[0] == '^';
    if (negate) name32.erase(0, 1);
    std::string name(name32.begin(), name32.end());
    CharClass tmp;
    auto& r = tmp.ranges;
    if (name == "alpha") { r = {{'a', 'z'}, {'A', 'Z'}}; }
    else if (name == "digit") { r = {{'0', '9'}}; }
    else if (name == "alnum") { r = {{'a', 'z'}, {'A', 'Z'}, {'0', '9'}}; }
    else if (name == "upper") { r = {{'A', 'Z'}}; }
    else if (name == "lower") { r = {{'a', 'z'}}; }
    else if (name == "space") { r = {{' ', ' '}, {'\t', '\r'}}; }
    else if (name == "xdigit") { r = {{'0', '9'}, {'a', 'f'}, {'A', 'F'}}; }
    else if (name == "punct") { r = {{'!', '/'}, {':', '@'}, {'[', '`'}, {'{', '~'}}; }
    else if (name == "word") { add_class(tmp, 'w'); }
    else if (name == "blank") { r = {{' ', ' '}, {'\t', '\t'}}; }
    else if (name == "cntrl") { r = {{0, 0x1F}, {0x7F, 0x7F}}; }
    else if (name == "print") { r = {{0x20, 0x7E}}; }
    else if (name == "graph") { r = {{0x21, 0x7E}}; }
    else { fail("invalid POSIX bracket type"); }
    if (negate) r = complement(r);
    cls.ranges.insert(cls.ranges.end(), r.begin(), r.end());
    pos_ = end + 2;
    return true;
  }

  CharClass parse_class() {
    CharClass cls;
    cls.icase = opts().icase;
    if (!at_end() && peek() == '^') {
      cls.negated = true;
      ++pos_;
    }
    bool first = true;
    for (;;) {
      if (at_end()) fail("premature end of char-class");
      char32_t c = peek();
      if (c == ']' && !first) {
        ++pos_;
        break;
      }
      first = false;
      if (c == '[') {
        if (pos_ + 1 < p_.size() && p_[pos_ + 1] == ':' && parse_posix(cls)) continue;
        fail("nested character classes are not supported");
      }
      if (c == '&' && pos_ + 1 < p_.size() && p_[pos_ + 1] == '&') {
        fail("character class intersection is not supported");
      }
      char32_t lo = 0;
      if (c == '\\') {
        if (parse_escape_common(cls, lo)) continue;
        if (lo == 'b') lo = 0x08;
      } else {
        lo = c;
        ++pos_;
      }
      char32_t hi = lo;
      if (pos_ + 1 < p_.size() && peek() == '-' && p_[pos_ + 1] != ']') {
        ++pos_;
        char32_t h = peek();
        if (h == '\\') {
          CharClass dummy;
          if (parse_escape_common(dummy, hi)) fail("invalid range in char-class");
        } else if (h == '[') {
          fail("invalid range in char-class");
        } else {
          hi = h;
          ++pos_;
        }
        if (hi < lo) fail("empty range in char class");
      }
      cls.ranges.emplace_back(lo, hi);
    }
    return cls;
  }

  std::u32string p_;
  std::size_t pos_ = 0;
  std::vector<Options> opts_;
};

enum class Op { consume, any, any_nl, split, jump, assert_at, match };

struct Inst {
  Op op = Op::match;
  int x = 0;
  int y = 0;
  int cls = -1;
  AssertKind assertion = AssertKind::start_text;
};

}  // namespace

struct Regex::Program {
  std::vector<Inst> code;
  std::vector<CharClass> classes;
};

namespace {

class Compiler {
 public:
  explicit Compiler(Regex::Program& prog) : prog_(prog) {}

  void emit(const Node& n) {
    if (prog_.code.size() > kMaxProgram) throw RegexError("regex too large");
    switch (n.kind) {
      case Node::Kind::empty:
        return;
      case Node::Kind::char_class:
        prog_.classes.push_back(n.cls);
        push({Op::consume, 0, 0, static_cast<int>(prog_.classes.size() - 1)});
        return;
      case Node::Kind::any:
        push({n.dotall ? Op::any : Op::any_nl});
        return;
      case Node::Kind::concat:
        for (const auto& c : n.children) emit(*c);
        return;
      case Node::Kind::assertion: {
        Inst i{Op::assert_at};
        i.assertion = n.assertion;
        push(i);
        return;
      }
      case Node::Kind::alternate: {
        std::vector<int> to_end;
        for (std::size_t k = 0; k < n.children.size(); ++k) {
          if (k + 1 < n.children.size()) {
            int split = push({Op::split});
            prog_.code[split].x = size();
            emit(*n.children[k]);
            to_end.push_back(push({Op::jump}));
            prog_.code[split].y = size();
          } else {
            emit(*n.children[k]);
          }
        }
        for (int j : to_end) prog_.code[j].x = size();
        return;
      }
      case Node::Kind::repeat: {
        const Node& body = *n.children.front();
        for (int k = 0; k < n.min; ++k) emit(body);
        if (n.max == kInfinite) {
          int split = push({Op::split});
          prog_.code[split].x = size();
          emit(body);
          push({Op::jump, split});
          prog_.code[split].y = size();
        } else {
          std::vector<int> splits;
          for (char32_t k = static_cast<char32_t>(n.min); k < n.max; ++k) {
            int split = push({Op::split});
            prog_.code[split].x = size();
            splits.push_back(split);
            emit(body);
          }
          for (int s : splits) prog_.code[s].y = size();
        }
        return;
      }
    }
  }

 private:
  int size() const { return static_cast<int>(prog_.code.size()); }
  int push(Inst i) {
    prog_.code.push_back(i);
    return size() - 1;
  }
  Regex::Program& prog_;
};

// Sparse set of program counters with O(1) clear.
class ThreadList {
 public:
  explicit ThreadList(std::size_t n) : dense_(n), sparse_(n) {}
  bool contains(int pc) const {
    auto s = sparse_[pc];
    return s < count_ && dense_[s] == pc;
  }
  void insert(int pc) {
    sparse_[pc] = count_;
    dense_[count_++] = pc;
  }
  void clear() { count_ = 0; }
  std::size_t size() const { return count_; }
  int operator[](std::size_t i) const { return dense_[i]; }

 private:
  std::vector<int> dense_;
  std::vector<std::size_t> sparse_;
  std::size_t count_ = 0;
};

bool assertion_holds(AssertKind k, const std::u32string& text, std::size_t pos) {
  switch (k) {
    case AssertKind::start_text:
      return pos == 0;
    case AssertKind::end_text:
      return pos == text.size();
    case AssertKind::end_text_or_newline:
      return pos == text.size() || (pos + 1 == text.size() && text[pos] == '\n');
    case AssertKind::word_boundary:
    case AssertKind::not_word_boundary: {
      bool before = pos > 0 && is_word(text[pos - 1]);
      bool after = pos < text.size() && is_word(text[pos]);
      return (before != after) == (k == AssertKind::word_boundary);
    }
  }
  return false;
}

}  // namespace

Regex::Regex(std::shared_ptr<const Program> program) : program_(std::move(program)) {}

Regex Regex::compile(std::string_view pattern, std::string_view flags) {
  Options opts;
  for (char f : flags) {
    switch (f) {
      case 'i': opts.icase = true; break;
      case 'x': opts.extended = true; break;
      case 'p': opts.dotall = true; break;
      case 's': case 'g': case 'n': case 'l': break;
      default:
        throw RegexError(std::string(flags) + " is not a valid modifier string");
    }
  }
  Parser parser(decode_utf8(pattern), opts);
  NodePtr root = parser.parse();
  auto prog = std::make_shared<Program>();
  Compiler(*prog).emit(*root);
  prog->code.push_back({Op::match});
  return Regex(std::move(prog));
}

std::size_t Regex::program_size() const noexcept { return program_->code.size(); }

bool Regex::search(std::string_view subject) const {
  const auto& code = program_->code;
  const auto& classes = program_->classes;
  const std::u32string text = decode_utf8(subject);
  ThreadList current(code.size()), next(code.size());
  std::vector<int> stack;
  bool matched = false;

  auto add = [&](ThreadList& list, int start, std::size_t pos) {
    stack.push_back(start);
    while (!stack.empty()) {
      int pc = stack.back();
      stack.pop_back();
      if (list.contains(pc)) continue;
      list.insert(pc);
      const Inst& in = code[pc];
      switch (in.op) {
        case Op::jump:
          stack.push_back(in.x);
          break;
        case Op::split:
          stack.push_back(in.y);
          stack.push_back(in.x);
          break;
        case Op::assert_at:
          if (assertion_holds(in.assertion, text, pos)) stack.push_back(pc + 1);
          break;
        case Op::match:
          matched = true;
          break;
        default:
          break;
      }
    }
  };

  for (std::size_t pos = 0;; ++pos) {
    add(current, 0, pos);
    if (matched) return true;
    if (pos == text.size()) return false;
    const char32_t c = text[pos];
    for (std::size_t i = 0; i < current.size(); ++i) {
      const Inst& in = code[current[i]];
      bool step = (in.op == Op::consume && classes[in.cls].matches(c)) ||
                  in.op == Op::any || (in.op == Op::any_nl && c != '\n');
      if (step) add(next, current[i] + 1, pos + 1);
      if (matched) return true;
    }
    std::swap(current, next);
    next.clear();
  }
}

}  // namespace trident::regex
