#include "filter_lexer.hpp"

#include <array>
#include <cctype>
#include <cstdlib>

namespace trident::filter {
namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

void append_utf8(std::string& out, unsigned cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Longest-first so that "//" wins over "/" and "?//" over "?".
constexpr std::array<std::string_view, 31> kPuncts = {
    "?//", "|=", "+=", "-=", "*=", "/=", "%=", "//=", "==", "!=", "<=", ">=", "//",
    "[",   "]",  "{",  "}",  "(",  ")",  "|",  ",",   ":",  ";",  "?",  "<",  ">",
    "+",   "-",  "*",  "/",  "="};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.location = here();
      std::size_t start = pos_;
      if (pos_ >= src_.size()) {
        t.kind = TokenKind::end;
        out.push_back(std::move(t));
        return out;
      }
      char c = src_[pos_];
      if (c == '"') {
        t.kind = TokenKind::string;
        t.text = read_string(t.location);
      } else if (c == '.' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '.') {
        t.kind = TokenKind::dot_dot;
        advance(2);
      } else if (c == '.' && pos_ + 1 < src_.size() && ident_start(src_[pos_ + 1])) {
        advance(1);
        t.kind = TokenKind::field;
        t.text = read_ident();
      } else if (c == '.' && pos_ + 1 < src_.size() &&
                 std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
        t.kind = TokenKind::number;
        t.number = read_number();
      } else if (c == '.') {
        t.kind = TokenKind::dot;
        advance(1);
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        t.kind = TokenKind::number;
        t.number = read_number();
      } else if (ident_start(c)) {
        t.kind = TokenKind::ident;
        t.text = read_ident();
        // jq allows module-qualified names (a::b); treat as one identifier.
        while (pos_ + 2 < src_.size() && src_.substr(pos_, 2) == "::" && ident_start(src_[pos_ + 2])) {
          advance(2);
          t.text += "::" + read_ident();
        }
      } else if (c == '$' || c == '@') {
        advance(1);
        t.kind = c == '$' ? TokenKind::variable : TokenKind::format;
        t.text = pos_ < src_.size() && ident_start(src_[pos_]) ? read_ident() : std::string();
      } else {
        bool matched = false;
        for (auto p : kPuncts) {
          if (src_.substr(pos_, p.size()) == p) {
            t.kind = TokenKind::punct;
            t.text = std::string(p);
            advance(p.size());
            matched = true;
            break;
          }
        }
        if (!matched) {
          throw CompileError("unexpected character", t.location, std::string(1, c));
        }
      }
      t.raw = std::string(src_.substr(start, pos_ - start));
      out.push_back(std::move(t));
    }
  }

 private:
  SourceLocation here() const { return {line_, col_}; }

  void advance(std::size_t n) {
    for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance(1);
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance(1);
      } else {
        break;
      }
    }
  }

  std::string read_ident() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && ident_char(src_[pos_])) advance(1);
    return std::string(src_.substr(start, pos_ - start));
  }

  json read_number() {
    std::size_t start = pos_;
    bool integral = true;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance(1);
    if (pos_ < src_.size() && src_[pos_] == '.') {
      integral = false;
      advance(1);
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance(1);
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      integral = false;
      advance(1);
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance(1);
      std::size_t digits = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance(1);
      if (digits == pos_) {
        throw CompileError("malformed number", here(), std::string(src_.substr(start, pos_ - start)));
      }
    }
    std::string text(src_.substr(start, pos_ - start));
    if (integral && text.size() <= 15) return json(std::stoll(text));
    return json(std::strtod(text.c_str(), nullptr));
  }

  unsigned read_hex4(SourceLocation at) {
    if (pos_ + 4 > src_.size()) throw CompileError("invalid \\u escape", at, "\\u");
    unsigned v = 0;
    for (int i = 0; i < 4; ++i) {
      char h = src_[pos_];
      int d = std::isdigit(static_cast<unsigned char>(h)) ? h - '0'
              : (h >= 'a' && h <= 'f')                    ? h - 'a' + 10
              : (h >= 'A' && h <= 'F')                    ? h - 'A' + 10
                                                          : -1;
      if (d < 0) throw CompileError("invalid \\u escape", at, "\\u");
      v = v * 16 + static_cast<unsigned>(d);
      advance(1);
    }
    return v;
  }

  std::string read_string(SourceLocation at) {
    advance(1);  // opening quote
    std::string out;
    for (;;) {
      if (pos_ >= src_.size()) throw CompileError("unterminated string literal", at, "\"");
      char c = src_[pos_];
      if (c == '"') {
        advance(1);
        return out;
      }
      if (c != '\\') {
        out.push_back(c);
        advance(1);
        continue;
      }
      SourceLocation esc_at = here();
      advance(1);
      if (pos_ >= src_.size()) throw CompileError("unterminated string literal", at, "\"");
      char e = src_[pos_];
      advance(1);
      switch (e) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case '/': out.push_back('/'); break;
        case 'b': out.push_back('\b'); break;
        case 'f': out.push_back('\f'); break;
        case 'n': out.push_back('\n'); break;
        case 'r': out.push_back('\r'); break;
        case 't': out.push_back('\t'); break;
        case 'u': {
          unsigned cp = read_hex4(esc_at);
          if (cp >= 0xD800 && cp <= 0xDBFF && src_.substr(pos_, 2) == "\\u") {
            advance(2);
            unsigned lo = read_hex4(esc_at);
            if (lo >= 0xDC00 && lo <= 0xDFFF) {
              cp = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
            } else {
              append_utf8(out, 0xFFFD);
              cp = lo;
            }
          }
          append_utf8(out, cp);
          break;
        }
        case '(':
          throw CompileError("string interpolation is not supported", esc_at, "\\(");
        default:
          throw CompileError("invalid escape", esc_at, std::string("\\") + e);
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace

CompileError::CompileError(const std::string& message, SourceLocation location, std::string token)
    : std::runtime_error(std::to_string(location.line) + ":" + std::to_string(location.column) +
                         ": " + message + (token.empty() ? "" : " near '" + token + "'")),
      location_(location),
      token_(std::move(token)),
      detail_(message) {}

std::vector<Token> tokenize(std::string_view source) { return Lexer(source).run(); }

}  // namespace trident::filter
