#include <cmath>
#include <cstring>
#include <functional>
#include <string>
#include <type_traits>

#include "filter_ast.hpp"

namespace trident::filter {
namespace {

// Non-owning callable reference; avoids std::function allocations on the
// hot path of stream evaluation.
template <typename Sig>
class FunctionRef;

template <typename R, typename... Args>
class FunctionRef<R(Args...)> {
 public:
  template <typename F,
            typename = std::enable_if_t<!std::is_same_v<std::decay_t<F>, FunctionRef>>>
  FunctionRef(F&& f) noexcept  // NOLINT(google-explicit-constructor)
      : obj_(const_cast<void*>(static_cast<const void*>(std::addressof(f)))),
        call_([](void* o, Args... a) -> R {
          return (*static_cast<std::remove_reference_t<F>*>(o))(std::forward<Args>(a)...);
        }) {}
  R operator()(Args... a) const { return call_(obj_, std::forward<Args>(a)...); }

 private:
  void* obj_;
  R (*call_)(void*, Args...);
};

using Emit = FunctionRef<void(const json&)>;

struct ErrorSignal {
  std::string message;
  SourceLocation location;
};

struct TimeoutSignal {};

const json& null_value() {
  static const json kNull = nullptr;
  return kNull;
}

const char* type_name(const json& v) {
  switch (v.type()) {
    case json::value_t::null:
      return "null";
    case json::value_t::boolean:
      return "boolean";
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
    case json::value_t::number_float:
      return "number";
    case json::value_t::string:
      return "string";
    case json::value_t::array:
      return "array";
    case json::value_t::object:
      return "object";
    default:
      return "unknown";
  }
}

// "type (value)" with the value dump truncated, as jq reports it.
std::string describe_value(const json& v) {
  std::string dump = v.dump(-1, ' ', false, json::error_handler_t::replace);
  if (dump.size() > 11) dump = dump.substr(0, 10) + "...";
  return std::string(type_name(v)) + " (" + dump + ")";
}

bool truthy(const json& v) { return !(v.is_null() || (v.is_boolean() && !v.get<bool>())); }

int type_rank(const json& v) {
  switch (v.type()) {
    case json::value_t::null:
      return 0;
    case json::value_t::boolean:
      return v.get<bool>() ? 2 : 1;
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
    case json::value_t::number_float:
      return 3;
    case json::value_t::string:
      return 4;
    case json::value_t::array:
      return 5;
    case json::value_t::object:
      return 6;
    default:
      return 7;
  }
}

// jq's total order: null < false < true < numbers < strings < arrays < objects.
int compare(const json& a, const json& b) {
  int ra = type_rank(a), rb = type_rank(b);
  if (ra != rb) return ra < rb ? -1 : 1;
  switch (ra) {
    case 3: {
      double x = a.get<double>(), y = b.get<double>();
      return x < y ? -1 : (x > y ? 1 : 0);
    }
    case 4: {
      const auto& x = a.get_ref<const std::string&>();
      const auto& y = b.get_ref<const std::string&>();
      int c = x.compare(y);
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    case 5: {
      std::size_t n = std::min(a.size(), b.size());
      for (std::size_t i = 0; i < n; ++i) {
        if (int c = compare(a[i], b[i])) return c;
      }
      return a.size() < b.size() ? -1 : (a.size() > b.size() ? 1 : 0);
    }
    case 6: {
      // Keys first (as sorted arrays), then values in key order.
      auto ia = a.begin(), ib = b.begin();
      for (; ia != a.end() && ib != b.end(); ++ia, ++ib) {
        int c = ia.key().compare(ib.key());
        if (c) return c < 0 ? -1 : 1;
      }
      if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
      for (ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
        if (int c = compare(ia.value(), ib.value())) return c;
      }
      return 0;
    }
    default:
      return 0;
  }
}

std::size_t utf8_length(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

}  // namespace

struct Evaluator {
  const Program& program;
  Budget budget;
  std::chrono::steady_clock::time_point deadline;
  std::uint64_t steps = 0;

  Evaluator(const FilterAst& ast, const Budget& b)
      : program(*ast.program_),
        budget(b),
        deadline(std::chrono::steady_clock::now() + b.time) {}

  void step() {
    ++steps;
    if (budget.max_steps && steps > *budget.max_steps) throw TimeoutSignal{};
    if ((steps & 0xFF) == 0 && std::chrono::steady_clock::now() >= deadline) {
      throw TimeoutSignal{};
    }
  }

  [[noreturn]] static void error(const Node& n, std::string message) {
    throw ErrorSignal{std::move(message), n.location};
  }

  // Runs `body`, swallowing errors raised by body itself but not those
  // raised by downstream consumers inside `out`. Returns true if an error
  // was swallowed.
  template <typename Body>
  bool guarded(Body&& body) {
    bool downstream_failed = false;
    try {
      body([&](const json& v, Emit out) {
        try {
          out(v);
        } catch (const ErrorSignal&) {
          downstream_failed = true;
          throw;
        }
      });
    } catch (const ErrorSignal&) {
      if (downstream_failed) throw;
      return true;
    }
    return false;
  }

  void eval(const Node& n, const json& in, Emit out) {
    step();
    switch (n.kind) {
      case Node::Kind::identity:
        out(in);
        return;
      case Node::Kind::literal:
        out(n.value);
        return;
      case Node::Kind::field:
        eval(*n.lhs, in, [&](const json& target) {
          if (!n.optional) {
            out(index_field(n, target, n.key));
            return;
          }
          const json* v = nullptr;
          guarded([&](auto&&) { v = &index_field(n, target, n.key); });
          if (v) out(*v);
        });
        return;
      case Node::Kind::index:
        eval(*n.rhs, in, [&](const json& key) {
          eval(*n.lhs, in, [&](const json& target) {
            if (!n.optional) {
              out(index_value(n, target, key));
              return;
            }
            const json* v = nullptr;
            guarded([&](auto&&) { v = &index_value(n, target, key); });
            if (v) out(*v);
          });
        });
        return;
      case Node::Kind::iterate:
        eval(*n.lhs, in, [&](const json& target) {
          if (!target.is_array() && !target.is_object()) {
            if (n.optional) return;
            error(n, "Cannot iterate over " + describe_value(target));
          }
          for (const auto& item : target) {
            step();
            out(item);
          }
        });
        return;
      case Node::Kind::try_:
        guarded([&](auto&& forward) {
          eval(*n.lhs, in, [&](const json& v) { forward(v, out); });
        });
        return;
      case Node::Kind::pipe:
        eval(*n.lhs, in, [&](const json& v) { eval(*n.rhs, v, out); });
        return;
      case Node::Kind::collect: {
        json arr = json::array();
        eval(*n.lhs, in, [&](const json& v) { arr.push_back(v); });
        out(arr);
        return;
      }
      case Node::Kind::object: {
        json obj = json::object();
        build_object(n, in, 0, obj, out);
        return;
      }
      case Node::Kind::compare:
        eval(*n.rhs, in, [&](const json& r) {
          eval(*n.lhs, in, [&](const json& l) {
            int c = compare(l, r);
            bool result = false;
            switch (n.op) {
              case CompareOp::eq: result = c == 0; break;
              case CompareOp::ne: result = c != 0; break;
              case CompareOp::lt: result = c < 0; break;
              case CompareOp::le: result = c <= 0; break;
              case CompareOp::gt: result = c > 0; break;
              case CompareOp::ge: result = c >= 0; break;
            }
            out(json(result));
          });
        });
        return;
      case Node::Kind::and_:
        eval(*n.lhs, in, [&](const json& l) {
          if (!truthy(l)) {
            out(json(false));
            return;
          }
          eval(*n.rhs, in, [&](const json& r) { out(json(truthy(r))); });
        });
        return;
      case Node::Kind::or_:
        eval(*n.lhs, in, [&](const json& l) {
          if (truthy(l)) {
            out(json(true));
            return;
          }
          eval(*n.rhs, in, [&](const json& r) { out(json(truthy(r))); });
        });
        return;
      case Node::Kind::alternative: {
        // Errors on the left propagate; they are not treated as "empty".
        bool any = false;
        eval(*n.lhs, in, [&](const json& v) {
          if (truthy(v)) {
            any = true;
            out(v);
          }
        });
        if (!any) eval(*n.rhs, in, out);
        return;
      }
      case Node::Kind::call:
        eval(*program.defs[n.def_index].body, in, out);
        return;
      case Node::Kind::builtin:
        eval_builtin(n, in, out);
        return;
    }
  }

  const json& index_field(const Node& n, const json& target, const std::string& key) {
    if (target.is_null()) return null_value();
    if (!target.is_object()) {
      error(n, "Cannot index " + std::string(type_name(target)) + " with " + describe_value(json(key)));
    }
    auto it = target.find(key);
    return it == target.end() ? null_value() : *it;
  }

  const json& index_value(const Node& n, const json& target, const json& key) {
    if (key.is_string()) return index_field(n, target, key.get_ref<const std::string&>());
    if (key.is_number()) {
      if (target.is_null()) return null_value();
      if (!target.is_array()) {
        error(n, "Cannot index " + std::string(type_name(target)) + " with " + describe_value(key));
      }
      double d = std::floor(key.get<double>());
      auto size = static_cast<double>(target.size());
      if (d < 0) d += size;
      if (d < 0 || d >= size) return null_value();
      return target[static_cast<std::size_t>(d)];
    }
    if (target.is_null() && key.is_null()) return null_value();
    error(n, "Cannot index " + std::string(type_name(target)) + " with " + type_name(key));
  }

  void build_object(const Node& n, const json& in, std::size_t i, json& obj, Emit out) {
    if (i == n.args.size()) {
      out(obj);
      return;
    }
    auto with_key = [&](const std::string& key) {
      eval(*n.args[i], in, [&](const json& value) {
        json saved;
        bool had = obj.contains(key);
        if (had) saved = obj[key];
        obj[key] = value;
        build_object(n, in, i + 1, obj, out);
        if (had) {
          obj[key] = std::move(saved);
        } else {
          obj.erase(key);
        }
      });
    };
    if (!n.key_exprs[i]) {
      with_key(n.object_keys[i]);
      return;
    }
    eval(*n.key_exprs[i], in, [&](const json& k) {
      if (!k.is_string()) error(n, "Object keys must be strings");
      with_key(k.get<std::string>());
    });
  }

  static bool contains(const Node& n, const json& a, const json& b) {
    if (type_rank(a) != type_rank(b)) {
      error(n, describe_value(a) + " and " + describe_value(b) +
                   " cannot have their containment checked");
    }
    if (a.is_object()) {
      for (auto it = b.begin(); it != b.end(); ++it) {
        auto found = a.find(it.key());
        if (found == a.end() || !contains(n, *found, it.value())) return false;
      }
      return true;
    }
    if (a.is_array()) {
      for (const auto& bi : b) {
        bool any = false;
        for (const auto& ai : a) {
          if (type_rank(ai) == type_rank(bi) && contains(n, ai, bi)) {
            any = true;
            break;
          }
        }
        if (!any) return false;
      }
      return true;
    }
    if (a.is_string()) {
      return a.get_ref<const std::string&>().find(b.get_ref<const std::string&>()) !=
             std::string::npos;
    }
    return compare(a, b) == 0;
  }

  void run_test(const Node& n, const json& in, const json& pattern, const json* flags, Emit out) {
    if (!in.is_string()) {
      error(n, describe_value(in) + " cannot be matched, as it is not a string");
    }
    if (!pattern.is_string()) error(n, describe_value(pattern) + " not a string or array");
    std::string flag_text;
    if (flags && !flags->is_null()) {
      if (!flags->is_string()) error(n, describe_value(*flags) + " is not a string");
      flag_text = flags->get<std::string>();
    }
    try {
      auto re = regex::Regex::compile(pattern.get<std::string>(), flag_text);
      out(json(re.search(in.get_ref<const std::string&>())));
    } catch (const regex::RegexError& e) {
      error(n, e.what());
    }
  }

  void eval_builtin(const Node& n, const json& in, Emit out) {
    switch (n.builtin) {
      case Builtin::select:
        eval(*n.args[0], in, [&](const json& v) {
          if (truthy(v)) out(in);
        });
        return;
      case Builtin::test:
        if (n.regex || !n.regex_error.empty()) {
          if (!in.is_string()) {
            error(n, describe_value(in) + " cannot be matched, as it is not a string");
          }
          if (!n.regex) error(n, n.regex_error);
          out(json(n.regex->search(in.get_ref<const std::string&>())));
          return;
        }
        eval(*n.args[0], in, [&](const json& pattern) {
          if (n.args.size() == 1) {
            run_test(n, in, pattern, nullptr, out);
            return;
          }
          eval(*n.args[1], in, [&](const json& flags) { run_test(n, in, pattern, &flags, out); });
        });
        return;
      case Builtin::contains:
        eval(*n.args[0], in, [&](const json& b) { out(json(contains(n, in, b))); });
        return;
      case Builtin::startswith:
      case Builtin::endswith: {
        bool starts = n.builtin == Builtin::startswith;
        eval(*n.args[0], in, [&](const json& b) {
          if (!in.is_string() || !b.is_string()) {
            error(n, std::string(starts ? "startswith" : "endswith") +
                         "() requires string inputs");
          }
          const auto& s = in.get_ref<const std::string&>();
          const auto& t = b.get_ref<const std::string&>();
          bool r = t.size() <= s.size() &&
                   (starts ? s.compare(0, t.size(), t) == 0
                           : s.compare(s.size() - t.size(), t.size(), t) == 0);
          out(json(r));
        });
        return;
      }
      case Builtin::ascii_downcase:
      case Builtin::ascii_upcase: {
        bool down = n.builtin == Builtin::ascii_downcase;
        if (!in.is_string()) error(n, "explode input must be a string");
        std::string s = in.get<std::string>();
        for (char& c : s) {
          if (down && c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
          if (!down && c >= 'a' && c <= 'z') c = static_cast<char>(c - 32);
        }
        out(json(std::move(s)));
        return;
      }
      case Builtin::length:
        switch (in.type()) {
          case json::value_t::null:
            out(json(0));
            return;
          case json::value_t::boolean:
            error(n, describe_value(in) + " has no length");
          case json::value_t::string:
            out(json(utf8_length(in.get_ref<const std::string&>())));
            return;
          case json::value_t::array:
          case json::value_t::object:
            out(json(in.size()));
            return;
          case json::value_t::number_integer:
            out(json(std::llabs(in.get<std::int64_t>())));
            return;
          default:
            out(json(std::fabs(in.get<double>())));
            return;
        }
      case Builtin::tostring:
        if (in.is_string()) {
          out(in);
        } else {
          out(json(in.dump(-1, ' ', false, json::error_handler_t::replace)));
        }
        return;
      case Builtin::strings:
        if (in.is_string()) out(in);
        return;
      case Builtin::numbers:
        if (in.is_number()) out(in);
        return;
      case Builtin::objects:
        if (in.is_object()) out(in);
        return;
      case Builtin::arrays:
        if (in.is_array()) out(in);
        return;
      case Builtin::type:
        out(json(type_name(in)));
        return;
      case Builtin::not_:
        out(json(!truthy(in)));
        return;
    }
  }
};

EvalOutcome evaluate(const FilterAst& ast, const json& doc, const Budget& budget) {
  Evaluator ev(ast, budget);
  std::vector<json> values;
  try {
    ev.eval(*ev.program.defs.back().body, doc, [&](const json& v) { values.push_back(v); });
  } catch (const ErrorSignal& e) {
    return RuntimeError{e.message, e.location};
  } catch (const TimeoutSignal&) {
    return Timeout{ev.steps};
  } catch (const json::exception& e) {
    return RuntimeError{e.what(), {}};
  }
  return values;
}

MatchResult rule_matches(const EvalOutcome& outcome) {
  if (std::holds_alternative<RuntimeError>(outcome)) return MatchResult::error;
  if (std::holds_alternative<Timeout>(outcome)) return MatchResult::timeout;
  const auto& values = std::get<std::vector<json>>(outcome);
  if (values.empty()) return MatchResult::no_match;
  if (values.size() == 1 && values.front().is_array() && values.front().empty()) {
    return MatchResult::no_match;
  }
  return MatchResult::match;
}

std::string_view to_string(MatchResult result) {
  switch (result) {
    case MatchResult::match:
      return "match";
    case MatchResult::no_match:
      return "no_match";
    case MatchResult::error:
      return "error";
    case MatchResult::timeout:
      return "timeout";
  }
  return "?";
}

}  // namespace trident::filter
