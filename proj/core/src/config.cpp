#include "trident/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "trident/errors.hpp"

namespace trident {

std::string_view to_string(ProviderKind kind) {
  return kind == ProviderKind::live ? "live" : "replay";
}

namespace {

using Getter = std::function<std::string(const PipelineConfig&)>;
using Setter = std::function<void(PipelineConfig&, const std::string&)>;

struct Field {
  std::string key;
  Getter get;
  Setter set;
};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0;
  auto t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() || !std::isfinite(v)) {
    throw ConfigError(key, "expected a number, got '" + text + "'");
  }
  return v;
}

std::size_t to_size(const std::string& key, const std::string& text) {
  std::size_t v = 0;
  auto t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  auto t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

std::vector<std::string> to_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::string num(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string seconds(std::chrono::nanoseconds d) {
  return num(std::chrono::duration<double>(d).count());
}

std::chrono::nanoseconds to_duration(const std::string& key, const std::string& text) {
  double s = to_double(key, text);
  if (s <= 0) throw ConfigError(key, "must be positive");
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::duration<double>(s));
}

YearMonth to_month(const std::string& key, const std::string& text) {
  try {
    return YearMonth::parse(trim(text));
  } catch (const std::exception&) {
    throw ConfigError(key, "expected YYYY-MM, got '" + text + "'");
  }
}

#define PATH_FIELD(key, member)                                                  \
  Field {                                                                        \
    key, [](const PipelineConfig& c) { return c.member.string(); },              \
        [](PipelineConfig& c, const std::string& v) { c.member = trim(v); }      \
  }
#define DOUBLE_FIELD(key, member)                                                        \
  Field {                                                                                \
    key, [](const PipelineConfig& c) { return num(c.member); },                          \
        [](PipelineConfig& c, const std::string& v) { c.member = to_double(key, v); }    \
  }
#define SIZE_FIELD(key, member)                                                        \
  Field {                                                                              \
    key, [](const PipelineConfig& c) { return std::to_string(c.member); },             \
        [](PipelineConfig& c, const std::string& v) { c.member = to_size(key, v); }    \
  }
#define BOOL_FIELD(key, member)                                                        \
  Field {                                                                              \
    key, [](const PipelineConfig& c) { return std::string(c.member ? "true" : "false"); }, \
        [](PipelineConfig& c, const std::string& v) { c.member = to_bool(key, v); }    \
  }
#define SECONDS_FIELD(key, member)                                                        \
  Field {                                                                                 \
    key, [](const PipelineConfig& c) { return seconds(c.member); },                       \
        [](PipelineConfig& c, const std::string& v) { c.member = to_duration(key, v); }   \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      PATH_FIELD("corpus.root", corpus.root),
      PATH_FIELD("corpus.raw_dir", corpus.raw_dir),
      PATH_FIELD("corpus.labels", corpus.labels),
      Field{"corpus.allowed_sandboxes", [](const PipelineConfig& c) { return join(c.corpus.allowed_sandboxes); },
            [](PipelineConfig& c, const std::string& v) { c.corpus.allowed_sandboxes = to_list(v); }},
      Field{"corpus.excluded_sources", [](const PipelineConfig& c) { return join(c.corpus.excluded_sources); },
            [](PipelineConfig& c, const std::string& v) { c.corpus.excluded_sources = to_list(v); }},

      Field{"rules.training_month", [](const PipelineConfig& c) { return c.rules.training_month.str(); },
            [](PipelineConfig& c, const std::string& v) {
              c.rules.training_month = to_month("rules.training_month", v);
            }},
      PATH_FIELD("rules.store", rules.store),
      PATH_FIELD("rules.clusters", rules.clusters),
      SIZE_FIELD("rules.min_cluster_size", rules.hdbscan.min_cluster_size),
      SIZE_FIELD("rules.min_samples", rules.hdbscan.min_samples),

      PATH_FIELD("gbdt.scores", gbdt.scores),
      PATH_FIELD("gbdt.alt_scores", gbdt.alt_scores),

      Field{"llm.provider", [](const PipelineConfig& c) { return std::string(to_string(c.llm.provider)); },
            [](PipelineConfig& c, const std::string& v) {
              auto t = trim(v);
              if (t == "replay") {
                c.llm.provider = ProviderKind::replay;
              } else if (t == "live") {
                c.llm.provider = ProviderKind::live;
              } else {
                throw ConfigError("llm.provider", "expected replay or live, got '" + v + "'");
              }
            }},
      PATH_FIELD("llm.cache", llm.cache),
      Field{"llm.base_url", [](const PipelineConfig& c) { return c.llm.live.base_url; },
            [](PipelineConfig& c, const std::string& v) { c.llm.live.base_url = trim(v); }},
      Field{"llm.model", [](const PipelineConfig& c) { return c.llm.live.model; },
            [](PipelineConfig& c, const std::string& v) { c.llm.live.model = trim(v); }},
      Field{"llm.api_key_env", [](const PipelineConfig& c) { return c.llm.live.api_key_env; },
            [](PipelineConfig& c, const std::string& v) { c.llm.live.api_key_env = trim(v); }},
      DOUBLE_FIELD("llm.temperature", llm.live.temperature),
      Field{"llm.max_output_tokens",
            [](const PipelineConfig& c) { return std::to_string(c.llm.live.max_output_tokens); },
            [](PipelineConfig& c, const std::string& v) {
              c.llm.live.max_output_tokens = static_cast<int>(to_size("llm.max_output_tokens", v));
            }},
      Field{"llm.options", [](const PipelineConfig& c) { return c.llm.live.options; },
            [](PipelineConfig& c, const std::string& v) { c.llm.live.options = trim(v); }},
      DOUBLE_FIELD("llm.requests_per_second", llm.live.requests_per_second),
      Field{"llm.timeout", [](const PipelineConfig& c) { return std::to_string(c.llm.live.timeout.count()); },
            [](PipelineConfig& c, const std::string& v) {
              c.llm.live.timeout = std::chrono::seconds(to_size("llm.timeout", v));
            }},
      SIZE_FIELD("llm.max_in_flight", llm.gateway.max_in_flight),
      Field{"llm.transport_retries",
            [](const PipelineConfig& c) { return std::to_string(c.llm.gateway.transport_retries); },
            [](PipelineConfig& c, const std::string& v) {
              c.llm.gateway.transport_retries = static_cast<int>(to_size("llm.transport_retries", v));
            }},
      Field{"llm.reprompt_retries",
            [](const PipelineConfig& c) { return std::to_string(c.llm.gateway.reprompt_retries); },
            [](PipelineConfig& c, const std::string& v) {
              c.llm.gateway.reprompt_retries = static_cast<int>(to_size("llm.reprompt_retries", v));
            }},

      SIZE_FIELD("decision.tau", decision.tau),
      DOUBLE_FIELD("decision.boundary", decision.boundary),
      DOUBLE_FIELD("decision.tiebreak_high", decision.tiebreak_high),
      DOUBLE_FIELD("decision.tiebreak_low", decision.tiebreak_low),
      Field{"decision.llm_error_policy",
            [](const PipelineConfig& c) { return std::string(to_string(c.decision.llm_error_policy)); },
            [](PipelineConfig& c, const std::string& v) {
              c.decision.llm_error_policy = decision::parse_error_policy(trim(v));
            }},

      SECONDS_FIELD("validation.budget", validation.options.budget),
      DOUBLE_FIELD("validation.max_error_rate", validation.options.max_error_rate),
      SIZE_FIELD("validation.file_workers", validation.options.file_workers),
      BOOL_FIELD("validation.error_rate_all_labels", validation.error_rate_all_labels),

      SECONDS_FIELD("classify.per_rule_budget", classify.per_rule_budget),

      Field{"evaluation.error_mode",
            [](const PipelineConfig& c) { return std::string(to_string(c.evaluation.error_mode)); },
            [](PipelineConfig& c, const std::string& v) {
              c.evaluation.error_mode = evaluation::parse_error_mode(trim(v));
            }},
      BOOL_FIELD("evaluation.pooled", evaluation.pooled),
      Field{"evaluation.methods", [](const PipelineConfig& c) { return join(c.evaluation.methods); },
            [](PipelineConfig& c, const std::string& v) { c.evaluation.methods = to_list(v); }},

      PATH_FIELD("run.dir", run.dir),
      SIZE_FIELD("run.workers", run.workers),
  };
  return kFields;
}

#undef PATH_FIELD
#undef DOUBLE_FIELD
#undef SIZE_FIELD
#undef BOOL_FIELD
#undef SECONDS_FIELD

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError(key, "unknown setting");
}

}  // namespace

PipelineConfig PipelineConfig::load(const std::optional<std::filesystem::path>& file,
                                    const std::vector<std::pair<std::string, std::string>>& overrides) {
  PipelineConfig config;
  if (file) {
    if (!std::filesystem::exists(*file)) throw ConfigError("config", "file not found: " + file->string());
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(file->string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError("config", e.what());
    }
    for (const auto& [section, body] : tree) {
      if (body.empty()) throw ConfigError(section, "settings must live inside a [section]");
      for (const auto& [key, value] : body) {
        field(section + "." + key).set(config, value.data());
      }
    }
  }
  for (const auto& [key, value] : overrides) field(key).set(config, value);
  return config;
}

void PipelineConfig::validate() const {
  decision.validate();
  if (rules.hdbscan.min_cluster_size < 2) throw ConfigError("rules.min_cluster_size", "must be at least 2");
  if (rules.hdbscan.min_samples < 1) throw ConfigError("rules.min_samples", "must be at least 1");
  auto& v = validation.options;
  if (!(v.max_error_rate > 0.0 && v.max_error_rate <= 1.0)) {
    throw ConfigError("validation.max_error_rate", "must lie in (0, 1]");
  }
  if (v.file_workers < 1) throw ConfigError("validation.file_workers", "must be at least 1");
  if (run.workers < 1) throw ConfigError("run.workers", "must be at least 1");
  if (llm.gateway.max_in_flight < 1 || llm.gateway.max_in_flight > 1024) {
    throw ConfigError("llm.max_in_flight", "must lie in [1, 1024]");
  }
  if (llm.live.temperature < 0.0 || llm.live.temperature > 2.0) {
    throw ConfigError("llm.temperature", "must lie in [0, 2]");
  }
  if (llm.live.requests_per_second <= 0.0) throw ConfigError("llm.requests_per_second", "must be positive");
  if (llm.live.max_output_tokens < 1) throw ConfigError("llm.max_output_tokens", "must be positive");
  if (run.dir.empty()) throw ConfigError("run.dir", "must be set");
  for (const auto& m : evaluation.methods) {
    if (m != "rules" && m != "trident" && m != "gbdt" && m != "gbdt_alt") {
      throw ConfigError("evaluation.methods", "unknown method '" + m + "'");
    }
  }
}

std::filesystem::path PipelineConfig::rule_store() const {
  return rules.store.empty() ? run.dir / "rules.jsonl" : rules.store;
}

std::filesystem::path PipelineConfig::cluster_file() const {
  return rules.clusters.empty() ? run.dir / "clusters.json" : rules.clusters;
}

std::string PipelineConfig::to_ini() const {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    auto dot = f.key.find('.');
    auto s = f.key.substr(0, dot);
    if (s != section) {
      out += (section.empty() ? "[" : "\n[") + s + "]\n";
      section = s;
    }
    out += f.key.substr(dot + 1) + " = " + f.get(*this) + "\n";
  }
  return out;
}

void PipelineConfig::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_ini();
}

void require_path(const std::filesystem::path& path, const std::string& field) {
  if (path.empty()) throw ConfigError(field, "required for this command but not set");
  if (!std::filesystem::exists(path)) throw ConfigError(field, "path does not exist: " + path.string());
}

}  // namespace trident
