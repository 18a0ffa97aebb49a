#include "trident/llm_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "trident/hashing.hpp"

namespace trident::llm {

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::malicious:
      return "malicious";
    case Verdict::benign:
      return "benign";
    case Verdict::error:
      return "error";
  }
  return "error";
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::refusal:
      return "refusal";
    case ErrorKind::parse_failure:
      return "parse_failure";
    case ErrorKind::transport:
      return "transport";
  }
  return "transport";
}

std::string_view to_string(RequestKind kind) {
  return kind == RequestKind::verdict ? "verdict" : "rules";
}

bool is_refusal(const Reply& reply) {
  if (!reply.finish_reason) return false;
  std::string reason = *reply.finish_reason;
  std::transform(reason.begin(), reason.end(), reason.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  static const char* const kRefusals[] = {"prohibited_content", "safety", "blocklist",
                                          "spii", "content_filter", "refusal"};
  return std::any_of(std::begin(kRefusals), std::end(kRefusals),
                     [&](const char* r) { return reason == r; });
}

CacheMissError::CacheMissError(std::string prompt_sha256)
    : ProviderError("no cached reply for prompt " + prompt_sha256),
      hash_(std::move(prompt_sha256)) {}

json CacheEntry::to_json() const {
  json j = {{"prompt_sha256", prompt_sha256}, {"prompt", prompt},     {"reply", reply},
            {"provider", provider},           {"model", model},       {"timestamp", timestamp}};
  if (finish_reason) j["finish_reason"] = *finish_reason;
  return j;
}

CacheEntry CacheEntry::from_json(const json& j) {
  CacheEntry e;
  e.prompt = j.value("prompt", "");
  e.prompt_sha256 = j.value("prompt_sha256", "");
  if (e.prompt_sha256.empty()) e.prompt_sha256 = sha256_hex(e.prompt);
  e.reply = j.value("reply", "");
  e.provider = j.value("provider", "");
  e.model = j.value("model", "");
  e.timestamp = j.value("timestamp", "");
  if (j.contains("finish_reason") && j["finish_reason"].is_string()) {
    e.finish_reason = j["finish_reason"].get<std::string>();
  }
  return e;
}

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path_.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    auto entry = CacheEntry::from_json(j);
    entries_.try_emplace(entry.prompt_sha256, std::move(entry));
  }
}

std::optional<CacheEntry> ResponseCache::lookup(std::string_view prompt_sha256) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(prompt_sha256);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::append(const CacheEntry& entry) {
  std::lock_guard lock(mutex_);
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw DataError("cannot append to cache " + path_.string());
    out << entry.to_json().dump() << '\n';
  }
  entries_.try_emplace(entry.prompt_sha256, entry);
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

namespace {

constexpr std::string_view kVerdictTemplate =
    "You are an expert security analyst. Given the behavior report below, determine if the "
    "given sample is malicious or benign. Give a verdict of True for malicious or False for "
    "benign. Provide a detailed explanation for your conclusion.\n"
    "\n"
    "Behavior Report: {report}";

constexpr std::string_view kRulesTemplate =
    "You are an expert security analyst. Given the VirusTotal behavior report below, identify "
    "the key behaviors, if any, that distinguish this malware sample from benign software. For "
    "each key behavior identified, create a detection rule using jq-style filters. The rule "
    "should be general enough to catch this malware sample and similar variants, but specific "
    "enough to avoid false positives on benign software. If the rule matches on a test file, it "
    "should return an array of results; otherwise, it should return an empty array.\n"
    "\n"
    "Provide the rules in JSON format. If no distinguishing behaviors are found, return an "
    "empty list of rules.\n"
    "\n"
    "Here is a sample rule and its JSON representation.\n"
    "```\n"
    "#Rule 1: Detect C2 Server Communication (specific IP)\n"
    "def rule_c2_known_ip:\n"
    "  [.data[]?.attributes?.ip_traffic[]?\n"
    "  | select(.destination_ip == \"88.198.101.58\")\n"
    "  | {matched: true, ip: .destination_ip, \n"
    "      port: .destination_port, \n"
    "      protocol: .transport_layer_protocol}\n"
    "  ];\n"
    "```\n"
    "\n"
    "{\n"
    "  \"rules\": [\n"
    "    {\n"
    "    \"name\": \"rule_c2_known_ip\",\n"
    "    \"description\": \"Detect C2 Server Communication\",\n"
    "    \"rule\":  \n"
    "       \"def rule_c2_known_ip:\n"
    "          [.data[]?.attributes?.ip_traffic[]?\n"
    "          | select(.destination_ip==\"88.198.101.58\")\n"
    "          | {matched: true, ip: .destination_ip, \n"
    "                port: .destination_port, \n"
    "                protocol: .transport_layer_protocol\n"
    "             }\n"
    "          ];\",\n"
    "     }\n"
    "   ]\n"
    "}\n"
    "\n"
    "Here is the behavior report to analyze: {report}";

std::string render(std::string_view tmpl, const json& doc) {
  const std::string report = canonical_dump(doc);
  std::string out;
  out.reserve(tmpl.size() + report.size() * 2);
  constexpr std::string_view kSlot = "{report}";
  std::size_t pos = 0;
  for (;;) {
    auto hit = tmpl.find(kSlot, pos);
    if (hit == std::string_view::npos) break;
    out.append(tmpl.substr(pos, hit - pos));
    out.append(report);
    pos = hit + kSlot.size();
  }
  out.append(tmpl.substr(pos));
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Whole-word occurrences of "true"/"false" in a lowercased string.
std::vector<std::pair<std::size_t, bool>> verdict_tokens(const std::string& s) {
  std::vector<std::pair<std::size_t, bool>> hits;
  for (auto [word, value] : {std::pair{std::string_view("true"), true},
                             std::pair{std::string_view("false"), false}}) {
    for (std::size_t p = s.find(word); p != std::string::npos; p = s.find(word, p + 1)) {
      bool left = p == 0 || !word_char(s[p - 1]);
      bool right = p + word.size() >= s.size() || !word_char(s[p + word.size()]);
      if (left && right) hits.emplace_back(p, value);
    }
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Escapes raw control characters inside strings and drops trailing commas.
std::string relax_json(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\' && i + 1 < text.size()) {
        out += c;
        out += text[++i];
        continue;
      }
      if (c == '"') in_string = false;
      if (c == '\n') {
        out += "\\n";
      } else if (c == '\r') {
        out += "\\r";
      } else if (c == '\t') {
        out += "\\t";
      } else {
        out += c;
      }
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      auto next = text.find_first_not_of(" \t\r\n", i + 1);
      if (next != std::string_view::npos && (text[next] == '}' || text[next] == ']')) continue;
    }
    out += c;
  }
  return out;
}

std::optional<json> parse_object(std::string_view candidate) {
  auto open = candidate.find('{');
  auto close = candidate.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    return std::nullopt;
  }
  auto body = candidate.substr(open, close - open + 1);
  for (int pass = 0; pass < 2; ++pass) {
    json j = json::parse(pass == 0 ? std::string(body) : relax_json(body), nullptr, false);
    if (!j.is_discarded() && j.is_object()) return j;
  }
  return std::nullopt;
}

// Contents of ``` fenced blocks, language tag dropped.
std::vector<std::string_view> fenced_blocks(std::string_view text) {
  std::vector<std::string_view> blocks;
  std::size_t pos = 0;
  for (;;) {
    auto open = text.find("```", pos);
    if (open == std::string_view::npos) break;
    auto body = text.find('\n', open);
    if (body == std::string_view::npos) break;
    auto close = text.find("```", body);
    if (close == std::string_view::npos) break;
    blocks.push_back(text.substr(body + 1, close - body - 1));
    pos = close + 3;
  }
  return blocks;
}

}  // namespace

std::string render_verdict_prompt(const json& report_document) {
  return render(kVerdictTemplate, report_document);
}

std::string render_rules_prompt(const json& report_document) {
  return render(kRulesTemplate, report_document);
}

std::string reprompt_suffix() {
  return "\n\nYour previous reply did not contain a parseable JSON object. Reply with only the "
         "JSON object {\"rules\": [...]} described above.";
}

VerdictResponse parse_verdict_reply(std::string_view text) {
  VerdictResponse r;
  r.raw = std::string(text);
  r.explanation = trim(text);
  const std::string low = lower(text);

  std::optional<bool> verdict;
  std::size_t line_start = 0;
  while (line_start <= low.size() && !verdict) {
    auto line_end = low.find('\n', line_start);
    if (line_end == std::string::npos) line_end = low.size();
    std::string line = low.substr(line_start, line_end - line_start);
    auto label = line.find("verdict");
    if (label != std::string::npos) {
      auto tokens = verdict_tokens(line.substr(label));
      if (!tokens.empty()) verdict = tokens.front().second;
    }
    line_start = line_end + 1;
  }
  if (!verdict) {
    auto tokens = verdict_tokens(low);
    if (!tokens.empty()) verdict = tokens.back().second;
  }
  if (!verdict) {
    r.verdict = Verdict::error;
    r.error_kind = ErrorKind::parse_failure;
    return r;
  }
  r.verdict = *verdict ? Verdict::malicious : Verdict::benign;
  return r;
}

std::optional<json> extract_json_object(std::string_view text) {
  for (auto block : fenced_blocks(text)) {
    if (auto j = parse_object(block)) return j;
  }
  return parse_object(text);
}

std::optional<std::vector<GeneratedRule>> parse_rules_reply(std::string_view text) {
  auto accept = [](const json& j) -> std::optional<std::vector<GeneratedRule>> {
    if (!j.contains("rules") || !j["rules"].is_array()) return std::nullopt;
    std::vector<GeneratedRule> rules;
    for (const auto& item : j["rules"]) {
      if (!item.is_object()) continue;
      auto name = item.find("name");
      auto rule = item.find("rule");
      if (name == item.end() || rule == item.end() || !name->is_string() || !rule->is_string()) {
        continue;
      }
      GeneratedRule g;
      g.name = trim(name->get<std::string>());
      g.source = rule->get<std::string>();
      if (auto d = item.find("description"); d != item.end() && d->is_string()) {
        g.description = d->get<std::string>();
      }
      if (!g.name.empty()) rules.push_back(std::move(g));
    }
    return rules;
  };
  for (auto block : fenced_blocks(text)) {
    if (auto j = parse_object(block)) {
      if (auto rules = accept(*j)) return rules;
    }
  }
  if (auto j = parse_object(text)) return accept(*j);
  return std::nullopt;
}

Gateway::Gateway(std::shared_ptr<Provider> provider, GatewayOptions options)
    : provider_(std::move(provider)),
      options_(options),
      in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(options.max_in_flight, 1, 1024))) {
  if (!provider_) throw ConfigError("llm.provider", "no provider configured");
}

Reply Gateway::call(const Request& request) {
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};
  for (int attempt = 0;; ++attempt) {
    try {
      return provider_->complete(request);
    } catch (const TransportError&) {
      if (attempt >= options_.transport_retries) throw;
    }
  }
}

VerdictResponse Gateway::request_verdict(const BehaviorReport& report) {
  Request req{RequestKind::verdict, report.sample_id, render_verdict_prompt(report.document)};
  Reply reply;
  try {
    reply = call(req);
  } catch (const TransportError& e) {
    VerdictResponse r;
    r.raw = e.what();
    r.error_kind = ErrorKind::transport;
    return r;
  }
  if (is_refusal(reply)) {
    VerdictResponse r;
    r.raw = reply.text;
    r.explanation = *reply.finish_reason;
    r.error_kind = ErrorKind::refusal;
    return r;
  }
  return parse_verdict_reply(reply.text);
}

GeneratedRuleSet Gateway::request_rules(const BehaviorReport& report) {
  GeneratedRuleSet out;
  out.origin = report.sample_id;
  Request req{RequestKind::rules, report.sample_id, render_rules_prompt(report.document)};
  for (int attempt = 0; attempt <= options_.reprompt_retries; ++attempt) {
    if (attempt > 0) req.prompt += reprompt_suffix();
    Reply reply;
    try {
      reply = call(req);
    } catch (const TransportError& e) {
      out.raw = e.what();
      out.error_kind = ErrorKind::transport;
      return out;
    }
    out.raw = reply.text;
    if (is_refusal(reply)) {
      out.error_kind = ErrorKind::refusal;
      return out;
    }
    if (auto rules = parse_rules_reply(reply.text)) {
      out.rules = std::move(*rules);
      out.error_kind.reset();
      return out;
    }
    out.error_kind = ErrorKind::parse_failure;
  }
  return out;
}

}  // namespace trident::llm
