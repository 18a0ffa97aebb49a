#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "trident/errors.hpp"
#include "trident/report_store.hpp"

namespace trident::llm {

enum class Verdict { malicious, benign, error };
enum class ErrorKind { refusal, parse_failure, transport };

std::string_view to_string(Verdict verdict);
std::string_view to_string(ErrorKind kind);

struct VerdictResponse {
  Verdict verdict = Verdict::error;
  std::string explanation;
  std::string raw;
  std::optional<ErrorKind> error_kind;
};

struct GeneratedRule {
  std::string name;
  std::string description;
  std::string source;
};

struct GeneratedRuleSet {
  std::string origin;
  std::vector<GeneratedRule> rules;
  std::string raw;
  /// Set when no rule list could be obtained (empty `rules`).
  std::optional<ErrorKind> error_kind;
};

enum class RequestKind { verdict, rules };
std::string_view to_string(RequestKind kind);

struct Request {
  RequestKind kind = RequestKind::verdict;
  std::string sample_id;
  std::string prompt;
};

/// finish_reason carries provider stop reasons such as "PROHIBITED_CONTENT"
/// or "content_filter"; see is_refusal().
struct Reply {
  std::string text;
  std::optional<std::string> finish_reason;
};

bool is_refusal(const Reply& reply);

/// Network or HTTP failure. The gateway retries once before giving up.
class TransportError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

/// Replay provider asked for a prompt that was never recorded.
class CacheMissError : public ProviderError {
 public:
  explicit CacheMissError(std::string prompt_sha256);
  const std::string& prompt_sha256() const noexcept { return hash_; }

 private:
  std::string hash_;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual Reply complete(const Request& request) = 0;
  virtual std::string name() const = 0;
  virtual std::string model() const = 0;
};

struct CacheEntry {
  std::string prompt_sha256;
  std::string prompt;
  std::string reply;
  std::string provider;
  std::string model;
  std::string timestamp;
  std::optional<std::string> finish_reason;

  json to_json() const;
  static CacheEntry from_json(const json& j);
};

/// Append-only JSONL store keyed by prompt hash. The first record for a hash
/// wins on lookup. Appends are serialized and flushed per line.
class ResponseCache {
 public:
  ResponseCache() = default;
  /// Loads existing records; a missing file is an empty cache. Appends go to
  /// the same path.
  explicit ResponseCache(std::filesystem::path path);

  std::optional<CacheEntry> lookup(std::string_view prompt_sha256) const;
  void append(const CacheEntry& entry);
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, CacheEntry, std::less<>> entries_;
};

/// Answers only from the cache; misses raise CacheMissError.
class ReplayProvider : public Provider {
 public:
  explicit ReplayProvider(std::shared_ptr<const ResponseCache> cache);
  Reply complete(const Request& request) override;
  std::string name() const override { return "replay"; }
  std::string model() const override { return "replay"; }

 private:
  std::shared_ptr<const ResponseCache> cache_;
};

/// Canned replies keyed by (kind, sample_id). Successive calls walk the
/// reply sequence; the last reply repeats. Unknown keys fall back to
/// `fallback` when set, otherwise raise CacheMissError.
class ScriptedProvider : public Provider {
 public:
  void add(RequestKind kind, std::string sample_id, std::vector<Reply> replies);
  void set_fallback(Reply reply) { fallback_ = std::move(reply); }
  Reply complete(const Request& request) override;
  std::string name() const override { return "scripted"; }
  std::string model() const override { return "scripted"; }
  std::size_t calls() const;

 private:
  struct Script {
    std::vector<Reply> replies;
    std::size_t next = 0;
  };
  mutable std::mutex mutex_;
  std::map<std::pair<RequestKind, std::string>, Script> scripts_;
  std::optional<Reply> fallback_;
  std::size_t calls_ = 0;
};

struct LiveOptions {
  std::string base_url;  // e.g. https://api.example.com/v1
  std::string model;
  std::string api_key_env = "TRIDENT_API_KEY";
  double temperature = 0.0;
  int max_output_tokens = 4096;
  /// JSON object merged into the request body (e.g. {"reasoning_effort":"high"}).
  std::string options;
  double requests_per_second = 2.0;
  std::chrono::seconds timeout{120};
};

/// Chat-completion style HTTP endpoint (POST <base_url>/chat/completions).
/// Cached prompts are answered locally; every fresh reply is appended to the
/// cache before it is returned.
class LiveProvider : public Provider {
 public:
  LiveProvider(LiveOptions options, std::shared_ptr<ResponseCache> cache);
  ~LiveProvider() override;
  Reply complete(const Request& request) override;
  std::string name() const override { return "live"; }
  std::string model() const override { return options_.model; }

 private:
  void acquire_token();

  LiveOptions options_;
  std::shared_ptr<ResponseCache> cache_;
  json extra_;
  std::string api_key_;
  std::mutex bucket_mutex_;
  double tokens_ = 1.0;
  std::chrono::steady_clock::time_point refilled_;
};

/// Prompt templates. The report is embedded as canonical JSON.
std::string render_verdict_prompt(const json& report_document);
std::string render_rules_prompt(const json& report_document);
/// Appended to the rules prompt when the first reply had no parseable JSON.
std::string reprompt_suffix();

/// Total: every reply maps to malicious, benign or error(parse_failure).
VerdictResponse parse_verdict_reply(std::string_view text);

/// Strips code fences and surrounding prose and returns the outermost JSON
/// object, tolerating raw newlines inside strings and trailing commas.
std::optional<json> extract_json_object(std::string_view text);

/// Parses a {"rules": [...]} reply; nullopt when no valid rule list exists.
std::optional<std::vector<GeneratedRule>> parse_rules_reply(std::string_view text);

struct GatewayOptions {
  std::size_t max_in_flight = 4;
  int transport_retries = 1;
  int reprompt_retries = 1;
};

/// Renders prompts, calls the provider with bounded concurrency and retry,
/// and parses replies. CacheMissError is never swallowed.
class Gateway {
 public:
  explicit Gateway(std::shared_ptr<Provider> provider, GatewayOptions options = {});

  VerdictResponse request_verdict(const BehaviorReport& report);
  GeneratedRuleSet request_rules(const BehaviorReport& report);

  Provider& provider() noexcept { return *provider_; }

 private:
  Reply call(const Request& request);

  std::shared_ptr<Provider> provider_;
  GatewayOptions options_;
  std::counting_semaphore<1024> in_flight_;
};

}  // namespace trident::llm
