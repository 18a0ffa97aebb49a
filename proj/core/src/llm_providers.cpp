#include <cstdlib>
#include <ctime>
#include <thread>

#include <httplib.h>

#include "trident/hashing.hpp"
#include "trident/llm_gateway.hpp"

namespace trident::llm {

namespace {

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Reply from_entry(const CacheEntry& e) { return Reply{e.reply, e.finish_reason}; }

}  // namespace

ReplayProvider::ReplayProvider(std::shared_ptr<const ResponseCache> cache)
    : cache_(std::move(cache)) {
  if (!cache_) throw ConfigError("llm.cache", "replay provider needs a cache file");
}

Reply ReplayProvider::complete(const Request& request) {
  auto hash = sha256_hex(request.prompt);
  auto hit = cache_->lookup(hash);
  if (!hit) throw CacheMissError(hash);
  return from_entry(*hit);
}

void ScriptedProvider::add(RequestKind kind, std::string sample_id, std::vector<Reply> replies) {
  std::lock_guard lock(mutex_);
  scripts_[{kind, std::move(sample_id)}] = Script{std::move(replies), 0};
}

Reply ScriptedProvider::complete(const Request& request) {
  std::lock_guard lock(mutex_);
  ++calls_;
  auto it = scripts_.find({request.kind, request.sample_id});
  if (it == scripts_.end() || it->second.replies.empty()) {
    if (fallback_) return *fallback_;
    throw CacheMissError(sha256_hex(request.prompt));
  }
  auto& script = it->second;
  std::size_t i = std::min(script.next, script.replies.size() - 1);
  ++script.next;
  return script.replies[i];
}

std::size_t ScriptedProvider::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

LiveProvider::LiveProvider(LiveOptions options, std::shared_ptr<ResponseCache> cache)
    : options_(std::move(options)), cache_(std::move(cache)) {
  if (options_.base_url.empty()) throw ConfigError("llm.base_url", "required for live provider");
  if (options_.model.empty()) throw ConfigError("llm.model", "required for live provider");
  if (options_.requests_per_second <= 0) {
    throw ConfigError("llm.requests_per_second", "must be positive");
  }
  if (!cache_) cache_ = std::make_shared<ResponseCache>();
  if (!options_.options.empty()) {
    extra_ = json::parse(options_.options, nullptr, false);
    if (extra_.is_discarded() || !extra_.is_object()) {
      throw ConfigError("llm.options", "must be a JSON object");
    }
  }
  if (const char* key = std::getenv(options_.api_key_env.c_str())) api_key_ = key;
  refilled_ = std::chrono::steady_clock::now();
}

LiveProvider::~LiveProvider() = default;

void LiveProvider::acquire_token() {
  const double capacity = std::max(1.0, options_.requests_per_second);
  for (;;) {
    std::chrono::duration<double> wait{};
    {
      std::lock_guard lock(bucket_mutex_);
      auto now = std::chrono::steady_clock::now();
      std::chrono::duration<double> elapsed = now - refilled_;
      tokens_ = std::min(capacity, tokens_ + elapsed.count() * options_.requests_per_second);
      refilled_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait = std::chrono::duration<double>((1.0 - tokens_) / options_.requests_per_second);
    }
    std::this_thread::sleep_for(wait);
  }
}

Reply LiveProvider::complete(const Request& request) {
  const auto hash = sha256_hex(request.prompt);
  if (auto hit = cache_->lookup(hash)) return from_entry(*hit);

  // Split "scheme://host[:port]/prefix".
  const auto& url = options_.base_url;
  auto scheme_end = url.find("://");
  auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  std::string origin = url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

  json body = {{"model", options_.model},
               {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
               {"temperature", options_.temperature},
               {"max_tokens", options_.max_output_tokens}};
  if (extra_.is_object()) body.update(extra_);

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  acquire_token();
  httplib::Client client(origin);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  auto res = client.Post(prefix + "/chat/completions", headers, body.dump(), "application/json");
  if (!res) throw TransportError("request to " + url + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + url);
  }
  json payload = json::parse(res->body, nullptr, false);
  if (payload.is_discarded() || !payload.contains("choices") || !payload["choices"].is_array() ||
      payload["choices"].empty()) {
    throw TransportError("malformed completion payload from " + url);
  }
  const auto& choice = payload["choices"][0];
  Reply reply;
  if (choice.contains("message") && choice["message"].is_object()) {
    const auto& msg = choice["message"];
    if (msg.contains("content") && msg["content"].is_string()) reply.text = msg["content"];
    if (msg.contains("refusal") && msg["refusal"].is_string()) {
      reply.finish_reason = "refusal";
      if (reply.text.empty()) reply.text = msg["refusal"];
    }
  }
  if (!reply.finish_reason && choice.contains("finish_reason") &&
      choice["finish_reason"].is_string()) {
    reply.finish_reason = choice["finish_reason"].get<std::string>();
  }

  CacheEntry entry{hash,          request.prompt, reply.text,         name(),
                   options_.model, utc_timestamp(), reply.finish_reason};
  // Ordinary stop reasons are not worth recording.
  if (entry.finish_reason && !is_refusal(reply)) entry.finish_reason.reset();
  cache_->append(entry);
  return from_entry(entry);
}

}  // namespace trident::llm
