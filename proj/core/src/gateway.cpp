#include "turnwise/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "request_canon.hpp"
#include "sha256.hpp"
#include "turnwise/error.hpp"

namespace turnwise {

namespace {

using nlohmann::json;

class SystemClock final : public Clock {
 public:
  std::chrono::steady_clock::time_point now() override {
    return std::chrono::steady_clock::now();
  }
  void sleep_for(std::chrono::milliseconds duration) override {
    std::this_thread::sleep_for(duration);
  }
};

class HttpTransport final : public Transport {
 public:
  HttpResult post(const std::string& url, const HttpHeaders& headers,
                  const std::string& body) override {
    const std::size_t scheme = url.find("://");
    if (scheme == std::string::npos) {
      return {0, "", true, "bad endpoint url: " + url};
    }
    const std::size_t path_pos = url.find('/', scheme + 3);
    const std::string base =
        path_pos == std::string::npos ? url : url.substr(0, path_pos);
    const std::string path =
        path_pos == std::string::npos ? "/" : url.substr(path_pos);

    httplib::Client client(base);
    client.set_connection_timeout(std::chrono::seconds(30));
    client.set_read_timeout(std::chrono::seconds(300));
    httplib::Headers http_headers;
    for (const auto& [name, value] : headers) http_headers.emplace(name, value);

    auto result = client.Post(path, http_headers, body, "application/json");
    if (!result) {
      return {0, "", true, httplib::to_string(result.error())};
    }
    return {result->status, result->body, false, ""};
  }
};

struct CacheEntry {
  std::string text;
  std::optional<double> speak_score;
};

// Token bucket refilled at requests_per_minute; capacity is roughly one
// second of budget so bursts stay small.
class RateLimiter {
 public:
  explicit RateLimiter(int requests_per_minute)
      : refill_per_second_(requests_per_minute / 60.0),
        capacity_(std::max(1.0, requests_per_minute / 60.0)),
        tokens_(capacity_) {}

  void acquire(Clock& clock) {
    for (;;) {
      std::chrono::milliseconds wait{0};
      {
        std::lock_guard lock(mutex_);
        const auto now = clock.now();
        if (!primed_) {
          primed_ = true;
          last_refill_ = now;
        }
        const double elapsed =
            std::chrono::duration<double>(now - last_refill_).count();
        tokens_ = std::min(capacity_, tokens_ + elapsed * refill_per_second_);
        last_refill_ = now;
        if (tokens_ >= 1.0) {
          tokens_ -= 1.0;
          return;
        }
        wait = std::chrono::milliseconds(static_cast<long>(
            std::ceil((1.0 - tokens_) / refill_per_second_ * 1000.0)));
      }
      clock.sleep_for(wait);
    }
  }

 private:
  std::mutex mutex_;
  double refill_per_second_;
  double capacity_;
  double tokens_;
  bool primed_ = false;
  std::chrono::steady_clock::time_point last_refill_{};
};

class InFlightGate {
 public:
  explicit InFlightGate(int limit) : limit_(limit) {}

  void enter() {
    std::unique_lock lock(mutex_);
    released_.wait(lock, [this] { return active_ < limit_; });
    ++active_;
  }
  void leave() {
    {
      std::lock_guard lock(mutex_);
      --active_;
    }
    released_.notify_one();
  }

 private:
  std::mutex mutex_;
  std::condition_variable released_;
  int limit_;
  int active_ = 0;
};

bool transient_failure(const HttpResult& result) {
  return result.transport_failed || result.status == 429 || result.status >= 500;
}

}  // namespace

namespace detail {

std::string canonical_request(const ChatRequest& request) {
  json j{{"backend_id", request.backend_id},
         {"model_id", request.model_id},
         {"system", request.system},
         {"user", request.user},
         {"temperature", request.temperature},
         {"max_output", request.max_output},
         {"want_scores", request.want_scores}};
  return j.dump();
}

}  // namespace detail

std::unique_ptr<Transport> make_http_transport() {
  return std::make_unique<HttpTransport>();
}

std::shared_ptr<Clock> make_system_clock() {
  return std::make_shared<SystemClock>();
}

struct Gateway::Impl {
  struct BackendState {
    BackendConfig config;
    std::unique_ptr<RateLimiter> limiter;
    std::unique_ptr<InFlightGate> gate;
  };

  std::map<std::string, BackendState> backends;
  std::unique_ptr<Transport> transport;
  std::shared_ptr<Clock> clock;

  std::mutex cache_mutex;
  std::unordered_map<std::string, CacheEntry> memory_cache;

  BackendState& backend(const std::string& id) {
    const auto it = backends.find(id);
    if (it == backends.end()) {
      throw Error(Errc::config_invalid, "unknown backend: " + id);
    }
    return it->second;
  }

  std::filesystem::path cache_path(const BackendState& state,
                                   const std::string& fingerprint) const {
    return std::filesystem::path(state.config.cache_dir) / (fingerprint + ".json");
  }

  std::optional<CacheEntry> cache_lookup(const BackendState& state,
                                         const std::string& fingerprint) {
    std::lock_guard lock(cache_mutex);
    const auto it = memory_cache.find(fingerprint);
    if (it != memory_cache.end()) return it->second;
    if (state.config.cache_dir.empty()) return std::nullopt;

    std::ifstream in(cache_path(state, fingerprint));
    if (!in) return std::nullopt;
    json entry = json::parse(in, nullptr, false);
    if (entry.is_discarded() || !entry.contains("response")) return std::nullopt;
    CacheEntry cached;
    cached.text = entry["response"].value("text", "");
    if (entry["response"].contains("speak_score") &&
        !entry["response"]["speak_score"].is_null()) {
      cached.speak_score = entry["response"]["speak_score"].get<double>();
    }
    memory_cache[fingerprint] = cached;
    return cached;
  }

  void cache_store(const BackendState& state, const std::string& fingerprint,
                   const ChatRequest& request, const CacheEntry& entry) {
    std::lock_guard lock(cache_mutex);
    memory_cache[fingerprint] = entry;
    if (state.config.cache_dir.empty()) return;

    std::filesystem::create_directories(state.config.cache_dir);
    json body{{"request", json::parse(detail::canonical_request(request))},
              {"response",
               {{"text", entry.text},
                {"speak_score", entry.speak_score
                                    ? json(*entry.speak_score)
                                    : json(nullptr)}}}};
    std::ofstream out(cache_path(state, fingerprint), std::ios::binary);
    out << body.dump(2) << '\n';
  }

  ChatResponse remote_complete(BackendState& state, const ChatRequest& request) {
    const BackendConfig& config = state.config;

    std::string token;
    if (!config.auth_env.empty()) {
      const char* value = std::getenv(config.auth_env.c_str());
      if (value == nullptr || *value == '\0') {
        throw Error(Errc::auth_missing,
                    "environment variable " + config.auth_env + " is not set");
      }
      token = value;
    }

    json body{{"model", request.model_id.empty() ? config.model : request.model_id},
              {"messages",
               json::array({{{"role", "system"}, {"content", request.system}},
                            {{"role", "user"}, {"content", request.user}}})},
              {"temperature", request.temperature},
              {"max_tokens", request.max_output}};
    if (request.want_scores) {
      body["logprobs"] = true;
      body["top_logprobs"] = 5;
    }
    const std::string payload = body.dump();

    HttpHeaders headers;
    if (!token.empty()) headers.emplace_back("Authorization", "Bearer " + token);

    HttpResult last{};
    for (int attempt = 1; attempt <= config.retry.max_attempts; ++attempt) {
      state.limiter->acquire(*clock);
      state.gate->enter();
      last = transport->post(config.endpoint, headers, payload);
      state.gate->leave();

      if (!last.transport_failed && last.status == 200) {
        ChatResponse response = parse_remote_payload(last.body, request);
        response.attempts = attempt;
        return response;
      }
      if (!transient_failure(last)) {
        throw Error(Errc::remote_error,
                    "status " + std::to_string(last.status) + " from " +
                        config.endpoint);
      }
      if (attempt < config.retry.max_attempts) {
        const double backoff_s =
            config.retry.base_backoff_s * static_cast<double>(1 << (attempt - 1));
        clock->sleep_for(
            std::chrono::milliseconds(static_cast<long>(backoff_s * 1000.0)));
      }
    }
    if (last.transport_failed || last.status == 429) {
      throw Error(Errc::rate_limit_exhausted,
                  "gave up after " + std::to_string(config.retry.max_attempts) +
                      " attempts: " +
                      (last.transport_failed ? last.error
                                             : "status " + std::to_string(last.status)));
    }
    throw Error(Errc::remote_error,
                "status " + std::to_string(last.status) + " after retries");
  }

  static ChatResponse parse_remote_payload(const std::string& body,
                                           const ChatRequest& request) {
    json payload = json::parse(body, nullptr, false);
    if (payload.is_discarded() || !payload.contains("choices") ||
        !payload["choices"].is_array() || payload["choices"].empty()) {
      throw Error(Errc::malformed_remote_payload, "no choices in response");
    }
    const json& choice = payload["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content") ||
        !choice["message"]["content"].is_string()) {
      throw Error(Errc::malformed_remote_payload, "no message content");
    }
    ChatResponse response;
    response.text = choice["message"]["content"].get<std::string>();

    // First generated token's score if it is the speak token, otherwise the
    // speak-token alternative at position 0.
    if (request.want_scores && choice.contains("logprobs") &&
        choice["logprobs"].is_object()) {
      const json& content = choice["logprobs"].value("content", json::array());
      if (content.is_array() && !content.empty()) {
        const json& first = content[0];
        if (first.value("token", "") == "<") {
          response.speak_score = first.value("logprob", 0.0);
        } else if (first.contains("top_logprobs")) {
          for (const json& alternative : first["top_logprobs"]) {
            if (alternative.value("token", "") == "<") {
              response.speak_score = alternative.value("logprob", 0.0);
              break;
            }
          }
        }
      }
    }
    return response;
  }
};

Gateway::Gateway() : Gateway(std::map<std::string, BackendConfig>{}) {}

Gateway::Gateway(std::map<std::string, BackendConfig> backends,
                 std::unique_ptr<Transport> transport, std::shared_ptr<Clock> clock)
    : impl_(std::make_unique<Impl>()) {
  backends.emplace(std::string(kMockBackendId), BackendConfig{});
  for (auto& [id, config] : backends) {
    Impl::BackendState state;
    state.config = std::move(config);
    state.limiter = std::make_unique<RateLimiter>(
        std::max(1, state.config.requests_per_minute));
    state.gate = std::make_unique<InFlightGate>(std::max(1, state.config.max_in_flight));
    impl_->backends.emplace(id, std::move(state));
  }
  impl_->transport = transport ? std::move(transport) : make_http_transport();
  impl_->clock = clock ? std::move(clock) : make_system_clock();
}

Gateway::~Gateway() = default;

bool Gateway::has_backend(const std::string& backend_id) const {
  return impl_->backends.count(backend_id) > 0;
}

std::string Gateway::request_fingerprint(const ChatRequest& request) {
  return detail::sha256_hex(detail::canonical_request(request));
}

ChatResponse Gateway::complete(const ChatRequest& request,
                               const CompleteOptions& options) {
  if (request.system.empty() || request.user.empty()) {
    throw Error(Errc::invalid_argument, "system and user must be non-empty");
  }
  auto& state = impl_->backend(request.backend_id);
  const std::string fingerprint = request_fingerprint(request);

  if (!options.bypass_cache_read) {
    if (auto cached = impl_->cache_lookup(state, fingerprint)) {
      ChatResponse response;
      response.text = cached->text;
      response.speak_score = cached->speak_score;
      response.cached = true;
      return response;
    }
  }

  ChatResponse response = request.backend_id == kMockBackendId
                              ? mock_complete(request)
                              : impl_->remote_complete(state, request);
  impl_->cache_store(state, fingerprint, request,
                     {response.text, response.speak_score});
  return response;
}

}  // namespace turnwise
