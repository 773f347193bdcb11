#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace turnwise {

inline constexpr std::string_view kMockBackendId = "mock";

struct ChatRequest {
  std::string backend_id;
  std::string model_id;
  std::string system;
  std::string user;
  double temperature = 0.0;
  int max_output = 1024;
  bool want_scores = false;
};

struct ChatResponse {
  std::string text;
  std::optional<double> speak_score;
  bool cached = false;
  int attempts = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  double base_backoff_s = 1.0;
};

struct BackendConfig {
  std::string endpoint;  // chat-completions URL
  std::string model;     // default model id
  std::string auth_env;  // env var holding the bearer token; empty disables auth
  int max_in_flight = 4;
  int requests_per_minute = 60;
  RetryPolicy retry;
  std::string cache_dir;  // empty: in-memory cache only
  double temperature = 0.7;
  int max_output = 2048;
};

struct HttpResult {
  int status = 0;
  std::string body;
  bool transport_failed = false;  // connection-level failure, retryable
  std::string error;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResult post(const std::string& url, const HttpHeaders& headers,
                          const std::string& body) = 0;
};

/// HTTPS transport backed by cpp-httplib.
std::unique_ptr<Transport> make_http_transport();

/// Time source the limiter and backoff sleep through; tests substitute a
/// virtual clock.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::chrono::steady_clock::time_point now() = 0;
  virtual void sleep_for(std::chrono::milliseconds duration) = 0;
};

std::shared_ptr<Clock> make_system_clock();

struct CompleteOptions {
  // Skip the cache lookup (the response is still written back). Used by the
  // malformed-response retry path, which needs a fresh sample.
  bool bypass_cache_read = false;
};

/// Unified chat-completion access: remote OpenAI-compatible endpoints with
/// retries, token-bucket rate limiting, an in-flight bound and a persistent
/// response cache, plus the built-in deterministic mock backend.
/// Safe for concurrent use.
class Gateway {
 public:
  /// Mock-only gateway with an in-memory cache.
  Gateway();
  Gateway(std::map<std::string, BackendConfig> backends,
          std::unique_ptr<Transport> transport = nullptr,
          std::shared_ptr<Clock> clock = nullptr);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  ChatResponse complete(const ChatRequest& request,
                        const CompleteOptions& options = {});

  bool has_backend(const std::string& backend_id) const;

  /// Content hash (SHA-256 hex) over every request field; the cache key.
  static std::string request_fingerprint(const ChatRequest& request);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Deterministic offline backend. The pipeline stage is inferred from the
/// system prompt; output is a pure function of the request content.
/// Throws Errc::unrecognized_stage.
ChatResponse mock_complete(const ChatRequest& request);

}  // namespace turnwise
