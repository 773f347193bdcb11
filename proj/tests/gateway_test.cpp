#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include "turnwise/error.hpp"
#include "turnwise/gateway.hpp"
#include "turnwise/pipeline.hpp"
#include "turnwise/rng.hpp"
#include "turnwise/scenario.hpp"
#include "turnwise/transcript.hpp"

using namespace turnwise;

namespace {

std::string ok_body(const std::string& text) {
  return R"({"choices":[{"message":{"content":")" + text + R"("}}]})";
}

class FakeClock final : public Clock {
 public:
  std::chrono::steady_clock::time_point now() override { return now_; }
  void sleep_for(std::chrono::milliseconds duration) override {
    now_ += duration;
    slept_.push_back(duration);
  }
  const std::vector<std::chrono::milliseconds>& slept() const { return slept_; }

 private:
  std::chrono::steady_clock::time_point now_{};
  std::vector<std::chrono::milliseconds> slept_;
};

class ScriptedTransport final : public Transport {
 public:
  explicit ScriptedTransport(std::vector<HttpResult> script)
      : script_(std::move(script)) {}

  HttpResult post(const std::string& url, const HttpHeaders& headers,
                  const std::string& body) override {
    ++calls_;
    last_url_ = url;
    last_headers_ = headers;
    last_body_ = body;
    if (cursor_ >= script_.size()) return {500, "", false, "script exhausted"};
    return script_[cursor_++];
  }

  int calls() const { return calls_; }
  const std::string& last_url() const { return last_url_; }
  const HttpHeaders& last_headers() const { return last_headers_; }
  const std::string& last_body() const { return last_body_; }

 private:
  std::vector<HttpResult> script_;
  std::size_t cursor_ = 0;
  int calls_ = 0;
  std::string last_url_;
  HttpHeaders last_headers_;
  std::string last_body_;
};

// Tracks the peak number of overlapping post() calls.
class ProbeTransport final : public Transport {
 public:
  HttpResult post(const std::string&, const HttpHeaders&,
                  const std::string&) override {
    const int active = ++active_;
    int peak = peak_.load();
    while (active > peak && !peak_.compare_exchange_weak(peak, active)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --active_;
    return {200, ok_body("ok"), false, ""};
  }

  int peak() const { return peak_.load(); }

 private:
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
};

BackendConfig fast_backend() {
  BackendConfig config;
  config.endpoint = "https://example.test/v1/chat/completions";
  config.model = "test-model";
  config.requests_per_minute = 600000;  // keep the limiter out of the way
  config.retry.max_attempts = 3;
  config.retry.base_backoff_s = 1.0;
  return config;
}

ChatRequest remote_request(const std::string& user = "say something") {
  ChatRequest request;
  request.backend_id = "remote";
  request.system = "You are a test fixture.";
  request.user = user;
  request.temperature = 0.0;
  request.max_output = 32;
  return request;
}

ChatRequest stage3_request(const SourceRecord& record, const Scenario& scenario,
                           const GenerationSpec& spec) {
  ChatRequest request;
  request.backend_id = std::string(kMockBackendId);
  request.system = build_transcript_prompt(record, scenario, spec);
  request.user = "Go.";
  return request;
}

}  // namespace

TEST_CASE("cache hit returns identical text with no network activity") {
  auto transport = std::make_unique<ScriptedTransport>(
      std::vector<HttpResult>{{200, ok_body("fresh answer"), false, ""}});
  auto* probe = transport.get();
  Gateway gateway({{"remote", fast_backend()}}, std::move(transport),
                  std::make_shared<FakeClock>());

  const ChatRequest request = remote_request();
  const ChatResponse first = gateway.complete(request);
  CHECK(first.text == "fresh answer");
  CHECK(!first.cached);
  CHECK(first.attempts == 1);
  CHECK(probe->calls() == 1);

  const ChatResponse second = gateway.complete(request);
  CHECK(second.cached);
  CHECK(second.text == first.text);
  CHECK(probe->calls() == 1);  // no further transport activity
}

TEST_CASE("bypass_cache_read forces a fresh request") {
  auto transport = std::make_unique<ScriptedTransport>(
      std::vector<HttpResult>{{200, ok_body("one"), false, ""},
                              {200, ok_body("two"), false, ""}});
  auto* probe = transport.get();
  Gateway gateway({{"remote", fast_backend()}}, std::move(transport),
                  std::make_shared<FakeClock>());

  const ChatRequest request = remote_request();
  CHECK(gateway.complete(request).text == "one");
  const ChatResponse fresh = gateway.complete(request, {.bypass_cache_read = true});
  CHECK(fresh.text == "two");
  CHECK(!fresh.cached);
  CHECK(probe->calls() == 2);
  // The fresh response replaced the cache entry.
  CHECK(gateway.complete(request).text == "two");
  CHECK(probe->calls() == 2);
}

TEST_CASE("transient failure retries with exponential backoff then succeeds") {
  auto transport = std::make_unique<ScriptedTransport>(
      std::vector<HttpResult>{{0, "", true, "connection reset"},
                              {200, ok_body("made it"), false, ""}});
  auto clock = std::make_shared<FakeClock>();
  Gateway gateway({{"remote", fast_backend()}},
                  std::unique_ptr<Transport>(std::move(transport)), clock);

  const ChatResponse response = gateway.complete(remote_request());
  CHECK(response.text == "made it");
  CHECK(response.attempts == 2);
  REQUIRE(clock->slept().size() == 1);
  CHECK(clock->slept()[0] == std::chrono::milliseconds(1000));
}

TEST_CASE("exhausted retries surface as RateLimitedExhausted") {
  auto transport = std::make_unique<ScriptedTransport>(std::vector<HttpResult>{
      {429, "busy", false, ""}, {429, "busy", false, ""}, {429, "busy", false, ""}});
  auto* probe = transport.get();
  auto clock = std::make_shared<FakeClock>();
  Gateway gateway({{"remote", fast_backend()}}, std::move(transport), clock);

  try {
    gateway.complete(remote_request());
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::rate_limit_exhausted);
  }
  CHECK(probe->calls() == 3);
  REQUIRE(clock->slept().size() == 2);
  CHECK(clock->slept()[0] == std::chrono::milliseconds(1000));
  CHECK(clock->slept()[1] == std::chrono::milliseconds(2000));
}

TEST_CASE("non-transient statuses fail immediately") {
  auto transport = std::make_unique<ScriptedTransport>(
      std::vector<HttpResult>{{401, "no auth", false, ""}});
  auto* probe = transport.get();
  Gateway gateway({{"remote", fast_backend()}}, std::move(transport),
                  std::make_shared<FakeClock>());
  try {
    gateway.complete(remote_request());
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::remote_error);
  }
  CHECK(probe->calls() == 1);
}

TEST_CASE("malformed remote payloads are reported") {
  auto transport = std::make_unique<ScriptedTransport>(
      std::vector<HttpResult>{{200, "{\"unexpected\":true}", false, ""}});
  Gateway gateway({{"remote", fast_backend()}}, std::move(transport),
                  std::make_shared<FakeClock>());
  CHECK_THROWS_AS(gateway.complete(remote_request()), Error);
}

TEST_CASE("missing auth variable fails before any network activity") {
  BackendConfig config = fast_backend();
  config.auth_env = "TURNWISE_TEST_ABSENT_KEY";
  unsetenv("TURNWISE_TEST_ABSENT_KEY");

  auto transport = std::make_unique<ScriptedTransport>(std::vector<HttpResult>{});
  auto* probe = transport.get();
  Gateway gateway({{"remote", config}}, std::move(transport),
                  std::make_shared<FakeClock>());
  try {
    gateway.complete(remote_request());
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::auth_missing);
  }
  CHECK(probe->calls() == 0);
}

TEST_CASE("requests carry the OpenAI-compatible body and bearer token") {
  BackendConfig config = fast_backend();
  config.auth_env = "TURNWISE_TEST_KEY";
  setenv("TURNWISE_TEST_KEY", "secret-token-123", 1);

  auto transport = std::make_unique<ScriptedTransport>(
      std::vector<HttpResult>{{200, ok_body("fine"), false, ""}});
  auto* probe = transport.get();
  Gateway gateway({{"remote", config}}, std::move(transport),
                  std::make_shared<FakeClock>());

  ChatRequest request = remote_request("the user text");
  request.want_scores = true;
  gateway.complete(request);

  CHECK(probe->last_url() == config.endpoint);
  const std::string& body = probe->last_body();
  CHECK(body.find("\"model\":\"test-model\"") != std::string::npos);
  CHECK(body.find("the user text") != std::string::npos);
  CHECK(body.find("\"logprobs\":true") != std::string::npos);

  bool saw_auth = false;
  for (const auto& [name, value] : probe->last_headers()) {
    if (name == "Authorization") {
      saw_auth = true;
      CHECK(value == "Bearer secret-token-123");
    }
  }
  CHECK(saw_auth);
  unsetenv("TURNWISE_TEST_KEY");
}

TEST_CASE("persisted cache entries survive a new gateway and hold no secrets") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "turnwise_gateway_cache";
  fs::remove_all(dir);

  BackendConfig config = fast_backend();
  config.auth_env = "TURNWISE_TEST_KEY";
  config.cache_dir = dir.string();
  setenv("TURNWISE_TEST_KEY", "super-secret-value", 1);

  const ChatRequest request = remote_request("cache me");
  {
    auto transport = std::make_unique<ScriptedTransport>(
        std::vector<HttpResult>{{200, ok_body("persisted"), false, ""}});
    Gateway gateway({{"remote", config}}, std::move(transport),
                    std::make_shared<FakeClock>());
    CHECK(gateway.complete(request).text == "persisted");
  }

  // No secret material in any cache entry.
  int files = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    ++files;
    std::ifstream in(entry.path());
    std::stringstream buffer;
    buffer << in.rdbuf();
    CHECK(buffer.str().find("super-secret-value") == std::string::npos);
  }
  CHECK(files == 1);

  // A fresh gateway serves the response from disk, zero transport calls.
  auto transport = std::make_unique<ScriptedTransport>(std::vector<HttpResult>{});
  auto* probe = transport.get();
  Gateway gateway({{"remote", config}}, std::move(transport),
                  std::make_shared<FakeClock>());
  const ChatResponse cached = gateway.complete(request);
  CHECK(cached.cached);
  CHECK(cached.text == "persisted");
  CHECK(probe->calls() == 0);

  unsetenv("TURNWISE_TEST_KEY");
  fs::remove_all(dir);
}

TEST_CASE("concurrent completions respect the in-flight bound") {
  BackendConfig config = fast_backend();
  config.max_in_flight = 2;

  auto transport = std::make_unique<ProbeTransport>();
  auto* probe = transport.get();
  // Real clock: the limiter never sleeps at this rate and threads must
  // genuinely overlap.
  Gateway gateway({{"remote", config}}, std::move(transport));

  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&gateway, i] {
      gateway.complete(remote_request("distinct request " + std::to_string(i)));
    });
  }
  for (auto& thread : threads) thread.join();

  CHECK(probe->peak() <= 2);
  CHECK(probe->peak() >= 1);
}

TEST_CASE("the token bucket paces requests at requests_per_minute") {
  BackendConfig config = fast_backend();
  config.requests_per_minute = 60;  // one token per second, capacity one

  auto transport = std::make_unique<ScriptedTransport>(
      std::vector<HttpResult>{{200, ok_body("a"), false, ""},
                              {200, ok_body("b"), false, ""},
                              {200, ok_body("c"), false, ""}});
  auto clock = std::make_shared<FakeClock>();
  Gateway gateway({{"remote", config}}, std::move(transport), clock);

  gateway.complete(remote_request("r1"));
  CHECK(clock->slept().empty());  // bucket starts full
  gateway.complete(remote_request("r2"));
  gateway.complete(remote_request("r3"));

  std::chrono::milliseconds total{0};
  for (const auto d : clock->slept()) total += d;
  CHECK(total >= std::chrono::milliseconds(1900));
  CHECK(total <= std::chrono::milliseconds(2100));
}

TEST_CASE("speak_score extraction follows the first-token rule") {
  const std::string direct = R"({"choices":[{
    "message":{"content":"<"},
    "logprobs":{"content":[{"token":"<","logprob":-0.11,
      "top_logprobs":[{"token":"<","logprob":-0.11},{"token":">","logprob":-2.3}]}]}}]})";
  const std::string alternative = R"({"choices":[{
    "message":{"content":">"},
    "logprobs":{"content":[{"token":">","logprob":-0.4,
      "top_logprobs":[{"token":">","logprob":-0.4},{"token":"<","logprob":-1.7}]}]}}]})";
  const std::string absent = R"({"choices":[{
    "message":{"content":"hello"},
    "logprobs":{"content":[{"token":"hello","logprob":-0.2,
      "top_logprobs":[{"token":"hello","logprob":-0.2}]}]}}]})";

  auto transport = std::make_unique<ScriptedTransport>(
      std::vector<HttpResult>{{200, direct, false, ""},
                              {200, alternative, false, ""},
                              {200, absent, false, ""}});
  Gateway gateway({{"remote", fast_backend()}}, std::move(transport),
                  std::make_shared<FakeClock>());

  ChatRequest request = remote_request("scored 1");
  request.want_scores = true;
  const ChatResponse first = gateway.complete(request);
  REQUIRE(first.speak_score.has_value());
  CHECK(*first.speak_score == doctest::Approx(-0.11));

  request.user = "scored 2";
  const ChatResponse second = gateway.complete(request);
  REQUIRE(second.speak_score.has_value());
  CHECK(*second.speak_score == doctest::Approx(-1.7));

  request.user = "scored 3";
  CHECK(!gateway.complete(request).speak_score.has_value());
}

TEST_CASE("unknown backends are rejected") {
  Gateway gateway;
  ChatRequest request = remote_request();
  request.backend_id = "nope";
  CHECK_THROWS_AS(gateway.complete(request), Error);
  CHECK(gateway.has_backend(std::string(kMockBackendId)));
  CHECK(!gateway.has_backend("nope"));
}

TEST_CASE("requests with empty prompts are rejected") {
  Gateway gateway;
  ChatRequest request;
  request.backend_id = std::string(kMockBackendId);
  request.system = "x";
  CHECK_THROWS_AS(gateway.complete(request), Error);
}

// ---- mock backend ------------------------------------------------------

TEST_CASE("identical mock requests yield byte-identical output") {
  const auto records = make_demo_corpus(1, 3);
  const Scenario scenario = parse_scenario_response(
      mock_complete({std::string(kMockBackendId), "", build_scenario_prompt(records[0]),
                     "Go.", 0.7, 2048, false})
          .text,
      records[0].id);
  const GenerationSpec spec = sample_spec(11);
  const ChatRequest request = stage3_request(records[0], scenario, spec);
  CHECK(mock_complete(request).text == mock_complete(request).text);
}

TEST_CASE("mock stage-2 output parses as a scenario") {
  const auto records = make_demo_corpus(20, 9);
  int fenced = 0;
  for (const auto& record : records) {
    ChatRequest request;
    request.backend_id = std::string(kMockBackendId);
    request.system = build_scenario_prompt(record);
    request.user = "Go.";
    const ChatResponse response = mock_complete(request);
    if (response.text.rfind("```", 0) == 0) ++fenced;
    const Scenario scenario = parse_scenario_response(response.text, record.id);
    CHECK(!scenario.social_context.empty());
  }
  CHECK(fenced > 0);  // the fence-stripping path gets real coverage
}

TEST_CASE("fifty mock transcripts validate with zero violations") {
  const auto records = make_demo_corpus(50, 21);
  int zero_intervention = 0;
  for (const auto& record : records) {
    ChatRequest scenario_request;
    scenario_request.backend_id = std::string(kMockBackendId);
    scenario_request.system = build_scenario_prompt(record);
    scenario_request.user = "Go.";
    const Scenario scenario =
        parse_scenario_response(mock_complete(scenario_request).text, record.id);

    const GenerationSpec spec = sample_spec(fnv1a64(record.question_title));
    Transcript transcript;
    transcript.conversation_id = "conv";
    transcript.spec = spec;
    transcript.scenario = scenario;
    transcript.turns =
        parse_transcript(mock_complete(stage3_request(record, scenario, spec)).text);

    const ValidationReport report = validate_transcript(transcript);
    CAPTURE(record.question_title);
    CHECK(report.accepted());
    CHECK(report.exchange_count >= kMinExchanges);
    CHECK(report.intervention_count <= kMaxInterventions);
    if (report.intervention_count == 0) ++zero_intervention;
  }
  CHECK(zero_intervention < 50);  // mock speaks in most conversations
}

TEST_CASE("mock zero-shot decisions are single tokens with scores") {
  int speaks = 0;
  for (int i = 0; i < 100; ++i) {
    ChatRequest request;
    request.backend_id = std::string(kMockBackendId);
    request.system =
        "Respond with exactly one character: < or > as described above.";
    request.user = "Speaker_0: context line " + std::to_string(i);
    request.want_scores = true;
    const ChatResponse response = mock_complete(request);
    CHECK((response.text == "<" || response.text == ">"));
    REQUIRE(response.speak_score.has_value());
    CHECK(*response.speak_score < 0.0);
    if (response.text == "<") ++speaks;
  }
  CHECK(speaks > 5);
  CHECK(speaks < 95);
}

TEST_CASE("mock judge answers with a known label") {
  for (int i = 0; i < 30; ++i) {
    ChatRequest request;
    request.backend_id = std::string(kMockBackendId);
    request.system = build_judge_system_prompt();
    request.user = "Intervention:\nwe could check the almanac " + std::to_string(i);
    const ChatResponse response = mock_complete(request);
    CHECK(try_parse_intervention_type(response.text).has_value());
  }
}

TEST_CASE("the mock rejects unrecognized stages") {
  ChatRequest request;
  request.backend_id = std::string(kMockBackendId);
  request.system = "You are a poet.";
  request.user = "Compose.";
  try {
    mock_complete(request);
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unrecognized_stage);
  }
}

TEST_CASE("mock responses are cache-transparent through the gateway") {
  Gateway gateway;
  const auto records = make_demo_corpus(5, 2);
  for (const auto& record : records) {
    ChatRequest request;
    request.backend_id = std::string(kMockBackendId);
    request.system = build_scenario_prompt(record);
    request.user = "Go.";
    const ChatResponse first = gateway.complete(request);
    const ChatResponse second = gateway.complete(request);
    CHECK(first.text == second.text);
    CHECK(!first.cached);
    CHECK(second.cached);
  }
}
