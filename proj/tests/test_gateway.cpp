#include <doctest.h>

#include <filesystem>
#include <random>
#include <thread>

#include <json.hpp>

#include "biasbench/errors.hpp"
#include "biasbench/llm_gateway.hpp"
#include "biasbench/prng.hpp"
#include "biasbench/sha256.hpp"
#include "support/test_util.hpp"

using namespace biasbench;
using testutil::FakeClock;
using testutil::FakeTransport;
using testutil::TempDir;
using testutil::TransportLog;

namespace {

RenderedPrompt make_prompt(std::uint64_t id, const std::string& content) {
  RenderedPrompt prompt;
  prompt.strategy_kind = StrategyKind::ZeroShot;
  prompt.statement_id = id;
  prompt.messages.push_back({"user", content});
  prompt.content_hash = sha256_hex(canonical_message_serialization(prompt.messages));
  return prompt;
}

MockFixture scripted_fixture(std::map<std::string, std::string> responses) {
  MockFixture fixture;
  fixture.mode = MockMode::Scripted;
  fixture.responses = std::move(responses);
  return fixture;
}

struct EnvVarGuard {
  explicit EnvVarGuard(const char* name, const char* value) : name_(name) {
    ::setenv(name, value, 1);
  }
  ~EnvVarGuard() { ::unsetenv(name_); }
  const char* name_;
};

// Wraps a backend with a per-call random delay to shake completion order.
class JitterBackend : public Backend {
 public:
  JitterBackend(std::shared_ptr<Backend> inner, std::uint64_t seed)
      : inner_(std::move(inner)), rng_(seed) {}
  BackendResult complete(const RenderedPrompt& prompt, const ModelConfig& config,
                         const RetryPolicy& policy) override {
    std::uint64_t delay;
    {
      std::lock_guard<std::mutex> lock(mu_);
      delay = rng_.next() % 4;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    return inner_->complete(prompt, config, policy);
  }
  BackendKind kind() const override { return inner_->kind(); }
  std::uint64_t invocation_count() const override { return inner_->invocation_count(); }

 private:
  std::shared_ptr<Backend> inner_;
  SplitMix64 rng_;
  std::mutex mu_;
};

}  // namespace

TEST_SUITE("gateway") {

TEST_CASE("retry delays follow the exponential schedule with a cap") {
  RetryPolicy policy;
  CHECK(policy.delay_for_attempt(1) == 1000);
  CHECK(policy.delay_for_attempt(2) == 2000);
  CHECK(policy.delay_for_attempt(3) == 4000);
  CHECK(policy.delay_for_attempt(10) == RetryPolicy::kMaxDelayMs);
}

TEST_CASE("token bucket paces five requests at 60 rpm to 4 virtual seconds") {
  FakeClock clock;
  TokenBucket bucket(60.0, clock);
  for (int i = 0; i < 5; ++i) bucket.acquire();
  CHECK(clock.now_ms() >= 4000);
  CHECK(clock.now_ms() <= 4100);
}

TEST_CASE("token bucket is disabled at rpm 0") {
  FakeClock clock;
  TokenBucket bucket(0.0, clock);
  for (int i = 0; i < 100; ++i) bucket.acquire();
  CHECK(clock.now_ms() == 0);
}

TEST_CASE("mock backend resolves scripted responses by id then hash") {
  const RenderedPrompt prompt = make_prompt(17, "hello");
  MockBackend by_id(scripted_fixture({{"17", "0"}}));
  CHECK(by_id.complete(prompt, ModelConfig{}, RetryPolicy{}).raw_text == "0");

  MockBackend by_hash(scripted_fixture({{prompt.content_hash, "1"}}));
  CHECK(by_hash.complete(prompt, ModelConfig{}, RetryPolicy{}).raw_text == "1");

  MockBackend missing(scripted_fixture({}));
  try {
    missing.complete(prompt, ModelConfig{}, RetryPolicy{});
    FAIL("expected MalformedResponse");
  } catch (const HarnessError& e) {
    CHECK(e.code() == ErrorCode::MalformedResponse);
  }
}

TEST_CASE("mock oracle modes answer from the gold labels") {
  std::map<std::uint64_t, int> gold{{0, 0}, {1, 1}};
  MockFixture correct;
  correct.mode = MockMode::AlwaysCorrect;
  MockBackend correct_backend(correct, gold);
  CHECK(correct_backend.complete(make_prompt(0, "x"), {}, {}).raw_text == "0");
  CHECK(correct_backend.complete(make_prompt(1, "x"), {}, {}).raw_text == "1");

  MockFixture wrong;
  wrong.mode = MockMode::AlwaysWrong;
  MockBackend wrong_backend(wrong, gold);
  CHECK(wrong_backend.complete(make_prompt(0, "x"), {}, {}).raw_text == "1");
  CHECK(wrong_backend.complete(make_prompt(1, "x"), {}, {}).raw_text == "0");
}

TEST_CASE("noisy mock flips per statement, independent of call order") {
  MockFixture noisy;
  noisy.mode = MockMode::Noisy;
  noisy.p0 = noisy.p1 = 0.3;
  noisy.seed = 7;
  std::map<std::uint64_t, int> gold;
  for (std::uint64_t i = 0; i < 100; ++i) gold[i] = static_cast<int>(i % 2);

  MockBackend forward(noisy, gold);
  MockBackend reverse(noisy, gold);
  std::vector<std::string> a, b(100);
  for (std::uint64_t i = 0; i < 100; ++i) {
    a.push_back(forward.complete(make_prompt(i, "x"), {}, {}).raw_text);
  }
  for (std::uint64_t i = 100; i-- > 0;) {
    b[i] = reverse.complete(make_prompt(i, "x"), {}, {}).raw_text;
  }
  CHECK(a == b);
  // frozen from the simulation script: statement 0 keeps gold, statement 4 flips
  CHECK(a[0] == "0");
  CHECK(a[4] == "1");
}

TEST_CASE("live backend retries 429s and reports the attempt count") {
  auto log = std::make_shared<TransportLog>();
  auto transport = std::make_unique<FakeTransport>(log);
  transport->push_status(429);
  transport->push_status(429);
  transport->push_content("1");
  FakeClock clock;
  LiveBackend backend(std::move(transport), clock);
  EnvVarGuard key("BIASBENCH_TEST_KEY", "sekret");
  ModelConfig config;
  config.api_key_env_var = "BIASBENCH_TEST_KEY";

  const BackendResult result = backend.complete(make_prompt(0, "x"), config, RetryPolicy{});
  CHECK(result.raw_text == "1");
  CHECK(result.attempt_count == 3);
  CHECK(log->calls.load() == 3);
  CHECK(clock.now_ms() == 1000 + 2000);  // two backoff sleeps
  CHECK(log->tokens[0] == "sekret");
}

TEST_CASE("auth failures are fatal on the first attempt") {
  auto log = std::make_shared<TransportLog>();
  auto transport = std::make_unique<FakeTransport>(log);
  transport->push_status(401, "{}");
  FakeClock clock;
  LiveBackend backend(std::move(transport), clock);
  EnvVarGuard key("BIASBENCH_TEST_KEY", "sekret");
  ModelConfig config;
  config.api_key_env_var = "BIASBENCH_TEST_KEY";
  try {
    backend.complete(make_prompt(0, "x"), config, RetryPolicy{});
    FAIL("expected AuthError");
  } catch (const HarnessError& e) {
    CHECK(e.code() == ErrorCode::AuthError);
  }
  CHECK(log->calls.load() == 1);
}

TEST_CASE("retries exhaust after max_attempts") {
  auto log = std::make_shared<TransportLog>();
  auto transport = std::make_unique<FakeTransport>(log);
  for (int i = 0; i < 5; ++i) transport->push_status(503);
  FakeClock clock;
  LiveBackend backend(std::move(transport), clock);
  EnvVarGuard key("BIASBENCH_TEST_KEY", "sekret");
  ModelConfig config;
  config.api_key_env_var = "BIASBENCH_TEST_KEY";
  try {
    backend.complete(make_prompt(0, "x"), config, RetryPolicy{});
    FAIL("expected ExhaustedRetries");
  } catch (const HarnessError& e) {
    CHECK(e.code() == ErrorCode::ExhaustedRetries);
  }
  CHECK(log->calls.load() == 5);
}

TEST_CASE("transport failures are retryable") {
  auto log = std::make_shared<TransportLog>();
  auto transport = std::make_unique<FakeTransport>(log);
  transport->push_transport_error("timeout");
  transport->push_content("0");
  FakeClock clock;
  LiveBackend backend(std::move(transport), clock);
  EnvVarGuard key("BIASBENCH_TEST_KEY", "sekret");
  ModelConfig config;
  config.api_key_env_var = "BIASBENCH_TEST_KEY";
  CHECK(backend.complete(make_prompt(0, "x"), config, RetryPolicy{}).attempt_count == 2);
}

TEST_CASE("missing api key and malformed payloads fail fast") {
  {
    auto transport = std::make_unique<FakeTransport>(std::make_shared<TransportLog>());
    LiveBackend backend(std::move(transport));
    ModelConfig config;
    config.api_key_env_var = "BIASBENCH_UNSET_KEY_VAR";
    ::unsetenv("BIASBENCH_UNSET_KEY_VAR");
    try {
      backend.complete(make_prompt(0, "x"), config, RetryPolicy{});
      FAIL("expected MissingApiKey");
    } catch (const HarnessError& e) {
      CHECK(e.code() == ErrorCode::MissingApiKey);
    }
  }
  {
    auto log = std::make_shared<TransportLog>();
    auto transport = std::make_unique<FakeTransport>(log);
    transport->push_status(200, "{\"choices\": []}");
    LiveBackend backend(std::move(transport));
    EnvVarGuard key("BIASBENCH_TEST_KEY", "sekret");
    ModelConfig config;
    config.api_key_env_var = "BIASBENCH_TEST_KEY";
    try {
      backend.complete(make_prompt(0, "x"), config, RetryPolicy{});
      FAIL("expected MalformedResponse");
    } catch (const HarnessError& e) {
      CHECK(e.code() == ErrorCode::MalformedResponse);
    }
  }
}

TEST_CASE("request body carries exactly the configured fields") {
  auto log = std::make_shared<TransportLog>();
  auto transport = std::make_unique<FakeTransport>(log);
  transport->push_content("0");
  LiveBackend backend(std::move(transport));
  EnvVarGuard key("BIASBENCH_TEST_KEY", "sekret");
  ModelConfig config;
  config.api_key_env_var = "BIASBENCH_TEST_KEY";
  config.model_id = "test-model";
  backend.complete(make_prompt(0, "prompt text"), config, RetryPolicy{});

  const nlohmann::json body = nlohmann::json::parse(log->bodies.at(0));
  CHECK(body.size() == 4);  // model, messages, temperature, max_tokens and nothing else
  CHECK(body.at("model") == "test-model");
  CHECK(body.at("temperature") == 0.0);
  CHECK(body.at("max_tokens") == 256);
  CHECK(body.at("messages").at(0).at("role") == "user");
  CHECK(body.at("messages").at(0).at("content") == "prompt text");
  CHECK(log->urls.at(0).ends_with("/chat/completions"));
}

TEST_CASE("second completion of the same prompt is served from the cache") {
  TempDir dir("cache");
  auto backend = std::make_shared<MockBackend>(scripted_fixture({{"5", "0"}}));
  Gateway gateway(backend, ResponseCache(dir / "cache"));
  const RenderedPrompt prompt = make_prompt(5, "payload");

  const CompletionRecord first = gateway.complete(prompt, ModelConfig{}, RetryPolicy{});
  CHECK(first.backend == BackendKind::Mock);
  CHECK(first.raw_text == "0");

  const CompletionRecord second = gateway.complete(prompt, ModelConfig{}, RetryPolicy{});
  CHECK(second.backend == BackendKind::Cache);
  CHECK(second.raw_text == "0");
  CHECK(second.content_hash == first.content_hash);
  CHECK(backend->invocation_count() == 1);

  // layout: cache/<first-2-hex>/<hash>.json
  const auto path = ResponseCache(dir / "cache").path_for(first.content_hash);
  CHECK(std::filesystem::exists(path));
  CHECK(path.parent_path().filename().string() == first.content_hash.substr(0, 2));
}

TEST_CASE("cache key changes with model and temperature") {
  const RenderedPrompt prompt = make_prompt(0, "same text");
  ModelConfig a, b, c;
  b.model_id = "another-model";
  c.temperature = 0.7;
  const std::string key_a = completion_cache_key(prompt, a);
  CHECK(key_a != completion_cache_key(prompt, b));
  CHECK(key_a != completion_cache_key(prompt, c));
  CHECK(key_a == completion_cache_key(prompt, a));
}

TEST_CASE("run_batch preserves input order") {
  TempDir dir("batch");
  std::map<std::string, std::string> responses;
  std::vector<RenderedPrompt> prompts;
  for (std::uint64_t i = 0; i < 10; ++i) {
    prompts.push_back(make_prompt(i, "prompt " + std::to_string(i)));
    responses[std::to_string(i)] = "resp " + std::to_string(i);
  }
  auto backend = std::make_shared<MockBackend>(scripted_fixture(responses));
  Gateway gateway(backend, ResponseCache(dir / "cache"));

  const auto records = gateway.run_batch(prompts, ModelConfig{}, RetryPolicy{}, 3, 0.0);
  REQUIRE(records.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(records[i].raw_text == "resp " + std::to_string(i));
  }
  CHECK(backend->invocation_count() == 10);
}

TEST_CASE("run_batch order is deterministic under jittered latencies") {
  std::map<std::string, std::string> responses;
  std::vector<RenderedPrompt> prompts;
  for (std::uint64_t i = 0; i < 24; ++i) {
    prompts.push_back(make_prompt(i, "p" + std::to_string(i)));
    responses[std::to_string(i)] = std::to_string(i);
  }
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    TempDir dir("jitter");
    auto backend = std::make_shared<JitterBackend>(
        std::make_shared<MockBackend>(scripted_fixture(responses)), seed);
    Gateway gateway(backend, ResponseCache(dir / "cache"));
    const auto records = gateway.run_batch(prompts, ModelConfig{}, RetryPolicy{}, 4, 0.0);
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      CHECK(records[i].raw_text == std::to_string(i));
    }
  }
}

TEST_CASE("run_batch rate limiting holds the rpm ceiling on a virtual clock") {
  TempDir dir("rate");
  FakeClock clock;
  std::map<std::string, std::string> responses;
  std::vector<RenderedPrompt> prompts;
  for (std::uint64_t i = 0; i < 5; ++i) {
    prompts.push_back(make_prompt(i, "p" + std::to_string(i)));
    responses[std::to_string(i)] = "0";
  }
  auto backend = std::make_shared<MockBackend>(scripted_fixture(responses));
  Gateway gateway(backend, ResponseCache(dir / "cache"), clock);
  gateway.run_batch(prompts, ModelConfig{}, RetryPolicy{}, 2, 60.0);
  CHECK(clock.now_ms() >= 4000);
}

TEST_CASE("a fatal error aborts the batch after draining") {
  TempDir dir("fatal");
  // statement 3 has no scripted response -> fatal MalformedResponse
  std::map<std::string, std::string> responses;
  std::vector<RenderedPrompt> prompts;
  for (std::uint64_t i = 0; i < 8; ++i) {
    prompts.push_back(make_prompt(i, "p" + std::to_string(i)));
    if (i != 3) responses[std::to_string(i)] = "0";
  }
  auto backend = std::make_shared<MockBackend>(scripted_fixture(responses));
  Gateway gateway(backend, ResponseCache(dir / "cache"));
  std::atomic<int> delivered{0};
  try {
    gateway.run_batch(prompts, ModelConfig{}, RetryPolicy{}, 2, 0.0,
                      [&](std::size_t, const CompletionRecord&) { ++delivered; });
    FAIL("expected MalformedResponse");
  } catch (const HarnessError& e) {
    CHECK(e.code() == ErrorCode::MalformedResponse);
  }
  CHECK(delivered.load() < 8);  // aborted early, completed work was delivered
}

TEST_CASE("live-run then replay yields identical texts with zero backend calls") {
  TempDir dir("replay");
  std::vector<RenderedPrompt> prompts;
  for (std::uint64_t i = 0; i < 6; ++i) prompts.push_back(make_prompt(i, "p" + std::to_string(i)));

  std::vector<std::string> live_texts;
  {
    auto log = std::make_shared<TransportLog>();
    auto transport = std::make_unique<FakeTransport>(log);
    transport->set_fallback_content("1");
    auto backend = std::make_shared<LiveBackend>(std::move(transport));
    EnvVarGuard key("BIASBENCH_TEST_KEY", "sekret");
    ModelConfig config;
    config.api_key_env_var = "BIASBENCH_TEST_KEY";
    Gateway gateway(backend, ResponseCache(dir / "cache"));
    for (const auto& record : gateway.run_batch(prompts, config, RetryPolicy{}, 2, 0.0)) {
      live_texts.push_back(record.raw_text);
    }
  }
  {
    auto backend = std::make_shared<CacheOnlyBackend>();
    Gateway gateway(backend, ResponseCache(dir / "cache"));
    ModelConfig config;
    const auto records = gateway.run_batch(prompts, config, RetryPolicy{}, 2, 0.0);
    for (std::size_t i = 0; i < records.size(); ++i) {
      CHECK(records[i].raw_text == live_texts[i]);
      CHECK(records[i].backend == BackendKind::Cache);
    }
    CHECK(backend->invocation_count() == 0);
  }
}

TEST_CASE("cache_only refuses uncached prompts") {
  TempDir dir("cache_only");
  auto backend = std::make_shared<CacheOnlyBackend>();
  Gateway gateway(backend, ResponseCache(dir / "cache"));
  CHECK_THROWS_AS(gateway.complete(make_prompt(0, "new"), ModelConfig{}, RetryPolicy{}),
                  HarnessError);
}

TEST_CASE("concurrent batches over the same prompts leave one readable entry per hash") {
  TempDir dir("concurrent");
  std::map<std::string, std::string> responses;
  std::vector<RenderedPrompt> prompts;
  for (std::uint64_t i = 0; i < 30; ++i) {
    prompts.push_back(make_prompt(i, "p" + std::to_string(i)));
    responses[std::to_string(i)] = std::to_string(i % 2);
  }
  auto run_one = [&] {
    auto backend = std::make_shared<MockBackend>(scripted_fixture(responses));
    Gateway gateway(backend, ResponseCache(dir / "cache"));
    gateway.run_batch(prompts, ModelConfig{}, RetryPolicy{}, 4, 0.0);
  };
  std::thread a(run_one), b(run_one);
  a.join();
  b.join();

  std::size_t files = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir / "cache")) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const auto parsed = nlohmann::json::parse(testutil::read_file(entry.path()));
    CHECK(parsed.contains("raw_text"));
    CHECK(entry.path().extension() == ".json");
  }
  CHECK(files == prompts.size());

  ResponseCache cache(dir / "cache");
  ModelConfig config;
  for (const auto& prompt : prompts) {
    CHECK(cache.lookup(completion_cache_key(prompt, config)).has_value());
  }
}

TEST_CASE("mock fixture files parse") {
  TempDir dir("fixture");
  testutil::write_file(dir / "fixture.json",
                       "{\"mode\": \"noisy\", \"p0\": 0.25, \"p1\": 0.5, \"seed\": 9,"
                       " \"responses\": {\"3\": \"1\"}}");
  const MockFixture fixture = MockFixture::from_file(dir / "fixture.json");
  CHECK(fixture.mode == MockMode::Noisy);
  CHECK(fixture.p0 == 0.25);
  CHECK(fixture.p1 == 0.5);
  CHECK(fixture.seed == 9);
  CHECK(fixture.responses.at("3") == "1");

  testutil::write_file(dir / "bad.json", "{\"mode\": \"wat\"}");
  CHECK_THROWS_AS(MockFixture::from_file(dir / "bad.json"), HarnessError);
}

}  // TEST_SUITE
