#if defined(BIASBENCH_WITH_TLS)
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif

#include "biasbench/llm_gateway.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "biasbench/errors.hpp"
#include "biasbench/prng.hpp"
#include "biasbench/sha256.hpp"

namespace biasbench {
namespace {

using nlohmann::json;

std::string format_double(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, end);
}

class SystemClock : public Clock {
 public:
  std::uint64_t now_ms() override {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
  }
  void sleep_ms(std::uint64_t ms) override {
    std::this_thread::sleep_for(std::chrono::milliseconds(ms));
  }
};

struct SplitUrl {
  std::string origin;     // scheme://host[:port]
  std::string base_path;  // possibly empty, no trailing slash
};

SplitUrl split_url(const std::string& url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw HarnessError(ErrorCode::InvalidConfig, "api_base_url needs a scheme: " + url);
  }
  const std::size_t path_start = url.find('/', scheme_end + 3);
  SplitUrl split;
  if (path_start == std::string::npos) {
    split.origin = url;
  } else {
    split.origin = url.substr(0, path_start);
    split.base_path = url.substr(path_start);
  }
  while (!split.base_path.empty() && split.base_path.back() == '/') {
    split.base_path.pop_back();
  }
  return split;
}

class HttplibTransport : public HttpTransport {
 public:
  HttpResponse post_json(const std::string& base_url, const std::string& path,
                         const std::string& bearer_token, const std::string& body) override {
    const SplitUrl url = split_url(base_url);
#if !defined(BIASBENCH_WITH_TLS)
    if (url.origin.rfind("https://", 0) == 0) {
      throw HarnessError(ErrorCode::InvalidConfig,
                         "built without TLS support, cannot reach " + url.origin);
    }
#endif
    httplib::Client client(url.origin);
    client.set_connection_timeout(30, 0);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!bearer_token.empty()) {
      headers.emplace("Authorization", "Bearer " + bearer_token);
    }
    auto result = client.Post(url.base_path + path, headers, body, "application/json");
    if (!result) {
      HttpResponse response;
      response.transport_error = true;
      response.error = httplib::to_string(result.error());
      return response;
    }
    HttpResponse response;
    response.status = result->status;
    response.body = result->body;
    return response;
  }
};

}  // namespace

const char* backend_kind_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::Live: return "live";
    case BackendKind::Mock: return "mock";
    case BackendKind::Cache: return "cache";
  }
  return "mock";
}

std::uint64_t RetryPolicy::delay_for_attempt(int attempt) const {
  double delay = static_cast<double>(base_delay_ms) *
                 std::pow(backoff_factor, static_cast<double>(attempt - 1));
  if (delay > static_cast<double>(kMaxDelayMs)) delay = static_cast<double>(kMaxDelayMs);
  return static_cast<std::uint64_t>(delay);
}

Clock& system_clock() {
  static SystemClock clock;
  return clock;
}

TokenBucket::TokenBucket(double requests_per_minute, Clock& clock)
    : rpm_(requests_per_minute), tokens_(1.0), last_refill_ms_(clock.now_ms()), clock_(clock) {}

void TokenBucket::acquire() {
  if (rpm_ <= 0) return;
  for (;;) {
    std::uint64_t wait_ms = 0;
    {
      std::lock_guard<std::mutex> lock(mu_);
      const std::uint64_t now = clock_.now_ms();
      tokens_ = std::min(1.0, tokens_ + static_cast<double>(now - last_refill_ms_) * rpm_ / 60000.0);
      last_refill_ms_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait_ms = static_cast<std::uint64_t>(std::ceil((1.0 - tokens_) * 60000.0 / rpm_));
    }
    clock_.sleep_ms(std::max<std::uint64_t>(wait_ms, 1));
  }
}

std::unique_ptr<HttpTransport> make_httplib_transport() {
  return std::make_unique<HttplibTransport>();
}

LiveBackend::LiveBackend(std::unique_ptr<HttpTransport> transport, Clock& clock)
    : transport_(std::move(transport)), clock_(clock) {}

BackendResult LiveBackend::complete(const RenderedPrompt& prompt, const ModelConfig& config,
                                    const RetryPolicy& policy) {
  ++invocations_;
  const char* key = std::getenv(config.api_key_env_var.c_str());
  if (key == nullptr || *key == '\0') {
    throw HarnessError(ErrorCode::MissingApiKey,
                       "environment variable " + config.api_key_env_var + " is not set");
  }

  json messages = json::array();
  for (const Message& message : prompt.messages) {
    messages.push_back({{"role", message.role}, {"content", message.content}});
  }
  // Everything not configured here stays out of the body so the service
  // applies its own defaults.
  const json body = {{"model", config.model_id},
                     {"messages", messages},
                     {"temperature", config.temperature},
                     {"max_tokens", config.max_output_tokens}};
  const std::string payload = body.dump();

  std::string last_failure;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    const HttpResponse response =
        transport_->post_json(config.api_base_url, "/chat/completions", key, payload);

    bool retryable = false;
    if (response.transport_error) {
      retryable = true;
      last_failure = "transport: " + response.error;
    } else if (response.status >= 200 && response.status < 300) {
      try {
        const json parsed = json::parse(response.body);
        const json& content = parsed.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) {
          throw HarnessError(ErrorCode::MalformedResponse, "content is not a string");
        }
        return {content.get<std::string>(), attempt};
      } catch (const json::exception& e) {
        throw HarnessError(ErrorCode::MalformedResponse,
                           std::string("no choices[0].message.content: ") + e.what());
      }
    } else if (response.status == 401 || response.status == 403) {
      throw HarnessError(ErrorCode::AuthError,
                         "HTTP " + std::to_string(response.status) + " from backend");
    } else if (policy.retryable_statuses.count(response.status) > 0) {
      retryable = true;
      last_failure = "HTTP " + std::to_string(response.status);
    } else {
      throw HarnessError(ErrorCode::MalformedResponse,
                         "unexpected HTTP " + std::to_string(response.status) + ": " +
                             response.body.substr(0, 200));
    }

    if (retryable && attempt < policy.max_attempts) {
      clock_.sleep_ms(policy.delay_for_attempt(attempt));
    }
  }
  throw HarnessError(ErrorCode::ExhaustedRetries,
                     "gave up after " + std::to_string(policy.max_attempts) +
                         " attempts, last failure: " + last_failure);
}

MockFixture MockFixture::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw HarnessError(ErrorCode::IoError, "cannot open mock fixture " + path.string());
  }
  json parsed;
  try {
    parsed = json::parse(in);
  } catch (const json::exception& e) {
    throw HarnessError(ErrorCode::MalformedRecord,
                       "mock fixture " + path.string() + ": " + e.what());
  }
  MockFixture fixture;
  const std::string mode = parsed.value("mode", "scripted");
  if (mode == "scripted") {
    fixture.mode = MockMode::Scripted;
  } else if (mode == "always_correct") {
    fixture.mode = MockMode::AlwaysCorrect;
  } else if (mode == "always_wrong") {
    fixture.mode = MockMode::AlwaysWrong;
  } else if (mode == "noisy") {
    fixture.mode = MockMode::Noisy;
  } else {
    throw HarnessError(ErrorCode::InvalidConfig, "unknown mock mode `" + mode + "`");
  }
  if (parsed.contains("responses")) {
    for (const auto& [key, value] : parsed.at("responses").items()) {
      if (!value.is_string()) {
        throw HarnessError(ErrorCode::MalformedRecord,
                           "mock response for `" + key + "` is not a string");
      }
      fixture.responses[key] = value.get<std::string>();
    }
  }
  fixture.p0 = parsed.value("p0", 0.0);
  fixture.p1 = parsed.value("p1", 0.0);
  fixture.seed = parsed.value("seed", std::uint64_t{0});
  return fixture;
}

MockBackend::MockBackend(MockFixture fixture, std::map<std::uint64_t, int> gold_labels)
    : fixture_(std::move(fixture)), gold_labels_(std::move(gold_labels)) {}

BackendResult MockBackend::complete(const RenderedPrompt& prompt, const ModelConfig& config,
                                    const RetryPolicy& policy) {
  (void)config;
  (void)policy;
  ++invocations_;
  if (fixture_.mode == MockMode::Scripted) {
    auto by_id = fixture_.responses.find(std::to_string(prompt.statement_id));
    if (by_id != fixture_.responses.end()) return {by_id->second, 1};
    auto by_hash = fixture_.responses.find(prompt.content_hash);
    if (by_hash != fixture_.responses.end()) return {by_hash->second, 1};
    throw HarnessError(ErrorCode::MalformedResponse,
                       "no scripted response for statement " +
                           std::to_string(prompt.statement_id));
  }

  const auto gold_it = gold_labels_.find(prompt.statement_id);
  if (gold_it == gold_labels_.end()) {
    throw HarnessError(ErrorCode::MalformedResponse,
                       "no gold label for statement " + std::to_string(prompt.statement_id));
  }
  const int gold = gold_it->second;
  int label = gold;
  switch (fixture_.mode) {
    case MockMode::AlwaysCorrect:
      break;
    case MockMode::AlwaysWrong:
      label = 1 - gold;
      break;
    case MockMode::Noisy: {
      // One draw per statement, keyed on seed^id, so the outcome does not
      // depend on arrival order.
      SplitMix64 rng(fixture_.seed ^ prompt.statement_id);
      const double p = gold == 0 ? fixture_.p0 : fixture_.p1;
      if (rng.next_unit() < p) label = 1 - gold;
      break;
    }
    case MockMode::Scripted:
      break;
  }
  return {label == 1 ? "1" : "0", 1};
}

BackendResult CacheOnlyBackend::complete(const RenderedPrompt& prompt, const ModelConfig& config,
                                         const RetryPolicy& policy) {
  (void)config;
  (void)policy;
  ++invocations_;
  throw HarnessError(ErrorCode::InvalidConfig,
                     "cache_only backend invoked for uncached prompt (statement " +
                         std::to_string(prompt.statement_id) + ")");
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<CompletionRecord> ResponseCache::lookup(const std::string& key) const {
  const std::filesystem::path path = path_for(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  json parsed;
  try {
    parsed = json::parse(in);
    CompletionRecord record;
    record.content_hash = parsed.at("content_hash").get<std::string>();
    record.raw_text = parsed.at("raw_text").get<std::string>();
    record.latency_ms = parsed.at("latency_ms").get<std::uint64_t>();
    record.attempt_count = parsed.at("attempt_count").get<int>();
    record.backend = BackendKind::Cache;
    return record;
  } catch (const json::exception& e) {
    throw HarnessError(ErrorCode::IoError,
                       "corrupt cache entry " + path.string() + ": " + e.what());
  }
}

void ResponseCache::store(const CompletionRecord& record) const {
  static std::atomic<std::uint64_t> counter{0};
  const std::filesystem::path target = path_for(record.content_hash);
  std::error_code ec;
  std::filesystem::create_directories(target.parent_path(), ec);
  if (ec) {
    throw HarnessError(ErrorCode::IoError, "cannot create cache dir: " + ec.message());
  }
  const json serialized = {{"content_hash", record.content_hash},
                           {"raw_text", record.raw_text},
                           {"backend", backend_kind_name(record.backend)},
                           {"latency_ms", record.latency_ms},
                           {"attempt_count", record.attempt_count}};
  const std::filesystem::path tmp =
      target.parent_path() /
      (record.content_hash + ".tmp" + std::to_string(counter.fetch_add(1)) + "." +
       std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000));
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) {
      throw HarnessError(ErrorCode::IoError, "cannot write cache entry " + tmp.string());
    }
    out << serialized.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    throw HarnessError(ErrorCode::IoError, "cannot publish cache entry: " + ec.message());
  }
}

std::string completion_cache_key(const RenderedPrompt& prompt, const ModelConfig& config) {
  return sha256_hex(prompt.content_hash + "\n" + config.model_id + "\n" +
                    format_double(config.temperature));
}

Gateway::Gateway(std::shared_ptr<Backend> backend, ResponseCache cache, Clock& clock)
    : backend_(std::move(backend)), cache_(std::move(cache)), clock_(clock) {}

CompletionRecord Gateway::complete(const RenderedPrompt& prompt, const ModelConfig& config,
                                   const RetryPolicy& policy) {
  return complete_impl(prompt, config, policy, nullptr);
}

CompletionRecord Gateway::complete_impl(const RenderedPrompt& prompt, const ModelConfig& config,
                                        const RetryPolicy& policy, TokenBucket* bucket) {
  const std::string key = completion_cache_key(prompt, config);
  if (auto cached = cache_.lookup(key)) {
    return *cached;
  }
  if (bucket != nullptr) bucket->acquire();
  const std::uint64_t started = clock_.now_ms();
  const BackendResult result = backend_->complete(prompt, config, policy);
  CompletionRecord record;
  record.content_hash = key;
  record.raw_text = result.raw_text;
  record.backend = backend_->kind();
  record.latency_ms = clock_.now_ms() - started;
  record.attempt_count = result.attempt_count;
  cache_.store(record);
  return record;
}

std::vector<CompletionRecord> Gateway::run_batch(
    std::span<const RenderedPrompt> prompts, const ModelConfig& config,
    const RetryPolicy& policy, int parallelism, double requests_per_minute,
    const std::function<void(std::size_t, const CompletionRecord&)>& on_result) {
  if (parallelism < 1) {
    throw HarnessError(ErrorCode::InvalidConfig, "parallelism must be >= 1");
  }
  const std::size_t total = prompts.size();
  std::vector<std::optional<CompletionRecord>> results(total);
  if (total == 0) return {};

  TokenBucket bucket(requests_per_minute, clock_);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex mu;
  bool has_error = false;
  std::size_t error_index = 0;
  std::exception_ptr error;

  auto worker = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= total) break;
      try {
        CompletionRecord record = complete_impl(prompts[i], config, policy, &bucket);
        std::lock_guard<std::mutex> lock(mu);
        results[i] = std::move(record);
        if (on_result) on_result(i, *results[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!has_error || i < error_index) {
          has_error = true;
          error_index = i;
          error = std::current_exception();
        }
        stop.store(true);
      }
    }
  };

  const std::size_t worker_count =
      std::min<std::size_t>(static_cast<std::size_t>(parallelism), total);
  std::vector<std::thread> workers;
  workers.reserve(worker_count);
  for (std::size_t w = 0; w < worker_count; ++w) workers.emplace_back(worker);
  for (std::thread& thread : workers) thread.join();

  if (has_error) std::rethrow_exception(error);

  std::vector<CompletionRecord> ordered;
  ordered.reserve(total);
  for (auto& slot : results) ordered.push_back(std::move(*slot));
  return ordered;
}

}  // namespace biasbench
