#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "biasbench/prompt_engine.hpp"

namespace biasbench {

struct ModelConfig {
  std::string model_id = "llama3-70b-8192";
  double temperature = 0.0;
  int max_output_tokens = 256;
  std::string api_base_url = "https://api.groq.com/openai/v1";
  std::string api_key_env_var = "LLM_API_KEY";  // the key itself is never persisted
};

enum class BackendKind { Live, Mock, Cache };

const char* backend_kind_name(BackendKind kind);

struct CompletionRecord {
  std::string content_hash;  // cache key: prompt hash + model id + temperature
  std::string raw_text;      // verbatim, untrimmed
  BackendKind backend = BackendKind::Mock;
  std::uint64_t latency_ms = 0;
  int attempt_count = 1;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::uint64_t base_delay_ms = 1000;
  double backoff_factor = 2.0;
  std::set<int> retryable_statuses = {429, 500, 502, 503, 504};

  static constexpr std::uint64_t kMaxDelayMs = 60000;

  // base_delay_ms * backoff_factor^(attempt-1), capped at kMaxDelayMs.
  std::uint64_t delay_for_attempt(int attempt) const;
};

/// Clock seam so backoff and rate limiting run on virtual time in tests.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::uint64_t now_ms() = 0;
  virtual void sleep_ms(std::uint64_t ms) = 0;
};

Clock& system_clock();

/// Token bucket with a burst capacity of one request. rpm <= 0 disables it.
class TokenBucket {
 public:
  TokenBucket(double requests_per_minute, Clock& clock);
  void acquire();

 private:
  double rpm_;
  double tokens_;
  std::uint64_t last_refill_ms_;
  Clock& clock_;
  std::mutex mu_;
};

struct HttpResponse {
  int status = 0;
  std::string body;
  bool transport_error = false;  // timeout / connection failure, retryable
  std::string error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& base_url, const std::string& path,
                                 const std::string& bearer_token,
                                 const std::string& body) = 0;
};

std::unique_ptr<HttpTransport> make_httplib_transport();

struct BackendResult {
  std::string raw_text;
  int attempt_count = 1;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendResult complete(const RenderedPrompt& prompt, const ModelConfig& config,
                                 const RetryPolicy& policy) = 0;
  virtual BackendKind kind() const = 0;
  virtual std::uint64_t invocation_count() const = 0;
};

/// Speaks OpenAI-compatible chat completions: POST {base}/chat/completions
/// with a bearer token read from config.api_key_env_var, retrying retryable
/// statuses and transport failures with exponential backoff. Unset request
/// parameters are omitted from the body rather than sent as defaults.
class LiveBackend : public Backend {
 public:
  explicit LiveBackend(std::unique_ptr<HttpTransport> transport,
                       Clock& clock = system_clock());

  BackendResult complete(const RenderedPrompt& prompt, const ModelConfig& config,
                         const RetryPolicy& policy) override;
  BackendKind kind() const override { return BackendKind::Live; }
  std::uint64_t invocation_count() const override { return invocations_; }

 private:
  std::unique_ptr<HttpTransport> transport_;
  Clock& clock_;
  std::atomic<std::uint64_t> invocations_{0};
};

enum class MockMode { Scripted, AlwaysCorrect, AlwaysWrong, Noisy };

/// Fixture file schema:
///   {"responses": {"<statement_id or hash>": "<text>"},
///    "mode": "scripted|always_correct|always_wrong|noisy",
///    "p0": ..., "p1": ..., "seed": ...}
struct MockFixture {
  MockMode mode = MockMode::Scripted;
  std::map<std::string, std::string> responses;
  double p0 = 0.0;
  double p1 = 0.0;
  std::uint64_t seed = 0;

  static MockFixture from_file(const std::filesystem::path& path);
};

/// Scripted stand-in for the chat backend. Scripted mode resolves responses
/// by statement id first, then by prompt content hash. The oracle modes need
/// the gold labels: always_correct echoes the gold label, always_wrong its
/// complement, and noisy flips each class's gold label with probability
/// p0/p1 using one splitmix64 draw seeded with seed^statement_id.
class MockBackend : public Backend {
 public:
  explicit MockBackend(MockFixture fixture,
                       std::map<std::uint64_t, int> gold_labels = {});

  BackendResult complete(const RenderedPrompt& prompt, const ModelConfig& config,
                         const RetryPolicy& policy) override;
  BackendKind kind() const override { return BackendKind::Mock; }
  std::uint64_t invocation_count() const override { return invocations_; }

 private:
  MockFixture fixture_;
  std::map<std::uint64_t, int> gold_labels_;
  std::atomic<std::uint64_t> invocations_{0};
};

/// Backend that refuses to be called; used for cache_only runs.
class CacheOnlyBackend : public Backend {
 public:
  BackendResult complete(const RenderedPrompt& prompt, const ModelConfig& config,
                         const RetryPolicy& policy) override;
  BackendKind kind() const override { return BackendKind::Cache; }
  std::uint64_t invocation_count() const override { return invocations_; }

 private:
  std::atomic<std::uint64_t> invocations_{0};
};

/// Content-addressed response store: cache/<first-2-hex>/<hash>.json, one
/// JSON-serialized CompletionRecord per file. Writes go through a temp file
/// and an atomic rename so concurrent writers cannot tear an entry.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<CompletionRecord> lookup(const std::string& key) const;
  void store(const CompletionRecord& record) const;
  std::filesystem::path path_for(const std::string& key) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

std::string completion_cache_key(const RenderedPrompt& prompt, const ModelConfig& config);

/// Front door for completions: consult the cache by content hash, then the
/// backend; successful responses are written back before returning.
class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, ResponseCache cache,
          Clock& clock = system_clock());

  CompletionRecord complete(const RenderedPrompt& prompt, const ModelConfig& config,
                            const RetryPolicy& policy);

  /// Runs prompts through a bounded worker pool (`parallelism` in flight)
  /// under a requests-per-minute token bucket. Output order matches input
  /// order. `on_result` fires once per completed prompt, serialized, as
  /// results land; on a fatal error the first failure (by input position)
  /// propagates after in-flight work drains.
  std::vector<CompletionRecord> run_batch(
      std::span<const RenderedPrompt> prompts, const ModelConfig& config,
      const RetryPolicy& policy, int parallelism, double requests_per_minute,
      const std::function<void(std::size_t, const CompletionRecord&)>& on_result = {});

  Backend& backend() { return *backend_; }
  const ResponseCache& cache() const { return cache_; }

 private:
  CompletionRecord complete_impl(const RenderedPrompt& prompt, const ModelConfig& config,
                                 const RetryPolicy& policy, TokenBucket* bucket);

  std::shared_ptr<Backend> backend_;
  ResponseCache cache_;
  Clock& clock_;
};

}  // namespace biasbench
