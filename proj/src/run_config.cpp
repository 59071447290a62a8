#include "biasbench/run_config.hpp"

#include <algorithm>

#include "biasbench/errors.hpp"

namespace biasbench {

using nlohmann::json;

const char* backend_choice_name(BackendChoice choice) {
  switch (choice) {
    case BackendChoice::Live: return "live";
    case BackendChoice::Mock: return "mock";
    case BackendChoice::CacheOnly: return "cache_only";
  }
  return "live";
}

BackendChoice parse_backend_choice(std::string_view name) {
  if (name == "live") return BackendChoice::Live;
  if (name == "mock") return BackendChoice::Mock;
  if (name == "cache_only") return BackendChoice::CacheOnly;
  throw HarnessError(ErrorCode::InvalidConfig, "unknown backend `" + std::string(name) + "`");
}

std::vector<StrategyKind> canonical_strategies(const std::vector<StrategyKind>& strategies) {
  static constexpr StrategyKind kOrder[] = {StrategyKind::ChainOfThought,
                                            StrategyKind::ZeroShot, StrategyKind::FewShot};
  std::vector<StrategyKind> out;
  for (StrategyKind kind : kOrder) {
    if (std::find(strategies.begin(), strategies.end(), kind) != strategies.end()) {
      out.push_back(kind);
    }
  }
  return out;
}

void RunConfig::validate() const {
  if (dataset_path.empty()) {
    throw HarnessError(ErrorCode::InvalidConfig, "dataset path is required");
  }
  if (output_dir.empty()) {
    throw HarnessError(ErrorCode::InvalidConfig, "output dir is required");
  }
  if (strategies.empty()) {
    throw HarnessError(ErrorCode::InvalidConfig, "at least one strategy is required");
  }
  if (n_chunks == 0) {
    throw HarnessError(ErrorCode::InvalidConfig, "n_chunks must be positive");
  }
  if (few_shot_k <= 0 || few_shot_k % 2 != 0) {
    throw HarnessError(ErrorCode::InvalidConfig, "few_shot_k must be positive and even");
  }
  if (parallelism < 1) {
    throw HarnessError(ErrorCode::InvalidConfig, "parallelism must be >= 1");
  }
  if (backend == BackendChoice::Mock && mock_fixture_path.empty()) {
    throw HarnessError(ErrorCode::InvalidConfig, "mock backend needs --mock-fixture");
  }
  for (std::size_t index : chunk_filter) {
    if (index < 1 || index > n_chunks) {
      throw HarnessError(ErrorCode::InvalidConfig,
                         "chunk filter index " + std::to_string(index) + " out of range 1.." +
                             std::to_string(n_chunks));
    }
  }
}

std::filesystem::path RunConfig::resolved_cache_dir() const {
  if (!cache_dir.empty()) return cache_dir;
  return std::filesystem::path(output_dir) / "cache";
}

json RunConfig::to_json() const {
  json strategies_json = json::array();
  for (StrategyKind kind : strategies) strategies_json.push_back(strategy_name(kind));
  json filter_json = json::array();
  for (std::size_t index : chunk_filter) filter_json.push_back(index);
  json statuses = json::array();
  for (int status : retry.retryable_statuses) statuses.push_back(status);
  return json{
      {"dataset_path", dataset_path},
      {"format", dataset_format_name(format)},
      {"seed", seed},
      {"n_chunks", n_chunks},
      {"strategies", strategies_json},
      {"few_shot_k", few_shot_k},
      {"model",
       {{"model_id", model.model_id},
        {"temperature", model.temperature},
        {"max_output_tokens", model.max_output_tokens},
        {"api_base_url", model.api_base_url},
        {"api_key_env_var", model.api_key_env_var}}},
      {"retry",
       {{"max_attempts", retry.max_attempts},
        {"base_delay_ms", retry.base_delay_ms},
        {"backoff_factor", retry.backoff_factor},
        {"retryable_statuses", statuses}}},
      {"parallelism", parallelism},
      {"rate_limit_rpm", rate_limit_rpm},
      {"backend", backend_choice_name(backend)},
      {"mock_fixture_path", mock_fixture_path},
      {"output_dir", output_dir},
      {"cache_dir", cache_dir},
      {"chunk_filter", filter_json},
      {"templates_dir", templates_dir},
  };
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig config;
  config.dataset_path = j.value("dataset_path", "");
  config.format = parse_dataset_format(j.value("format", "jsonl"));
  config.seed = j.value("seed", std::uint64_t{42});
  config.n_chunks = j.value("n_chunks", std::size_t{18});
  if (j.contains("strategies")) {
    std::vector<StrategyKind> kinds;
    for (const auto& name : j.at("strategies")) {
      kinds.push_back(parse_strategy(name.get<std::string>()));
    }
    config.strategies = canonical_strategies(kinds);
  }
  config.few_shot_k = j.value("few_shot_k", 8);
  if (j.contains("model")) {
    const json& m = j.at("model");
    config.model.model_id = m.value("model_id", config.model.model_id);
    config.model.temperature = m.value("temperature", config.model.temperature);
    config.model.max_output_tokens = m.value("max_output_tokens", config.model.max_output_tokens);
    config.model.api_base_url = m.value("api_base_url", config.model.api_base_url);
    config.model.api_key_env_var = m.value("api_key_env_var", config.model.api_key_env_var);
  }
  if (j.contains("retry")) {
    const json& r = j.at("retry");
    config.retry.max_attempts = r.value("max_attempts", config.retry.max_attempts);
    config.retry.base_delay_ms = r.value("base_delay_ms", config.retry.base_delay_ms);
    config.retry.backoff_factor = r.value("backoff_factor", config.retry.backoff_factor);
    if (r.contains("retryable_statuses")) {
      config.retry.retryable_statuses.clear();
      for (const auto& status : r.at("retryable_statuses")) {
        config.retry.retryable_statuses.insert(status.get<int>());
      }
    }
  }
  config.parallelism = j.value("parallelism", 4);
  config.rate_limit_rpm = j.value("rate_limit_rpm", 30.0);
  config.backend = parse_backend_choice(j.value("backend", "live"));
  config.mock_fixture_path = j.value("mock_fixture_path", "");
  config.output_dir = j.value("output_dir", "");
  config.cache_dir = j.value("cache_dir", "");
  if (j.contains("chunk_filter")) {
    for (const auto& index : j.at("chunk_filter")) {
      config.chunk_filter.push_back(index.get<std::size_t>());
    }
  }
  config.templates_dir = j.value("templates_dir", "templates");
  return config;
}

}  // namespace biasbench
