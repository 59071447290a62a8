#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "biasbench/dataset.hpp"
#include "biasbench/llm_gateway.hpp"
#include "biasbench/prompt_engine.hpp"

namespace biasbench {

enum class BackendChoice { Live, Mock, CacheOnly };

const char* backend_choice_name(BackendChoice choice);
BackendChoice parse_backend_choice(std::string_view name);

/// Resolved run configuration. The file at output_dir/config.json archives
/// exactly this structure; the API key never appears in it, only the name of
/// the environment variable that holds it.
struct RunConfig {
  std::string dataset_path;
  DatasetFormat format = DatasetFormat::Jsonl;
  std::uint64_t seed = 42;
  std::size_t n_chunks = 18;
  std::vector<StrategyKind> strategies;  // canonical order: cot, zero_shot, few_shot
  int few_shot_k = 8;
  ModelConfig model;
  RetryPolicy retry;
  int parallelism = 4;
  double rate_limit_rpm = 30.0;
  BackendChoice backend = BackendChoice::Live;
  std::string mock_fixture_path;
  std::string output_dir;
  std::string cache_dir;                  // empty -> <output_dir>/cache
  std::vector<std::size_t> chunk_filter;  // empty -> all chunks
  std::string templates_dir = "templates";

  void validate() const;
  std::filesystem::path resolved_cache_dir() const;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

/// Drops duplicates and orders as cot, zero_shot, few_shot.
std::vector<StrategyKind> canonical_strategies(const std::vector<StrategyKind>& strategies);

}  // namespace biasbench
