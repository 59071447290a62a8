#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <vector>

#include "biasbench/journal.hpp"
#include "biasbench/metrics.hpp"
#include "biasbench/run_config.hpp"

namespace biasbench {

// ConvBERT supervised baseline, quoted in reports for reference only.
inline constexpr double kConvBertBaselineMacroF1 = 0.7110;

struct RunPaths {
  std::filesystem::path output_dir;
  std::filesystem::path config_json;
  std::filesystem::path meta_json;
  std::filesystem::path journal_file;
  std::filesystem::path results_csv;
  std::filesystem::path results_md;
  std::filesystem::path figure_csv;
  std::filesystem::path histogram_csv;
  std::filesystem::path balance_csv;
  std::filesystem::path exemplars_json;

  static RunPaths in(const std::filesystem::path& dir);
};

struct StrategyOutcome {
  StrategyKind kind = StrategyKind::ZeroShot;
  std::vector<ChunkResult> chunks;
  AggregateScores aggregates;
};

struct RunReport {
  std::vector<StrategyOutcome> strategies;
  std::size_t dataset_size = 0;
  std::uint64_t backend_invocations = 0;
};

/// Test seams: a pre-built backend (to observe invocation counts) and a
/// virtual clock. Defaults build everything from the config.
struct RunEnv {
  std::shared_ptr<Backend> backend;
  Clock* clock = nullptr;
};

/// Full pipeline: load, shuffle, plan, partition, render, complete, parse,
/// journal, score, report. Every prediction is journaled before metrics run;
/// rerunning over an intact journal and cache performs zero backend calls
/// and reproduces byte-identical reports.
RunReport run(const RunConfig& config, const RunEnv& env = {});

/// Completes the missing (statement, strategy) pairs of a previous run and
/// re-emits its reports. Fails with ConfigMismatch if the dataset changed.
RunReport resume(const std::filesystem::path& output_dir, const RunEnv& env = {});

/// Recomputes metrics and reports from the journal alone (no backend).
RunReport report_only(const std::filesystem::path& output_dir);

/// Writes results.csv, results.md, figure_data.csv and length_histogram.csv.
void emit_reports(const std::vector<StrategyOutcome>& outcomes, const RunConfig& config,
                  const RunPaths& paths, const Dataset& dataset);

}  // namespace biasbench
