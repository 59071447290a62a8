#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "biasbench/errors.hpp"
#include "biasbench/runner.hpp"

namespace {

using biasbench::ErrorCode;
using biasbench::HarnessError;
using biasbench::RunConfig;
using biasbench::RunReport;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
      return 2;
    case ErrorCode::MissingField:
    case ErrorCode::NonBinaryLabel:
    case ErrorCode::EmptyText:
    case ErrorCode::MalformedRecord:
    case ErrorCode::TooFewItems:
    case ErrorCode::SizeMismatch:
      return 3;
    case ErrorCode::InsufficientClassExamples:
    case ErrorCode::MissingExemplars:
    case ErrorCode::TemplateSlotUnfilled:
      return 4;
    case ErrorCode::ExhaustedRetries:
    case ErrorCode::MalformedResponse:
    case ErrorCode::MissingApiKey:
      return 5;
    case ErrorCode::AuthError:
      return 6;
    case ErrorCode::CorruptJournal:
    case ErrorCode::ConfigMismatch:
      return 7;
    case ErrorCode::LengthMismatch:
    case ErrorCode::EmptyInput:
    case ErrorCode::MixedStrategies:
      return 8;
    case ErrorCode::IoError:
      return 9;
  }
  return 1;
}

std::vector<std::string> split_csv(const std::string& value) {
  std::vector<std::string> parts;
  std::stringstream stream(value);
  std::string part;
  while (std::getline(stream, part, ',')) {
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

void print_summary(const RunReport& report, const std::string& out_dir) {
  for (const auto& outcome : report.strategies) {
    std::uint64_t failures = 0;
    for (const auto& chunk : outcome.chunks) failures += chunk.parse_failures;
    std::printf("%-16s mean macro-F1 %.4f  pooled %.4f  parse failures %llu\n",
                biasbench::strategy_name(outcome.kind), outcome.aggregates.mean_of_chunks,
                outcome.aggregates.pooled, static_cast<unsigned long long>(failures));
  }
  std::printf("reports written to %s\n", out_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline-reproducible political bias prompting benchmark"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "Execute an evaluation run");
  std::string config_file, dataset, format, strategy_csv, backend, mock_fixture;
  std::string model_id, api_base, out_dir, templates_dir, cache_dir, chunk_filter_csv;
  std::uint64_t seed = 42;
  std::size_t n_chunks = 18;
  int parallelism = 4, few_shot_k = 8;
  double rpm = 30.0;
  run_cmd->add_option("--config", config_file, "JSON config file; flags override its values");
  run_cmd->add_option("--dataset", dataset, "Path to the labeled corpus");
  run_cmd->add_option("--format", format, "Input format: jsonl or csv");
  run_cmd->add_option("--strategy", strategy_csv, "Comma list of zero_shot,few_shot,cot");
  run_cmd->add_option("--seed", seed, "Shuffle/selection seed");
  run_cmd->add_option("--chunks", n_chunks, "Number of equal-sized chunks");
  run_cmd->add_option("--chunk-filter", chunk_filter_csv, "Comma list of chunk indices to run");
  run_cmd->add_option("--backend", backend, "live, mock or cache_only");
  run_cmd->add_option("--mock-fixture", mock_fixture, "Mock backend fixture file");
  run_cmd->add_option("--model", model_id, "Model identifier");
  run_cmd->add_option("--api-base", api_base, "OpenAI-compatible API base URL");
  run_cmd->add_option("--parallelism", parallelism, "Max in-flight requests");
  run_cmd->add_option("--rpm", rpm, "Requests-per-minute ceiling (0 = unlimited)");
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_option("--few-shot-k", few_shot_k, "Few-shot exemplar count (even)");
  run_cmd->add_option("--templates", templates_dir, "Prompt template directory");
  run_cmd->add_option("--cache-dir", cache_dir, "Response cache directory");

  auto* resume_cmd = app.add_subcommand("resume", "Complete a partial run");
  std::string resume_dir;
  resume_cmd->add_option("--out", resume_dir, "Output directory of the run")->required();

  auto* report_cmd = app.add_subcommand("report", "Re-emit reports from the journal");
  std::string report_dir;
  report_cmd->add_option("--out", report_dir, "Output directory of the run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run_cmd->parsed()) {
      RunConfig config;
      if (!config_file.empty()) {
        std::ifstream in(config_file);
        if (!in) {
          throw HarnessError(ErrorCode::IoError, "cannot open config " + config_file);
        }
        nlohmann::json parsed;
        try {
          parsed = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
          throw HarnessError(ErrorCode::InvalidConfig,
                             config_file + ": " + std::string(e.what()));
        }
        config = RunConfig::from_json(parsed);
      }
      if (run_cmd->count("--dataset")) config.dataset_path = dataset;
      if (run_cmd->count("--format")) config.format = biasbench::parse_dataset_format(format);
      if (run_cmd->count("--strategy")) {
        std::vector<biasbench::StrategyKind> kinds;
        for (const std::string& name : split_csv(strategy_csv)) {
          kinds.push_back(biasbench::parse_strategy(name));
        }
        config.strategies = kinds;
      }
      if (config.strategies.empty()) {
        config.strategies = {biasbench::StrategyKind::ChainOfThought,
                             biasbench::StrategyKind::ZeroShot,
                             biasbench::StrategyKind::FewShot};
      }
      if (run_cmd->count("--seed")) config.seed = seed;
      if (run_cmd->count("--chunks")) config.n_chunks = n_chunks;
      if (run_cmd->count("--chunk-filter")) {
        config.chunk_filter.clear();
        for (const std::string& part : split_csv(chunk_filter_csv)) {
          config.chunk_filter.push_back(std::stoull(part));
        }
      }
      if (run_cmd->count("--backend")) config.backend = biasbench::parse_backend_choice(backend);
      if (run_cmd->count("--mock-fixture")) config.mock_fixture_path = mock_fixture;
      if (run_cmd->count("--model")) config.model.model_id = model_id;
      if (run_cmd->count("--api-base")) config.model.api_base_url = api_base;
      if (run_cmd->count("--parallelism")) config.parallelism = parallelism;
      if (run_cmd->count("--rpm")) config.rate_limit_rpm = rpm;
      if (run_cmd->count("--out")) config.output_dir = out_dir;
      if (run_cmd->count("--few-shot-k")) config.few_shot_k = few_shot_k;
      if (run_cmd->count("--templates")) config.templates_dir = templates_dir;
      if (run_cmd->count("--cache-dir")) config.cache_dir = cache_dir;

      const RunReport report = biasbench::run(config);
      print_summary(report, config.output_dir);
    } else if (resume_cmd->parsed()) {
      const RunReport report = biasbench::resume(resume_dir);
      print_summary(report, resume_dir);
    } else if (report_cmd->parsed()) {
      const RunReport report = biasbench::report_only(report_dir);
      print_summary(report, report_dir);
    }
  } catch (const HarnessError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
