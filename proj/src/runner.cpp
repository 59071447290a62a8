#include "biasbench/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "biasbench/errors.hpp"
#include "biasbench/label_parser.hpp"
#include "biasbench/sha256.hpp"

namespace biasbench {
namespace {

using nlohmann::json;

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw HarnessError(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw HarnessError(ErrorCode::IoError, "cannot write " + path.string());
  }
  out << content;
}

std::string fixed(double value, int decimals) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", decimals, value);
  return buffer;
}

std::size_t utf8_codepoints(std::string_view text) {
  std::size_t count = 0;
  for (char c : text) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++count;
  }
  return count;
}

json load_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_file_bytes(path));
  } catch (const json::exception& e) {
    throw HarnessError(ErrorCode::IoError, path.string() + ": " + e.what());
  }
}

// Prompt-affecting knobs must match the archived run before a journal can be
// reused; anything else may change freely between run and resume.
void check_archived_compatibility(const RunConfig& config, const RunPaths& paths,
                                  const std::string& dataset_hash) {
  if (!std::filesystem::exists(paths.meta_json)) return;
  const json meta = load_json_file(paths.meta_json);
  if (meta.value("dataset_sha256", "") != dataset_hash) {
    throw HarnessError(ErrorCode::ConfigMismatch,
                       "dataset file changed since the journal in " +
                           paths.output_dir.string() + " was written");
  }
  if (!std::filesystem::exists(paths.config_json)) return;
  const RunConfig archived = RunConfig::from_json(load_json_file(paths.config_json));
  const bool compatible = archived.seed == config.seed &&
                          archived.few_shot_k == config.few_shot_k &&
                          archived.model.model_id == config.model.model_id &&
                          archived.model.temperature == config.model.temperature;
  if (!compatible) {
    throw HarnessError(ErrorCode::ConfigMismatch,
                       "seed/few_shot_k/model settings differ from the archived run in " +
                           paths.output_dir.string() + "; use a fresh output dir");
  }
}

std::shared_ptr<Backend> build_backend(const RunConfig& config, const Dataset& dataset,
                                       Clock& clock) {
  switch (config.backend) {
    case BackendChoice::Live:
      return std::make_shared<LiveBackend>(make_httplib_transport(), clock);
    case BackendChoice::Mock: {
      std::map<std::uint64_t, int> gold;
      for (const Statement& statement : dataset.statements) {
        gold[statement.id] = statement.label;
      }
      return std::make_shared<MockBackend>(MockFixture::from_file(config.mock_fixture_path),
                                           std::move(gold));
    }
    case BackendChoice::CacheOnly:
      return std::make_shared<CacheOnlyBackend>();
  }
  throw HarnessError(ErrorCode::InvalidConfig, "unknown backend choice");
}

bool chunk_selected(const std::set<std::size_t>& filter, std::size_t index) {
  return filter.empty() || filter.count(index) > 0;
}

std::vector<StrategyOutcome> compute_outcomes(const RunConfig& config,
                                              const std::vector<Chunk>& chunks,
                                              const std::set<std::size_t>& filter,
                                              const std::map<JournalKey, JournalEntry>& index) {
  std::vector<StrategyOutcome> outcomes;
  for (StrategyKind kind : config.strategies) {
    StrategyOutcome outcome;
    outcome.kind = kind;
    for (const Chunk& chunk : chunks) {
      if (!chunk_selected(filter, chunk.index)) continue;
      ConfusionMatrix cm;
      std::uint64_t failures = 0;
      for (const Statement& statement : chunk.statements) {
        const auto it = index.find({statement.id, kind});
        if (it == index.end()) {
          throw HarnessError(ErrorCode::CorruptJournal,
                             "no journal entry for statement " +
                                 std::to_string(statement.id) + " strategy " +
                                 strategy_name(kind));
        }
        int pred;
        if (it->second.parsed_label.has_value()) {
          pred = *it->second.parsed_label;
        } else {
          // unparseable counts as wrong: score the complement of gold
          pred = 1 - statement.label;
          ++failures;
        }
        cm.add(statement.label, pred);
      }
      outcome.chunks.push_back({chunk.index, kind, cm, macro_f1(cm), failures});
    }
    outcome.aggregates = aggregate(outcome.chunks);
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

void write_exemplars_json(const RunConfig& config, const RunPaths& paths,
                          const ExemplarSet& few_exemplars, bool uses_few, bool uses_cot) {
  if (!uses_few && !uses_cot) return;
  json out = json::object();
  if (uses_few) {
    json list = json::array();
    for (const Exemplar& exemplar : few_exemplars.exemplars) {
      json item = {{"label", exemplar.label}};
      if (exemplar.statement_id.has_value()) item["id"] = *exemplar.statement_id;
      list.push_back(item);
    }
    out["few_shot"] = list;
  }
  if (uses_cot) {
    json list = json::array();
    for (const Exemplar& exemplar : cot_worked_exemplars().exemplars) {
      list.push_back({{"label", exemplar.label}, {"text", exemplar.text}});
    }
    out["cot"] = list;
  }
  (void)config;
  write_file(paths.exemplars_json, out.dump(2) + "\n");
}

RunReport finish(const RunConfig& config, const RunPaths& paths, const Dataset& dataset,
                 const std::vector<Chunk>& chunks, const std::set<std::size_t>& filter,
                 const std::map<JournalKey, JournalEntry>& index,
                 std::uint64_t backend_invocations) {
  RunReport report;
  report.dataset_size = dataset.size();
  report.backend_invocations = backend_invocations;
  report.strategies = compute_outcomes(config, chunks, filter, index);
  emit_reports(report.strategies, config, paths, dataset);
  return report;
}

}  // namespace

RunPaths RunPaths::in(const std::filesystem::path& dir) {
  RunPaths paths;
  paths.output_dir = dir;
  paths.config_json = dir / "config.json";
  paths.meta_json = dir / "run_meta.json";
  paths.journal_file = dir / "journal.jsonl";
  paths.results_csv = dir / "results.csv";
  paths.results_md = dir / "results.md";
  paths.figure_csv = dir / "figure_data.csv";
  paths.histogram_csv = dir / "length_histogram.csv";
  paths.balance_csv = dir / "chunk_balance.csv";
  paths.exemplars_json = dir / "exemplars.json";
  return paths;
}

RunReport run(const RunConfig& raw_config, const RunEnv& env) {
  RunConfig config = raw_config;
  config.strategies = canonical_strategies(config.strategies);
  config.validate();
  Clock& clock = env.clock != nullptr ? *env.clock : system_clock();

  const Dataset dataset = load_dataset(config.dataset_path, config.format);
  const std::string dataset_hash = sha256_hex(read_file_bytes(config.dataset_path));

  const RunPaths paths = RunPaths::in(config.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(paths.output_dir, ec);
  if (ec) {
    throw HarnessError(ErrorCode::IoError, "cannot create " + paths.output_dir.string());
  }
  check_archived_compatibility(config, paths, dataset_hash);
  write_file(paths.config_json, config.to_json().dump(2) + "\n");
  write_file(paths.meta_json, json{{"dataset_sha256", dataset_hash}}.dump(2) + "\n");

  if (config.model.temperature > 0.0) {
    std::fprintf(stderr,
                 "warning: temperature %.3f > 0 makes completions nondeterministic\n",
                 config.model.temperature);
  }

  const Dataset shuffled = shuffle(dataset, config.seed);
  const SplitPlan plan = make_split_plan(shuffled.size(), config.n_chunks, config.seed);
  const std::vector<Chunk> chunks = partition(shuffled, plan);
  write_chunk_balance_csv(chunks, paths.balance_csv);
  for (const std::string& warning : balance_warnings(chunks)) {
    std::fprintf(stderr, "warning: %s\n", warning.c_str());
  }

  const TemplateSet templates = load_templates(config.templates_dir);
  const std::set<std::size_t> filter(config.chunk_filter.begin(), config.chunk_filter.end());

  const bool uses_few = std::find(config.strategies.begin(), config.strategies.end(),
                                  StrategyKind::FewShot) != config.strategies.end();
  const bool uses_cot = std::find(config.strategies.begin(), config.strategies.end(),
                                  StrategyKind::ChainOfThought) != config.strategies.end();
  ExemplarSet few_exemplars;
  if (uses_few) {
    few_exemplars = select_few_shot(shuffled, config.seed, config.few_shot_k);
  }
  write_exemplars_json(config, paths, few_exemplars, uses_few, uses_cot);

  auto index = Journal::index(Journal::load(paths.journal_file));
  Journal journal(paths.journal_file);

  std::shared_ptr<Backend> backend =
      env.backend != nullptr ? env.backend : build_backend(config, dataset, clock);
  Gateway gateway(backend, ResponseCache(config.resolved_cache_dir()), clock);

  for (StrategyKind kind : config.strategies) {
    PromptStrategy strategy;
    switch (kind) {
      case StrategyKind::ZeroShot: strategy = zero_shot_strategy(); break;
      case StrategyKind::FewShot: strategy = few_shot_strategy(config.seed, config.few_shot_k); break;
      case StrategyKind::ChainOfThought: strategy = cot_strategy(); break;
    }

    std::vector<RenderedPrompt> pending;
    for (const Chunk& chunk : chunks) {
      if (!chunk_selected(filter, chunk.index)) continue;
      for (const Statement& statement : chunk.statements) {
        if (index.count({statement.id, kind}) > 0) continue;
        pending.push_back(render(strategy, statement, templates,
                                 kind == StrategyKind::FewShot ? &few_exemplars : nullptr));
      }
    }
    if (pending.empty()) continue;

    std::vector<JournalEntry> fresh;
    fresh.reserve(pending.size());
    try {
      gateway.run_batch(pending, config.model, config.retry, config.parallelism,
                        config.rate_limit_rpm,
                        [&](std::size_t i, const CompletionRecord& record) {
                          const ParseResult parsed = parse_label(record.raw_text);
                          JournalEntry entry;
                          entry.statement_id = pending[i].statement_id;
                          entry.strategy_kind = kind;
                          entry.content_hash = record.content_hash;
                          entry.raw_text = record.raw_text;
                          entry.parsed_label = parsed.label;
                          entry.rule_fired = parsed.rule;
                          journal.append(entry);
                          fresh.push_back(std::move(entry));
                        });
    } catch (const HarnessError& e) {
      throw HarnessError(e.code(), std::string(e.what()) + " [strategy " +
                                       strategy_name(kind) + ", journal preserved in " +
                                       paths.output_dir.string() + "]");
    }
    for (JournalEntry& entry : fresh) {
      index.emplace(JournalKey{entry.statement_id, entry.strategy_kind}, std::move(entry));
    }
  }

  return finish(config, paths, dataset, chunks, filter, index, backend->invocation_count());
}

RunReport resume(const std::filesystem::path& output_dir, const RunEnv& env) {
  const RunPaths paths = RunPaths::in(output_dir);
  if (!std::filesystem::exists(paths.config_json)) {
    throw HarnessError(ErrorCode::IoError,
                       "no archived config.json in " + output_dir.string());
  }
  const RunConfig config = RunConfig::from_json(load_json_file(paths.config_json));
  return run(config, env);
}

RunReport report_only(const std::filesystem::path& output_dir) {
  const RunPaths paths = RunPaths::in(output_dir);
  if (!std::filesystem::exists(paths.config_json)) {
    throw HarnessError(ErrorCode::IoError,
                       "no archived config.json in " + output_dir.string());
  }
  const RunConfig config = RunConfig::from_json(load_json_file(paths.config_json));
  const Dataset dataset = load_dataset(config.dataset_path, config.format);
  const std::string dataset_hash = sha256_hex(read_file_bytes(config.dataset_path));
  check_archived_compatibility(config, paths, dataset_hash);

  const Dataset shuffled = shuffle(dataset, config.seed);
  const SplitPlan plan = make_split_plan(shuffled.size(), config.n_chunks, config.seed);
  const std::vector<Chunk> chunks = partition(shuffled, plan);
  const std::set<std::size_t> filter(config.chunk_filter.begin(), config.chunk_filter.end());
  const auto index = Journal::index(Journal::load(paths.journal_file));
  return finish(config, paths, dataset, chunks, filter, index, 0);
}

void emit_reports(const std::vector<StrategyOutcome>& outcomes, const RunConfig& config,
                  const RunPaths& paths, const Dataset& dataset) {
  if (outcomes.empty()) {
    throw HarnessError(ErrorCode::EmptyInput, "nothing to report");
  }

  // results.csv: machine-readable, 4 decimal places
  {
    std::ostringstream csv;
    csv << "chunk,strategy,macro_f1,parse_failures\n";
    for (const StrategyOutcome& outcome : outcomes) {
      for (const ChunkResult& chunk : outcome.chunks) {
        csv << chunk.chunk_index << ',' << strategy_name(outcome.kind) << ','
            << fixed(chunk.macro_f1, 4) << ',' << chunk.parse_failures << '\n';
      }
    }
    write_file(paths.results_csv, csv.str());
  }

  // figure_data.csv: chunk index x one column per strategy
  {
    std::ostringstream csv;
    csv << "chunk";
    for (const StrategyOutcome& outcome : outcomes) csv << ',' << strategy_name(outcome.kind);
    csv << '\n';
    const std::size_t rows = outcomes.front().chunks.size();
    for (std::size_t r = 0; r < rows; ++r) {
      csv << outcomes.front().chunks[r].chunk_index;
      for (const StrategyOutcome& outcome : outcomes) {
        csv << ',' << fixed(outcome.chunks[r].macro_f1, 4);
      }
      csv << '\n';
    }
    write_file(paths.figure_csv, csv.str());
  }

  // results.md: human table, winners bolded on unrounded values
  {
    std::ostringstream md;
    md << "# Macro-F1 by chunk\n\n";
    md << "| Chunk no. |";
    for (const StrategyOutcome& outcome : outcomes) {
      md << ' ' << strategy_display_name(outcome.kind) << " |";
    }
    md << "\n|";
    for (std::size_t i = 0; i <= outcomes.size(); ++i) md << " --- |";
    md << '\n';

    const std::size_t rows = outcomes.front().chunks.size();
    for (std::size_t r = 0; r < rows; ++r) {
      double best = outcomes.front().chunks[r].macro_f1;
      for (const StrategyOutcome& outcome : outcomes) {
        best = std::max(best, outcome.chunks[r].macro_f1);
      }
      md << "| " << outcomes.front().chunks[r].chunk_index << " |";
      for (const StrategyOutcome& outcome : outcomes) {
        const double value = outcome.chunks[r].macro_f1;
        // ties bold every winner; comparison happens before rounding
        if (value == best) {
          md << " **" << fixed(value, 2) << "** |";
        } else {
          md << ' ' << fixed(value, 2) << " |";
        }
      }
      md << '\n';
    }

    double best_mean = outcomes.front().aggregates.mean_of_chunks;
    for (const StrategyOutcome& outcome : outcomes) {
      best_mean = std::max(best_mean, outcome.aggregates.mean_of_chunks);
    }
    md << "| Average (entire dataset) |";
    for (const StrategyOutcome& outcome : outcomes) {
      const double value = outcome.aggregates.mean_of_chunks;
      if (value == best_mean) {
        md << " **" << fixed(value, 4) << "** |";
      } else {
        md << ' ' << fixed(value, 4) << " |";
      }
    }
    md << "\n\n";

    md << "Reference: supervised fine-tuned ConvBERT baseline, average macro-F1 "
       << fixed(kConvBertBaselineMacroF1, 4) << ".\n\n";
    md << "Pooled macro-F1 over summed confusion matrices:";
    for (const StrategyOutcome& outcome : outcomes) {
      md << ' ' << strategy_display_name(outcome.kind) << ' '
         << fixed(outcome.aggregates.pooled, 4) << ';';
    }
    md << "\n\n";
    md << "Parse failures (responses with no extractable label, scored as the "
          "complement of the gold label):";
    for (const StrategyOutcome& outcome : outcomes) {
      std::uint64_t total = 0;
      for (const ChunkResult& chunk : outcome.chunks) total += chunk.parse_failures;
      md << ' ' << strategy_display_name(outcome.kind) << ' ' << total << ';';
    }
    md << "\n";
    for (const StrategyOutcome& outcome : outcomes) {
      if (outcome.kind == StrategyKind::ChainOfThought) {
        md << "\nNote: the worked Chain-of-Thought exemplars are fixed inputs baked "
              "into the prompt template; statements matching them are not excluded "
              "from the evaluation (see exemplars.json).\n";
        break;
      }
    }
    write_file(paths.results_md, md.str());
  }

  // length_histogram.csv: text lengths (codepoints) bucketed per label
  {
    constexpr std::size_t kBucketWidth = 50;
    std::vector<std::array<std::size_t, 2>> buckets;
    for (const Statement& statement : dataset.statements) {
      const std::size_t bucket = utf8_codepoints(statement.text) / kBucketWidth;
      if (bucket >= buckets.size()) buckets.resize(bucket + 1, {0, 0});
      ++buckets[bucket][static_cast<std::size_t>(statement.label)];
    }
    std::ostringstream csv;
    csv << "length_lo,length_hi,label0,label1\n";
    for (std::size_t b = 0; b < buckets.size(); ++b) {
      csv << b * kBucketWidth << ',' << (b + 1) * kBucketWidth << ',' << buckets[b][0]
          << ',' << buckets[b][1] << '\n';
    }
    write_file(paths.histogram_csv, csv.str());
  }

  (void)config;
}

}  // namespace biasbench
