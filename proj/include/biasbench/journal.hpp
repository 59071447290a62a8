#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "biasbench/label_parser.hpp"
#include "biasbench/prompt_engine.hpp"

namespace biasbench {

struct JournalEntry {
  std::uint64_t statement_id = 0;
  StrategyKind strategy_kind = StrategyKind::ZeroShot;
  std::string content_hash;
  std::string raw_text;
  std::optional<int> parsed_label;
  ParseRule rule_fired = ParseRule::None;
  std::string timestamp;  // UTC ISO-8601
};

using JournalKey = std::pair<std::uint64_t, StrategyKind>;

/// Append-only newline-delimited JSON log of predictions. Appends are
/// serialized and flushed line-by-line so a crash can tear at most the final
/// line; load() drops a torn tail and rejects corruption anywhere else.
class Journal {
 public:
  explicit Journal(const std::filesystem::path& file);

  void append(const JournalEntry& entry);

  static std::vector<JournalEntry> load(const std::filesystem::path& file);

  /// Deduplicated view keyed by (statement_id, strategy); first entry wins.
  static std::map<JournalKey, JournalEntry> index(const std::vector<JournalEntry>& entries);

 private:
  std::ofstream out_;
  std::mutex mu_;
};

}  // namespace biasbench
