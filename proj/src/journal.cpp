#include "biasbench/journal.hpp"

#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "biasbench/errors.hpp"

namespace biasbench {
namespace {

using nlohmann::json;

std::string now_utc_iso8601() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

json entry_to_json(const JournalEntry& entry) {
  json serialized = {{"statement_id", entry.statement_id},
                     {"strategy", strategy_name(entry.strategy_kind)},
                     {"content_hash", entry.content_hash},
                     {"raw_text", entry.raw_text},
                     {"rule_fired", parse_rule_name(entry.rule_fired)},
                     {"timestamp", entry.timestamp}};
  if (entry.parsed_label.has_value()) {
    serialized["parsed_label"] = *entry.parsed_label;
  } else {
    serialized["parsed_label"] = nullptr;
  }
  return serialized;
}

JournalEntry entry_from_json(const json& parsed) {
  JournalEntry entry;
  entry.statement_id = parsed.at("statement_id").get<std::uint64_t>();
  entry.strategy_kind = parse_strategy(parsed.at("strategy").get<std::string>());
  entry.content_hash = parsed.at("content_hash").get<std::string>();
  entry.raw_text = parsed.at("raw_text").get<std::string>();
  entry.rule_fired = parse_rule_from_name(parsed.at("rule_fired").get<std::string>());
  entry.timestamp = parsed.value("timestamp", "");
  const json& label = parsed.at("parsed_label");
  if (!label.is_null()) {
    entry.parsed_label = label.get<int>();
  }
  return entry;
}

// A crash while appending can persist only a prefix of "entry\n", never the
// newline without the rest, so an unterminated tail is always torn garbage.
// Cut it off before appending anything new.
void truncate_torn_tail(const std::filesystem::path& file) {
  std::error_code ec;
  if (!std::filesystem::exists(file, ec)) return;
  std::ifstream in(file, std::ios::binary);
  if (!in) return;
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();
  in.close();
  if (content.empty() || content.back() == '\n') return;
  const std::size_t last_newline = content.find_last_of('\n');
  const std::uintmax_t new_size = last_newline == std::string::npos ? 0 : last_newline + 1;
  std::filesystem::resize_file(file, new_size, ec);
  if (ec) {
    throw HarnessError(ErrorCode::IoError,
                       "cannot repair torn journal tail: " + ec.message());
  }
}

}  // namespace

Journal::Journal(const std::filesystem::path& file) {
  truncate_torn_tail(file);
  out_.open(file, std::ios::binary | std::ios::app);
  if (!out_) {
    throw HarnessError(ErrorCode::IoError, "cannot open journal " + file.string());
  }
}

void Journal::append(const JournalEntry& entry) {
  JournalEntry stamped = entry;
  if (stamped.timestamp.empty()) stamped.timestamp = now_utc_iso8601();
  const std::string line = entry_to_json(stamped).dump();
  std::lock_guard<std::mutex> lock(mu_);
  out_ << line << '\n';
  out_.flush();
}

std::vector<JournalEntry> Journal::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return {};
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();

  std::vector<JournalEntry> entries;
  std::size_t line_no = 0;
  std::size_t begin = 0;
  while (begin < content.size()) {
    const std::size_t newline = content.find('\n', begin);
    ++line_no;
    if (newline == std::string::npos) {
      // No terminator: the writer was interrupted mid-line. Drop the tail.
      break;
    }
    const std::string_view line(content.data() + begin, newline - begin);
    begin = newline + 1;
    if (line.empty()) continue;
    try {
      entries.push_back(entry_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw HarnessError(ErrorCode::CorruptJournal,
                         "journal line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return entries;
}

std::map<JournalKey, JournalEntry> Journal::index(const std::vector<JournalEntry>& entries) {
  std::map<JournalKey, JournalEntry> map;
  for (const JournalEntry& entry : entries) {
    map.emplace(JournalKey{entry.statement_id, entry.strategy_kind}, entry);
  }
  return map;
}

}  // namespace biasbench
