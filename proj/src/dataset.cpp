#include "biasbench/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "biasbench/errors.hpp"
#include "biasbench/prng.hpp"

namespace biasbench {
namespace {

using nlohmann::json;

std::string_view trim_view(std::string_view s) {
  std::size_t begin = 0;
  while (begin < s.size() && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  std::size_t end = s.size();
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

[[noreturn]] void fail_at_line(ErrorCode code, std::size_t line, const std::string& what) {
  throw HarnessError(code, what + " (line " + std::to_string(line) + ")");
}

void append_statement(Dataset& dataset, std::string text, int label, std::size_t line) {
  if (label != 0 && label != 1) {
    fail_at_line(ErrorCode::NonBinaryLabel, line,
                 "label must be 0 or 1, got " + std::to_string(label));
  }
  if (trim_view(text).empty()) {
    fail_at_line(ErrorCode::EmptyText, line, "text is empty");
  }
  Statement statement;
  statement.id = dataset.statements.size();
  statement.text = std::move(text);  // stored as-is, only the emptiness check trims
  statement.label = label;
  ++dataset.class_counts[static_cast<std::size_t>(label)];
  dataset.statements.push_back(std::move(statement));
}

void load_jsonl(Dataset& dataset, std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      fail_at_line(ErrorCode::MalformedRecord, line_no, e.what());
    }
    if (!record.is_object()) {
      fail_at_line(ErrorCode::MalformedRecord, line_no, "record is not a JSON object");
    }
    if (!record.contains("text")) fail_at_line(ErrorCode::MissingField, line_no, "missing `text`");
    if (!record.contains("label")) fail_at_line(ErrorCode::MissingField, line_no, "missing `label`");
    if (!record["text"].is_string()) {
      fail_at_line(ErrorCode::MalformedRecord, line_no, "`text` is not a string");
    }
    if (!record["label"].is_number_integer()) {
      fail_at_line(ErrorCode::NonBinaryLabel, line_no, "`label` is not an integer");
    }
    append_statement(dataset, record["text"].get<std::string>(),
                     record["label"].get<int>(), line_no);
  }
}

// RFC 4180 flavored: quoted fields may contain commas, doubled quotes and
// newlines. Records are reported by the line they start on.
void load_csv(Dataset& dataset, const std::string& content) {
  std::vector<std::string> fields;
  std::string field;
  std::size_t line_no = 1;
  std::size_t record_line = 1;
  bool in_quotes = false;
  bool header_seen = false;

  auto finish_record = [&](std::size_t at_line) {
    fields.push_back(field);
    field.clear();
    if (fields.size() == 1 && trim_view(fields[0]).empty()) {
      fields.clear();
      return;  // blank line
    }
    if (!header_seen) {
      if (fields.size() != 2 || trim_view(fields[0]) != "text" || trim_view(fields[1]) != "label") {
        fail_at_line(ErrorCode::MalformedRecord, at_line, "header must be `text,label`");
      }
      header_seen = true;
      fields.clear();
      return;
    }
    if (fields.size() != 2) {
      fail_at_line(ErrorCode::MalformedRecord, at_line,
                   "expected 2 fields, got " + std::to_string(fields.size()));
    }
    const std::string_view label_text = trim_view(fields[1]);
    if (label_text.empty()) fail_at_line(ErrorCode::MissingField, at_line, "missing `label`");
    if (label_text != "0" && label_text != "1") {
      fail_at_line(ErrorCode::NonBinaryLabel, at_line,
                   "label must be 0 or 1, got `" + std::string(label_text) + "`");
    }
    append_statement(dataset, fields[0], label_text == "1" ? 1 : 0, at_line);
    fields.clear();
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line_no;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) {
          fail_at_line(ErrorCode::MalformedRecord, line_no, "stray quote inside field");
        }
        in_quotes = true;
        break;
      case ',':
        fields.push_back(field);
        field.clear();
        break;
      case '\r':
        break;
      case '\n':
        finish_record(record_line);
        ++line_no;
        record_line = line_no;
        break;
      default:
        field.push_back(c);
        break;
    }
  }
  if (in_quotes) fail_at_line(ErrorCode::MalformedRecord, record_line, "unterminated quote");
  if (!field.empty() || !fields.empty()) finish_record(record_line);
  if (!header_seen) {
    throw HarnessError(ErrorCode::MalformedRecord, "empty file, header `text,label` required");
  }
}

}  // namespace

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "jsonl") return DatasetFormat::Jsonl;
  if (name == "csv") return DatasetFormat::Csv;
  throw HarnessError(ErrorCode::InvalidConfig,
                     "unknown dataset format `" + std::string(name) + "`");
}

const char* dataset_format_name(DatasetFormat format) {
  return format == DatasetFormat::Jsonl ? "jsonl" : "csv";
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw HarnessError(ErrorCode::IoError, "cannot open dataset file " + path.string());
  }
  Dataset dataset;
  dataset.source_path = path.string();
  if (format == DatasetFormat::Jsonl) {
    load_jsonl(dataset, in);
  } else {
    std::ostringstream buffer;
    buffer << in.rdbuf();
    load_csv(dataset, buffer.str());
  }
  return dataset;
}

Dataset shuffle(const Dataset& dataset, std::uint64_t seed) {
  Dataset out = dataset;
  fisher_yates_shuffle(out.statements, seed);
  return out;
}

SplitPlan make_split_plan(std::size_t n, std::size_t n_chunks, std::uint64_t seed) {
  if (n_chunks == 0) {
    throw HarnessError(ErrorCode::InvalidConfig, "n_chunks must be positive");
  }
  if (n < n_chunks) {
    throw HarnessError(ErrorCode::TooFewItems,
                       std::to_string(n) + " items cannot fill " +
                           std::to_string(n_chunks) + " chunks");
  }
  SplitPlan plan;
  plan.seed = seed;
  plan.n_chunks = n_chunks;
  const std::size_t base = n / n_chunks;
  const std::size_t remainder = n % n_chunks;
  plan.chunk_sizes.reserve(n_chunks);
  for (std::size_t i = 0; i < n_chunks; ++i) {
    plan.chunk_sizes.push_back(i < remainder ? base + 1 : base);
  }
  return plan;
}

std::vector<Chunk> partition(const Dataset& dataset, const SplitPlan& plan) {
  std::size_t total = 0;
  for (std::size_t size : plan.chunk_sizes) total += size;
  if (total != dataset.size()) {
    throw HarnessError(ErrorCode::SizeMismatch,
                       "plan covers " + std::to_string(total) + " items, dataset has " +
                           std::to_string(dataset.size()));
  }
  std::vector<Chunk> chunks;
  chunks.reserve(plan.chunk_sizes.size());
  auto cursor = dataset.statements.begin();
  for (std::size_t i = 0; i < plan.chunk_sizes.size(); ++i) {
    Chunk chunk;
    chunk.index = i + 1;
    chunk.statements.assign(cursor, cursor + static_cast<std::ptrdiff_t>(plan.chunk_sizes[i]));
    cursor += static_cast<std::ptrdiff_t>(plan.chunk_sizes[i]);
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

std::vector<ChunkBalance> chunk_balance(const std::vector<Chunk>& chunks) {
  std::vector<ChunkBalance> rows;
  rows.reserve(chunks.size());
  for (const Chunk& chunk : chunks) {
    ChunkBalance row;
    row.chunk = chunk.index;
    for (const Statement& statement : chunk.statements) {
      if (statement.label == 0) {
        ++row.label0;
      } else {
        ++row.label1;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

void write_chunk_balance_csv(const std::vector<Chunk>& chunks,
                             const std::filesystem::path& out_path) {
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    throw HarnessError(ErrorCode::IoError, "cannot write " + out_path.string());
  }
  out << "chunk,label0,label1\n";
  for (const ChunkBalance& row : chunk_balance(chunks)) {
    out << row.chunk << ',' << row.label0 << ',' << row.label1 << '\n';
  }
}

std::vector<std::string> balance_warnings(const std::vector<Chunk>& chunks, double tolerance) {
  std::vector<std::string> warnings;
  for (const ChunkBalance& row : chunk_balance(chunks)) {
    const std::size_t total = row.label0 + row.label1;
    if (total == 0) continue;
    const double fraction0 = static_cast<double>(row.label0) / static_cast<double>(total);
    if (fraction0 < 0.5 - tolerance || fraction0 > 0.5 + tolerance) {
      char buffer[128];
      std::snprintf(buffer, sizeof(buffer),
                    "chunk %zu class balance %.4f strays more than %.0f pp from 50/50",
                    row.chunk, fraction0, tolerance * 100.0);
      warnings.emplace_back(buffer);
    }
  }
  return warnings;
}

}  // namespace biasbench
