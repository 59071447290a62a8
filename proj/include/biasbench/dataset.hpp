#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace biasbench {

/// One labeled text record. `id` is the 0-based position in the input file;
/// `label` is 0 (unbiased) or 1 (biased).
struct Statement {
  std::uint64_t id = 0;
  std::string text;
  int label = 0;
};

enum class DatasetFormat { Jsonl, Csv };

DatasetFormat parse_dataset_format(std::string_view name);
const char* dataset_format_name(DatasetFormat format);

struct Dataset {
  std::vector<Statement> statements;
  std::string source_path;
  std::array<std::size_t, 2> class_counts{0, 0};

  std::size_t size() const { return statements.size(); }
};

/// How the shuffled corpus is cut into chunks: `chunk_sizes` is non-increasing
/// (the remainder goes to the earliest chunks) and sums to the dataset size.
struct SplitPlan {
  std::uint64_t seed = 0;
  std::size_t n_chunks = 0;
  std::vector<std::size_t> chunk_sizes;
};

struct Chunk {
  std::size_t index = 0;  // 1-based
  std::vector<Statement> statements;
};

/// Reads newline-delimited JSON records {"text":..., "label":...} or a
/// two-column CSV with header `text,label`. Ids are assigned by file order.
/// Any malformed record aborts the load with the offending line number.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format);

/// Deterministic permutation: Fisher-Yates over a splitmix64 stream seeded
/// with `seed`. Empty and single-element datasets come back unchanged.
Dataset shuffle(const Dataset& dataset, std::uint64_t seed);

SplitPlan make_split_plan(std::size_t n, std::size_t n_chunks, std::uint64_t seed);

/// Cuts the (already shuffled) dataset into contiguous slices per the plan.
std::vector<Chunk> partition(const Dataset& dataset, const SplitPlan& plan);

struct ChunkBalance {
  std::size_t chunk = 0;
  std::size_t label0 = 0;
  std::size_t label1 = 0;
};

std::vector<ChunkBalance> chunk_balance(const std::vector<Chunk>& chunks);
void write_chunk_balance_csv(const std::vector<Chunk>& chunks,
                             const std::filesystem::path& out_path);

/// One warning string per chunk whose class split strays more than
/// `tolerance` (fraction) from 50/50. Advisory only, never an error.
std::vector<std::string> balance_warnings(const std::vector<Chunk>& chunks,
                                          double tolerance = 0.05);

}  // namespace biasbench
