#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "biasbench/prompt_engine.hpp"

namespace biasbench {

struct ConfusionMatrix {
  // counts[gold][pred]
  std::array<std::array<std::uint64_t, 2>, 2> counts{{{0, 0}, {0, 0}}};
  std::uint64_t n = 0;

  void add(int gold, int pred) {
    ++counts[gold][pred];
    ++n;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

ConfusionMatrix confusion(std::span<const int> gold, std::span<const int> pred);

// Zero-division convention: precision/recall are 0 when their denominator is
// 0, and f1 = 0 when precision + recall = 0.
std::array<ClassScores, 2> class_scores(const ConfusionMatrix& cm);

double macro_f1(const ConfusionMatrix& cm);

struct ChunkResult {
  std::size_t chunk_index = 0;
  StrategyKind strategy_kind = StrategyKind::ZeroShot;
  ConfusionMatrix confusion;
  double macro_f1 = 0.0;
  std::uint64_t parse_failures = 0;
};

struct AggregateScores {
  double mean_of_chunks = 0.0;  // the reported "Average (entire dataset)" figure
  double pooled = 0.0;          // macro-F1 of the summed confusion matrices
};

AggregateScores aggregate(std::span<const ChunkResult> results);

}  // namespace biasbench
