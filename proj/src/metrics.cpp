#include "biasbench/metrics.hpp"

#include "biasbench/errors.hpp"

namespace biasbench {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (int g = 0; g < 2; ++g) {
    for (int p = 0; p < 2; ++p) {
      counts[g][p] += other.counts[g][p];
    }
  }
  n += other.n;
  return *this;
}

ConfusionMatrix confusion(std::span<const int> gold, std::span<const int> pred) {
  if (gold.size() != pred.size()) {
    throw HarnessError(ErrorCode::LengthMismatch,
                       "gold has " + std::to_string(gold.size()) + " entries, pred has " +
                           std::to_string(pred.size()));
  }
  if (gold.empty()) {
    throw HarnessError(ErrorCode::EmptyInput, "no predictions to score");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    cm.add(gold[i], pred[i]);
  }
  return cm;
}

std::array<ClassScores, 2> class_scores(const ConfusionMatrix& cm) {
  std::array<ClassScores, 2> scores;
  for (int c = 0; c < 2; ++c) {
    const double tp = static_cast<double>(cm.counts[c][c]);
    const double fp = static_cast<double>(cm.counts[1 - c][c]);
    const double fn = static_cast<double>(cm.counts[c][1 - c]);
    ClassScores& s = scores[static_cast<std::size_t>(c)];
    s.precision = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
    s.recall = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
    s.f1 = (s.precision + s.recall) > 0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
  }
  return scores;
}

double macro_f1(const ConfusionMatrix& cm) {
  if (cm.n == 0) {
    throw HarnessError(ErrorCode::EmptyInput, "cannot score an empty confusion matrix");
  }
  const auto scores = class_scores(cm);
  return (scores[0].f1 + scores[1].f1) / 2.0;
}

AggregateScores aggregate(std::span<const ChunkResult> results) {
  if (results.empty()) {
    throw HarnessError(ErrorCode::EmptyInput, "no chunk results to aggregate");
  }
  ConfusionMatrix pooled;
  double sum = 0.0;
  for (const ChunkResult& result : results) {
    if (result.strategy_kind != results.front().strategy_kind) {
      throw HarnessError(ErrorCode::MixedStrategies,
                         "cannot aggregate across prompt strategies");
    }
    sum += result.macro_f1;
    pooled += result.confusion;
  }
  AggregateScores scores;
  scores.mean_of_chunks = sum / static_cast<double>(results.size());
  scores.pooled = pooled.n > 0 ? macro_f1(pooled) : 0.0;
  return scores;
}

}  // namespace biasbench
