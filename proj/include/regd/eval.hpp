#pragma once

#include <span>
#include <vector>

namespace regd {

struct ScoredPair {
  double energy = 0.0;
  bool label = false;  // true for positive pairs
};

struct ThresholdResult {
  double threshold = 0.0;
  double f1 = 0.0;
};

// Exact sweep over the observed distinct energies, predicting positive iff
// energy <= t. Ties in F1 resolve to the smallest threshold. Requires at
// least one positive and one negative pair.
ThresholdResult best_threshold_f1(std::span<const ScoredPair> pairs);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// F1 is 0 when precision + recall is 0; precision is 0 with no predicted
// positives, recall 0 with no actual positives.
Prf f1_at_threshold(std::span<const ScoredPair> pairs, double threshold);

struct RankResult {
  long rank = 1;   // 1-based, ties broken pessimistically by the caller
  long count = 1;  // number of ranked candidates
};

struct RankingMetrics {
  double hits_at_1 = 0.0;
  double hits_at_10 = 0.0;
  double hits_at_100 = 0.0;
  double median_rank = 0.0;
  double mrr = 0.0;
  double mean_rank = 0.0;
  // Mean of 1 - (rank-1)/(count-1); queries with count <= 1 are skipped with
  // a warning on stderr, NaN when every query is skipped.
  double auc = 0.0;
};

RankingMetrics ranking_metrics(std::span<const RankResult> results);

// Pessimistic rank of the true candidate: one plus the number of other
// candidates scoring <= the true score (lower scores are better).
long pessimistic_rank(std::span<const double> scores, std::size_t true_index);

}  // namespace regd
