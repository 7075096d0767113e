#include "regd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "regd/errors.hpp"

namespace regd {

ThresholdResult best_threshold_f1(std::span<const ScoredPair> pairs) {
  long total_pos = 0;
  for (const ScoredPair& p : pairs) total_pos += p.label ? 1 : 0;
  if (total_pos == 0 || total_pos == static_cast<long>(pairs.size()))
    throw DataError("threshold sweep needs at least one positive and one negative pair");

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return pairs[a].energy < pairs[b].energy; });

  ThresholdResult best{pairs[order[0]].energy, -1.0};
  long tp = 0;
  long fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = pairs[order[i]].energy;
    // Fold in the whole group of equal energies before scoring.
    while (i < order.size() && pairs[order[i]].energy == t) {
      if (pairs[order[i]].label) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    const long fn = total_pos - tp;
    const double f1 =
        tp == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    if (f1 > best.f1) best = {t, f1};
  }
  return best;
}

Prf f1_at_threshold(std::span<const ScoredPair> pairs, double threshold) {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  for (const ScoredPair& p : pairs) {
    const bool predicted = p.energy <= threshold;
    if (predicted && p.label) ++tp;
    if (predicted && !p.label) ++fp;
    if (!predicted && p.label) ++fn;
  }
  Prf out;
  out.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  out.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  out.f1 = out.precision + out.recall > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

RankingMetrics ranking_metrics(std::span<const RankResult> results) {
  if (results.empty()) throw std::invalid_argument("ranking_metrics needs at least one query");
  RankingMetrics m;
  std::vector<long> ranks;
  ranks.reserve(results.size());
  double auc_sum = 0.0;
  long auc_count = 0;
  long skipped = 0;
  for (const RankResult& r : results) {
    if (r.rank < 1 || r.rank > r.count)
      throw std::invalid_argument("rank must lie in [1, count]");
    ranks.push_back(r.rank);
    m.hits_at_1 += r.rank <= 1 ? 1.0 : 0.0;
    m.hits_at_10 += r.rank <= 10 ? 1.0 : 0.0;
    m.hits_at_100 += r.rank <= 100 ? 1.0 : 0.0;
    m.mrr += 1.0 / static_cast<double>(r.rank);
    m.mean_rank += static_cast<double>(r.rank);
    if (r.count > 1) {
      auc_sum += 1.0 - static_cast<double>(r.rank - 1) / static_cast<double>(r.count - 1);
      ++auc_count;
    } else {
      ++skipped;
    }
  }
  const double n = static_cast<double>(results.size());
  m.hits_at_1 /= n;
  m.hits_at_10 /= n;
  m.hits_at_100 /= n;
  m.mrr /= n;
  m.mean_rank /= n;
  std::sort(ranks.begin(), ranks.end());
  const std::size_t mid = ranks.size() / 2;
  m.median_rank = ranks.size() % 2 == 1
                      ? static_cast<double>(ranks[mid])
                      : 0.5 * static_cast<double>(ranks[mid - 1] + ranks[mid]);
  if (skipped > 0)
    std::fprintf(stderr, "warning: %ld single-candidate queries skipped in AUC\n", skipped);
  m.auc = auc_count > 0 ? auc_sum / static_cast<double>(auc_count)
                        : std::numeric_limits<double>::quiet_NaN();
  return m;
}

long pessimistic_rank(std::span<const double> scores, std::size_t true_index) {
  if (true_index >= scores.size()) throw std::invalid_argument("true candidate index out of range");
  const double s = scores[true_index];
  long rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i != true_index && scores[i] <= s) ++rank;
  }
  return rank;
}

}  // namespace regd
