#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "regd/errors.hpp"
#include "regd/eval.hpp"

using namespace regd;

namespace {

// Reference F1 at a fixed threshold, written the slow obvious way.
double brute_f1(const std::vector<ScoredPair>& pairs, double t) {
  int tp = 0, fp = 0, fn = 0;
  for (const auto& p : pairs) {
    const bool pred = p.energy <= t;
    if (pred && p.label) ++tp;
    if (pred && !p.label) ++fp;
    if (!pred && p.label) ++fn;
  }
  if (2 * tp + fp + fn == 0) return 0.0;
  return 2.0 * tp / (2.0 * tp + fp + fn);
}

}  // namespace

TEST_CASE("threshold sweep on hand scores") {
  SUBCASE("separable pairs reach F1 1 at the positive score") {
    const std::vector<ScoredPair> pairs = {{-0.5, true}, {0.3, false}};
    const ThresholdResult best = best_threshold_f1(pairs);
    CHECK(best.f1 == 1.0);
    CHECK(best.threshold == -0.5);
  }
  SUBCASE("inverted pairs prefer the smallest threshold on ties") {
    // Candidates are the distinct energies: t = 0.1 gives F1 1/2... actually
    // t = 0.4 captures the positive and the negative, F1 = 2/3; t = 0.1
    // captures only the negative, F1 = 0. The sweep must pick 0.4.
    const std::vector<ScoredPair> pairs = {{0.4, true}, {0.1, false}};
    const ThresholdResult best = best_threshold_f1(pairs);
    CHECK(best.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(best.threshold == 0.4);
  }
  SUBCASE("one-class inputs are rejected") {
    const std::vector<ScoredPair> only_pos = {{0.0, true}};
    const std::vector<ScoredPair> only_neg = {{0.0, false}};
    CHECK_THROWS_AS(best_threshold_f1(only_pos), DataError);
    CHECK_THROWS_AS(best_threshold_f1(only_neg), DataError);
  }
}

TEST_CASE("threshold sweep matches a dense grid oracle") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> energy(-3.0, 3.0);
  std::bernoulli_distribution label(0.4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ScoredPair> pairs;
    bool has_pos = false, has_neg = false;
    for (int i = 0; i < 60; ++i) {
      pairs.push_back({energy(rng), label(rng)});
      (pairs.back().label ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) continue;

    const ThresholdResult best = best_threshold_f1(pairs);
    CHECK(best.f1 == doctest::Approx(brute_f1(pairs, best.threshold)).epsilon(1e-12));

    double grid_best = 0.0;
    for (int g = 0; g <= 10000; ++g) {
      grid_best = std::max(grid_best, brute_f1(pairs, -3.0 + g * 6.0 / 10000.0));
    }
    CHECK(best.f1 >= grid_best - 1e-12);
  }
}

TEST_CASE("precision recall at a fixed threshold") {
  const std::vector<ScoredPair> pairs = {{0.0, true}, {1.0, true}, {0.2, false}};
  const Prf at = f1_at_threshold(pairs, 0.5);
  // Predicts the first positive and the negative: p = 1/2, r = 1/2.
  CHECK(at.precision == 0.5);
  CHECK(at.recall == 0.5);
  CHECK(at.f1 == 0.5);

  const Prf none = f1_at_threshold(pairs, -1.0);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);

  const std::vector<ScoredPair> positives = {pairs[0], pairs[1]};
  const Prf perfect = f1_at_threshold(positives, 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
}

TEST_CASE("ranking metrics") {
  SUBCASE("all ranked first") {
    const std::vector<RankResult> results = {{1, 5}, {1, 5}};
    const RankingMetrics m = ranking_metrics(results);
    CHECK(m.hits_at_1 == 1.0);
    CHECK(m.hits_at_10 == 1.0);
    CHECK(m.hits_at_100 == 1.0);
    CHECK(m.mrr == 1.0);
    CHECK(m.mean_rank == 1.0);
    CHECK(m.median_rank == 1.0);
    CHECK(m.auc == 1.0);
  }
  SUBCASE("mixed ranks") {
    const std::vector<RankResult> results = {{1, 11}, {3, 11}};
    const RankingMetrics m = ranking_metrics(results);
    CHECK(m.hits_at_1 == 0.5);
    CHECK(m.hits_at_10 == 1.0);
    CHECK(m.mrr == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(m.mean_rank == 2.0);
    CHECK(m.median_rank == 2.0);
    CHECK(m.auc == doctest::Approx(0.9).epsilon(1e-15));  // mean of 1.0 and 0.8
  }
  SUBCASE("worst rank scores zero area") {
    const std::vector<RankResult> results = {{7, 7}};
    CHECK(ranking_metrics(results).auc == 0.0);
  }
  SUBCASE("single-candidate queries do not poison the area") {
    const std::vector<RankResult> results = {{1, 1}, {2, 11}};
    const RankingMetrics m = ranking_metrics(results);
    CHECK(m.auc == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(m.mean_rank == 1.5);  // still counted everywhere else

    const std::vector<RankResult> only_trivial = {{1, 1}};
    CHECK(std::isnan(ranking_metrics(only_trivial).auc));
  }
  SUBCASE("median of an even count averages the middle pair") {
    const std::vector<RankResult> results = {{1, 9}, {2, 9}, {5, 9}, {9, 9}};
    CHECK(ranking_metrics(results).median_rank == 3.5);
  }
}

TEST_CASE("pessimistic rank counts every tie") {
  const std::vector<double> scores = {0.5, 0.5, 1.0};
  CHECK(pessimistic_rank(scores, 0) == 2);  // the other 0.5 ties, 1.0 loses
  CHECK(pessimistic_rank(scores, 2) == 3);
  const std::vector<double> solo = {0.2, 0.9};
  CHECK(pessimistic_rank(solo, 0) == 1);
}
