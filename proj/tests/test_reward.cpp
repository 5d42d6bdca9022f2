#include <algorithm>
#include <cmath>
#include <doctest/doctest.h>

#include "nis/errors.hpp"
#include "nis/reward.hpp"
#include "nis/rng.hpp"

using namespace nis;

namespace {

// Independent oracle: count pairs directly, ties half-weighted, with the
// same integer-numerator construction so equality can be exact.
std::optional<double> auc_pair_count(const std::vector<double>& scores,
                                     const std::vector<int>& labels) {
  std::int64_t pos = 0, neg = 0, concordant2 = 0;
  for (int l : labels) (l != 0 ? pos : neg)++;
  if (pos == 0 || neg == 0) return std::nullopt;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 0) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) concordant2 += 2;
      else if (scores[i] == scores[j]) concordant2 += 1;
    }
  }
  return static_cast<double>(concordant2) / static_cast<double>(2 * pos * neg);
}

}  // namespace

TEST_CASE("sampled recall at 1: strict comparison") {
  CHECK(sampled_recall_at_1(2.0, {1.0, 0.5}) == 1);
  CHECK(sampled_recall_at_1(0.3, {0.5}) == 0);
  CHECK(sampled_recall_at_1(1.0, {1.0}) == 0);  // tie counts as a miss
  CHECK_THROWS_AS(sampled_recall_at_1(1.0, {}), ContractViolation);
}

TEST_CASE("recall equals the argmax oracle when scores are distinct") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(20));
    const double true_logit = rng.uniform(-3, 3);
    std::vector<double> negs;
    for (int i = 0; i < n; ++i) negs.push_back(rng.uniform(-3, 3));
    const double max_neg = *std::max_element(negs.begin(), negs.end());
    if (true_logit == max_neg) continue;
    const int oracle = true_logit > max_neg ? 1 : 0;
    CHECK(sampled_recall_at_1(true_logit, negs) == oracle);
  }
}

TEST_CASE("roc_auc hand cases") {
  CHECK(*roc_auc({0.9, 0.1}, {1, 0}) == 1.0);
  CHECK(*roc_auc({0.2, 0.7, 0.4, 0.9}, {0, 1, 1, 0}) == 0.5);
  CHECK(*roc_auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == 0.5);
  CHECK(!roc_auc({0.1, 0.9}, {1, 1}).has_value());
  CHECK(!roc_auc({0.1, 0.9}, {0, 0}).has_value());
  CHECK_THROWS_AS(roc_auc({0.1}, {1, 0}), ContractViolation);
}

TEST_CASE("roc_auc equals brute-force pair counting exactly") {
  Rng rng(2);
  for (int trial = 0; trial < 400; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(60));
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      // Coarse scores force plenty of ties.
      scores.push_back(static_cast<double>(rng.uniform_int(8)) / 4.0);
      labels.push_back(static_cast<int>(rng.uniform_int(2)));
    }
    const auto fast = roc_auc(scores, labels);
    const auto slow = auc_pair_count(scores, labels);
    REQUIRE(fast.has_value() == slow.has_value());
    if (fast) CHECK(*fast == *slow);  // bit-identical integer ratios
  }
}

TEST_CASE("roc_auc is invariant under strictly increasing transforms") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(40));
    std::vector<double> scores, warped;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      scores.push_back(rng.uniform(-2, 2));
      labels.push_back(static_cast<int>(rng.uniform_int(2)));
    }
    for (double s : scores) warped.push_back(std::exp(3.0 * s) + 1.0);
    const auto a = roc_auc(scores, labels);
    const auto b = roc_auc(warped, labels);
    REQUIRE(a.has_value() == b.has_value());
    if (a) CHECK(*a == *b);
  }
}

TEST_CASE("cost loss formula and properties") {
  CHECK(cost_loss(1000, 1000) == 0.0);
  CHECK(cost_loss(1500, 1000) == doctest::Approx(0.5));
  CHECK(cost_loss(0, 1000) == 0.0);
  CHECK_THROWS_AS(cost_loss(1, 0), ContractViolation);

  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::int64_t budget = 1 + rng.uniform_int(10000);
    const std::int64_t c1 = rng.uniform_int(30000);
    const std::int64_t c2 = rng.uniform_int(30000);
    const double l1 = cost_loss(c1, budget), l2 = cost_loss(c2, budget);
    CHECK(l1 >= 0.0);
    if (c1 <= budget) CHECK(l1 == 0.0);
    // 1-Lipschitz in C / budget.
    const double dist = std::abs(static_cast<double>(c1 - c2)) / static_cast<double>(budget);
    CHECK(std::abs(l1 - l2) <= dist + 1e-12);
  }
}

TEST_CASE("reward is objective minus cost loss") {
  CHECK(reward(0.8, 0.3) == doctest::Approx(0.5));
  CHECK(reward(1.0, 0.0) == doctest::Approx(1.0));
}
