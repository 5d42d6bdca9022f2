#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace nis {

enum class Objective { sampled_recall_at_1, roc_auc, neg_xent };

struct RewardConfig {
  Objective objective = Objective::sampled_recall_at_1;
  std::int64_t budget = 0;  // memory budget in embedding parameters
  int negatives = 50;       // sampled negatives per retrieval reward
  int auc_group = 100;      // examples per ROC-AUC group
};

// 1 iff the true label's logit strictly exceeds every sampled negative's
// logit; a tie counts as a miss. Requires at least one negative.
int sampled_recall_at_1(double true_logit, const std::vector<double>& neg_logits);

// Probability that a uniformly random positive outranks a uniformly random
// negative, ties counting 1/2, computed from the rank statistic. Empty when
// the group holds a single class; callers must skip such groups.
std::optional<double> roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// max(C / budget - 1, 0).
double cost_loss(std::int64_t total_cost, std::int64_t budget);

// O - C_L.
double reward(double objective, double cost_loss);

}  // namespace nis
