#include "nis/reward.hpp"

#include <algorithm>
#include <numeric>

#include "nis/errors.hpp"

namespace nis {

int sampled_recall_at_1(double true_logit, const std::vector<double>& neg_logits) {
  if (neg_logits.empty()) throw ContractViolation("sampled_recall_at_1: no negatives");
  for (double n : neg_logits)
    if (!(true_logit > n)) return 0;
  return 1;
}

std::optional<double> roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ContractViolation("roc_auc: size mismatch");
  std::int64_t pos = 0, neg = 0;
  for (int l : labels) (l != 0 ? pos : neg)++;
  if (pos == 0 || neg == 0) return std::nullopt;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Integer numerator in half-units so the result is bit-identical to
  // brute-force pair counting with half-weighted ties.
  std::int64_t twice_rank_sum_pos = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // Tie group occupying 1-based ranks i+1 .. j; twice the average rank is
    // an integer: (i+1) + j.
    const std::int64_t twice_avg = static_cast<std::int64_t>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] != 0) twice_rank_sum_pos += twice_avg;
    i = j;
  }
  const std::int64_t numerator = twice_rank_sum_pos - pos * (pos + 1);
  return static_cast<double>(numerator) / static_cast<double>(2 * pos * neg);
}

double cost_loss(std::int64_t total_cost, std::int64_t budget) {
  if (budget <= 0) throw ContractViolation("cost_loss: budget must be positive");
  const double ratio = static_cast<double>(total_cost) / static_cast<double>(budget);
  return std::max(ratio - 1.0, 0.0);
}

double reward(double objective, double cost_loss) { return objective - cost_loss; }

}  // namespace nis
