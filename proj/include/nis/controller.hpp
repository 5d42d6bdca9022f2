#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nis/block_grid.hpp"
#include "nis/param_store.hpp"
#include "nis/rng.hpp"

namespace nis {

// One sampled configuration and what happened to it. Objective and cost are
// kept alongside the combined reward so logged records can be re-audited.
struct ChoiceRecord {
  std::vector<std::vector<int>> actions;  // [feature][slot]
  double log_prob = 0.0;
  double baseline_pred = 0.0;
  double reward = 0.0;
  double objective = 0.0;
  std::int64_t cost = 0;
};

struct UpdateResult {
  bool applied = false;
  std::string message;
};

// Final decoded action for one feature.
struct FinalChoice {
  bool me_mode = false;
  SeChoice se;
  MeChoice me;
  bool removed() const;  // sentinel SE corner / all-zero ME coverage
};

// Policy over embedding configurations: per feature either one categorical
// over the S*T grid corners plus the removal sentinel (SE mode, action 0) or
// T independent categoricals over {0..S} (ME mode). The baseline mirrors the
// slot structure with one scalar per slot and predicts the reward as their
// mean. Policy logits live in `policy_store` ("ctrl.<f>.<slot>"), baseline
// scalars in `baseline_store` ("base.<f>.<slot>").
class Controller {
 public:
  struct FeatureSpace {
    std::string feature;
    int S = 0;
    int T = 0;
    bool me_mode = false;
    int slots() const { return me_mode ? T : 1; }
    int actions() const { return me_mode ? S + 1 : S * T + 1; }
  };

  Controller(std::vector<FeatureSpace> spaces, ParamStore& policy_store,
             ParamStore& baseline_store, Rng& init_rng, double entropy_bonus = 0.0);

  const std::vector<FeatureSpace>& spaces() const { return spaces_; }
  int total_slots() const { return total_slots_; }

  // Action index <-> SE corner. Index 0 is the sentinel; corner (s, t) maps
  // to 1 + (s-1)*T + (t-1).
  static SeChoice decode_se_action(int action, int T);
  static int encode_se_action(const SeChoice& choice, int T);

  std::pair<SeChoice, double> sample_se(const ParamStore& policy_store, int feature,
                                        Rng& rng) const;
  std::pair<MeChoice, double> sample_me(const ParamStore& policy_store, int feature,
                                        Rng& rng) const;

  // Samples every feature; fills actions and log_prob and stamps the current
  // baseline prediction.
  ChoiceRecord sample_all(const ParamStore& policy_store, const ParamStore& baseline_store,
                          Rng& rng) const;

  SeChoice se_of(const ChoiceRecord& rec, int feature) const;
  MeChoice me_of(const ChoiceRecord& rec, int feature) const;

  double baseline_prediction(const ParamStore& baseline_store) const;

  // One synchronous advantage-actor-critic step over a batch of records:
  // policy gradient on -(reward - baseline) * log pi(actions), baseline
  // regressed toward realized rewards with squared error. Records with
  // non-finite rewards reject the whole step and leave parameters untouched.
  UpdateResult update(ParamStore& policy_store, ParamStore& baseline_store,
                      const std::vector<ChoiceRecord>& records, double lr_policy,
                      double lr_baseline) const;

  // Per-slot argmax decode. Exact logit ties break toward the cheaper action,
  // then the lower index; grids supply the SE action costs.
  std::vector<FinalChoice> derive_final_architecture(const ParamStore& policy_store,
                                                     const std::vector<const BlockGrid*>& grids) const;

  std::string policy_param(int feature, int slot) const;
  std::string baseline_param(int feature, int slot) const;

 private:
  std::vector<FeatureSpace> spaces_;
  double entropy_bonus_;
  int total_slots_ = 0;
};

// Softmax probabilities of a logit vector (stable).
std::vector<double> softmax(const std::vector<double>& logits);

}  // namespace nis
