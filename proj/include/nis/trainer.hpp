#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nis/block_grid.hpp"
#include "nis/config.hpp"
#include "nis/controller.hpp"
#include "nis/model.hpp"
#include "nis/tasks.hpp"

namespace nis {

// Consumes one metrics record per step (line-delimited stream when written
// to disk). Records carry step, phase, loss/reward/cost and chosen actions.
using MetricsSink = std::function<void(const nlohmann::ordered_json&)>;

// Seed salt shared by every fixed-architecture training run (oracle sweep
// candidates, manual baselines, final-architecture retrains), so identical
// specs train identically.
inline constexpr std::uint64_t kFixedArchTrainSalt = 0xA11;

struct FeatureArch {
  std::string feature;
  bool removed = false;
  FinalChoice choice;
  Mes mes;  // decoded spec; empty when removed
  std::int64_t cost = 0;
};

struct SearchResult {
  std::vector<FeatureArch> architecture;
  std::int64_t total_cost = 0;
  std::map<std::string, double> test_metrics;  // shared-weight model on the test split
  std::optional<double> retrained_val_objective;
  std::optional<std::map<std::string, double>> retrained_test_metrics;
  std::vector<double> reward_trace;  // mean reward per controller step
  int controller_steps = 0;
  int skipped_controller_steps = 0;
};

nlohmann::ordered_json search_result_to_json(const SearchResult& r, const RunConfig& cfg);
nlohmann::ordered_json architecture_to_json(const std::vector<FeatureArch>& arch);

// Joint search state: the main model (embedding blocks, projections, FC
// stack, output head) in one store, the controller policy and the baseline
// in their own stores so update separation is checkable by fingerprint.
class SearchState {
 public:
  SearchState(const RunConfig& cfg, const Dataset& ds);

  // Runs cfg.train.warmup main steps with the controller frozen.
  void warmup_phase();

  // One main-model step: one sampled configuration applied to a fresh
  // training batch; only main parameters move. Returns the training loss.
  double train_step_main();

  // One controller step on validation data: per-example choices rewarded by
  // sampled recall for retrieval, per-group choices rewarded by group
  // ROC-AUC for ranking. Main parameters are untouched. Returns the mean
  // reward, or nullopt when every group was skipped (single-class).
  std::optional<double> train_step_controller();

  std::vector<FinalChoice> final_architecture() const;

  // Exact test-split evaluation of a fixed architecture on the shared
  // weights: full-vocabulary Recall@1/@5 plus sampled recall for retrieval,
  // pooled ROC-AUC for ranking.
  std::map<std::string, double> evaluate(const std::vector<FinalChoice>& choices);

  std::int64_t choices_cost(const std::vector<FinalChoice>& choices) const;

  int step() const { return step_; }
  const RunConfig& config() const { return cfg_; }
  const Dataset& dataset() const { return *ds_; }
  const std::vector<BlockGrid>& grids() const { return grids_; }
  ParamStore& main_store() { return main_store_; }
  ParamStore& policy_store() { return policy_store_; }
  ParamStore& baseline_store() { return baseline_store_; }
  const Controller& controller() const { return *controller_; }
  const std::vector<double>& reward_trace() const { return reward_trace_; }
  int skipped_controller_steps() const { return skipped_; }

  MetricsSink sink;                                  // optional
  std::function<void(const GradMap&)> on_main_grads; // test instrumentation

 private:
  struct SampledChoices {
    ChoiceRecord record;
    std::vector<MeChoice> coverage;  // ME-form per feature
  };
  SampledChoices sample_choices();
  std::int64_t record_cost(const ChoiceRecord& rec) const;
  NodeId embed_batch(Graph& g, const std::vector<const Example*>& batch,
                     const std::vector<MeChoice>& coverage);
  NodeId batch_loss(Graph& g, const std::vector<const Example*>& batch,
                    const std::vector<MeChoice>& coverage);
  const Example* next_val_example();
  std::vector<const Example*> next_train_batch();
  void log(nlohmann::ordered_json rec) const;

  RunConfig cfg_;
  const Dataset* ds_;
  std::vector<BlockGrid> grids_;
  ParamStore main_store_, policy_store_, baseline_store_;
  std::unique_ptr<Controller> controller_;
  ModelConfig model_cfg_;
  Rng ctrl_rng_, batch_rng_, train_neg_rng_, reward_neg_rng_, eval_neg_rng_;
  std::size_t val_cursor_ = 0;
  int step_ = 0;
  int skipped_ = 0;
  std::vector<double> reward_trace_;
};

// Full pipeline: warm-up, alternating steps, argmax decode, shared-weight
// evaluation and (optionally) a from-scratch retrain of the exported spec.
SearchResult run_search(const RunConfig& cfg, const Dataset& ds, const MetricsSink& sink = {});

// Trains one fixed architecture (a standalone multi-size embedding per kept
// feature) from scratch and scores it; the shared harness behind the oracle
// sweep, the manual baselines and final-architecture retraining.
struct FixedArchResult {
  double val_objective = 0.0;
  std::map<std::string, double> test_metrics;
};
FixedArchResult train_fixed_architecture(const RunConfig& cfg, const Dataset& ds,
                                         const std::vector<Mes>& mes_per_feature, int steps,
                                         std::uint64_t seed);

}  // namespace nis
