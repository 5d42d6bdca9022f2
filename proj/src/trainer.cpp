#include "nis/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "nis/errors.hpp"
#include "nis/me_layer.hpp"
#include "nis/reward.hpp"

namespace nis {

namespace {

constexpr std::uint64_t kSaltInit = 0x10;
constexpr std::uint64_t kSaltController = 0x11;
constexpr std::uint64_t kSaltBatch = 0x12;
constexpr std::uint64_t kSaltTrainNeg = 0x13;
constexpr std::uint64_t kSaltRewardNeg = 0x14;
constexpr std::uint64_t kSaltEvalNeg = 0x15;
constexpr std::uint64_t kSaltValObjective = 0x16;

std::int64_t draw_negative(Rng& rng, std::int64_t vocab, std::int64_t label) {
  // Uniform over the vocabulary excluding the true label.
  const std::int64_t x = rng.uniform_int(vocab - 1);
  return x >= label ? x + 1 : x;
}

std::vector<std::int64_t> draw_negatives(Rng& rng, std::int64_t vocab, std::int64_t label, int n) {
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(draw_negative(rng, vocab, label));
  return out;
}

double logsumexp(const std::vector<double>& xs) {
  double mx = xs[0];
  for (double x : xs) mx = std::max(mx, x);
  double z = 0.0;
  for (double x : xs) z += std::exp(x - mx);
  return mx + std::log(z);
}

using EmbedBatchFn = std::function<NodeId(Graph&, const std::vector<const Example*>&)>;

std::map<std::string, double> evaluate_model(const ParamStore& store, const ModelConfig& mc,
                                             const Dataset& ds, const EmbedBatchFn& embed,
                                             int eval_negatives, Rng& eval_rng) {
  const auto& test = ds.split.test;
  std::map<std::string, double> out;
  if (test.empty()) throw ContractViolation("evaluate: empty test split");
  if (ds.kind == TaskKind::retrieval) {
    double r1 = 0, r5 = 0, sr1 = 0;
    const std::size_t chunk = 256;
    for (std::size_t base = 0; base < test.size(); base += chunk) {
      std::vector<const Example*> batch;
      for (std::size_t i = base; i < std::min(base + chunk, test.size()); ++i)
        batch.push_back(&test[i]);
      Graph g(&store);
      const NodeId h = model_hidden(g, mc, embed(g, batch));
      const Tensor& logits = g.value(model_logits(g, mc, h));
      const std::int64_t v = logits.cols();
      for (std::size_t r = 0; r < batch.size(); ++r) {
        const double* row = logits.v.data() + static_cast<std::int64_t>(r) * v;
        const std::int64_t y = batch[r]->label;
        const double ly = row[y];
        std::int64_t ahead = 0;  // ties count against the true label
        for (std::int64_t c = 0; c < v; ++c)
          if (c != y && row[c] >= ly) ++ahead;
        if (ahead < 1) r1 += 1;
        if (ahead < 5) r5 += 1;
        bool hit = true;
        for (const std::int64_t neg : draw_negatives(eval_rng, v, y, eval_negatives))
          if (!(ly > row[neg])) hit = false;
        if (hit) sr1 += 1;
      }
    }
    const double n = static_cast<double>(test.size());
    out["recall_at_1"] = r1 / n;
    out["recall_at_5"] = r5 / n;
    out["sampled_recall_at_1"] = sr1 / n;
  } else {
    std::vector<double> scores;
    std::vector<int> labels;
    const std::size_t chunk = 256;
    for (std::size_t base = 0; base < test.size(); base += chunk) {
      std::vector<const Example*> batch;
      for (std::size_t i = base; i < std::min(base + chunk, test.size()); ++i)
        batch.push_back(&test[i]);
      Graph g(&store);
      const NodeId h = model_hidden(g, mc, embed(g, batch));
      const Tensor& logits = g.value(model_logits(g, mc, h));
      for (std::size_t r = 0; r < batch.size(); ++r) {
        scores.push_back(logits.v[r]);
        labels.push_back(static_cast<int>(batch[r]->label));
      }
    }
    const auto auc = roc_auc(scores, labels);
    if (!auc) throw ContractViolation("evaluate: test split holds a single class");
    out["auc"] = *auc;
  }
  return out;
}

std::vector<std::vector<std::int64_t>> feature_bags(const std::vector<const Example*>& batch,
                                                    std::size_t feature) {
  std::vector<std::vector<std::int64_t>> bags;
  bags.reserve(batch.size());
  for (const Example* ex : batch) bags.push_back(ex->bags[feature]);
  return bags;
}

}  // namespace

SearchState::SearchState(const RunConfig& cfg, const Dataset& ds)
    : cfg_(cfg),
      ds_(&ds),
      ctrl_rng_(mix_seed(cfg.seed, kSaltController)),
      batch_rng_(mix_seed(cfg.seed, kSaltBatch)),
      train_neg_rng_(mix_seed(cfg.seed, kSaltTrainNeg)),
      reward_neg_rng_(mix_seed(cfg.seed, kSaltRewardNeg)),
      eval_neg_rng_(mix_seed(cfg.seed, kSaltEvalNeg)) {
  Rng init_rng(mix_seed(cfg.seed, kSaltInit));
  std::int64_t input_dim = 0;
  std::vector<Controller::FeatureSpace> spaces;
  for (const auto& f : ds.features) {
    GridSpec spec = cfg.grid;
    if (spec.row_splits) {
      std::int64_t sum = 0;
      for (auto r : *spec.row_splits) sum += r;
      if (sum != f.vocab)
        throw ConfigError("grid.rows sums to " + std::to_string(sum) + " but feature " + f.name +
                          " has vocab " + std::to_string(f.vocab));
    }
    grids_.push_back(default_grid(f.name, f.vocab, spec));
    const BlockGrid& grid = grids_.back();
    grid.init_params(main_store_, init_rng);
    input_dim += grid.dim();
    spaces.push_back({f.name, grid.S(), grid.T(), cfg.me_mode});
  }
  model_cfg_.hidden = cfg.hidden;
  model_cfg_.input_dim = input_dim;
  model_cfg_.label_vocab = ds.kind == TaskKind::retrieval ? ds.label_vocab : 1;
  init_model_params(main_store_, model_cfg_, init_rng);
  controller_ = std::make_unique<Controller>(std::move(spaces), policy_store_, baseline_store_,
                                             init_rng, cfg.train.entropy_bonus);
  if (ds.split.train.empty() || ds.split.val.empty())
    throw ConfigError("dataset needs nonempty train and validation splits");
}

void SearchState::log(nlohmann::ordered_json rec) const {
  if (sink) sink(rec);
}

SearchState::SampledChoices SearchState::sample_choices() {
  SampledChoices out;
  out.record = controller_->sample_all(policy_store_, baseline_store_, ctrl_rng_);
  for (std::size_t f = 0; f < grids_.size(); ++f) {
    if (cfg_.me_mode)
      out.coverage.push_back(controller_->me_of(out.record, static_cast<int>(f)));
    else
      out.coverage.push_back(grids_[f].se_as_me(controller_->se_of(out.record, static_cast<int>(f))));
  }
  return out;
}

std::int64_t SearchState::record_cost(const ChoiceRecord& rec) const {
  std::int64_t cost = 0;
  for (std::size_t f = 0; f < grids_.size(); ++f) {
    const BlockGrid& grid = grids_[f];
    MeChoice cov;
    if (cfg_.me_mode) {
      cov = controller_->me_of(rec, static_cast<int>(f));
      cost += grid.me_cost(cov);
    } else {
      const SeChoice se = controller_->se_of(rec, static_cast<int>(f));
      cost += grid.se_cost(se);
      cov = grid.se_as_me(se);
    }
    if (cfg_.include_projection_cost)
      for (int t = 1; t <= grid.T(); ++t)
        if (cov.rows_per_col[static_cast<std::size_t>(t - 1)] > 0)
          cost += grid.col_splits()[static_cast<std::size_t>(t - 1)] * grid.dim();
  }
  return cost;
}

std::int64_t SearchState::choices_cost(const std::vector<FinalChoice>& choices) const {
  std::int64_t cost = 0;
  for (std::size_t f = 0; f < grids_.size(); ++f)
    cost += choices[f].me_mode ? grids_[f].me_cost(choices[f].me) : grids_[f].se_cost(choices[f].se);
  return cost;
}

const Example* SearchState::next_val_example() {
  const auto& val = ds_->split.val;
  const Example* ex = &val[val_cursor_];
  val_cursor_ = (val_cursor_ + 1) % val.size();
  return ex;
}

std::vector<const Example*> SearchState::next_train_batch() {
  const auto& train = ds_->split.train;
  std::vector<const Example*> batch;
  batch.reserve(static_cast<std::size_t>(cfg_.train.batch));
  for (int i = 0; i < cfg_.train.batch; ++i)
    batch.push_back(&train[static_cast<std::size_t>(
        batch_rng_.uniform_int(static_cast<std::int64_t>(train.size())))]);
  return batch;
}

NodeId SearchState::embed_batch(Graph& g, const std::vector<const Example*>& batch,
                                const std::vector<MeChoice>& coverage) {
  std::vector<NodeId> parts;
  for (std::size_t f = 0; f < grids_.size(); ++f)
    parts.push_back(grid_embed(g, grids_[f], coverage[f], feature_bags(batch, f)));
  return parts.size() == 1 ? parts[0] : g.concat_cols(parts);
}

NodeId SearchState::batch_loss(Graph& g, const std::vector<const Example*>& batch,
                               const std::vector<MeChoice>& coverage) {
  const NodeId h = model_hidden(g, model_cfg_, embed_batch(g, batch, coverage));
  if (ds_->kind == TaskKind::retrieval) {
    std::vector<std::int64_t> labels;
    for (const Example* ex : batch) labels.push_back(ex->label);
    if (cfg_.train.softmax == SoftmaxMode::full)
      return g.softmax_xent(model_logits(g, model_cfg_, h), std::move(labels));
    std::vector<std::vector<std::int64_t>> negs;
    for (const Example* ex : batch)
      negs.push_back(
          draw_negatives(train_neg_rng_, ds_->label_vocab, ex->label, cfg_.train.train_negatives));
    return g.sampled_softmax_xent(h, g.param("out.w"), g.param("out.b"), std::move(labels),
                                  std::move(negs));
  }
  std::vector<double> labels;
  for (const Example* ex : batch) labels.push_back(static_cast<double>(ex->label));
  return g.sigmoid_xent(model_logits(g, model_cfg_, h), std::move(labels));
}

void SearchState::warmup_phase() {
  if (step_ != 0) throw ContractViolation("warmup_phase: training already started");
  for (int i = 0; i < cfg_.train.warmup; ++i) train_step_main();
}

double SearchState::train_step_main() {
  auto sampled = sample_choices();
  const auto batch = next_train_batch();
  Graph g(&main_store_);
  const NodeId loss = batch_loss(g, batch, sampled.coverage);
  auto [lv, grads] = forward_backward(g, loss);
  if (on_main_grads) on_main_grads(grads);
  main_store_.apply_gradients(grads, cfg_.train.lr_main);
  nlohmann::ordered_json rec;
  rec["step"] = step_;
  rec["phase"] = step_ < cfg_.train.warmup ? "warmup" : "main";
  rec["loss"] = lv;
  rec["cost"] = record_cost(sampled.record);
  rec["actions"] = sampled.record.actions;
  log(std::move(rec));
  ++step_;
  return lv;
}

std::optional<double> SearchState::train_step_controller() {
  std::vector<ChoiceRecord> records;
  const bool per_example =
      ds_->kind == TaskKind::retrieval || cfg_.reward.objective == Objective::neg_xent;
  int skipped_groups = 0;
  if (per_example) {
    for (int i = 0; i < cfg_.train.batch; ++i) {
      auto sampled = sample_choices();
      const Example* ex = next_val_example();
      Graph g(&main_store_);
      const NodeId h = model_hidden(g, model_cfg_, embed_batch(g, {ex}, sampled.coverage));
      const Tensor& hv = g.value(h);
      double objective = 0.0;
      if (ds_->kind == TaskKind::retrieval) {
        std::vector<std::int64_t> cands{ex->label};
        for (const std::int64_t n :
             draw_negatives(reward_neg_rng_, ds_->label_vocab, ex->label, cfg_.reward.negatives))
          cands.push_back(n);
        const auto logits = candidate_logits(main_store_, hv.v.data(), hv.cols(), cands);
        if (cfg_.reward.objective == Objective::sampled_recall_at_1) {
          objective = sampled_recall_at_1(
              logits[0], std::vector<double>(logits.begin() + 1, logits.end()));
        } else {
          objective = logits[0] - logsumexp(logits);  // negative sampled softmax loss
        }
      } else {
        // neg_xent on a ranking example: negative sigmoid cross entropy.
        Graph g2(&main_store_);
        const NodeId loss = g2.sigmoid_xent(
            model_logits(g2, model_cfg_,
                         model_hidden(g2, model_cfg_, embed_batch(g2, {ex}, sampled.coverage))),
            {static_cast<double>(ex->label)});
        objective = -g2.value(loss).v[0];
      }
      auto& rec = sampled.record;
      rec.objective = objective;
      rec.cost = record_cost(rec);
      rec.reward = reward(objective, cost_loss(rec.cost, cfg_.reward.budget));
      records.push_back(std::move(rec));
    }
  } else {
    const int groups = cfg_.train.batch / cfg_.reward.auc_group;
    for (int gi = 0; gi < groups; ++gi) {
      auto sampled = sample_choices();
      std::vector<const Example*> group;
      for (int i = 0; i < cfg_.reward.auc_group; ++i) group.push_back(next_val_example());
      Graph g(&main_store_);
      const Tensor& logits = g.value(model_logits(
          g, model_cfg_, model_hidden(g, model_cfg_, embed_batch(g, group, sampled.coverage))));
      std::vector<double> scores(logits.v.begin(), logits.v.end());
      std::vector<int> labels;
      for (const Example* ex : group) labels.push_back(static_cast<int>(ex->label));
      const auto auc = roc_auc(scores, labels);
      if (!auc) {
        ++skipped_groups;
        continue;
      }
      auto& rec = sampled.record;
      rec.objective = *auc;
      rec.cost = record_cost(rec);
      rec.reward = reward(*auc, cost_loss(rec.cost, cfg_.reward.budget));
      records.push_back(std::move(rec));
    }
  }

  nlohmann::ordered_json rec;
  rec["step"] = step_;
  rec["phase"] = "controller";
  ++step_;
  if (records.empty()) {
    ++skipped_;
    rec["skipped"] = true;
    rec["skipped_groups"] = skipped_groups;
    log(std::move(rec));
    return std::nullopt;
  }
  const auto result =
      controller_->update(policy_store_, baseline_store_, records, cfg_.train.lr_controller,
                          cfg_.train.lr_baseline);
  double mean_reward = 0.0, mean_obj = 0.0, mean_cost = 0.0;
  nlohmann::ordered_json actions = nlohmann::ordered_json::array();
  nlohmann::ordered_json rewards = nlohmann::ordered_json::array();
  nlohmann::ordered_json objectives = nlohmann::ordered_json::array();
  nlohmann::ordered_json costs = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    mean_reward += r.reward;
    mean_obj += r.objective;
    mean_cost += static_cast<double>(r.cost);
    actions.push_back(r.actions);
    rewards.push_back(r.reward);
    objectives.push_back(r.objective);
    costs.push_back(r.cost);
  }
  const double inv = 1.0 / static_cast<double>(records.size());
  mean_reward *= inv;
  mean_obj *= inv;
  mean_cost *= inv;
  if (!result.applied) {
    ++skipped_;
    rec["rejected"] = result.message;
    log(std::move(rec));
    return std::nullopt;
  }
  rec["reward"] = mean_reward;
  rec["objective"] = mean_obj;
  rec["cost"] = mean_cost;
  rec["records"] = records.size();
  rec["skipped_groups"] = skipped_groups;
  rec["actions"] = std::move(actions);
  rec["record_rewards"] = std::move(rewards);
  rec["record_objectives"] = std::move(objectives);
  rec["record_costs"] = std::move(costs);
  log(std::move(rec));
  reward_trace_.push_back(mean_reward);
  return mean_reward;
}

std::vector<FinalChoice> SearchState::final_architecture() const {
  std::vector<const BlockGrid*> grids;
  for (const auto& g : grids_) grids.push_back(&g);
  return controller_->derive_final_architecture(policy_store_, grids);
}

std::map<std::string, double> SearchState::evaluate(const std::vector<FinalChoice>& choices) {
  std::vector<MeChoice> coverage;
  for (std::size_t f = 0; f < grids_.size(); ++f)
    coverage.push_back(choices[f].me_mode ? choices[f].me : grids_[f].se_as_me(choices[f].se));
  auto embed = [this, &coverage](Graph& g, const std::vector<const Example*>& batch) {
    return embed_batch(g, batch, coverage);
  };
  return evaluate_model(main_store_, model_cfg_, *ds_, embed, cfg_.eval_negatives, eval_neg_rng_);
}

nlohmann::ordered_json architecture_to_json(const std::vector<FeatureArch>& arch) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& fa : arch) {
    nlohmann::ordered_json j;
    j["feature"] = fa.feature;
    j["mode"] = fa.choice.me_mode ? "me" : "se";
    j["removed"] = fa.removed;
    if (!fa.removed) {
      if (fa.choice.me_mode)
        j["choice"] = fa.choice.me.rows_per_col;
      else
        j["choice"] = {fa.choice.se.s, fa.choice.se.t};
      nlohmann::ordered_json mes = nlohmann::ordered_json::array();
      for (const auto& e : fa.mes.entries) mes.push_back({e.vocab, e.dim});
      j["mes"] = std::move(mes);
    }
    j["cost"] = fa.cost;
    out.push_back(std::move(j));
  }
  return out;
}

nlohmann::ordered_json search_result_to_json(const SearchResult& r, const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["budget"] = cfg.budget;
  j["search_mode"] = cfg.me_mode ? "me" : "se";
  j["task"] = cfg.task == TaskKind::retrieval ? "retrieval" : "ranking";
  j["seed"] = cfg.seed;
  j["architecture"] = architecture_to_json(r.architecture);
  j["total_cost"] = r.total_cost;
  j["test_metrics"] = r.test_metrics;
  if (r.retrained_test_metrics) {
    j["retrained_val_objective"] = *r.retrained_val_objective;
    j["retrained_test_metrics"] = *r.retrained_test_metrics;
  } else {
    j["retrained_val_objective"] = nullptr;
    j["retrained_test_metrics"] = nullptr;
  }
  j["controller_steps"] = r.controller_steps;
  j["skipped_controller_steps"] = r.skipped_controller_steps;
  j["reward_trace"] = r.reward_trace;
  return j;
}

SearchResult run_search(const RunConfig& cfg, const Dataset& ds, const MetricsSink& sink) {
  SearchState st(cfg, ds);
  st.sink = sink;
  if (cfg.train.warmup == 0) {
    std::cerr << "warning: warm-up disabled (W=0); embedding blocks start cold\n";
    if (sink) sink({{"step", 0}, {"phase", "warning"}, {"message", "warm-up disabled (W=0)"}});
  }
  st.warmup_phase();
  int main_steps = cfg.train.warmup;
  const int ratio = cfg.train.alternation_ratio;
  for (int s = cfg.train.warmup; s < cfg.train.steps; ++s) {
    if ((s - cfg.train.warmup) % (ratio + 1) < ratio) {
      st.train_step_main();
      ++main_steps;
    } else {
      st.train_step_controller();
    }
  }

  SearchResult result;
  const auto choices = st.final_architecture();
  for (std::size_t f = 0; f < choices.size(); ++f) {
    FeatureArch fa;
    fa.feature = ds.features[f].name;
    fa.choice = choices[f];
    fa.removed = choices[f].removed();
    const BlockGrid& grid = st.grids()[f];
    if (choices[f].me_mode) {
      fa.mes = grid.choice_to_mes(choices[f].me);
      fa.cost = grid.me_cost(choices[f].me);
    } else if (!fa.removed) {
      fa.mes.entries.push_back({grid.row_cum(choices[f].se.s), grid.col_cum(choices[f].se.t)});
      if (grid.row_cum(choices[f].se.s) < grid.vocab())
        fa.mes.entries.push_back({grid.vocab() - grid.row_cum(choices[f].se.s), 0});
      fa.cost = grid.se_cost(choices[f].se);
    }
    result.total_cost += fa.cost;
    result.architecture.push_back(std::move(fa));
  }
  result.test_metrics = st.evaluate(choices);
  result.reward_trace = st.reward_trace();
  result.controller_steps = static_cast<int>(st.reward_trace().size());
  result.skipped_controller_steps = st.skipped_controller_steps();

  if (cfg.retrain_final) {
    bool any_kept = false;
    std::vector<Mes> mes_list;
    for (const auto& fa : result.architecture) {
      mes_list.push_back(fa.removed ? Mes{} : fa.mes);
      any_kept = any_kept || !fa.removed;
    }
    if (any_kept) {
      const auto fixed = train_fixed_architecture(cfg, ds, mes_list, main_steps,
                                                  mix_seed(cfg.seed, kFixedArchTrainSalt));
      result.retrained_val_objective = fixed.val_objective;
      result.retrained_test_metrics = fixed.test_metrics;
    }
  }
  return result;
}

FixedArchResult train_fixed_architecture(const RunConfig& cfg, const Dataset& ds,
                                         const std::vector<Mes>& mes_per_feature, int steps,
                                         std::uint64_t seed) {
  if (mes_per_feature.size() != ds.features.size())
    throw ContractViolation("train_fixed_architecture: one MES per feature expected");
  ParamStore store;
  Rng init_rng(mix_seed(seed, kSaltInit));
  Rng batch_rng(mix_seed(seed, kSaltBatch));
  Rng train_neg_rng(mix_seed(seed, kSaltTrainNeg));
  Rng val_neg_rng(mix_seed(seed, kSaltValObjective));
  Rng eval_rng(mix_seed(seed, kSaltEvalNeg));

  // A kept feature contributes a standalone multi-size embedding; an empty
  // or dim-0 MES removes the feature. With every feature removed the model
  // degenerates to a constant zero input of width 1 (bias fitting only).
  std::vector<std::optional<MeLayer>> layers(mes_per_feature.size());
  std::int64_t input_dim = 0;
  for (std::size_t f = 0; f < mes_per_feature.size(); ++f) {
    const Mes stripped = mes_per_feature[f].strip_zero();
    if (stripped.entries.empty()) continue;
    layers[f].emplace(build_me(store, "feat" + std::to_string(f), mes_per_feature[f], init_rng));
    input_dim += layers[f]->out_dim();
  }
  const bool degenerate = input_dim == 0;
  if (degenerate) input_dim = 1;

  ModelConfig mc;
  mc.hidden = cfg.hidden;
  mc.input_dim = input_dim;
  mc.label_vocab = ds.kind == TaskKind::retrieval ? ds.label_vocab : 1;
  init_model_params(store, mc, init_rng);

  auto embed = [&](Graph& g, const std::vector<const Example*>& batch) {
    std::vector<NodeId> parts;
    for (std::size_t f = 0; f < layers.size(); ++f)
      if (layers[f]) parts.push_back(me_bag_embed(g, *layers[f], feature_bags(batch, f)));
    if (parts.empty())
      return g.input(Tensor({static_cast<std::int64_t>(batch.size()), 1}));
    return parts.size() == 1 ? parts[0] : g.concat_cols(parts);
  };

  const auto& train = ds.split.train;
  for (int s = 0; s < steps; ++s) {
    std::vector<const Example*> batch;
    for (int i = 0; i < cfg.train.batch; ++i)
      batch.push_back(&train[static_cast<std::size_t>(
          batch_rng.uniform_int(static_cast<std::int64_t>(train.size())))]);
    Graph g(&store);
    const NodeId h = model_hidden(g, mc, embed(g, batch));
    NodeId loss;
    if (ds.kind == TaskKind::retrieval) {
      std::vector<std::int64_t> labels;
      for (const Example* ex : batch) labels.push_back(ex->label);
      if (cfg.train.softmax == SoftmaxMode::full) {
        loss = g.softmax_xent(model_logits(g, mc, h), std::move(labels));
      } else {
        std::vector<std::vector<std::int64_t>> negs;
        for (const Example* ex : batch)
          negs.push_back(
              draw_negatives(train_neg_rng, ds.label_vocab, ex->label, cfg.train.train_negatives));
        loss = g.sampled_softmax_xent(h, g.param("out.w"), g.param("out.b"), std::move(labels),
                                      std::move(negs));
      }
    } else {
      std::vector<double> labels;
      for (const Example* ex : batch) labels.push_back(static_cast<double>(ex->label));
      loss = g.sigmoid_xent(model_logits(g, mc, h), std::move(labels));
    }
    auto [lv, grads] = forward_backward(g, loss);
    (void)lv;
    store.apply_gradients(grads, cfg.train.lr_main);
  }

  // Validation objective under the configured reward objective, with a
  // negative stream fixed by `seed` so candidates are scored identically.
  FixedArchResult out;
  const auto& val = ds.split.val;
  if (ds.kind == TaskKind::retrieval) {
    double acc = 0.0;
    const std::size_t chunk = 256;
    for (std::size_t base = 0; base < val.size(); base += chunk) {
      std::vector<const Example*> batch;
      for (std::size_t i = base; i < std::min(base + chunk, val.size()); ++i)
        batch.push_back(&val[i]);
      Graph g(&store);
      const Tensor& hv = g.value(model_hidden(g, mc, embed(g, batch)));
      for (std::size_t r = 0; r < batch.size(); ++r) {
        const std::int64_t y = batch[r]->label;
        std::vector<std::int64_t> cands{y};
        for (const std::int64_t n : draw_negatives(val_neg_rng, ds.label_vocab, y, cfg.reward.negatives))
          cands.push_back(n);
        const auto logits = candidate_logits(
            store, hv.v.data() + static_cast<std::int64_t>(r) * hv.cols(), hv.cols(), cands);
        if (cfg.reward.objective == Objective::neg_xent)
          acc += logits[0] - logsumexp(logits);
        else
          acc += sampled_recall_at_1(logits[0],
                                     std::vector<double>(logits.begin() + 1, logits.end()));
      }
    }
    out.val_objective = acc / static_cast<double>(val.size());
  } else {
    std::vector<double> scores;
    std::vector<int> labels;
    const std::size_t chunk = 256;
    for (std::size_t base = 0; base < val.size(); base += chunk) {
      std::vector<const Example*> batch;
      for (std::size_t i = base; i < std::min(base + chunk, val.size()); ++i)
        batch.push_back(&val[i]);
      Graph g(&store);
      const Tensor& logits = g.value(model_logits(g, mc, model_hidden(g, mc, embed(g, batch))));
      for (std::size_t r = 0; r < batch.size(); ++r) {
        scores.push_back(logits.v[r]);
        labels.push_back(static_cast<int>(batch[r]->label));
      }
    }
    const auto auc = roc_auc(scores, labels);
    out.val_objective = auc ? *auc : 0.0;
  }
  out.test_metrics = evaluate_model(store, mc, ds, embed, cfg.eval_negatives, eval_rng);
  return out;
}

}  // namespace nis
