#include "nis/config.hpp"

#include <fstream>
#include <set>

#include "nis/errors.hpp"

namespace nis {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& path, std::set<std::string> allowed) {
  if (!j.is_object()) throw ConfigError("config node " + path + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw ConfigError("unknown config key \"" + path + key + "\"");
}

template <typename T>
T get_or(const json& j, const std::string& path, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for \"" + path + key + "\": " + e.what());
  }
}

std::vector<std::int64_t> get_i64_list(const json& j, const std::string& path, const char* key,
                                       std::vector<std::int64_t> fallback) {
  return get_or<std::vector<std::int64_t>>(j, path, key, std::move(fallback));
}

}  // namespace

RunConfig parse_config(const nlohmann::json& j) {
  check_keys(j, "", {"version", "task", "seed", "search_mode", "budget", "data", "grid", "model",
                     "train", "reward", "eval", "retrain_final", "oracle"});
  if (!j.contains("version") || !j.at("version").is_number_integer())
    throw ConfigError("config is missing the integer \"version\" field");
  if (j.at("version").get<int>() != 1)
    throw ConfigError("unsupported config version " + j.at("version").dump() + " (expected 1)");

  RunConfig cfg;
  const std::string task = get_or<std::string>(j, "", "task", "retrieval");
  if (task == "retrieval") cfg.task = TaskKind::retrieval;
  else if (task == "ranking") cfg.task = TaskKind::ranking;
  else throw ConfigError("task must be \"retrieval\" or \"ranking\"");

  cfg.seed = get_or<std::uint64_t>(j, "", "seed", 1);
  const std::string mode = get_or<std::string>(j, "", "search_mode", "se");
  if (mode == "se") cfg.me_mode = false;
  else if (mode == "me") cfg.me_mode = true;
  else throw ConfigError("search_mode must be \"se\" or \"me\"");
  cfg.budget = get_or<std::int64_t>(j, "", "budget", 0);
  if (cfg.budget <= 0) throw ConfigError("budget must be a positive parameter count");

  // data
  {
    const json d = j.contains("data") ? j.at("data") : json::object();
    if (cfg.task == TaskKind::retrieval) {
      check_keys(d, "data.",
                 {"n_examples", "vocab", "zipf_exponent", "n_head", "n_clusters", "label_noise",
                  "aux_feature", "aux_vocab", "cache"});
      auto& r = cfg.data.retrieval;
      r.n_examples = get_or<std::int64_t>(d, "data.", "n_examples", 20000);
      r.vocab = get_or<std::int64_t>(d, "data.", "vocab", 1000);
      r.zipf_exponent = get_or<double>(d, "data.", "zipf_exponent", 1.05);
      r.n_head = get_or<std::int64_t>(d, "data.", "n_head", 150);
      r.n_clusters = get_or<std::int64_t>(d, "data.", "n_clusters", 20);
      r.label_noise = get_or<double>(d, "data.", "label_noise", 0.05);
      r.aux_feature = get_or<bool>(d, "data.", "aux_feature", false);
      r.aux_vocab = get_or<std::int64_t>(d, "data.", "aux_vocab", 0);
    } else {
      check_keys(d, "data.",
                 {"n_examples", "vocabs", "informative", "zipf_exponent", "label_noise", "cache"});
      auto& r = cfg.data.ranking;
      r.n_examples = get_or<std::int64_t>(d, "data.", "n_examples", 20000);
      r.vocabs = get_i64_list(d, "data.", "vocabs", {300, 1000, 3000});
      r.informative = get_i64_list(d, "data.", "informative", {60, 100, 200});
      r.zipf_exponent = get_or<double>(d, "data.", "zipf_exponent", 1.05);
      r.label_noise = get_or<double>(d, "data.", "label_noise", 0.1);
    }
    cfg.data.cache = get_or<std::string>(d, "data.", "cache", "");
  }

  // grid
  if (j.contains("grid")) {
    const json& gj = j.at("grid");
    check_keys(gj, "grid.", {"rows", "cols"});
    if (gj.contains("rows")) cfg.grid.row_splits = get_i64_list(gj, "grid.", "rows", {});
    if (gj.contains("cols")) cfg.grid.col_splits = get_i64_list(gj, "grid.", "cols", {});
  }

  // model
  if (j.contains("model")) {
    const json& mj = j.at("model");
    check_keys(mj, "model.", {"hidden"});
    cfg.hidden = get_i64_list(mj, "model.", "hidden", cfg.hidden);
    if (cfg.hidden.empty()) throw ConfigError("model.hidden must not be empty");
  }

  // train
  {
    const json t = j.contains("train") ? j.at("train") : json::object();
    check_keys(t, "train.",
               {"steps", "warmup", "batch", "lr_main", "lr_controller", "lr_baseline", "softmax",
                "train_negatives", "alternation_ratio", "entropy_bonus"});
    auto& tc = cfg.train;
    tc.steps = get_or<int>(t, "train.", "steps", tc.steps);
    tc.warmup = get_or<int>(t, "train.", "warmup", -1);
    if (tc.warmup < 0) tc.warmup = tc.steps / 5;
    tc.batch = get_or<int>(t, "train.", "batch", tc.batch);
    tc.lr_main = get_or<double>(t, "train.", "lr_main", tc.lr_main);
    tc.lr_controller = get_or<double>(t, "train.", "lr_controller", tc.lr_controller);
    tc.lr_baseline = get_or<double>(t, "train.", "lr_baseline", tc.lr_baseline);
    const std::string sm = get_or<std::string>(t, "train.", "softmax", "sampled");
    if (sm == "full") tc.softmax = SoftmaxMode::full;
    else if (sm == "sampled") tc.softmax = SoftmaxMode::sampled;
    else throw ConfigError("train.softmax must be \"full\" or \"sampled\"");
    tc.train_negatives = get_or<int>(t, "train.", "train_negatives", tc.train_negatives);
    tc.alternation_ratio = get_or<int>(t, "train.", "alternation_ratio", 1);
    tc.entropy_bonus = get_or<double>(t, "train.", "entropy_bonus", 0.0);
    if (tc.steps < 1) throw ConfigError("train.steps must be >= 1");
    if (tc.warmup >= tc.steps) throw ConfigError("train.warmup must be smaller than train.steps");
    if (tc.batch < 1) throw ConfigError("train.batch must be >= 1");
    if (tc.alternation_ratio < 1) throw ConfigError("train.alternation_ratio must be >= 1");
  }

  // reward
  {
    const json rj = j.contains("reward") ? j.at("reward") : json::object();
    check_keys(rj, "reward.", {"objective", "negatives", "auc_group", "include_projection_cost"});
    const std::string obj = get_or<std::string>(
        rj, "reward.", "objective",
        cfg.task == TaskKind::retrieval ? "sampled_recall_at_1" : "roc_auc");
    if (obj == "sampled_recall_at_1") cfg.reward.objective = Objective::sampled_recall_at_1;
    else if (obj == "roc_auc") cfg.reward.objective = Objective::roc_auc;
    else if (obj == "neg_xent") cfg.reward.objective = Objective::neg_xent;
    else throw ConfigError("reward.objective must be sampled_recall_at_1, roc_auc or neg_xent");
    cfg.reward.negatives = get_or<int>(rj, "reward.", "negatives", 50);
    cfg.reward.auc_group = get_or<int>(rj, "reward.", "auc_group", 100);
    cfg.include_projection_cost = get_or<bool>(rj, "reward.", "include_projection_cost", false);
    cfg.reward.budget = cfg.budget;
    if (cfg.reward.objective == Objective::sampled_recall_at_1 && cfg.reward.negatives < 1)
      throw ConfigError("reward.negatives must be >= 1 for sampled recall");
    if (cfg.reward.objective == Objective::roc_auc) {
      if (cfg.reward.auc_group < 2) throw ConfigError("reward.auc_group must be >= 2");
      if (cfg.train.batch % cfg.reward.auc_group != 0)
        throw ConfigError("reward.auc_group must divide train.batch");
    }
  }

  // eval
  if (j.contains("eval")) {
    check_keys(j.at("eval"), "eval.", {"negatives"});
    cfg.eval_negatives = get_or<int>(j.at("eval"), "eval.", "negatives", 50);
  }
  cfg.retrain_final = get_or<bool>(j, "", "retrain_final", true);

  // oracle
  if (j.contains("oracle")) {
    check_keys(j.at("oracle"), "oracle.", {"guard", "steps"});
    cfg.oracle.guard = get_or<int>(j.at("oracle"), "oracle.", "guard", 50);
    cfg.oracle.steps = get_or<int>(j.at("oracle"), "oracle.", "steps", 0);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

nlohmann::ordered_json resolved_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["task"] = cfg.task == TaskKind::retrieval ? "retrieval" : "ranking";
  j["seed"] = cfg.seed;
  j["search_mode"] = cfg.me_mode ? "me" : "se";
  j["budget"] = cfg.budget;
  nlohmann::ordered_json d;
  if (cfg.task == TaskKind::retrieval) {
    const auto& r = cfg.data.retrieval;
    d["n_examples"] = r.n_examples;
    d["vocab"] = r.vocab;
    d["zipf_exponent"] = r.zipf_exponent;
    d["n_head"] = r.n_head;
    d["n_clusters"] = r.n_clusters;
    d["label_noise"] = r.label_noise;
    d["aux_feature"] = r.aux_feature;
    d["aux_vocab"] = r.aux_vocab;
  } else {
    const auto& r = cfg.data.ranking;
    d["n_examples"] = r.n_examples;
    d["vocabs"] = r.vocabs;
    d["informative"] = r.informative;
    d["zipf_exponent"] = r.zipf_exponent;
    d["label_noise"] = r.label_noise;
  }
  d["cache"] = cfg.data.cache;
  j["data"] = std::move(d);
  nlohmann::ordered_json gj = nlohmann::ordered_json::object();
  if (cfg.grid.row_splits) gj["rows"] = *cfg.grid.row_splits;
  if (cfg.grid.col_splits) gj["cols"] = *cfg.grid.col_splits;
  j["grid"] = std::move(gj);
  j["model"] = {{"hidden", cfg.hidden}};
  j["train"] = {{"steps", cfg.train.steps},
                {"warmup", cfg.train.warmup},
                {"batch", cfg.train.batch},
                {"lr_main", cfg.train.lr_main},
                {"lr_controller", cfg.train.lr_controller},
                {"lr_baseline", cfg.train.lr_baseline},
                {"softmax", cfg.train.softmax == SoftmaxMode::full ? "full" : "sampled"},
                {"train_negatives", cfg.train.train_negatives},
                {"alternation_ratio", cfg.train.alternation_ratio},
                {"entropy_bonus", cfg.train.entropy_bonus}};
  const char* obj = cfg.reward.objective == Objective::sampled_recall_at_1 ? "sampled_recall_at_1"
                    : cfg.reward.objective == Objective::roc_auc           ? "roc_auc"
                                                                           : "neg_xent";
  j["reward"] = {{"objective", obj},
                 {"negatives", cfg.reward.negatives},
                 {"auc_group", cfg.reward.auc_group},
                 {"include_projection_cost", cfg.include_projection_cost}};
  j["eval"] = {{"negatives", cfg.eval_negatives}};
  j["retrain_final"] = cfg.retrain_final;
  j["oracle"] = {{"guard", cfg.oracle.guard}, {"steps", cfg.oracle.steps}};
  return j;
}

}  // namespace nis
