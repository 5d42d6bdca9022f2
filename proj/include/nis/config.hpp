#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nis/block_grid.hpp"
#include "nis/reward.hpp"
#include "nis/tasks.hpp"

namespace nis {

enum class SoftmaxMode { full, sampled };

struct TrainConfig {
  int steps = 3000;
  int warmup = -1;  // -1: resolved to 20% of steps
  int batch = 64;
  double lr_main = 1e-3;
  double lr_controller = 1e-3;
  double lr_baseline = 1e-2;
  SoftmaxMode softmax = SoftmaxMode::sampled;
  int train_negatives = 32;
  int alternation_ratio = 1;  // main steps per controller step after warm-up
  double entropy_bonus = 0.0;
};

struct DataConfig {
  // retrieval
  RetrievalGenConfig retrieval;
  // ranking
  RankingGenConfig ranking;
  std::string cache;  // optional dataset file; empty regenerates from config+seed
};

struct OracleConfig {
  int guard = 50;  // refuse sweeps over more candidates than this
  int steps = 0;   // 0: same number of main-model steps as the search
};

// The resolved run configuration; every field has a value after load.
struct RunConfig {
  TaskKind task = TaskKind::retrieval;
  std::uint64_t seed = 1;
  bool me_mode = false;
  std::int64_t budget = 0;
  DataConfig data;
  GridSpec grid;  // optional split overrides applied to every feature
  std::vector<std::int64_t> hidden = {64, 64, 32};
  TrainConfig train;
  RewardConfig reward;
  int eval_negatives = 50;
  bool retrain_final = true;
  OracleConfig oracle;
  bool include_projection_cost = false;
};

// Parses and validates against the strict v1 schema: unknown keys anywhere
// and version mismatches are hard errors, and cross-field invariants
// (warmup < steps, auc_group divides batch for ranking, ...) are enforced.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

// The effective configuration with every default filled in; reloading the
// emitted document yields the same RunConfig.
nlohmann::ordered_json resolved_json(const RunConfig& cfg);

}  // namespace nis
