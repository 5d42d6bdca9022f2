#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nis/block_grid.hpp"
#include "nis/config.hpp"
#include "nis/tasks.hpp"

namespace nis {

// One exhaustively trained SE candidate, or an enumerated-but-untrained
// infeasible one (val_objective empty).
struct CandidateReport {
  SeChoice choice;
  std::int64_t cost = 0;
  bool feasible = false;
  std::optional<double> val_objective;
  std::map<std::string, double> test_metrics;
  std::uint64_t train_seed = 0;
};

struct SweepResult {
  std::vector<CandidateReport> reports;  // all S*T+1 actions, sentinel first
  int best_index = -1;                   // among feasible candidates; tie -> lower cost
  int steps_per_candidate = 0;
};

struct EnumeratedCandidate {
  SeChoice choice;
  std::int64_t cost = 0;
  bool feasible = false;
};

// All S*T+1 SE actions annotated with cost and feasibility against the budget.
std::vector<EnumeratedCandidate> enumerate_se_candidates(const BlockGrid& grid,
                                                         std::int64_t budget);

// All (S+1)^T ME coverage vectors; intended for micro grids only.
std::vector<MeChoice> enumerate_me_candidates(const BlockGrid& grid);

// Trains every feasible SE candidate of a single-feature config from scratch
// with one shared seed and picks the best validation objective (ties break
// toward lower cost). Refuses when the feasible count exceeds cfg.oracle.guard.
SweepResult brute_force_best(const RunConfig& cfg, const Dataset& ds);

// The grid's MES for one SE corner: [(V_s, D_t)] plus the explicit uncovered
// zero-dimension remainder; empty for the sentinel.
Mes se_corner_mes(const BlockGrid& grid, const SeChoice& choice);

// Manual-baseline analogues: for each column depth e of the grid, a fixed SE
// spec (min(v, budget/e), e) spending the budget without search.
std::vector<Mes> manual_se_baselines(const BlockGrid& grid, std::int64_t budget);

nlohmann::ordered_json sweep_to_json(const SweepResult& sweep, const RunConfig& cfg);

}  // namespace nis
