#include "nis/oracle.hpp"

#include <algorithm>

#include "nis/errors.hpp"
#include "nis/trainer.hpp"

namespace nis {

std::vector<EnumeratedCandidate> enumerate_se_candidates(const BlockGrid& grid,
                                                         std::int64_t budget) {
  std::vector<EnumeratedCandidate> out;
  out.push_back({SeChoice{0, 0}, 0, true});
  for (int s = 1; s <= grid.S(); ++s)
    for (int t = 1; t <= grid.T(); ++t) {
      const SeChoice c{s, t};
      const std::int64_t cost = grid.se_cost(c);
      out.push_back({c, cost, cost <= budget});
    }
  return out;
}

std::vector<MeChoice> enumerate_me_candidates(const BlockGrid& grid) {
  std::vector<MeChoice> out;
  MeChoice cur;
  cur.rows_per_col.assign(static_cast<std::size_t>(grid.T()), 0);
  while (true) {
    out.push_back(cur);
    int t = 0;
    while (t < grid.T() && cur.rows_per_col[static_cast<std::size_t>(t)] == grid.S()) {
      cur.rows_per_col[static_cast<std::size_t>(t)] = 0;
      ++t;
    }
    if (t == grid.T()) break;
    ++cur.rows_per_col[static_cast<std::size_t>(t)];
  }
  return out;
}

Mes se_corner_mes(const BlockGrid& grid, const SeChoice& choice) {
  Mes mes;
  if (choice.is_sentinel()) return mes;
  const std::int64_t covered = grid.row_cum(choice.s);
  mes.entries.push_back({covered, grid.col_cum(choice.t)});
  if (covered < grid.vocab()) mes.entries.push_back({grid.vocab() - covered, 0});
  return mes;
}

std::vector<Mes> manual_se_baselines(const BlockGrid& grid, std::int64_t budget) {
  std::vector<Mes> out;
  for (int t = 1; t <= grid.T(); ++t) {
    const std::int64_t e = grid.col_cum(t);
    const std::int64_t v = std::min(grid.vocab(), budget / e);
    if (v < 1) continue;
    Mes mes;
    mes.entries.push_back({v, e});
    if (v < grid.vocab()) mes.entries.push_back({grid.vocab() - v, 0});
    if (std::find(out.begin(), out.end(), mes) == out.end()) out.push_back(std::move(mes));
  }
  return out;
}

SweepResult brute_force_best(const RunConfig& cfg, const Dataset& ds) {
  if (ds.features.size() != 1)
    throw ContractViolation("brute_force_best: single-feature sweeps only (candidate product "
                            "would explode)");
  GridSpec spec = cfg.grid;
  const BlockGrid grid = default_grid(ds.features[0].name, ds.features[0].vocab, spec);

  SweepResult sweep;
  const auto candidates = enumerate_se_candidates(grid, cfg.budget);
  std::int64_t feasible_count = 0;
  for (const auto& c : candidates) feasible_count += c.feasible ? 1 : 0;
  if (feasible_count > cfg.oracle.guard)
    throw ContractViolation("oracle sweep refused: " + std::to_string(feasible_count) +
                            " feasible candidates exceed the guard of " +
                            std::to_string(cfg.oracle.guard));

  const int main_steps_per_search =
      cfg.train.warmup + ((cfg.train.steps - cfg.train.warmup) * cfg.train.alternation_ratio) /
                             (cfg.train.alternation_ratio + 1);
  sweep.steps_per_candidate = cfg.oracle.steps > 0 ? cfg.oracle.steps : main_steps_per_search;
  const std::uint64_t seed = mix_seed(cfg.seed, kFixedArchTrainSalt);

  for (const auto& cand : candidates) {
    CandidateReport report;
    report.choice = cand.choice;
    report.cost = cand.cost;
    report.feasible = cand.feasible;
    report.train_seed = seed;
    if (cand.feasible) {
      const Mes mes = se_corner_mes(grid, cand.choice);
      const auto fixed =
          train_fixed_architecture(cfg, ds, {mes}, sweep.steps_per_candidate, seed);
      report.val_objective = fixed.val_objective;
      report.test_metrics = fixed.test_metrics;
    }
    sweep.reports.push_back(std::move(report));
  }

  for (std::size_t i = 0; i < sweep.reports.size(); ++i) {
    const auto& r = sweep.reports[i];
    if (!r.feasible || !r.val_objective) continue;
    if (sweep.best_index < 0) {
      sweep.best_index = static_cast<int>(i);
      continue;
    }
    const auto& best = sweep.reports[static_cast<std::size_t>(sweep.best_index)];
    if (*r.val_objective > *best.val_objective ||
        (*r.val_objective == *best.val_objective && r.cost < best.cost))
      sweep.best_index = static_cast<int>(i);
  }
  return sweep;
}

nlohmann::ordered_json sweep_to_json(const SweepResult& sweep, const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["budget"] = cfg.budget;
  j["steps_per_candidate"] = sweep.steps_per_candidate;
  j["best_index"] = sweep.best_index;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : sweep.reports) {
    nlohmann::ordered_json row;
    row["choice"] = {r.choice.s, r.choice.t};
    row["cost"] = r.cost;
    row["feasible"] = r.feasible;
    if (r.val_objective) {
      row["val_objective"] = *r.val_objective;
      row["test_metrics"] = r.test_metrics;
    } else {
      row["val_objective"] = nullptr;
    }
    row["train_seed"] = r.train_seed;
    rows.push_back(std::move(row));
  }
  j["candidates"] = std::move(rows);
  return j;
}

}  // namespace nis
