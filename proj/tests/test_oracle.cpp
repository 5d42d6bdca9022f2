#include <doctest/doctest.h>

#include "nis/errors.hpp"
#include "nis/oracle.hpp"
#include "nis/runner.hpp"
#include "test_util.hpp"

using namespace nis;

TEST_CASE("enumeration covers all corners plus the sentinel") {
  const BlockGrid grid = default_grid("f", 1000);
  const auto cands = enumerate_se_candidates(grid, 8000);
  CHECK(cands.size() == 21);
  CHECK(cands[0].choice.is_sentinel());
  CHECK(cands[0].feasible);

  int feasible = 0;
  bool has_32 = false, has_54 = false;
  for (const auto& c : cands) {
    if (c.feasible) ++feasible;
    CHECK(c.feasible == (c.cost <= 8000));
    if (c.choice == SeChoice{3, 2}) {
      has_32 = true;
      CHECK(c.feasible);
      CHECK(c.cost == 8000);
    }
    if (c.choice == SeChoice{5, 4}) {
      has_54 = true;
      CHECK_FALSE(c.feasible);
    }
  }
  CHECK(has_32);
  CHECK(has_54);
  CHECK(feasible == 12);
}

TEST_CASE("budget zero leaves only the sentinel feasible") {
  const BlockGrid grid = default_grid("f", 1000);
  const auto cands = enumerate_se_candidates(grid, 0);
  int feasible = 0;
  for (const auto& c : cands) feasible += c.feasible ? 1 : 0;
  CHECK(feasible == 1);
  CHECK(cands[0].choice.is_sentinel());
}

TEST_CASE("me enumeration has (S+1)^T entries") {
  const BlockGrid grid("f", {5, 5}, {2, 2});
  const auto cands = enumerate_me_candidates(grid);
  CHECK(cands.size() == 9);
  // distinct entries
  for (std::size_t i = 0; i < cands.size(); ++i)
    for (std::size_t j = i + 1; j < cands.size(); ++j) CHECK(!(cands[i] == cands[j]));
}

TEST_CASE("manual baselines spend the budget at each depth") {
  const BlockGrid grid = default_grid("f", 1000);
  const auto baselines = manual_se_baselines(grid, 8000);
  REQUIRE(baselines.size() == 4);
  CHECK(baselines[0].entries[0] == MesEntry{1000, 8});
  CHECK(baselines[1].entries[0] == MesEntry{500, 16});
  CHECK(baselines[2].entries[0] == MesEntry{333, 24});
  CHECK(baselines[3].entries[0] == MesEntry{250, 32});
  for (const auto& mes : baselines) {
    CHECK(mes.param_count() <= 8000);
    CHECK(mes.total_vocab() == 1000);
  }
}

TEST_CASE("guard refuses oversized sweeps") {
  RunConfig cfg = test::tiny_retrieval_config();
  cfg.oracle.guard = 5;
  const Dataset ds = dataset_for(cfg);
  CHECK_THROWS_AS(brute_force_best(cfg, ds), ContractViolation);
}

TEST_CASE("degenerate budget: the sentinel candidate wins by default") {
  RunConfig cfg = test::tiny_retrieval_config();
  cfg.budget = 10;  // every corner costs at least 20
  cfg.reward.budget = 10;
  cfg.oracle.steps = 30;
  const Dataset ds = dataset_for(cfg);
  const SweepResult sweep = brute_force_best(cfg, ds);
  REQUIRE(sweep.best_index >= 0);
  CHECK(sweep.reports[static_cast<std::size_t>(sweep.best_index)].choice.is_sentinel());
  int trained = 0;
  for (const auto& r : sweep.reports) trained += r.val_objective ? 1 : 0;
  CHECK(trained == 1);
}

TEST_CASE("sweep trains feasible candidates deterministically and ranks them") {
  RunConfig cfg = test::tiny_retrieval_config();
  cfg.budget = 400;
  cfg.reward.budget = 400;
  cfg.oracle.steps = 60;
  const Dataset ds = dataset_for(cfg);
  const SweepResult a = brute_force_best(cfg, ds);
  const SweepResult b = brute_force_best(cfg, ds);
  REQUIRE(a.reports.size() == 21);
  REQUIRE(a.best_index >= 0);
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    CHECK(a.reports[i].feasible == b.reports[i].feasible);
    if (a.reports[i].val_objective) {
      CHECK(*a.reports[i].val_objective == *b.reports[i].val_objective);
      CHECK(a.reports[i].test_metrics.at("recall_at_1") ==
            b.reports[i].test_metrics.at("recall_at_1"));
    }
  }
  const auto& best = a.reports[static_cast<std::size_t>(a.best_index)];
  for (const auto& r : a.reports) {
    if (!r.val_objective) continue;
    CHECK(*best.val_objective >= *r.val_objective);
    if (*r.val_objective == *best.val_objective) CHECK(best.cost <= r.cost);
  }
}

TEST_CASE("multi-feature sweeps are refused") {
  RunConfig cfg = test::tiny_retrieval_config();
  cfg.data.retrieval.aux_feature = true;
  cfg.grid = {};  // aux feature has a different vocab
  const Dataset ds = dataset_for(cfg);
  CHECK_THROWS_AS(brute_force_best(cfg, ds), ContractViolation);
}
