#include <cmath>
#include <doctest/doctest.h>

#include "nis/block_grid.hpp"
#include "nis/errors.hpp"
#include "nis/graph.hpp"
#include "nis/rng.hpp"

using namespace nis;

namespace {

// Small random grid with every id reachable quickly; rows need not exceed d
// here (tiny test grids are exempt from the production proportion rule).
BlockGrid random_grid(Rng& rng, ParamStore& store, std::int64_t max_chunk = 12) {
  const int S = 2 + static_cast<int>(rng.uniform_int(3));
  const int T = 2 + static_cast<int>(rng.uniform_int(3));
  std::vector<std::int64_t> rows, cols;
  for (int s = 0; s < S; ++s) rows.push_back(1 + rng.uniform_int(max_chunk));
  for (int t = 0; t < T; ++t) cols.push_back(1 + rng.uniform_int(4));
  BlockGrid grid("g", rows, cols);
  Rng init = rng.stream(99);
  grid.init_params(store, init);
  return grid;
}

MeChoice random_choice(const BlockGrid& grid, Rng& rng) {
  MeChoice c;
  for (int t = 0; t < grid.T(); ++t)
    c.rows_per_col.push_back(static_cast<int>(rng.uniform_int(grid.S() + 1)));
  return c;
}

}  // namespace

TEST_CASE("grid heuristic: v=1000") {
  const BlockGrid g = default_grid("f", 1000);
  CHECK(g.dim() == 32);
  CHECK(g.row_splits() == std::vector<std::int64_t>{100, 200, 200, 200, 300});
  CHECK(g.col_splits() == std::vector<std::int64_t>{8, 8, 8, 8});
  CHECK(g.well_proportioned());
}

TEST_CASE("grid heuristic: v=100000 gives d=64") {
  const BlockGrid g = default_grid("f", 100000);
  CHECK(g.dim() == 64);
  CHECK(g.col_splits() == std::vector<std::int64_t>{16, 16, 16, 16});
}

TEST_CASE("grid heuristic: v=10M rows and the d formula") {
  const BlockGrid g = default_grid("f", 10'000'000);
  CHECK(g.row_splits() ==
        std::vector<std::int64_t>{1'000'000, 2'000'000, 2'000'000, 2'000'000, 3'000'000});
  // 10M^0.35 = 281.8..., so 32*ceil(281.8/32) = 288.
  CHECK(g.dim() == 288);
}

TEST_CASE("grid heuristic rejects vocabularies below 10") {
  CHECK_THROWS_AS(default_grid("f", 9), ConfigError);
  CHECK_NOTHROW(default_grid("f", 10));
}

TEST_CASE("explicit splits must be consistent") {
  CHECK_THROWS_AS(BlockGrid("f", {10}, {2, 2}), ConfigError);
  CHECK_THROWS_AS(BlockGrid("f", {10, 10}, {2}), ConfigError);
  CHECK_THROWS_AS(BlockGrid("f", {10, 0}, {2, 2}), ConfigError);
}

TEST_CASE("se_lookup against a dense reference on every id") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    ParamStore store;
    const BlockGrid grid = random_grid(rng, store);
    const std::int64_t v = grid.vocab(), d = grid.dim();

    // Independent route: materialize the full v x d matrix and the stacked
    // d x d projection, then multiply prefixes.
    Tensor full({v, d});
    for (int s = 1; s <= grid.S(); ++s)
      for (int t = 1; t <= grid.T(); ++t) {
        const Tensor& block = store.get(grid.block_param(s, t));
        for (std::int64_t r = 0; r < block.rows(); ++r)
          for (std::int64_t c = 0; c < block.cols(); ++c)
            full.at(grid.row_cum(s - 1) + r, grid.col_cum(t - 1) + c) = block.at(r, c);
      }
    Tensor stacked({d, d});
    for (int t = 1; t <= grid.T(); ++t) {
      const Tensor& p = store.get(grid.proj_param(t));
      for (std::int64_t r = 0; r < p.rows(); ++r)
        for (std::int64_t c = 0; c < p.cols(); ++c) stacked.at(grid.col_cum(t - 1) + r, c) = p.at(r, c);
    }

    const SeChoice choice{1 + static_cast<int>(rng.uniform_int(grid.S())),
                          1 + static_cast<int>(rng.uniform_int(grid.T()))};
    for (std::int64_t k = 0; k < v; ++k) {
      const Tensor e = grid.se_lookup(store, choice, k);
      std::vector<double> ref(static_cast<std::size_t>(d), 0.0);
      if (k < grid.row_cum(choice.s)) {
        const std::int64_t depth = grid.col_cum(choice.t);
        for (std::int64_t i = 0; i < depth; ++i)
          for (std::int64_t j = 0; j < d; ++j)
            ref[static_cast<std::size_t>(j)] += full.at(k, i) * stacked.at(i, j);
      }
      for (std::int64_t j = 0; j < d; ++j)
        CHECK(e.v[static_cast<std::size_t>(j)] ==
              doctest::Approx(ref[static_cast<std::size_t>(j)]).epsilon(1e-10));
    }
  }
}

TEST_CASE("sentinel choice embeds everything to zero") {
  ParamStore store;
  Rng rng(23);
  const BlockGrid grid = random_grid(rng, store);
  for (std::int64_t k = 0; k < grid.vocab(); ++k) {
    const Tensor e = grid.se_lookup(store, SeChoice{0, 0}, k);
    for (double x : e.v) CHECK(x == 0.0);
  }
}

TEST_CASE("out-of-vocabulary boundary gives the zero vector") {
  ParamStore store;
  Rng rng(25);
  BlockGrid grid("g", {4, 5, 6}, {2, 3});
  Rng init = rng.stream(1);
  grid.init_params(store, init);
  const Tensor e = grid.se_lookup(store, SeChoice{1, 1}, grid.row_cum(1));
  for (double x : e.v) CHECK(x == 0.0);
  CHECK_THROWS_AS(grid.se_lookup(store, SeChoice{1, 1}, grid.vocab()), ContractViolation);
  CHECK_THROWS_AS(grid.se_lookup(store, SeChoice{1, 1}, -1), ContractViolation);
}

TEST_CASE("me_lookup with all-zero coverage is the zero vector") {
  ParamStore store;
  Rng rng(27);
  const BlockGrid grid = random_grid(rng, store);
  MeChoice zero;
  zero.rows_per_col.assign(static_cast<std::size_t>(grid.T()), 0);
  for (std::int64_t k = 0; k < grid.vocab(); ++k) {
    const Tensor e = grid.me_lookup(store, zero, k);
    for (double x : e.v) CHECK(x == 0.0);
  }
}

TEST_CASE("column contribution counts follow the coverage pattern") {
  ParamStore store;
  Rng rng(29);
  BlockGrid grid("g", {3, 4, 5, 6, 7}, {2, 2, 2, 2});
  Rng init = rng.stream(1);
  grid.init_params(store, init);
  const MeChoice choice{{2, 5, 0, 2}};
  BlockAccessLog log_head, log_tail;
  grid.me_lookup(store, choice, 0, &log_head);   // first chunk: columns 1, 2, 4
  grid.me_lookup(store, choice, grid.vocab() - 1, &log_tail);  // last chunk: column 2 only
  CHECK(log_head.reads.size() == 3);
  CHECK(log_tail.reads.size() == 1);
  CHECK(log_tail.reads[0].t == 2);
}

TEST_CASE("rectangular ME coverage equals the SE lookup exactly") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    ParamStore store;
    const BlockGrid grid = random_grid(rng, store);
    const SeChoice se{1 + static_cast<int>(rng.uniform_int(grid.S())),
                      1 + static_cast<int>(rng.uniform_int(grid.T()))};
    const MeChoice me = grid.se_as_me(se);
    for (std::int64_t k = 0; k < grid.vocab(); ++k)
      CHECK(grid.se_lookup(store, se, k).v == grid.me_lookup(store, me, k).v);
  }
}

TEST_CASE("se_cost: sentinel, v=1000 corner, full 10M grid") {
  const BlockGrid g1000 = default_grid("f", 1000);
  CHECK(g1000.se_cost(SeChoice{0, 0}) == 0);
  CHECK(g1000.se_cost(SeChoice{3, 2}) == 8000);
  // The Fig. 2 layout: explicit 10M x 256 grid.
  GridSpec spec;
  spec.row_splits = std::vector<std::int64_t>{1'000'000, 2'000'000, 2'000'000, 2'000'000, 3'000'000};
  spec.col_splits = std::vector<std::int64_t>{64, 64, 64, 64};
  const BlockGrid fig2 = default_grid("f", 10'000'000, spec);
  CHECK(fig2.se_cost(SeChoice{5, 4}) == 2'560'000'000LL);
}

TEST_CASE("me_cost: zeros, hand case, Fig. 2c") {
  const BlockGrid g1000 = default_grid("f", 1000);
  CHECK(g1000.me_cost(MeChoice{{0, 0, 0, 0}}) == 0);
  // 8*1000 + 8*300 + 0 + 8*100
  CHECK(g1000.me_cost(MeChoice{{5, 2, 0, 1}}) == 11200);
  GridSpec spec;
  spec.row_splits = std::vector<std::int64_t>{1'000'000, 2'000'000, 2'000'000, 2'000'000, 3'000'000};
  spec.col_splits = std::vector<std::int64_t>{64, 64, 64, 64};
  const BlockGrid fig2 = default_grid("f", 10'000'000, spec);
  CHECK(fig2.me_cost(MeChoice{{2, 5, 0, 2}}) == 1'024'000'000LL);
}

TEST_CASE("choice_to_mes groups chunks by selected dimension") {
  const BlockGrid g1000 = default_grid("f", 1000);
  const Mes m = g1000.choice_to_mes(MeChoice{{2, 5, 0, 2}});
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0] == MesEntry{300, 24});
  CHECK(m.entries[1] == MesEntry{700, 8});

  GridSpec spec;
  spec.row_splits = std::vector<std::int64_t>{1'000'000, 2'000'000, 2'000'000, 2'000'000, 3'000'000};
  spec.col_splits = std::vector<std::int64_t>{64, 64, 64, 64};
  const BlockGrid fig2 = default_grid("f", 10'000'000, spec);
  const Mes m2 = fig2.choice_to_mes(MeChoice{{2, 5, 0, 2}});
  REQUIRE(m2.entries.size() == 2);
  CHECK(m2.entries[0] == MesEntry{3'000'000, 192});
  CHECK(m2.entries[1] == MesEntry{7'000'000, 64});

  const Mes uniform = g1000.choice_to_mes(MeChoice{{5, 5, 5, 5}});
  REQUIRE(uniform.entries.size() == 1);
  CHECK(uniform.entries[0] == MesEntry{1000, 32});

  const Mes sparse = g1000.choice_to_mes(MeChoice{{1, 0, 0, 0}});
  REQUIRE(sparse.entries.size() == 2);
  CHECK(sparse.entries[0] == MesEntry{100, 8});
  CHECK(sparse.entries[1] == MesEntry{900, 0});
}

TEST_CASE("mes dimensions are non-increasing for random choices") {
  Rng rng(33);
  for (int trial = 0; trial < 200; ++trial) {
    ParamStore store;
    const BlockGrid grid = random_grid(rng, store);
    const Mes m = grid.choice_to_mes(random_choice(grid, rng));
    for (std::size_t i = 1; i < m.entries.size(); ++i)
      CHECK(m.entries[i].dim < m.entries[i - 1].dim);
    CHECK(m.total_vocab() == grid.vocab());
  }
}

TEST_CASE("cost equals the number of readable block scalars") {
  Rng rng(35);
  for (int trial = 0; trial < 50; ++trial) {
    ParamStore store;
    const BlockGrid grid = random_grid(rng, store, 8);
    const MeChoice choice = random_choice(grid, rng);
    BlockAccessLog log;
    for (std::int64_t k = 0; k < grid.vocab(); ++k) grid.me_lookup(store, choice, k, &log);
    std::int64_t scalars = 0;
    for (const auto& read : log.reads)
      scalars += grid.col_splits()[static_cast<std::size_t>(read.t - 1)];
    CHECK(scalars == grid.me_cost(choice));

    const SeChoice se{1 + static_cast<int>(rng.uniform_int(grid.S())),
                      1 + static_cast<int>(rng.uniform_int(grid.T()))};
    BlockAccessLog selog;
    for (std::int64_t k = 0; k < grid.vocab(); ++k) grid.se_lookup(store, se, k, &selog);
    std::int64_t se_scalars = 0;
    for (const auto& read : selog.reads)
      se_scalars += grid.col_splits()[static_cast<std::size_t>(read.t - 1)];
    CHECK(se_scalars == grid.se_cost(se));
  }
}

TEST_CASE("lookups never read outside the selected coverage") {
  Rng rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    ParamStore store;
    const BlockGrid grid = random_grid(rng, store, 8);
    const MeChoice choice = random_choice(grid, rng);
    BlockAccessLog log;
    for (std::int64_t k = 0; k < grid.vocab(); ++k) grid.me_lookup(store, choice, k, &log);
    for (const auto& read : log.reads) {
      CHECK(read.s <= choice.rows_per_col[static_cast<std::size_t>(read.t - 1)]);
      CHECK(read.row < grid.row_splits()[static_cast<std::size_t>(read.s - 1)]);
      CHECK(read.row >= 0);
    }
  }
}

TEST_CASE("grid_embed matches per-id lookups and differentiates") {
  Rng rng(39);
  ParamStore store;
  BlockGrid grid("g", {4, 6, 5}, {2, 3});
  Rng init = rng.stream(1);
  grid.init_params(store, init);
  const MeChoice choice{{2, 3}};
  const std::vector<std::vector<std::int64_t>> bags{{0, 5}, {}, {14, 14, 2}};

  Graph g(&store);
  const NodeId node = grid_embed(g, grid, choice, bags);
  const Tensor& out = g.value(node);
  for (std::size_t r = 0; r < bags.size(); ++r) {
    std::vector<double> ref(static_cast<std::size_t>(grid.dim()), 0.0);
    for (const auto k : bags[r]) {
      const Tensor e = grid.me_lookup(store, choice, k);
      for (std::size_t j = 0; j < ref.size(); ++j) ref[j] += e.v[j];
    }
    for (std::size_t j = 0; j < ref.size(); ++j)
      CHECK(out.at(static_cast<std::int64_t>(r), static_cast<std::int64_t>(j)) ==
            doctest::Approx(ref[j]).epsilon(1e-12));
  }

  auto build = [&](Graph& gg) { return gg.sum(grid_embed(gg, grid, choice, bags)); };
  CHECK(check_gradients(build, store, 1e-5) < 1e-6);
}

TEST_CASE("grid_embed average divides by bag size") {
  Rng rng(41);
  ParamStore store;
  BlockGrid grid("g", {4, 4}, {2, 2});
  Rng init = rng.stream(1);
  grid.init_params(store, init);
  const MeChoice choice{{2, 1}};
  const std::vector<std::vector<std::int64_t>> bags{{1, 3, 5, 7}};
  Graph g(&store);
  const Tensor& sum = g.value(grid_embed(g, grid, choice, bags, false));
  const Tensor& avg = g.value(grid_embed(g, grid, choice, bags, true));
  for (std::size_t j = 0; j < sum.v.size(); ++j)
    CHECK(avg.v[j] == doctest::Approx(sum.v[j] / 4.0).epsilon(1e-12));
}

TEST_CASE("grid_embed leaves unselected blocks without gradient") {
  Rng rng(43);
  ParamStore store;
  BlockGrid grid("g", {4, 4, 4}, {2, 2});
  Rng init = rng.stream(1);
  grid.init_params(store, init);
  const MeChoice choice{{1, 0}};  // only block (1,1) and projection 1 active
  Graph g(&store);
  auto [lv, grads] =
      forward_backward(g, g.sum(grid_embed(g, grid, choice, {{0, 1}, {9}})));
  (void)lv;
  auto zero = [&](const std::string& name) {
    for (double x : grads.at(name).v)
      if (x != 0.0) return false;
    return true;
  };
  CHECK_FALSE(zero(grid.block_param(1, 1)));
  CHECK(zero(grid.block_param(2, 1)));  // id 9 is out of coverage
  CHECK(zero(grid.block_param(1, 2)));
  CHECK(zero(grid.proj_param(2)));
  CHECK_FALSE(zero(grid.proj_param(1)));
}
