#include <doctest/doctest.h>

#include "nis/block_grid.hpp"
#include "nis/errors.hpp"
#include "nis/me_layer.hpp"
#include "nis/rng.hpp"

using namespace nis;

TEST_CASE("single-bucket layer is an SE plus a square projection") {
  ParamStore store;
  Rng rng(1);
  const MeLayer layer = build_me(store, "f", Mes{{{100, 8}}}, rng);
  CHECK(layer.buckets() == 1);
  CHECK(layer.out_dim() == 8);
  CHECK(store.get("f.bucket.1").shape == std::vector<std::int64_t>{100, 8});
  CHECK(store.get("f.proj.1").shape == std::vector<std::int64_t>{8, 8});
  // embed equals the row-times-projection product
  const Tensor& e = store.get("f.bucket.1");
  const Tensor& p = store.get("f.proj.1");
  const Tensor out = layer.embed(store, 42);
  for (int j = 0; j < 8; ++j) {
    double ref = 0;
    for (int i = 0; i < 8; ++i) ref += e.at(42, i) * p.at(i, j);
    CHECK(out.v[static_cast<std::size_t>(j)] == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("paper-scale spec: shapes planned without allocation") {
  const MeLayer layer("f", Mes{{{3'000'000, 192}, {7'000'000, 64}}});
  CHECK(layer.buckets() == 2);
  CHECK(layer.out_dim() == 192);
  CHECK(layer.total_vocab() == 10'000'000);
  CHECK(me_param_count(layer.mes()) == 1'024'000'000LL);
}

TEST_CASE("bucket parameter counts") {
  CHECK(me_param_count(Mes{{{10, 4}, {10, 2}}}) == 60);
  CHECK(me_param_count(Mes{{{123, 7}}}) == 861);
  CHECK(me_param_count(Mes{{{1, 1}}}) == 1);
}

TEST_CASE("hand-computed second-bucket embedding") {
  ParamStore store;
  Rng rng(2);
  const MeLayer layer = build_me(store, "f", Mes{{{2, 2}, {2, 1}}}, rng);
  store.get("f.bucket.2").v = {1, 2};
  store.get("f.proj.2").v = {3, 4};
  const Tensor out = layer.embed(store, 3);  // second bucket, row 1
  REQUIRE(out.numel() == 2);
  CHECK(out.v[0] == doctest::Approx(6));
  CHECK(out.v[1] == doctest::Approx(8));
}

TEST_CASE("first id of the second bucket never touches bucket one") {
  ParamStore store;
  Rng rng(3);
  const MeLayer layer = build_me(store, "f", Mes{{{5, 3}, {4, 2}}}, rng);
  CHECK(layer.bucket_of(0) == 1);
  CHECK(layer.bucket_of(4) == 1);
  CHECK(layer.bucket_of(5) == 2);
  for (double& x : store.get("f.bucket.1").v) x = std::nan("");
  // embedding id 5 must not read bucket 1 (a read would trip the NaN)
  const Tensor out = layer.embed(store, 5);
  CHECK(out.all_finite());
}

TEST_CASE("k=0 uses the first bucket first row") {
  ParamStore store;
  Rng rng(4);
  const MeLayer layer = build_me(store, "f", Mes{{{3, 2}, {3, 1}}}, rng);
  const Tensor& e = store.get("f.bucket.1");
  const Tensor& p = store.get("f.proj.1");
  const Tensor out = layer.embed(store, 0);
  for (int j = 0; j < 2; ++j)
    CHECK(out.v[static_cast<std::size_t>(j)] ==
          doctest::Approx(e.at(0, 0) * p.at(0, j) + e.at(0, 1) * p.at(1, j)));
}

TEST_CASE("bow equals the naive per-id sum") {
  ParamStore store;
  Rng rng(5);
  const MeLayer layer = build_me(store, "f", Mes{{{6, 4}, {8, 2}}}, rng);
  Rng bagr(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::int64_t> bag;
    const int n = static_cast<int>(bagr.uniform_int(6));
    for (int i = 0; i < n; ++i) bag.push_back(bagr.uniform_int(14));
    const Tensor fast = layer.bow(store, bag);
    Tensor ref({layer.out_dim()});
    for (const auto k : bag) {
      const Tensor e = layer.embed(store, k);
      for (std::size_t j = 0; j < ref.v.size(); ++j) ref.v[j] += e.v[j];
    }
    for (std::size_t j = 0; j < ref.v.size(); ++j)
      CHECK(fast.v[j] == doctest::Approx(ref.v[j]).epsilon(1e-10));
  }
}

TEST_CASE("bow of a singleton equals embed; empty bag is zero") {
  ParamStore store;
  Rng rng(7);
  const MeLayer layer = build_me(store, "f", Mes{{{4, 3}, {4, 2}}}, rng);
  CHECK(layer.bow(store, {6}).v == layer.embed(store, 6).v);
  for (double x : layer.bow(store, {}).v) CHECK(x == 0.0);
}

TEST_CASE("bow averaging divides by the bag size") {
  ParamStore store;
  Rng rng(8);
  const MeLayer layer = build_me(store, "f", Mes{{{4, 2}, {4, 1}}}, rng);
  const std::vector<std::int64_t> bag{0, 3, 5};
  const Tensor sum = layer.bow(store, bag, false);
  const Tensor avg = layer.bow(store, bag, true);
  for (std::size_t j = 0; j < sum.v.size(); ++j)
    CHECK(avg.v[j] == doctest::Approx(sum.v[j] / 3.0).epsilon(1e-12));
}

TEST_CASE("invalid specs are rejected") {
  const Mes increasing{{{2, 2}, {2, 3}}};
  const Mes empty_bucket{{{0, 2}}};
  const Mes nothing{};
  const Mes zero_only{{{5, 0}}};
  const Mes equal_ok{{{2, 2}, {2, 2}, {3, 1}}};
  const Mes zero_tail_ok{{{2, 2}, {3, 0}}};
  CHECK_THROWS_AS(increasing.validate(), ConfigError);
  CHECK_THROWS_AS(empty_bucket.validate(), ConfigError);
  CHECK_THROWS_AS(nothing.validate(), ConfigError);
  CHECK_THROWS_AS(zero_only.validate(), ConfigError);
  CHECK_NOTHROW(equal_ok.validate());
  CHECK_NOTHROW(zero_tail_ok.validate());
}

TEST_CASE("trailing zero-dimension range embeds to zero") {
  ParamStore store;
  Rng rng(9);
  const MeLayer layer = build_me(store, "f", Mes{{{4, 2}, {6, 0}}}, rng);
  CHECK(layer.total_vocab() == 10);
  CHECK(layer.bucket_of(7) == 0);
  for (double x : layer.embed(store, 7).v) CHECK(x == 0.0);
  CHECK_THROWS_AS(layer.embed(store, 10), ContractViolation);
}

TEST_CASE("materialized layer reproduces grid me_lookup on every id") {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    ParamStore grid_store;
    const int S = 2 + static_cast<int>(rng.uniform_int(3));
    const int T = 2 + static_cast<int>(rng.uniform_int(3));
    std::vector<std::int64_t> rows, cols;
    for (int s = 0; s < S; ++s) rows.push_back(2 + rng.uniform_int(6));
    for (int t = 0; t < T; ++t) cols.push_back(1 + rng.uniform_int(3));
    BlockGrid grid("g", rows, cols);
    Rng init = rng.stream(static_cast<std::uint64_t>(trial));
    grid.init_params(grid_store, init);
    MeChoice choice;
    for (int t = 0; t < T; ++t)
      choice.rows_per_col.push_back(static_cast<int>(rng.uniform_int(S + 1)));

    ParamStore me_store;
    const MeLayer layer = materialize_from_grid(grid, choice, grid_store, me_store, "m");
    CHECK(layer.out_dim() == grid.dim());
    for (std::int64_t k = 0; k < grid.vocab(); ++k) {
      const Tensor a = grid.me_lookup(grid_store, choice, k);
      const Tensor b = layer.embed(me_store, k);
      REQUIRE(a.numel() == b.numel());
      for (std::size_t j = 0; j < a.v.size(); ++j)
        CHECK(a.v[j] == doctest::Approx(b.v[j]).epsilon(1e-10));
    }
  }
}

TEST_CASE("me_bag_embed differentiates and touches only used buckets") {
  ParamStore store;
  Rng rng(11);
  const MeLayer layer = build_me(store, "f", Mes{{{5, 3}, {5, 2}}}, rng);
  const std::vector<std::vector<std::int64_t>> bags{{0, 1}, {2}};
  auto build = [&](Graph& g) { return g.sum(me_bag_embed(g, layer, bags)); };
  CHECK(check_gradients(build, store, 1e-5) < 1e-6);

  Graph g(&store);
  auto [lv, grads] = forward_backward(g, build(g));
  (void)lv;
  // Second bucket untouched by ids {0,1,2}.
  for (double x : grads.at("f.bucket.2").v) CHECK(x == 0.0);
  for (double x : grads.at("f.proj.2").v) CHECK(x == 0.0);
  // Bucket-one rows 0..2 carry gradient, rows 3..4 do not.
  const Tensor& gb = grads.at("f.bucket.1");
  bool top_nonzero = false;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) top_nonzero = top_nonzero || gb.at(r, c) != 0.0;
  CHECK(top_nonzero);
  for (int r = 3; r < 5; ++r)
    for (int c = 0; c < 3; ++c) CHECK(gb.at(r, c) == 0.0);
}

TEST_CASE("me_bag_embed values match bow") {
  ParamStore store;
  Rng rng(12);
  const MeLayer layer = build_me(store, "f", Mes{{{4, 3}, {6, 1}}}, rng);
  const std::vector<std::vector<std::int64_t>> bags{{1, 8, 3}, {}, {9}};
  Graph g(&store);
  const Tensor& out = g.value(me_bag_embed(g, layer, bags));
  for (std::size_t r = 0; r < bags.size(); ++r) {
    const Tensor ref = layer.bow(store, bags[r]);
    for (std::size_t j = 0; j < ref.v.size(); ++j)
      CHECK(out.at(static_cast<std::int64_t>(r), static_cast<std::int64_t>(j)) ==
            doctest::Approx(ref.v[j]).epsilon(1e-12));
  }
}
