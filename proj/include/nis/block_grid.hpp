#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nis/graph.hpp"
#include "nis/mes.hpp"
#include "nis/param_store.hpp"
#include "nis/rng.hpp"
#include "nis/tensor.hpp"

namespace nis {

// SE action: a grid corner (s, t), both 1-based, or the sentinel (0, 0) which
// removes the feature (zero embedding, zero cost).
struct SeChoice {
  int s = 0;
  int t = 0;
  bool is_sentinel() const { return s == 0 && t == 0; }
  bool operator==(const SeChoice&) const = default;
};

// ME action: one row count per column, each in {0, 1, .., S}; 0 drops the
// column entirely.
struct MeChoice {
  std::vector<int> rows_per_col;
  bool operator==(const MeChoice&) const = default;
};

// Records every (row-chunk, column, local-row) read a lookup performs; the
// cost-exactness and OOV-safety checks count and bound these.
struct BlockAccessLog {
  struct Entry {
    int s, t;
    std::int64_t row;
  };
  std::vector<Entry> reads;
};

// The embedding-block decomposition of one feature's v x d embedding matrix:
// an S x T grid of blocks E[s][t] of shape row_splits[s] x col_splits[t],
// plus one projection per column mapping col_splits[t] -> d. Block weights
// live in a ParamStore under "<name>.block.<s>.<t>" / "<name>.proj.<t>".
class BlockGrid {
 public:
  BlockGrid(std::string name, std::vector<std::int64_t> row_splits,
            std::vector<std::int64_t> col_splits);

  const std::string& name() const { return name_; }
  int S() const { return static_cast<int>(row_splits_.size()); }
  int T() const { return static_cast<int>(col_splits_.size()); }
  std::int64_t vocab() const { return row_cum_.back(); }
  std::int64_t dim() const { return col_cum_.back(); }
  const std::vector<std::int64_t>& row_splits() const { return row_splits_; }
  const std::vector<std::int64_t>& col_splits() const { return col_splits_; }
  // Cumulative sizes; index 0 holds 0, index s holds the first s chunks' total.
  std::int64_t row_cum(int s) const { return row_cum_[static_cast<std::size_t>(s)]; }
  std::int64_t col_cum(int t) const { return col_cum_[static_cast<std::size_t>(t)]; }

  // True when every row chunk is larger than d, the regime the block grid is
  // meant for. Construction does not require it; tiny test grids may violate it.
  bool well_proportioned() const;

  std::string block_param(int s, int t) const;  // s, t 1-based
  std::string proj_param(int t) const;
  std::vector<std::string> param_names() const;

  // Creates and initializes all blocks and projections in `store`.
  void init_params(ParamStore& store, Rng& rng) const;

  // Row chunk (1-based) containing vocab id k.
  int chunk_of(std::int64_t k) const;

  // Single-id lookups; these mirror the two closed-form definitions and are
  // the reference semantics for the fused batched op below.
  Tensor se_lookup(const ParamStore& store, const SeChoice& choice, std::int64_t k,
                   BlockAccessLog* log = nullptr) const;
  Tensor me_lookup(const ParamStore& store, const MeChoice& choice, std::int64_t k,
                   BlockAccessLog* log = nullptr) const;

  std::int64_t se_cost(const SeChoice& choice) const;
  std::int64_t me_cost(const MeChoice& choice) const;

  // Groups row chunks by their selected total dimension. Items covered by no
  // column are reported as an explicit trailing dim-0 range.
  Mes choice_to_mes(const MeChoice& choice) const;

  // The ME choice equivalent to an SE corner: columns 1..t cover s chunks.
  MeChoice se_as_me(const SeChoice& choice) const;

  void check_se(const SeChoice& choice) const;
  void check_me(const MeChoice& choice) const;

 private:
  std::string name_;
  std::vector<std::int64_t> row_splits_;
  std::vector<std::int64_t> col_splits_;
  std::vector<std::int64_t> row_cum_;
  std::vector<std::int64_t> col_cum_;
};

// The grid construction heuristic: row fractions [0.1, 0.2, 0.2, 0.2, 0.3]
// of v (floor, last chunk absorbs the remainder), d = 32*ceil(v^0.35/32),
// columns four equal chunks of d/4. Explicit splits override the heuristic.
struct GridSpec {
  std::optional<std::vector<std::int64_t>> row_splits;
  std::optional<std::vector<std::int64_t>> col_splits;
};

BlockGrid default_grid(const std::string& name, std::int64_t vocab, const GridSpec& overrides = {});

// Fused autodiff op: batched bag embedding through the grid under an ME-form
// coverage vector (use se_as_me for SE corners). Each output row is the sum
// (or mean, if `average` is set) of its bag's embeddings; out-of-coverage ids
// contribute zero. Gradients flow only into selected blocks and projections.
NodeId grid_embed(Graph& g, const BlockGrid& grid, const MeChoice& choice,
                  const std::vector<std::vector<std::int64_t>>& bags, bool average = false);

}  // namespace nis
