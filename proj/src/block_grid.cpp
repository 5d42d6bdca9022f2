#include "nis/block_grid.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "nis/errors.hpp"

namespace nis {

BlockGrid::BlockGrid(std::string name, std::vector<std::int64_t> row_splits,
                     std::vector<std::int64_t> col_splits)
    : name_(std::move(name)), row_splits_(std::move(row_splits)), col_splits_(std::move(col_splits)) {
  if (row_splits_.size() < 2 || col_splits_.size() < 2)
    throw ConfigError("block grid needs S > 1 and T > 1");
  row_cum_.push_back(0);
  for (auto v : row_splits_) {
    if (v < 1) throw ConfigError("block grid row chunk must be >= 1");
    row_cum_.push_back(row_cum_.back() + v);
  }
  col_cum_.push_back(0);
  for (auto d : col_splits_) {
    if (d < 1) throw ConfigError("block grid column chunk must be >= 1");
    col_cum_.push_back(col_cum_.back() + d);
  }
}

bool BlockGrid::well_proportioned() const {
  for (auto v : row_splits_)
    if (v <= dim()) return false;
  return true;
}

std::string BlockGrid::block_param(int s, int t) const {
  return name_ + ".block." + std::to_string(s) + "." + std::to_string(t);
}

std::string BlockGrid::proj_param(int t) const { return name_ + ".proj." + std::to_string(t); }

std::vector<std::string> BlockGrid::param_names() const {
  std::vector<std::string> out;
  for (int s = 1; s <= S(); ++s)
    for (int t = 1; t <= T(); ++t) out.push_back(block_param(s, t));
  for (int t = 1; t <= T(); ++t) out.push_back(proj_param(t));
  return out;
}

void BlockGrid::init_params(ParamStore& store, Rng& rng) const {
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim()));
  for (int s = 1; s <= S(); ++s)
    for (int t = 1; t <= T(); ++t)
      store.create_uniform(block_param(s, t), {row_splits_[s - 1], col_splits_[t - 1]}, scale, rng);
  for (int t = 1; t <= T(); ++t)
    store.create_uniform(proj_param(t), {col_splits_[t - 1], dim()}, scale, rng);
}

int BlockGrid::chunk_of(std::int64_t k) const {
  if (k < 0 || k >= vocab()) throw ContractViolation("vocab id out of range");
  int s = 1;
  while (row_cum_[static_cast<std::size_t>(s)] <= k) ++s;
  return s;
}

void BlockGrid::check_se(const SeChoice& c) const {
  if (c.is_sentinel()) return;
  if (c.s < 1 || c.s > S() || c.t < 1 || c.t > T())
    throw ContractViolation("SE choice outside grid");
}

void BlockGrid::check_me(const MeChoice& c) const {
  if (static_cast<int>(c.rows_per_col.size()) != T())
    throw ContractViolation("ME choice length must equal T");
  for (int s : c.rows_per_col)
    if (s < 0 || s > S()) throw ContractViolation("ME choice row count outside {0..S}");
}

Tensor BlockGrid::se_lookup(const ParamStore& store, const SeChoice& choice, std::int64_t k,
                            BlockAccessLog* log) const {
  check_se(choice);
  if (k < 0 || k >= vocab()) throw ContractViolation("se_lookup: vocab id out of range");
  Tensor out({dim()});
  if (choice.is_sentinel()) return out;
  if (k >= row_cum(choice.s)) return out;  // out of vocabulary under this choice
  const int sk = chunk_of(k);
  const std::int64_t local = k - row_cum(sk - 1);
  for (int t = 1; t <= choice.t; ++t) {
    const Tensor& block = store.get(block_param(sk, t));
    const Tensor& proj = store.get(proj_param(t));
    if (log) log->reads.push_back({sk, t, local});
    const std::int64_t dt = col_splits_[static_cast<std::size_t>(t - 1)];
    const double* row = block.v.data() + local * dt;
    for (std::int64_t i = 0; i < dt; ++i) {
      const double x = row[i];
      const double* prow = proj.v.data() + i * dim();
      for (std::int64_t j = 0; j < dim(); ++j) out.v[static_cast<std::size_t>(j)] += x * prow[j];
    }
  }
  return out;
}

Tensor BlockGrid::me_lookup(const ParamStore& store, const MeChoice& choice, std::int64_t k,
                            BlockAccessLog* log) const {
  check_me(choice);
  if (k < 0 || k >= vocab()) throw ContractViolation("me_lookup: vocab id out of range");
  Tensor out({dim()});
  const int sk = chunk_of(k);
  const std::int64_t local = k - row_cum(sk - 1);
  for (int t = 1; t <= T(); ++t) {
    if (choice.rows_per_col[static_cast<std::size_t>(t - 1)] < sk) continue;
    const Tensor& block = store.get(block_param(sk, t));
    const Tensor& proj = store.get(proj_param(t));
    if (log) log->reads.push_back({sk, t, local});
    const std::int64_t dt = col_splits_[static_cast<std::size_t>(t - 1)];
    const double* row = block.v.data() + local * dt;
    for (std::int64_t i = 0; i < dt; ++i) {
      const double x = row[i];
      const double* prow = proj.v.data() + i * dim();
      for (std::int64_t j = 0; j < dim(); ++j) out.v[static_cast<std::size_t>(j)] += x * prow[j];
    }
  }
  return out;
}

std::int64_t BlockGrid::se_cost(const SeChoice& choice) const {
  check_se(choice);
  if (choice.is_sentinel()) return 0;
  return row_cum(choice.s) * col_cum(choice.t);
}

std::int64_t BlockGrid::me_cost(const MeChoice& choice) const {
  check_me(choice);
  std::int64_t cost = 0;
  for (int t = 1; t <= T(); ++t)
    cost += col_splits_[static_cast<std::size_t>(t - 1)] *
            row_cum(choice.rows_per_col[static_cast<std::size_t>(t - 1)]);
  return cost;
}

Mes BlockGrid::choice_to_mes(const MeChoice& choice) const {
  check_me(choice);
  // Dimension of every item in chunk s: columns whose coverage reaches s.
  std::vector<std::int64_t> chunk_dim(static_cast<std::size_t>(S()), 0);
  for (int t = 1; t <= T(); ++t) {
    const int cover = choice.rows_per_col[static_cast<std::size_t>(t - 1)];
    for (int s = 1; s <= cover; ++s)
      chunk_dim[static_cast<std::size_t>(s - 1)] += col_splits_[static_cast<std::size_t>(t - 1)];
  }
  Mes mes;
  for (int s = 1; s <= S(); ++s) {
    const std::int64_t d = chunk_dim[static_cast<std::size_t>(s - 1)];
    if (!mes.entries.empty() && mes.entries.back().dim == d)
      mes.entries.back().vocab += row_splits_[static_cast<std::size_t>(s - 1)];
    else
      mes.entries.push_back({row_splits_[static_cast<std::size_t>(s - 1)], d});
  }
  return mes;
}

MeChoice BlockGrid::se_as_me(const SeChoice& choice) const {
  check_se(choice);
  MeChoice me;
  me.rows_per_col.assign(static_cast<std::size_t>(T()), 0);
  for (int t = 1; t <= choice.t; ++t) me.rows_per_col[static_cast<std::size_t>(t - 1)] = choice.s;
  return me;
}

BlockGrid default_grid(const std::string& name, std::int64_t vocab, const GridSpec& overrides) {
  std::vector<std::int64_t> rows;
  if (overrides.row_splits) {
    rows = *overrides.row_splits;
  } else {
    static constexpr double kFractions[] = {0.1, 0.2, 0.2, 0.2, 0.3};
    std::int64_t used = 0;
    for (int i = 0; i < 4; ++i) {
      const auto chunk = static_cast<std::int64_t>(std::floor(kFractions[i] * static_cast<double>(vocab)));
      if (chunk < 1)
        throw ConfigError("vocab " + std::to_string(vocab) + " too small for 5 nonempty row chunks");
      rows.push_back(chunk);
      used += chunk;
    }
    if (vocab - used < 1)
      throw ConfigError("vocab " + std::to_string(vocab) + " too small for 5 nonempty row chunks");
    rows.push_back(vocab - used);
  }
  std::vector<std::int64_t> cols;
  if (overrides.col_splits) {
    cols = *overrides.col_splits;
  } else {
    const double base = std::pow(static_cast<double>(vocab), 0.35);
    const auto d = 32 * static_cast<std::int64_t>(std::ceil(base / 32.0));
    cols.assign(4, d / 4);
  }
  return BlockGrid(name, std::move(rows), std::move(cols));
}

namespace {

// Batched bag embedding through selected blocks. Per column t with coverage
// c_t > 0 the forward pass accumulates, per example, the sum of bag rows that
// fall inside the covered chunks (in block-local coordinates), then projects
// once per column — the sum-before-project trick. The backward pass
// scatter-adds into exactly the rows that were gathered.
struct GridEmbedNode final : Node {
  const BlockGrid* grid = nullptr;
  MeChoice choice;
  std::vector<std::vector<std::int64_t>> bags;
  bool average = false;
  // inputs layout: for each selected (s,t) in fixed order, the block node,
  // then for each selected column, the projection node.
  std::vector<std::pair<int, int>> sel_blocks;
  std::vector<int> sel_cols;
  // Cached per-column pre-projection sums u[t] of shape [B, d_t].
  std::vector<Tensor> col_sums;

  NodeId block_node(int s, int t) const {
    for (std::size_t i = 0; i < sel_blocks.size(); ++i)
      if (sel_blocks[i].first == s && sel_blocks[i].second == t)
        return inputs[i];
    throw ContractViolation("grid_embed: block not selected");
  }
  NodeId proj_node(int t) const {
    for (std::size_t i = 0; i < sel_cols.size(); ++i)
      if (sel_cols[i] == t) return inputs[sel_blocks.size() + i];
    throw ContractViolation("grid_embed: column not selected");
  }

  void backward(Graph& g) override {
    const std::int64_t d = grid->dim();
    const auto b = static_cast<std::int64_t>(bags.size());
    for (std::size_t ci = 0; ci < sel_cols.size(); ++ci) {
      const int t = sel_cols[ci];
      const std::int64_t dt = grid->col_splits()[static_cast<std::size_t>(t - 1)];
      const Tensor& proj = g.value(inputs[sel_blocks.size() + ci]);
      const Tensor& u = col_sums[ci];
      // dP_t += u^T * G ; dU = G * P_t^T
      Tensor& gproj = g.grad(inputs[sel_blocks.size() + ci]);
      Tensor du({b, dt});
      for (std::int64_t r = 0; r < b; ++r) {
        const double* grow = grad.v.data() + r * d;
        const double* urow = u.v.data() + r * dt;
        double* durow = du.v.data() + r * dt;
        for (std::int64_t i = 0; i < dt; ++i) {
          const double ui = urow[i];
          double* gprow = gproj.v.data() + i * d;
          double acc = 0.0;
          const double* prow = proj.v.data() + i * d;
          for (std::int64_t j = 0; j < d; ++j) {
            gprow[j] += ui * grow[j];
            acc += grow[j] * prow[j];
          }
          durow[i] = acc;
        }
      }
      // Scatter dU rows back into the gathered block rows.
      const int cover = choice.rows_per_col[static_cast<std::size_t>(t - 1)];
      for (std::int64_t r = 0; r < b; ++r) {
        const double inv = average && !bags[static_cast<std::size_t>(r)].empty()
                               ? 1.0 / static_cast<double>(bags[static_cast<std::size_t>(r)].size())
                               : 1.0;
        for (const std::int64_t k : bags[static_cast<std::size_t>(r)]) {
          const int sk = grid->chunk_of(k);
          if (sk > cover) continue;
          Tensor& gblock = g.grad(block_node(sk, t));
          const std::int64_t local = k - grid->row_cum(sk - 1);
          double* dst = gblock.v.data() + local * dt;
          const double* src = du.v.data() + r * dt;
          for (std::int64_t i = 0; i < dt; ++i) dst[i] += inv * src[i];
        }
      }
    }
  }
  const char* op_name() const override { return "grid_embed"; }
};

}  // namespace

NodeId grid_embed(Graph& g, const BlockGrid& grid, const MeChoice& choice,
                  const std::vector<std::vector<std::int64_t>>& bags, bool average) {
  grid.check_me(choice);
  auto n = std::make_unique<GridEmbedNode>();
  n->grid = &grid;
  n->choice = choice;
  n->bags = bags;
  n->average = average;
  for (int t = 1; t <= grid.T(); ++t) {
    const int cover = choice.rows_per_col[static_cast<std::size_t>(t - 1)];
    if (cover > 0) n->sel_cols.push_back(t);
    for (int s = 1; s <= cover; ++s) n->sel_blocks.emplace_back(s, t);
  }
  for (const auto& [s, t] : n->sel_blocks) n->inputs.push_back(g.param(grid.block_param(s, t)));
  for (const int t : n->sel_cols) n->inputs.push_back(g.param(grid.proj_param(t)));

  const std::int64_t d = grid.dim();
  const auto b = static_cast<std::int64_t>(bags.size());
  n->value = Tensor({b, d});
  for (std::size_t ci = 0; ci < n->sel_cols.size(); ++ci) {
    const int t = n->sel_cols[ci];
    const std::int64_t dt = grid.col_splits()[static_cast<std::size_t>(t - 1)];
    const int cover = choice.rows_per_col[static_cast<std::size_t>(t - 1)];
    Tensor u({b, dt});
    for (std::int64_t r = 0; r < b; ++r) {
      const auto& bag = bags[static_cast<std::size_t>(r)];
      const double inv = average && !bag.empty() ? 1.0 / static_cast<double>(bag.size()) : 1.0;
      double* urow = u.v.data() + r * dt;
      for (const std::int64_t k : bag) {
        const int sk = grid.chunk_of(k);  // validates the id
        if (sk > cover) continue;
        const Tensor& block = g.value(n->block_node(sk, t));
        const double* src = block.v.data() + (k - grid.row_cum(sk - 1)) * dt;
        for (std::int64_t i = 0; i < dt; ++i) urow[i] += inv * src[i];
      }
    }
    const Tensor& proj = g.value(n->inputs[n->sel_blocks.size() + ci]);
    for (std::int64_t r = 0; r < b; ++r) {
      const double* urow = u.v.data() + r * dt;
      double* orow = n->value.v.data() + r * d;
      for (std::int64_t i = 0; i < dt; ++i) {
        const double ui = urow[i];
        if (ui == 0.0) continue;
        const double* prow = proj.v.data() + i * d;
        for (std::int64_t j = 0; j < d; ++j) orow[j] += ui * prow[j];
      }
    }
    n->col_sums.push_back(std::move(u));
  }
  return g.add_node(std::move(n));
}

}  // namespace nis
