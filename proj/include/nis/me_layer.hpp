#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nis/graph.hpp"
#include "nis/mes.hpp"
#include "nis/param_store.hpp"
#include "nis/rng.hpp"

namespace nis {

class BlockGrid;
struct MeChoice;

// Multi-size embedding materialized from an MES, independent of the search
// grid: one bucket matrix of shape v_m x d_m per entry plus a projection
// d_m x out_dim into a common output space. out_dim defaults to d_1. A
// trailing dim-0 range is carried (those ids embed to zero) but gets no
// matrices. Parameters live under "<name>.bucket.<m>" / "<name>.proj.<m>".
class MeLayer {
 public:
  MeLayer(std::string name, Mes mes, std::int64_t out_dim = 0);

  const std::string& name() const { return name_; }
  const Mes& mes() const { return mes_; }
  std::int64_t total_vocab() const { return mes_.total_vocab(); }
  std::int64_t out_dim() const { return out_dim_; }
  int buckets() const { return static_cast<int>(active_.entries.size()); }
  std::int64_t bucket_cum(int m) const { return cum_[static_cast<std::size_t>(m)]; }

  std::string bucket_param(int m) const;  // 1-based
  std::string proj_param(int m) const;
  std::vector<std::string> param_names() const;
  void init_params(ParamStore& store, Rng& rng) const;

  // Bucket (1-based) holding id k, or 0 if k falls in the trailing dim-0 range.
  int bucket_of(std::int64_t k) const;

  // Embedding of one id: E_m[k - V_{m-1}] * P_m.
  Tensor embed(const ParamStore& store, std::int64_t k) const;

  // Bag-of-words reduction: sum (or mean) of the bag's embeddings, summing
  // raw rows per bucket before projecting once per bucket.
  Tensor bow(const ParamStore& store, const std::vector<std::int64_t>& bag,
             bool average = false) const;

 private:
  std::string name_;
  Mes mes_;
  Mes active_;  // mes_ with the trailing dim-0 range stripped
  std::int64_t out_dim_;
  std::vector<std::int64_t> cum_;  // cumulative vocab over active buckets
};

// Bucket parameter count of the spec: sum of v_m * d_m (projections excluded,
// matching the memory-budget definition).
std::int64_t me_param_count(const Mes& mes);

// Builds the layer and initializes its parameters.
MeLayer build_me(ParamStore& store, const std::string& name, const Mes& mes, Rng& rng,
                 std::int64_t out_dim = 0);

// Builds a layer over choice_to_mes(choice) whose weights are copied from the
// grid's blocks and projections, so that embed() reproduces me_lookup for
// every id exactly. Output dimension is the grid's d.
MeLayer materialize_from_grid(const BlockGrid& grid, const MeChoice& choice,
                              const ParamStore& grid_store, ParamStore& out_store,
                              const std::string& name);

// Fused autodiff op: batched bag embedding through an MeLayer.
NodeId me_bag_embed(Graph& g, const MeLayer& layer,
                    const std::vector<std::vector<std::int64_t>>& bags, bool average = false);

}  // namespace nis
