#include "nis/me_layer.hpp"

#include <cmath>
#include <memory>

#include "nis/block_grid.hpp"
#include "nis/errors.hpp"

namespace nis {

MeLayer::MeLayer(std::string name, Mes mes, std::int64_t out_dim)
    : name_(std::move(name)), mes_(std::move(mes)), active_(mes_.strip_zero()) {
  if (active_.entries.empty()) {
    // Every id in the zero range: a removed feature. Legal only when the
    // output dimension is pinned by the caller (grid materialization).
    if (out_dim <= 0)
      throw ConfigError("MES with no positive-dimension bucket needs an explicit output dim");
    out_dim_ = out_dim;
  } else {
    mes_.validate();
    out_dim_ = out_dim > 0 ? out_dim : active_.entries.front().dim;
  }
  cum_.push_back(0);
  for (const auto& e : active_.entries) cum_.push_back(cum_.back() + e.vocab);
}

std::string MeLayer::bucket_param(int m) const { return name_ + ".bucket." + std::to_string(m); }
std::string MeLayer::proj_param(int m) const { return name_ + ".proj." + std::to_string(m); }

std::vector<std::string> MeLayer::param_names() const {
  std::vector<std::string> out;
  for (int m = 1; m <= buckets(); ++m) {
    out.push_back(bucket_param(m));
    out.push_back(proj_param(m));
  }
  return out;
}

void MeLayer::init_params(ParamStore& store, Rng& rng) const {
  const double scale = 1.0 / std::sqrt(static_cast<double>(out_dim_));
  for (int m = 1; m <= buckets(); ++m) {
    const auto& e = active_.entries[static_cast<std::size_t>(m - 1)];
    store.create_uniform(bucket_param(m), {e.vocab, e.dim}, scale, rng);
    store.create_uniform(proj_param(m), {e.dim, out_dim_}, scale, rng);
  }
}

int MeLayer::bucket_of(std::int64_t k) const {
  if (k < 0 || k >= total_vocab()) throw ContractViolation("me embed: vocab id out of range");
  if (k >= cum_.back()) return 0;  // trailing dim-0 range
  int m = 1;
  while (cum_[static_cast<std::size_t>(m)] <= k) ++m;
  return m;
}

Tensor MeLayer::embed(const ParamStore& store, std::int64_t k) const {
  Tensor out({out_dim_});
  const int m = bucket_of(k);
  if (m == 0) return out;
  const Tensor& bucket = store.get(bucket_param(m));
  const Tensor& proj = store.get(proj_param(m));
  const std::int64_t dm = bucket.cols();
  const double* row = bucket.v.data() + (k - bucket_cum(m - 1)) * dm;
  for (std::int64_t i = 0; i < dm; ++i) {
    const double x = row[i];
    const double* prow = proj.v.data() + i * out_dim_;
    for (std::int64_t j = 0; j < out_dim_; ++j) out.v[static_cast<std::size_t>(j)] += x * prow[j];
  }
  return out;
}

Tensor MeLayer::bow(const ParamStore& store, const std::vector<std::int64_t>& bag,
                    bool average) const {
  Tensor out({out_dim_});
  if (bag.empty()) return out;
  // Group ids by bucket, sum raw rows, then project once per bucket.
  std::vector<Tensor> sums(static_cast<std::size_t>(buckets()) + 1);
  for (const std::int64_t k : bag) {
    const int m = bucket_of(k);
    if (m == 0) continue;
    const Tensor& bucket = store.get(bucket_param(m));
    const std::int64_t dm = bucket.cols();
    Tensor& acc = sums[static_cast<std::size_t>(m)];
    if (acc.numel() == 0) acc = Tensor({dm});
    const double* row = bucket.v.data() + (k - bucket_cum(m - 1)) * dm;
    for (std::int64_t i = 0; i < dm; ++i) acc.v[static_cast<std::size_t>(i)] += row[i];
  }
  for (int m = 1; m <= buckets(); ++m) {
    const Tensor& acc = sums[static_cast<std::size_t>(m)];
    if (acc.numel() == 0) continue;
    const Tensor& proj = store.get(proj_param(m));
    const std::int64_t dm = proj.rows();
    for (std::int64_t i = 0; i < dm; ++i) {
      const double x = acc.v[static_cast<std::size_t>(i)];
      if (x == 0.0) continue;
      const double* prow = proj.v.data() + i * out_dim_;
      for (std::int64_t j = 0; j < out_dim_; ++j) out.v[static_cast<std::size_t>(j)] += x * prow[j];
    }
  }
  if (average)
    for (double& x : out.v) x /= static_cast<double>(bag.size());
  return out;
}

std::int64_t me_param_count(const Mes& mes) { return mes.param_count(); }

MeLayer build_me(ParamStore& store, const std::string& name, const Mes& mes, Rng& rng,
                 std::int64_t out_dim) {
  MeLayer layer(name, mes, out_dim);
  layer.init_params(store, rng);
  return layer;
}

MeLayer materialize_from_grid(const BlockGrid& grid, const MeChoice& choice,
                              const ParamStore& grid_store, ParamStore& out_store,
                              const std::string& name) {
  const Mes mes = grid.choice_to_mes(choice);
  MeLayer layer(name, mes, grid.dim());
  // Walk mes buckets and the row chunks they group.
  int chunk = 1;
  const Mes active = mes.strip_zero();
  for (int m = 1; m <= layer.buckets(); ++m) {
    const auto& entry = active.entries[static_cast<std::size_t>(m - 1)];
    // Columns selected for every chunk in this group (the coverage set of the
    // group's first chunk; nested coverage makes it identical group-wide).
    std::vector<int> cols;
    for (int t = 1; t <= grid.T(); ++t)
      if (choice.rows_per_col[static_cast<std::size_t>(t - 1)] >= chunk) cols.push_back(t);
    Tensor bucket({entry.vocab, entry.dim});
    std::int64_t row_off = 0;
    std::int64_t grouped = 0;
    while (grouped < entry.vocab) {
      const std::int64_t rows = grid.row_splits()[static_cast<std::size_t>(chunk - 1)];
      std::int64_t col_off = 0;
      for (const int t : cols) {
        const Tensor& block = grid_store.get(grid.block_param(chunk, t));
        const std::int64_t dt = block.cols();
        for (std::int64_t r = 0; r < rows; ++r)
          for (std::int64_t c = 0; c < dt; ++c)
            bucket.at(row_off + r, col_off + c) = block.at(r, c);
        col_off += dt;
      }
      row_off += rows;
      grouped += rows;
      ++chunk;
    }
    Tensor proj({entry.dim, grid.dim()});
    std::int64_t col_off = 0;
    for (const int t : cols) {
      const Tensor& p = grid_store.get(grid.proj_param(t));
      for (std::int64_t r = 0; r < p.rows(); ++r)
        for (std::int64_t c = 0; c < p.cols(); ++c) proj.at(col_off + r, c) = p.at(r, c);
      col_off += p.rows();
    }
    out_store.create(layer.bucket_param(m), bucket.shape) = bucket;
    out_store.create(layer.proj_param(m), proj.shape) = proj;
  }
  return layer;
}

namespace {

struct MeBagEmbedNode final : Node {
  const MeLayer* layer = nullptr;
  std::vector<std::vector<std::int64_t>> bags;
  bool average = false;
  std::vector<Tensor> bucket_sums;  // [B, d_m] per bucket, label-first order

  void backward(Graph& g) override {
    const std::int64_t d = layer->out_dim();
    const auto b = static_cast<std::int64_t>(bags.size());
    for (int m = 1; m <= layer->buckets(); ++m) {
      const Tensor& u = bucket_sums[static_cast<std::size_t>(m - 1)];
      if (u.numel() == 0) continue;
      const std::int64_t dm = u.cols();
      const Tensor& proj = g.value(inputs[2 * (m - 1) + 1]);
      Tensor& gproj = g.grad(inputs[2 * (m - 1) + 1]);
      Tensor& gbucket = g.grad(inputs[2 * (m - 1)]);
      Tensor du({b, dm});
      for (std::int64_t r = 0; r < b; ++r) {
        const double* grow = grad.v.data() + r * d;
        const double* urow = u.v.data() + r * dm;
        double* durow = du.v.data() + r * dm;
        for (std::int64_t i = 0; i < dm; ++i) {
          double acc = 0.0;
          const double* prow = proj.v.data() + i * d;
          double* gprow = gproj.v.data() + i * d;
          const double ui = urow[i];
          for (std::int64_t j = 0; j < d; ++j) {
            gprow[j] += ui * grow[j];
            acc += grow[j] * prow[j];
          }
          durow[i] = acc;
        }
      }
      for (std::int64_t r = 0; r < b; ++r) {
        const auto& bag = bags[static_cast<std::size_t>(r)];
        const double inv = average && !bag.empty() ? 1.0 / static_cast<double>(bag.size()) : 1.0;
        for (const std::int64_t k : bag) {
          if (layer->bucket_of(k) != m) continue;
          double* dst = gbucket.v.data() + (k - layer->bucket_cum(m - 1)) * dm;
          const double* src = du.v.data() + r * dm;
          for (std::int64_t i = 0; i < dm; ++i) dst[i] += inv * src[i];
        }
      }
    }
  }
  const char* op_name() const override { return "me_bag_embed"; }
};

}  // namespace

NodeId me_bag_embed(Graph& g, const MeLayer& layer,
                    const std::vector<std::vector<std::int64_t>>& bags, bool average) {
  auto n = std::make_unique<MeBagEmbedNode>();
  n->layer = &layer;
  n->bags = bags;
  n->average = average;
  for (int m = 1; m <= layer.buckets(); ++m) {
    n->inputs.push_back(g.param(layer.bucket_param(m)));
    n->inputs.push_back(g.param(layer.proj_param(m)));
  }
  const std::int64_t d = layer.out_dim();
  const auto b = static_cast<std::int64_t>(bags.size());
  n->value = Tensor({b, d});
  n->bucket_sums.resize(static_cast<std::size_t>(layer.buckets()));
  for (std::int64_t r = 0; r < b; ++r) {
    const auto& bag = bags[static_cast<std::size_t>(r)];
    const double inv = average && !bag.empty() ? 1.0 / static_cast<double>(bag.size()) : 1.0;
    for (const std::int64_t k : bag) {
      const int m = layer.bucket_of(k);
      if (m == 0) continue;
      const Tensor& bucket = g.value(n->inputs[2 * (m - 1)]);
      const std::int64_t dm = bucket.cols();
      Tensor& u = n->bucket_sums[static_cast<std::size_t>(m - 1)];
      if (u.numel() == 0) u = Tensor({b, dm});
      const double* src = bucket.v.data() + (k - layer.bucket_cum(m - 1)) * dm;
      double* dst = u.v.data() + r * dm;
      for (std::int64_t i = 0; i < dm; ++i) dst[i] += inv * src[i];
    }
  }
  for (int m = 1; m <= layer.buckets(); ++m) {
    const Tensor& u = n->bucket_sums[static_cast<std::size_t>(m - 1)];
    if (u.numel() == 0) continue;
    const std::int64_t dm = u.cols();
    const Tensor& proj = g.value(n->inputs[2 * (m - 1) + 1]);
    for (std::int64_t r = 0; r < b; ++r) {
      const double* urow = u.v.data() + r * dm;
      double* orow = n->value.v.data() + r * d;
      for (std::int64_t i = 0; i < dm; ++i) {
        const double ui = urow[i];
        if (ui == 0.0) continue;
        const double* prow = proj.v.data() + i * d;
        for (std::int64_t j = 0; j < d; ++j) orow[j] += ui * prow[j];
      }
    }
  }
  return g.add_node(std::move(n));
}

}  // namespace nis
