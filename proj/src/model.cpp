#include "nis/model.hpp"

#include <cmath>

#include "nis/errors.hpp"

namespace nis {

void init_model_params(ParamStore& store, const ModelConfig& cfg, Rng& rng) {
  if (cfg.input_dim < 1 || cfg.label_vocab < 1 || cfg.hidden.empty())
    throw ConfigError("model config needs input_dim, label_vocab and at least one hidden layer");
  std::int64_t in = cfg.input_dim;
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
    const std::int64_t out = cfg.hidden[i];
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    store.create_uniform("mlp." + std::to_string(i) + ".w", {in, out}, scale, rng);
    store.create("mlp." + std::to_string(i) + ".b", {out});
    in = out;
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  store.create_uniform("out.w", {cfg.label_vocab, in}, scale, rng);
  store.create("out.b", {cfg.label_vocab});
}

NodeId model_hidden(Graph& g, const ModelConfig& cfg, NodeId x) {
  NodeId h = x;
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
    const NodeId w = g.param("mlp." + std::to_string(i) + ".w");
    const NodeId b = g.param("mlp." + std::to_string(i) + ".b");
    h = g.relu(g.add_rowvec(g.matmul(h, w), b));
  }
  return h;
}

NodeId model_logits(Graph& g, const ModelConfig& cfg, NodeId h) {
  (void)cfg;
  return g.add_rowvec(g.matmul_nt(h, g.param("out.w")), g.param("out.b"));
}

std::vector<double> candidate_logits(const ParamStore& store, const double* h, std::int64_t dim,
                                     const std::vector<std::int64_t>& candidates) {
  const Tensor& w = store.get("out.w");
  const Tensor& b = store.get("out.b");
  if (w.cols() != dim) throw ContractViolation("candidate_logits: hidden width mismatch");
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const std::int64_t c : candidates) {
    if (c < 0 || c >= w.rows()) throw ContractViolation("candidate_logits: id out of range");
    const double* wrow = w.v.data() + c * dim;
    double acc = b.v[static_cast<std::size_t>(c)];
    for (std::int64_t i = 0; i < dim; ++i) acc += h[i] * wrow[i];
    out.push_back(acc);
  }
  return out;
}

}  // namespace nis
