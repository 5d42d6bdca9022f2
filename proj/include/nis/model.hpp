#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nis/graph.hpp"
#include "nis/param_store.hpp"
#include "nis/rng.hpp"
#include "nis/tasks.hpp"

namespace nis {

// The representation-learning component shared by every embedding variant:
// fully connected ReLU layers over the concatenated feature embeddings, then
// either a softmax over the label vocabulary (retrieval) or a single logit
// (ranking). Output weights are stored one row per class so both the full
// and the sampled head read the same parameters.
struct ModelConfig {
  std::vector<std::int64_t> hidden;  // widths of the FC stack
  std::int64_t input_dim = 0;        // total embedding width
  std::int64_t label_vocab = 0;      // softmax width; 1 for ranking
};

void init_model_params(ParamStore& store, const ModelConfig& cfg, Rng& rng);

// ReLU FC stack; x is [B, input_dim], result [B, hidden.back()].
NodeId model_hidden(Graph& g, const ModelConfig& cfg, NodeId x);

// Full logits [B, label_vocab] = h W^T + b.
NodeId model_logits(Graph& g, const ModelConfig& cfg, NodeId h);

// Candidate logits h . W[c] + b[c] read straight from the store; used by
// reward evaluation where only a handful of logits is needed. `h` is one row
// of a hidden activation produced by model_hidden.
std::vector<double> candidate_logits(const ParamStore& store, const double* h, std::int64_t dim,
                                     const std::vector<std::int64_t>& candidates);

}  // namespace nis
