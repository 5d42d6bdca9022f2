#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nis/rng.hpp"

namespace nis {

enum class TaskKind { retrieval, ranking };

// A categorical feature; ids are dense in [0, vocab) and ordered by
// decreasing frequency (id 0 is the most frequent value).
struct FeatureSpec {
  std::string name;
  std::int64_t vocab = 0;
};

struct Example {
  std::vector<std::vector<std::int64_t>> bags;  // per feature, any number of ids
  std::int64_t label = 0;                       // retrieval: target id; ranking: 0/1
};

struct DatasetSplit {
  std::vector<Example> train, val, test;
  std::uint64_t seed = 0;
};

struct Dataset {
  TaskKind kind = TaskKind::retrieval;
  std::vector<FeatureSpec> features;
  std::int64_t label_vocab = 0;  // retrieval softmax width; 2 for ranking
  DatasetSplit split;
};

// Zipf-by-rank sampler over [0, vocab): p(k) proportional to (k+1)^-exponent,
// drawn by inverse CDF over the precomputed cumulative mass.
class ZipfSampler {
 public:
  ZipfSampler(std::int64_t vocab, double exponent);
  std::int64_t draw(Rng& rng) const;
  double mass(std::int64_t id) const;

 private:
  std::vector<double> cum_;
};

// Next-item retrieval with a planted head/tail structure: the target of a
// head item depends on its exact identity (every head item has its own
// target), while tail items share one target per contiguous cluster. Head
// items therefore need finely separated embeddings, tail items only need to
// be covered at all.
struct RetrievalGenConfig {
  std::int64_t n_examples = 0;
  std::int64_t vocab = 0;
  double zipf_exponent = 1.05;
  std::int64_t n_head = 0;
  std::int64_t n_clusters = 0;
  double label_noise = 0.0;
  bool aux_feature = false;     // derived n-gram-like companion of the primary id
  std::int64_t aux_vocab = 0;   // defaults to vocab / 2
};

Dataset gen_retrieval_dataset(const RetrievalGenConfig& cfg, std::uint64_t seed);

// The planted target of item k (before label noise); exposed so tests can
// score against the generating rule.
std::int64_t planted_retrieval_target(const RetrievalGenConfig& cfg, std::uint64_t seed,
                                      std::int64_t k);

// Binary-label ranking over several features with a planted logistic-style
// utility: each informative value carries a latent score; the label is
// utility > 0 with optional flip noise.
struct RankingGenConfig {
  std::int64_t n_examples = 0;
  std::vector<std::int64_t> vocabs;
  std::vector<std::int64_t> informative;  // per feature; values >= informative[f] carry no signal
  double zipf_exponent = 1.05;
  double label_noise = 0.0;
};

Dataset gen_ranking_dataset(const RankingGenConfig& cfg, std::uint64_t seed);

// The planted utility of an example; positive labels correspond to positive
// utility before noise.
double planted_ranking_utility(const RankingGenConfig& cfg, std::uint64_t seed, const Example& ex);

// Deterministic shuffle + partition; fractions must sum to 1 and sizes are
// floored with the last split absorbing the remainder.
DatasetSplit split_dataset(std::vector<Example> examples, const std::vector<double>& ratios,
                           std::uint64_t seed);

// Length-prefixed little-endian binary cache; regeneration from config+seed
// is bit-identical. See README for the exact layout.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace nis
