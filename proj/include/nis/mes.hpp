#pragma once

#include <cstdint>
#include <vector>

namespace nis {

// One bucket of a multi-size embedding: `vocab` consecutive items sharing
// embedding dimension `dim`.
struct MesEntry {
  std::int64_t vocab = 0;
  std::int64_t dim = 0;
  bool operator==(const MesEntry&) const = default;
};

// Multi-size embedding spec: bucket list ordered from most- to least-frequent
// items, dimensions non-increasing. A trailing dim-0 entry is allowed and
// denotes items deliberately left without an embedding; strip_zero() removes
// it for constructions that require every bucket to be materialized.
struct Mes {
  std::vector<MesEntry> entries;

  std::int64_t total_vocab() const;
  std::int64_t param_count() const;  // sum of vocab*dim over buckets; projections excluded
  Mes strip_zero() const;

  // Throws ConfigError unless: at least one entry, all vocabs >= 1, dims
  // non-increasing, and all dims >= 1 (after stripping a trailing zero range).
  void validate() const;

  bool operator==(const Mes&) const = default;
};

}  // namespace nis
