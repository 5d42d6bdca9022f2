#include "nis/mes.hpp"

#include "nis/errors.hpp"

namespace nis {

std::int64_t Mes::total_vocab() const {
  std::int64_t n = 0;
  for (const auto& e : entries) n += e.vocab;
  return n;
}

std::int64_t Mes::param_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries) n += e.vocab * e.dim;
  return n;
}

Mes Mes::strip_zero() const {
  Mes out = *this;
  while (!out.entries.empty() && out.entries.back().dim == 0) out.entries.pop_back();
  return out;
}

void Mes::validate() const {
  const Mes m = strip_zero();
  if (m.entries.empty()) throw ConfigError("MES has no bucket with positive dimension");
  std::int64_t prev = m.entries.front().dim;
  for (const auto& e : m.entries) {
    if (e.vocab < 1) throw ConfigError("MES bucket vocab must be >= 1");
    if (e.dim < 1) throw ConfigError("MES bucket dim must be >= 1");
    if (e.dim > prev) throw ConfigError("MES bucket dims must be non-increasing");
    prev = e.dim;
  }
}

}  // namespace nis
