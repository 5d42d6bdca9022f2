#include "nis/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "nis/errors.hpp"

namespace nis {

namespace {

constexpr std::uint64_t kSaltPermutation = 0x01;
constexpr std::uint64_t kSaltExamples = 0x02;
constexpr std::uint64_t kSaltNoise = 0x03;
constexpr std::uint64_t kSaltAux = 0x04;
constexpr std::uint64_t kSaltSplit = 0x05;
constexpr std::uint64_t kSaltTraits = 0x06;

std::vector<std::int64_t> random_permutation(std::int64_t n, Rng& rng) {
  std::vector<std::int64_t> p(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  for (std::int64_t i = n - 1; i > 0; --i)
    std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
  return p;
}

}  // namespace

ZipfSampler::ZipfSampler(std::int64_t vocab, double exponent) {
  if (vocab < 1) throw ConfigError("zipf sampler needs a nonempty vocabulary");
  if (!(exponent > 0.0)) throw ConfigError("zipf exponent must be positive");
  cum_.resize(static_cast<std::size_t>(vocab));
  double acc = 0.0;
  for (std::int64_t k = 0; k < vocab; ++k) {
    acc += std::pow(static_cast<double>(k + 1), -exponent);
    cum_[static_cast<std::size_t>(k)] = acc;
  }
  for (double& x : cum_) x /= acc;
}

std::int64_t ZipfSampler::draw(Rng& rng) const {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
  return static_cast<std::int64_t>(std::min<std::size_t>(
      static_cast<std::size_t>(it - cum_.begin()), cum_.size() - 1));
}

double ZipfSampler::mass(std::int64_t id) const {
  const auto i = static_cast<std::size_t>(id);
  return i == 0 ? cum_[0] : cum_[i] - cum_[i - 1];
}

namespace {

struct RetrievalMaps {
  std::vector<std::int64_t> target;  // planted target per item, pre-noise
};

RetrievalMaps build_retrieval_maps(const RetrievalGenConfig& cfg, std::uint64_t seed) {
  if (cfg.n_head + cfg.n_clusters > cfg.vocab)
    throw ConfigError("retrieval generator: n_head + n_clusters exceeds vocab");
  if (cfg.n_head < 1 || cfg.n_clusters < 1)
    throw ConfigError("retrieval generator: n_head and n_clusters must be >= 1");
  Rng rng(mix_seed(seed, kSaltPermutation));
  const auto perm = random_permutation(cfg.vocab, rng);
  RetrievalMaps maps;
  maps.target.resize(static_cast<std::size_t>(cfg.vocab));
  const std::int64_t tail = cfg.vocab - cfg.n_head;
  for (std::int64_t k = 0; k < cfg.vocab; ++k) {
    if (k < cfg.n_head) {
      maps.target[static_cast<std::size_t>(k)] = perm[static_cast<std::size_t>(k)];
    } else {
      // Contiguous tail clusters; the target carries only cluster identity.
      const std::int64_t cluster = (k - cfg.n_head) * cfg.n_clusters / tail;
      maps.target[static_cast<std::size_t>(k)] =
          perm[static_cast<std::size_t>(cfg.n_head + cluster)];
    }
  }
  return maps;
}

}  // namespace

std::int64_t planted_retrieval_target(const RetrievalGenConfig& cfg, std::uint64_t seed,
                                      std::int64_t k) {
  return build_retrieval_maps(cfg, seed).target.at(static_cast<std::size_t>(k));
}

Dataset gen_retrieval_dataset(const RetrievalGenConfig& cfg, std::uint64_t seed) {
  if (cfg.n_examples < 10) throw ConfigError("retrieval generator: need at least 10 examples");
  if (!(cfg.label_noise >= 0.0 && cfg.label_noise < 0.5))
    throw ConfigError("retrieval generator: label_noise must lie in [0, 0.5)");
  const auto maps = build_retrieval_maps(cfg, seed);
  const ZipfSampler zipf(cfg.vocab, cfg.zipf_exponent);
  const std::int64_t aux_vocab =
      cfg.aux_vocab > 0 ? cfg.aux_vocab : std::max<std::int64_t>(cfg.vocab / 2, 2);

  Dataset ds;
  ds.kind = TaskKind::retrieval;
  ds.features.push_back({"item", cfg.vocab});
  if (cfg.aux_feature) ds.features.push_back({"item_derived", aux_vocab});
  ds.label_vocab = cfg.vocab;

  Rng ex_rng(mix_seed(seed, kSaltExamples));
  Rng noise_rng(mix_seed(seed, kSaltNoise));
  std::vector<Example> examples;
  examples.reserve(static_cast<std::size_t>(cfg.n_examples));
  for (std::int64_t i = 0; i < cfg.n_examples; ++i) {
    Example ex;
    const std::int64_t c = zipf.draw(ex_rng);
    ex.bags.push_back({c});
    if (cfg.aux_feature) ex.bags.push_back({c % aux_vocab});
    if (cfg.label_noise > 0.0 && noise_rng.uniform() < cfg.label_noise)
      ex.label = noise_rng.uniform_int(cfg.vocab);
    else
      ex.label = maps.target[static_cast<std::size_t>(c)];
    examples.push_back(std::move(ex));
  }
  ds.split = split_dataset(std::move(examples), {0.7, 0.2, 0.1}, mix_seed(seed, kSaltSplit));
  return ds;
}

double planted_ranking_utility(const RankingGenConfig& cfg, std::uint64_t seed,
                               const Example& ex) {
  double u = 0.0;
  for (std::size_t f = 0; f < cfg.vocabs.size(); ++f) {
    for (const std::int64_t val : ex.bags[f]) {
      if (val >= cfg.informative[f]) continue;
      Rng trait(mix_seed(mix_seed(seed, kSaltTraits + f), static_cast<std::uint64_t>(val)));
      u += trait.normal();
    }
  }
  return u;
}

Dataset gen_ranking_dataset(const RankingGenConfig& cfg, std::uint64_t seed) {
  if (cfg.n_examples < 10) throw ConfigError("ranking generator: need at least 10 examples");
  if (cfg.vocabs.empty()) throw ConfigError("ranking generator: no features");
  if (cfg.informative.size() != cfg.vocabs.size())
    throw ConfigError("ranking generator: informative list must match vocabs");
  if (!(cfg.label_noise >= 0.0 && cfg.label_noise < 0.5))
    throw ConfigError("ranking generator: label_noise must lie in [0, 0.5)");

  Dataset ds;
  ds.kind = TaskKind::ranking;
  for (std::size_t f = 0; f < cfg.vocabs.size(); ++f)
    ds.features.push_back({"f" + std::to_string(f), cfg.vocabs[f]});
  ds.label_vocab = 2;

  std::vector<ZipfSampler> zipf;
  for (auto v : cfg.vocabs) zipf.emplace_back(v, cfg.zipf_exponent);

  Rng ex_rng(mix_seed(seed, kSaltExamples));
  Rng noise_rng(mix_seed(seed, kSaltNoise));
  std::vector<Example> examples;
  examples.reserve(static_cast<std::size_t>(cfg.n_examples));
  for (std::int64_t i = 0; i < cfg.n_examples; ++i) {
    Example ex;
    for (std::size_t f = 0; f < cfg.vocabs.size(); ++f) ex.bags.push_back({zipf[f].draw(ex_rng)});
    const double u = planted_ranking_utility(cfg, seed, ex);
    int label = u > 0.0 ? 1 : 0;
    if (cfg.label_noise > 0.0 && noise_rng.uniform() < cfg.label_noise) label = 1 - label;
    ex.label = label;
    examples.push_back(std::move(ex));
  }
  ds.split = split_dataset(std::move(examples), {0.7, 0.2, 0.1}, mix_seed(seed, kSaltSplit));
  return ds;
}

DatasetSplit split_dataset(std::vector<Example> examples, const std::vector<double>& ratios,
                           std::uint64_t seed) {
  if (ratios.size() != 3) throw ConfigError("split_dataset: exactly three ratios expected");
  double total = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw ConfigError("split_dataset: negative ratio");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split_dataset: ratios must sum to 1");

  Rng rng(mix_seed(seed, kSaltSplit));
  const auto n = static_cast<std::int64_t>(examples.size());
  for (std::int64_t i = n - 1; i > 0; --i)
    std::swap(examples[static_cast<std::size_t>(i)],
              examples[static_cast<std::size_t>(rng.uniform_int(i + 1))]);

  const auto n_train = static_cast<std::int64_t>(std::floor(ratios[0] * static_cast<double>(n)));
  const auto n_val = static_cast<std::int64_t>(std::floor(ratios[1] * static_cast<double>(n)));
  DatasetSplit split;
  split.seed = seed;
  split.train.assign(examples.begin(), examples.begin() + n_train);
  split.val.assign(examples.begin() + n_train, examples.begin() + n_train + n_val);
  split.test.assign(examples.begin() + n_train + n_val, examples.end());
  return split;
}

namespace {

void put_u16(std::string& out, std::uint16_t x) {
  out.push_back(static_cast<char>(x & 0xff));
  out.push_back(static_cast<char>((x >> 8) & 0xff));
}
void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw IoError("dataset file truncated");
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t x = 0;
    for (int i = 0; i < 2; ++i) x |= static_cast<std::uint16_t>(static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)])) << (8 * i);
    pos += 2;
    return x;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)])) << (8 * i);
    pos += 4;
    return x;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)])) << (8 * i);
    pos += 8;
    return x;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string out = buf.substr(pos, n);
    pos += n;
    return out;
  }
};

void append_record(std::string& out, const Example& ex) {
  std::string payload;
  for (const auto& bag : ex.bags) {
    put_u16(payload, static_cast<std::uint16_t>(bag.size()));
    for (const std::int64_t id : bag) put_u32(payload, static_cast<std::uint32_t>(id));
  }
  put_u32(payload, static_cast<std::uint32_t>(ex.label));
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  out += payload;
}

Example parse_record(Reader& r, std::size_t n_features) {
  const std::uint32_t len = r.u32();
  const std::size_t end = r.pos + len;
  Example ex;
  for (std::size_t f = 0; f < n_features; ++f) {
    const std::uint16_t bag_len = r.u16();
    std::vector<std::int64_t> bag;
    bag.reserve(bag_len);
    for (std::uint16_t i = 0; i < bag_len; ++i) bag.push_back(r.u32());
    ex.bags.push_back(std::move(bag));
  }
  ex.label = r.u32();
  if (r.pos != end) throw IoError("dataset record length mismatch");
  return ex;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& path) {
  std::string out;
  out += "NISD";
  put_u32(out, 1);
  out.push_back(ds.kind == TaskKind::retrieval ? '\0' : '\1');
  put_u64(out, ds.split.seed);
  put_u64(out, static_cast<std::uint64_t>(ds.label_vocab));
  put_u32(out, static_cast<std::uint32_t>(ds.features.size()));
  for (const auto& f : ds.features) {
    put_u16(out, static_cast<std::uint16_t>(f.name.size()));
    out += f.name;
    put_u64(out, static_cast<std::uint64_t>(f.vocab));
  }
  for (const auto* part : {&ds.split.train, &ds.split.val, &ds.split.test}) {
    put_u64(out, part->size());
    for (const auto& ex : *part) append_record(out, ex);
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open dataset file for writing: " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("failed writing dataset file: " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset file: " + path);
  std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  Reader r(buf);
  if (r.bytes(4) != "NISD") throw IoError("bad dataset magic in " + path);
  if (r.u32() != 1) throw IoError("unsupported dataset version in " + path);
  Dataset ds;
  r.need(1);
  ds.kind = buf[r.pos++] == '\0' ? TaskKind::retrieval : TaskKind::ranking;
  ds.split.seed = r.u64();
  ds.label_vocab = static_cast<std::int64_t>(r.u64());
  const std::uint32_t nf = r.u32();
  for (std::uint32_t f = 0; f < nf; ++f) {
    FeatureSpec spec;
    spec.name = r.bytes(r.u16());
    spec.vocab = static_cast<std::int64_t>(r.u64());
    ds.features.push_back(std::move(spec));
  }
  for (auto* part : {&ds.split.train, &ds.split.val, &ds.split.test}) {
    const std::uint64_t count = r.u64();
    part->reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) part->push_back(parse_record(r, nf));
  }
  if (r.pos != buf.size()) throw IoError("trailing bytes in dataset file " + path);
  return ds;
}

}  // namespace nis
