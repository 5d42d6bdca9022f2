#include "nis/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nis/errors.hpp"
#include "nis/oracle.hpp"
#include "nis/trainer.hpp"

namespace nis {

namespace {

namespace fs = std::filesystem;

// One writer per run directory; the lock file is removed on scope exit but
// survives hard crashes (the error message names it for manual cleanup).
struct RunLock {
  fs::path path;
  explicit RunLock(const fs::path& dir) : path(dir / ".lock") {
    std::FILE* f = std::fopen(path.string().c_str(), "wx");
    if (!f)
      throw IoError("run directory is locked by another writer (remove " + path.string() +
                    " if stale)");
    std::fclose(f);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path, ec);
  }
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw IoError("cannot write " + p.string());
  os << text;
  if (!os) throw IoError("failed writing " + p.string());
}

void write_resolved_config(const RunConfig& cfg, const fs::path& dir) {
  write_text(dir / "config.resolved.json", resolved_json(cfg).dump(2) + "\n");
}

Dataset generate(const RunConfig& cfg) {
  if (cfg.task == TaskKind::retrieval) return gen_retrieval_dataset(cfg.data.retrieval, cfg.seed);
  return gen_ranking_dataset(cfg.data.ranking, cfg.seed);
}

}  // namespace

Dataset dataset_for(const RunConfig& cfg) {
  if (!cfg.data.cache.empty() && fs::exists(cfg.data.cache)) {
    Dataset ds = read_dataset(cfg.data.cache);
    if (ds.kind != cfg.task)
      throw ConfigError("cached dataset task kind does not match the config");
    return ds;
  }
  Dataset ds = generate(cfg);
  if (!cfg.data.cache.empty()) write_dataset(ds, cfg.data.cache);
  return ds;
}

void run_gen_data(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  RunLock lock(out_dir);
  write_resolved_config(cfg, out_dir);
  const Dataset ds = generate(cfg);
  write_dataset(ds, (fs::path(out_dir) / "dataset.bin").string());
}

void run_search_dir(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  RunLock lock(out_dir);
  write_resolved_config(cfg, out_dir);
  const Dataset ds = dataset_for(cfg);

  std::ofstream metrics(fs::path(out_dir) / "metrics.jsonl", std::ios::trunc);
  if (!metrics) throw IoError("cannot open metrics stream in " + out_dir);
  MetricsSink sink = [&metrics](const nlohmann::ordered_json& rec) {
    metrics << rec.dump() << '\n';
    metrics.flush();
  };
  const SearchResult result = run_search(cfg, ds, sink);
  write_text(fs::path(out_dir) / "search_result.json",
             search_result_to_json(result, cfg).dump(2) + "\n");
  write_text(fs::path(out_dir) / "architecture.json",
             architecture_to_json(result.architecture).dump(2) + "\n");
}

void run_oracle_sweep_dir(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  RunLock lock(out_dir);
  write_resolved_config(cfg, out_dir);
  const Dataset ds = dataset_for(cfg);
  const SweepResult sweep = brute_force_best(cfg, ds);
  write_text(fs::path(out_dir) / "oracle_sweep.json", sweep_to_json(sweep, cfg).dump(2) + "\n");

  std::ostringstream table;
  table << "choice      cost  feasible  val_objective  test_metrics\n";
  for (std::size_t i = 0; i < sweep.reports.size(); ++i) {
    const auto& r = sweep.reports[i];
    table << "(" << r.choice.s << "," << r.choice.t << ")  " << r.cost << "  "
          << (r.feasible ? "yes" : "no ") << "  ";
    if (r.val_objective) {
      table << *r.val_objective << "  ";
      for (const auto& [k, v] : r.test_metrics) table << k << "=" << v << " ";
    } else {
      table << "-";
    }
    if (static_cast<int>(i) == sweep.best_index) table << "  <- best";
    table << "\n";
  }
  write_text(fs::path(out_dir) / "oracle_sweep.txt", table.str());
}

void run_evaluate_dir(const RunConfig& cfg, const std::string& architecture_path,
                      const std::string& out_dir) {
  fs::create_directories(out_dir);
  RunLock lock(out_dir);
  write_resolved_config(cfg, out_dir);
  const Dataset ds = dataset_for(cfg);

  std::ifstream is(architecture_path);
  if (!is) throw IoError("cannot open architecture file: " + architecture_path);
  nlohmann::json arch;
  try {
    is >> arch;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("architecture file is not valid JSON: " + std::string(e.what()));
  }
  if (!arch.is_array() || arch.size() != ds.features.size())
    throw ConfigError("architecture must list one entry per dataset feature");
  std::vector<Mes> mes_list;
  for (std::size_t f = 0; f < ds.features.size(); ++f) {
    const auto& fa = arch[f];
    if (fa.value("feature", "") != ds.features[f].name)
      throw ConfigError("architecture feature order does not match the dataset");
    Mes mes;
    if (!fa.value("removed", false))
      for (const auto& e : fa.at("mes"))
        mes.entries.push_back({e.at(0).get<std::int64_t>(), e.at(1).get<std::int64_t>()});
    mes_list.push_back(std::move(mes));
  }

  const int main_steps = cfg.train.warmup + ((cfg.train.steps - cfg.train.warmup) *
                                             cfg.train.alternation_ratio) /
                                                (cfg.train.alternation_ratio + 1);
  const int steps = cfg.oracle.steps > 0 ? cfg.oracle.steps : main_steps;
  const auto fixed = train_fixed_architecture(cfg, ds, mes_list, steps,
                                              mix_seed(cfg.seed, kFixedArchTrainSalt));
  nlohmann::ordered_json j;
  j["architecture_path"] = architecture_path;
  j["steps"] = steps;
  j["val_objective"] = fixed.val_objective;
  j["test_metrics"] = fixed.test_metrics;
  write_text(fs::path(out_dir) / "evaluation.json", j.dump(2) + "\n");
}

}  // namespace nis
