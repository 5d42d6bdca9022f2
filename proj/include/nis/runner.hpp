#pragma once

#include <string>

#include "nis/config.hpp"
#include "nis/tasks.hpp"

namespace nis {

// Run-directory operations behind the C API. Each acquires the directory's
// lock file while writing; artifacts are overwritten in place so re-running
// with identical inputs reproduces identical outputs.
//
// Fixed artifact names: config.resolved.json, dataset.bin (gen-data),
// metrics.jsonl, search_result.json, architecture.json, oracle_sweep.json,
// oracle_sweep.txt, evaluation.json.

// Materializes the dataset: reads cfg.data.cache when the file exists,
// otherwise generates from config+seed (and fills the cache when set).
Dataset dataset_for(const RunConfig& cfg);

void run_gen_data(const RunConfig& cfg, const std::string& out_dir);
void run_search_dir(const RunConfig& cfg, const std::string& out_dir);
void run_oracle_sweep_dir(const RunConfig& cfg, const std::string& out_dir);
void run_evaluate_dir(const RunConfig& cfg, const std::string& architecture_path,
                      const std::string& out_dir);

}  // namespace nis
