#include "nis/nis_c.h"

#include <string>
#include <vector>

#include "nis/config.hpp"
#include "nis/errors.hpp"
#include "nis/report.hpp"
#include "nis/runner.hpp"

namespace {

thread_local std::string g_last_error;

template <typename Fn>
nis_status wrap(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return NIS_OK;
  } catch (const nis::ConfigError& e) {
    g_last_error = e.what();
    return NIS_E_CONFIG;
  } catch (const nis::IoError& e) {
    g_last_error = e.what();
    return NIS_E_IO;
  } catch (const nis::ContractViolation& e) {
    g_last_error = e.what();
    return NIS_E_INVALID;
  } catch (const nis::NumericError& e) {
    g_last_error = e.what();
    return NIS_E_NUMERIC;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return NIS_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return NIS_E_INTERNAL;
  }
}

nis_status require(bool ok, const char* message) {
  if (ok) return NIS_OK;
  g_last_error = message;
  return NIS_E_INVALID;
}

}  // namespace

struct nis_config {
  nis::RunConfig cfg;
};

extern "C" {

nis_status nis_config_load(const char* path, nis_config** out) {
  if (require(path && out, "nis_config_load: null argument") != NIS_OK) return NIS_E_INVALID;
  *out = nullptr;
  return wrap([&] { *out = new nis_config{nis::load_config(path)}; });
}

nis_status nis_config_load_json(const char* json_text, nis_config** out) {
  if (require(json_text && out, "nis_config_load_json: null argument") != NIS_OK)
    return NIS_E_INVALID;
  *out = nullptr;
  return wrap([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
      throw nis::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    *out = new nis_config{nis::parse_config(j)};
  });
}

void nis_config_free(nis_config* cfg) { delete cfg; }

nis_status nis_config_set_seed(nis_config* cfg, uint64_t seed) {
  if (require(cfg != nullptr, "nis_config_set_seed: null config") != NIS_OK) return NIS_E_INVALID;
  cfg->cfg.seed = seed;
  return NIS_OK;
}

nis_status nis_run_gen_data(const nis_config* cfg, const char* out_dir) {
  if (require(cfg && out_dir, "nis_run_gen_data: null argument") != NIS_OK) return NIS_E_INVALID;
  return wrap([&] { nis::run_gen_data(cfg->cfg, out_dir); });
}

nis_status nis_run_search(const nis_config* cfg, const char* out_dir) {
  if (require(cfg && out_dir, "nis_run_search: null argument") != NIS_OK) return NIS_E_INVALID;
  return wrap([&] { nis::run_search_dir(cfg->cfg, out_dir); });
}

nis_status nis_run_oracle_sweep(const nis_config* cfg, const char* out_dir) {
  if (require(cfg && out_dir, "nis_run_oracle_sweep: null argument") != NIS_OK)
    return NIS_E_INVALID;
  return wrap([&] { nis::run_oracle_sweep_dir(cfg->cfg, out_dir); });
}

nis_status nis_run_evaluate(const nis_config* cfg, const char* architecture_path,
                            const char* out_dir) {
  if (require(cfg && architecture_path && out_dir, "nis_run_evaluate: null argument") != NIS_OK)
    return NIS_E_INVALID;
  return wrap([&] { nis::run_evaluate_dir(cfg->cfg, architecture_path, out_dir); });
}

nis_status nis_report(const char* const* run_dirs, size_t n_dirs, const char* out_dir) {
  if (require(run_dirs && out_dir && n_dirs > 0, "nis_report: need at least one run directory") !=
      NIS_OK)
    return NIS_E_INVALID;
  return wrap([&] {
    std::vector<std::string> dirs(run_dirs, run_dirs + n_dirs);
    nis::build_report(dirs, out_dir);
  });
}

const char* nis_last_error(void) { return g_last_error.c_str(); }

const char* nis_version(void) { return "0.1.0"; }

}  // extern "C"
