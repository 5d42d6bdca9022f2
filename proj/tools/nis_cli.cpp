// Command-line front end; talks to the library exclusively through the C API.
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nis/nis_c.h"

namespace {

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 8);
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

const char* status_name(nis_status s) {
  switch (s) {
    case NIS_OK: return "ok";
    case NIS_E_CONFIG: return "config";
    case NIS_E_IO: return "io";
    case NIS_E_INVALID: return "invalid";
    case NIS_E_NUMERIC: return "numeric";
    default: return "internal";
  }
}

// Failures print one machine-readable record to stderr. Config and file
// problems exit 2, everything else 1.
int fail(nis_status s) {
  std::fprintf(stderr, "{\"error\":{\"code\":%d,\"status\":\"%s\",\"message\":\"%s\"}}\n",
               static_cast<int>(s), status_name(s), json_escape(nis_last_error()).c_str());
  return s == NIS_E_CONFIG || s == NIS_E_IO ? 2 : 1;
}

struct ConfigHandle {
  nis_config* cfg = nullptr;
  ~ConfigHandle() { nis_config_free(cfg); }
};

int load_config(const std::string& path, bool has_seed, std::uint64_t seed, ConfigHandle& out) {
  nis_status s = nis_config_load(path.c_str(), &out.cfg);
  if (s != NIS_OK) return fail(s);
  if (has_seed) {
    s = nis_config_set_seed(out.cfg, seed);
    if (s != NIS_OK) return fail(s);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural input search: joint embedding-configuration search"};
  app.require_subcommand(1);

  std::string config_path, out_dir, architecture_path;
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::vector<std::string> run_dirs;

  auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
    if (needs_config)
      cmd->add_option("--config", config_path, "run config file (JSON)")->required();
    cmd->add_option("--out", out_dir, "output directory")->required();
    cmd->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
      has_seed = true;
    });
  };

  auto* gen = app.add_subcommand("gen-data", "generate and cache the synthetic dataset");
  add_common(gen);
  auto* search = app.add_subcommand("search", "run the joint model + controller search");
  add_common(search);
  auto* sweep = app.add_subcommand("oracle-sweep", "train every feasible SE candidate");
  add_common(sweep);
  auto* eval = app.add_subcommand("evaluate", "retrain and score an exported architecture");
  add_common(eval);
  eval->add_option("--architecture", architecture_path, "architecture.json from a search run")
      ->required();
  auto* report = app.add_subcommand("report", "comparison tables over completed runs");
  report->add_option("--out", out_dir, "output directory")->required();
  report->add_option("runs", run_dirs, "run directories")->required();

  CLI11_PARSE(app, argc, argv);

  if (report->parsed()) {
    std::vector<const char*> dirs;
    for (const auto& d : run_dirs) dirs.push_back(d.c_str());
    const nis_status s = nis_report(dirs.data(), dirs.size(), out_dir.c_str());
    return s == NIS_OK ? 0 : fail(s);
  }

  ConfigHandle handle;
  if (const int rc = load_config(config_path, has_seed, seed, handle); rc != 0) return rc;

  nis_status s = NIS_OK;
  if (gen->parsed()) s = nis_run_gen_data(handle.cfg, out_dir.c_str());
  else if (search->parsed()) s = nis_run_search(handle.cfg, out_dir.c_str());
  else if (sweep->parsed()) s = nis_run_oracle_sweep(handle.cfg, out_dir.c_str());
  else if (eval->parsed()) s = nis_run_evaluate(handle.cfg, architecture_path.c_str(), out_dir.c_str());
  return s == NIS_OK ? 0 : fail(s);
}
