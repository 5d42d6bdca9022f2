#include "nis/report.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nis/errors.hpp"

namespace nis {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<json> read_json_file(const fs::path& p) {
  std::ifstream is(p);
  if (!is) return std::nullopt;
  try {
    json j;
    is >> j;
    return j;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

std::string choice_str(const json& c) {
  std::string s = "(";
  for (std::size_t i = 0; i < c.size(); ++i) s += (i ? "," : "") + c[i].dump();
  return s + ")";
}

}  // namespace

std::string build_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  if (run_dirs.empty()) throw ContractViolation("report: at least one run directory required");
  fs::create_directories(out_dir);

  struct Run {
    std::string name;
    json result;
  };
  std::vector<Run> retrieval_runs, ranking_runs;
  std::vector<std::pair<std::string, json>> sweeps;
  std::vector<std::string> incomplete;

  for (const auto& dir : run_dirs) {
    const std::string name = fs::path(dir).filename().string();
    const auto result = read_json_file(fs::path(dir) / "search_result.json");
    const auto sweep = read_json_file(fs::path(dir) / "oracle_sweep.json");
    if (sweep) sweeps.emplace_back(name, *sweep);
    if (result) {
      if (result->value("task", "retrieval") == "retrieval")
        retrieval_runs.push_back({name, *result});
      else
        ranking_runs.push_back({name, *result});
    } else if (!sweep) {
      incomplete.push_back(dir);
    }
  }

  std::ostringstream md;
  md << "# Run comparison\n\n";
  if (!retrieval_runs.empty()) {
    md << "| Model | Cost | Recall@1 (%) | Recall@5 (%) |\n|---|---|---|---|\n";
    for (const auto& r : retrieval_runs) {
      const json& m = r.result.at("test_metrics");
      md << "| " << r.name << " (" << r.result.value("search_mode", "?") << ") | "
         << r.result.at("total_cost").dump() << " | "
         << fmt(m.value("recall_at_1", 0.0) * 100.0) << " | "
         << fmt(m.value("recall_at_5", 0.0) * 100.0) << " |\n";
    }
    md << "\n";
  }
  if (!ranking_runs.empty()) {
    md << "| Model | Cost | AUC (%) |\n|---|---|---|\n";
    for (const auto& r : ranking_runs) {
      const json& m = r.result.at("test_metrics");
      md << "| " << r.name << " (" << r.result.value("search_mode", "?") << ") | "
         << r.result.at("total_cost").dump() << " | " << fmt(m.value("auc", 0.0) * 100.0)
         << " |\n";
    }
    md << "\n";
  }

  for (const auto& [name, sweep] : sweeps) {
    md << "## Oracle sweep: " << name << "\n\n";
    md << "budget " << sweep.at("budget").dump() << ", " << sweep.at("steps_per_candidate").dump()
       << " steps per candidate\n\n";
    md << "| Choice | Cost | Feasible | Val objective | Converged searches |\n"
       << "|---|---|---|---|---|\n";
    // Rows sorted by trained objective, untrained at the bottom.
    std::vector<const json*> rows;
    for (const auto& row : sweep.at("candidates")) rows.push_back(&row);
    std::stable_sort(rows.begin(), rows.end(), [](const json* a, const json* b) {
      const bool ta = !a->at("val_objective").is_null(), tb = !b->at("val_objective").is_null();
      if (ta != tb) return ta;
      if (!ta) return false;
      return a->at("val_objective").get<double>() > b->at("val_objective").get<double>();
    });
    for (const json* row : rows) {
      std::string marks;
      for (const auto& runs : {&retrieval_runs, &ranking_runs})
        for (const auto& r : *runs) {
          if (r.result.value("search_mode", "") != "se") continue;
          for (const auto& fa : r.result.at("architecture")) {
            if (fa.value("removed", false)) {
              if (row->at("choice") == json::array({0, 0})) marks += r.name + " ";
            } else if (fa.contains("choice") && fa.at("choice") == row->at("choice")) {
              marks += r.name + " ";
            }
          }
        }
      md << "| " << choice_str(row->at("choice")) << " | " << row->at("cost").dump() << " | "
         << (row->at("feasible").get<bool>() ? "yes" : "no") << " | "
         << (row->at("val_objective").is_null() ? std::string("-")
                                                : fmt(row->at("val_objective").get<double>()))
         << " | " << marks << " |\n";
    }
    md << "\n";
  }

  if (!incomplete.empty()) {
    md << "## Incomplete runs\n\n";
    for (const auto& dir : incomplete) md << "- " << dir << " (missing search_result.json)\n";
    md << "\n";
  }

  // Step series straight off the metrics streams.
  std::ofstream csv(fs::path(out_dir) / "series.csv");
  csv << "run,step,phase,loss,reward,cost\n";
  for (const auto& dir : run_dirs) {
    std::ifstream ms(fs::path(dir) / "metrics.jsonl");
    if (!ms) continue;
    const std::string name = fs::path(dir).filename().string();
    std::string line;
    while (std::getline(ms, line)) {
      if (line.empty()) continue;
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::exception&) {
        continue;
      }
      if (!rec.contains("step") || !rec.contains("phase")) continue;
      csv << name << ',' << rec.at("step").dump() << ',' << rec.at("phase").get<std::string>()
          << ',' << (rec.contains("loss") ? rec.at("loss").dump() : "") << ','
          << (rec.contains("reward") ? rec.at("reward").dump() : "") << ','
          << (rec.contains("cost") ? rec.at("cost").dump() : "") << '\n';
    }
  }

  const std::string text = md.str();
  std::ofstream out(fs::path(out_dir) / "report.md");
  if (!out) throw IoError("cannot write report to " + out_dir);
  out << text;
  return text;
}

}  // namespace nis
