#pragma once

#include <string>
#include <vector>

namespace nis {

// Builds the comparison document over completed run directories: one row per
// run mirroring the cost/metric table layout (Cost, Recall@1, Recall@5 for
// retrieval; Cost, AUC for ranking), a ranking table per oracle sweep with
// converged search choices marked, and a step-series CSV for plotting.
// Numbers are copied from the run artifacts, never recomputed. Returns the
// report text; writes <out_dir>/report.md and <out_dir>/series.csv.
std::string build_report(const std::vector<std::string>& run_dirs, const std::string& out_dir);

}  // namespace nis
