#pragma once

#include <optional>
#include <string>
#include <vector>

namespace scrl::report {

struct ReportResult {
    std::string markdown;
    std::string csv;
    std::vector<std::string> warnings;  // one per skipped run
    // Spearman rank correlation between RoI-probe accuracy and the
    // user-supplied downstream metric, when one was given.
    std::optional<double> spearman;

    // Parallel arrays for the accuracy bar chart.
    std::vector<std::string> run_names;
    std::vector<double> roi_accuracies;
};

// Collates run directories (each holding run.json and, when evaluated,
// eval_roi.json / eval_global.json) into one table. Columns show only
// the config keys that differ across runs; rows sort by those deltas
// and then by directory name. Runs with a missing or unreadable
// manifest are skipped with a warning.
//
// downstream_csv, when non-empty, names a two-column CSV
// (run_name,metric) supplying an external metric to correlate with the
// RoI accuracy.
ReportResult ablation_report(const std::vector<std::string>& run_dirs,
                             const std::string& downstream_csv = "");

// Spearman rank correlation with average ranks for ties.
double spearman_rank_correlation(const std::vector<double>& a,
                                 const std::vector<double>& b);

}  // namespace scrl::report
