#pragma once

#include <string>
#include <utility>
#include <vector>

// Experiment reports: machine JSON plus one RFC-4180 CSV per table. Artifacts
// carry the resolved semantic config and no execution-only state (worker
// count, output paths, timestamps), so reruns are byte-identical.

namespace pdsf {

struct Verdict {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ExperimentReport {
  std::string experiment;
  std::vector<std::pair<std::string, std::string>> config_echo;
  std::vector<Table> tables;
  std::vector<Verdict> verdicts;
  std::vector<std::string> notes;  // shortfalls, censoring, diagnostics

  bool all_pass() const {
    for (const Verdict& v : verdicts)
      if (!v.pass) return false;
    return true;
  }
};

std::string format_double(double x);  // shortest round-trip decimal
std::string report_to_json(const ExperimentReport& report);
std::string table_to_csv(const Table& table);
std::string render_text(const ExperimentReport& report);  // human-readable summary

// Writes <experiment>_d<d>_seed<seed>.report.json and one CSV per table into
// out_dir; returns the written paths.
std::vector<std::string> write_report_files(const ExperimentReport& report,
                                            const std::string& out_dir);

}  // namespace pdsf
