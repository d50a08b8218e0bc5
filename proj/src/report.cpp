#include "pdsf/report.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace pdsf {

std::string format_double(double x) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), ptr);
}

std::string report_to_json(const ExperimentReport& report) {
  nlohmann::ordered_json j;
  j["experiment"] = report.experiment;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.config_echo) cfg[k] = v;
  j["config"] = cfg;
  nlohmann::ordered_json tables = nlohmann::ordered_json::array();
  for (const Table& t : report.tables) {
    nlohmann::ordered_json jt;
    jt["name"] = t.name;
    jt["columns"] = t.columns;
    jt["rows"] = t.rows;
    tables.push_back(jt);
  }
  j["tables"] = tables;
  nlohmann::ordered_json verdicts = nlohmann::ordered_json::array();
  for (const Verdict& v : report.verdicts) {
    nlohmann::ordered_json jv;
    jv["name"] = v.name;
    jv["pass"] = v.pass;
    jv["value"] = v.value;
    jv["threshold"] = v.threshold;
    jv["detail"] = v.detail;
    verdicts.push_back(jv);
  }
  j["verdicts"] = verdicts;
  j["notes"] = report.notes;
  j["all_pass"] = report.all_pass();
  return j.dump(2) + "\n";
}

std::string table_to_csv(const Table& table) {
  std::ostringstream os;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) os << ',';
    os << table.columns[i];
  }
  os << "\r\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << format_double(row[i]);
    }
    os << "\r\n";
  }
  return os.str();
}

std::string render_text(const ExperimentReport& report) {
  std::ostringstream os;
  os << "experiment: " << report.experiment << "\n";
  for (const auto& [k, v] : report.config_echo) os << "  " << k << " = " << v << "\n";
  for (const Verdict& v : report.verdicts) {
    os << (v.pass ? "[PASS] " : "[FAIL] ") << v.name << ": value=" << format_double(v.value)
       << " threshold=" << format_double(v.threshold);
    if (!v.detail.empty()) os << " (" << v.detail << ")";
    os << "\n";
  }
  for (const std::string& n : report.notes) os << "note: " << n << "\n";
  return os.str();
}

std::vector<std::string> write_report_files(const ExperimentReport& report,
                                            const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::string d, seed;
  for (const auto& [k, v] : report.config_echo) {
    if (k == "field.dimension") d = v;
    if (k == "field.seed") seed = v;
  }
  const std::string stem = report.experiment + "_d" + d + "_seed" + seed;
  std::vector<std::string> written;
  const fs::path json_path = fs::path(out_dir) / (stem + ".report.json");
  {
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + json_path.string());
    out << report_to_json(report);
  }
  written.push_back(json_path.string());
  for (const Table& t : report.tables) {
    const fs::path csv_path = fs::path(out_dir) / (stem + "_" + t.name + ".csv");
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + csv_path.string());
    out << table_to_csv(t);
    written.push_back(csv_path.string());
  }
  return written;
}

}  // namespace pdsf
