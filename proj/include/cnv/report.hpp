#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cnv/sim.hpp"

namespace cnv {

inline constexpr int kReportSchemaVersion = 1;

// Fixed CSV column order for run and compare outputs.
inline constexpr std::array<std::string_view, 10> kCsvColumns = {
    "layer",      "arch",           "cycles",      "macs_performed", "macs_skipped",
    "broadcasts", "footprint_bits", "utilization", "speedup",        "verdict"};

// One architecture's result on one layer.
struct RunRecord {
  std::string layer;
  CycleReport report;
  double speedup = 1.0;  // baseline cycles / these cycles
  bool equivalent = true;
};

// Flat record: arch, cycles, macs_performed, macs_skipped, broadcasts,
// footprint_bits, utilization.
nlohmann::json to_json(const CycleReport& r);
CycleReport cycle_report_from_json(const nlohmann::json& j);

nlohmann::json run_report_json(const std::vector<RunRecord>& records, const nlohmann::json& config);
std::vector<RunRecord> records_from_json(const nlohmann::json& report);

std::string csv_header();
std::string csv_row(const RunRecord& r);
std::string to_csv(const std::vector<RunRecord>& records);

// Plain aligned text table.
std::string console_table(const std::vector<RunRecord>& records);

struct Comparison {
  std::vector<RunRecord> rows;
  // Per architecture, in first-seen order.
  std::vector<std::pair<Arch, double>> geomean_speedup;
};

Comparison compare_reports(const std::vector<std::pair<std::string, nlohmann::json>>& reports);
// Rows followed by one GEOMEAN row per architecture.
std::string comparison_csv(const Comparison& c);

double geometric_mean(const std::vector<double>& xs);

}  // namespace cnv
