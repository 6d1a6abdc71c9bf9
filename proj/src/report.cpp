#include "cnv/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace cnv {

namespace {

std::string fmt_double(double v, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::vector<std::string> row_fields(const RunRecord& r) {
  return {r.layer,
          to_string(r.report.arch),
          std::to_string(r.report.cycles),
          std::to_string(r.report.macs_performed),
          std::to_string(r.report.macs_skipped),
          std::to_string(r.report.broadcasts),
          std::to_string(r.report.footprint_bits),
          fmt_double(r.report.utilization, 6),
          fmt_double(r.speedup, 6),
          r.equivalent ? "PASS" : "FAIL"};
}

}  // namespace

nlohmann::json to_json(const CycleReport& r) {
  return {
      {"arch", to_string(r.arch)},
      {"cycles", r.cycles},
      {"macs_performed", r.macs_performed},
      {"macs_skipped", r.macs_skipped},
      {"broadcasts", r.broadcasts},
      {"footprint_bits", r.footprint_bits},
      {"utilization", r.utilization},
  };
}

CycleReport cycle_report_from_json(const nlohmann::json& j) {
  CycleReport r;
  r.arch = parse_arch(j.at("arch").get<std::string>());
  r.cycles = j.at("cycles").get<std::uint64_t>();
  r.macs_performed = j.at("macs_performed").get<std::uint64_t>();
  r.macs_skipped = j.at("macs_skipped").get<std::uint64_t>();
  r.broadcasts = j.at("broadcasts").get<std::uint64_t>();
  r.footprint_bits = j.at("footprint_bits").get<std::uint64_t>();
  r.utilization = j.at("utilization").get<double>();
  return r;
}

nlohmann::json run_report_json(const std::vector<RunRecord>& records, const nlohmann::json& config) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : records) {
    auto row = to_json(r.report);
    row["layer"] = r.layer;
    row["speedup"] = r.speedup;
    row["verdict"] = r.equivalent ? "PASS" : "FAIL";
    rows.push_back(std::move(row));
  }
  return {{"schema_version", kReportSchemaVersion}, {"config", config}, {"reports", rows}};
}

std::vector<RunRecord> records_from_json(const nlohmann::json& report) {
  if (report.value("schema_version", 0) != kReportSchemaVersion) {
    throw std::runtime_error("unsupported report schema version");
  }
  std::vector<RunRecord> out;
  for (const auto& row : report.at("reports")) {
    RunRecord r;
    r.layer = row.at("layer").get<std::string>();
    r.report = cycle_report_from_json(row);
    r.speedup = row.at("speedup").get<double>();
    r.equivalent = row.at("verdict").get<std::string>() == "PASS";
    out.push_back(std::move(r));
  }
  return out;
}

std::string csv_header() {
  std::string s;
  for (std::size_t k = 0; k < kCsvColumns.size(); ++k) {
    if (k) s += ',';
    s += kCsvColumns[k];
  }
  return s;
}

std::string csv_row(const RunRecord& r) {
  const auto fields = row_fields(r);
  std::string s;
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) s += ',';
    s += fields[k];
  }
  return s;
}

std::string to_csv(const std::vector<RunRecord>& records) {
  std::string s = csv_header() + '\n';
  for (const auto& r : records) s += csv_row(r) + '\n';
  return s;
}

std::string console_table(const std::vector<RunRecord>& records) {
  std::vector<std::vector<std::string>> rows;
  rows.emplace_back(kCsvColumns.begin(), kCsvColumns.end());
  for (const auto& r : records) rows.push_back(row_fields(r));
  std::vector<std::size_t> width(kCsvColumns.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) width[k] = std::max(width[k], row[k].size());
  }
  std::ostringstream os;
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) os << "  ";
      // Text columns left-aligned, numbers right-aligned.
      if (k < 2 || k + 1 == row.size()) {
        os << std::left << std::setw(static_cast<int>(width[k])) << row[k];
      } else {
        os << std::right << std::setw(static_cast<int>(width[k])) << row[k];
      }
    }
    os << '\n';
  }
  return os.str();
}

double geometric_mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double log_sum = 0.0;
  for (double x : xs) log_sum += std::log(x);
  return std::exp(log_sum / static_cast<double>(xs.size()));
}

Comparison compare_reports(const std::vector<std::pair<std::string, nlohmann::json>>& reports) {
  Comparison c;
  std::vector<std::pair<Arch, std::vector<double>>> speedups;
  for (const auto& [source, json] : reports) {
    for (auto r : records_from_json(json)) {
      if (r.layer.empty()) r.layer = source;
      auto it = std::find_if(speedups.begin(), speedups.end(),
                             [&](const auto& p) { return p.first == r.report.arch; });
      if (it == speedups.end()) {
        speedups.push_back({r.report.arch, {}});
        it = std::prev(speedups.end());
      }
      it->second.push_back(r.speedup);
      c.rows.push_back(std::move(r));
    }
  }
  for (const auto& [arch, xs] : speedups) c.geomean_speedup.push_back({arch, geometric_mean(xs)});
  return c;
}

std::string comparison_csv(const Comparison& c) {
  std::string s = to_csv(c.rows);
  for (const auto& [arch, g] : c.geomean_speedup) {
    s += "GEOMEAN," + to_string(arch) + ",,,,,,," + fmt_double(g, 6) + ",\n";
  }
  return s;
}

}  // namespace cnv
