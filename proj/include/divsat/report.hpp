#pragma once

#include <algorithm>
#include <cstddef>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "divsat/analysis.hpp"
#include "divsat/diversity.hpp"
#include "divsat/mmd.hpp"

#ifndef DIVSAT_VERSION
#define DIVSAT_VERSION "0.1.0"
#endif

namespace divsat {

inline constexpr const char* kVersion = DIVSAT_VERSION;

inline nlohmann::json to_json(const AxisStats& a) {
  return {{"means", a.means}, {"stddevs", a.stddevs}};
}

inline nlohmann::json to_json(const DiversityScore& s) {
  return {{"std_metric", s.std_metric}, {"centroid_metric", s.centroid_metric},
          {"centroid", s.centroid},     {"axis_stats", to_json(s.axes)},
          {"n", s.n},                   {"k", s.k}};
}

inline nlohmann::json to_json(const MmdEstimate& e) {
  return {{"mean", e.mean},
          {"stddev", e.stddev},
          {"repetitions", e.repetitions},
          {"bandwidth_used", e.bandwidth_used},
          {"sizes", {e.size_x, e.size_y}},
          {"normalized", e.normalized}};
}

inline nlohmann::json to_json(const CorrelationResult& c) {
  return {{"r", c.r}, {"p", c.p}, {"n", c.n}};
}

inline nlohmann::json to_json(const CorrelationReport& c) {
  return {{"text_vs_motion", to_json(c.text_motion)},
          {"text_vs_f1", to_json(c.text_f1)},
          {"motion_vs_f1", to_json(c.motion_f1)}};
}

inline nlohmann::json to_json(const DiversityImpactReport& r) {
  return {{"before", to_json(r.before)},
          {"after", to_json(r.after)},
          {"deltas", {{"std_metric", r.delta_std}, {"centroid_metric", r.delta_centroid}}}};
}

enum class OutputFormat { json, pretty };

/// Envelope around one command's result. Only `duration_ms` and `version`
/// vary between identical invocations.
struct RunReport {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json result = nlohmann::json::object();
  double duration_ms = 0.0;
  std::string version = kVersion;
};

inline nlohmann::json to_json(const RunReport& r) {
  return {{"command", r.command},
          {"config", r.config},
          {"result", r.result},
          {"duration_ms", r.duration_ms},
          {"version", r.version}};
}

namespace detail {

inline void flatten_scalars(const nlohmann::json& j, const std::string& prefix,
                            std::vector<std::pair<std::string, std::string>>& rows) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten_scalars(v, prefix.empty() ? k : prefix + "." + k, rows);
  } else if (j.is_array()) {
    const bool numeric = std::all_of(j.begin(), j.end(), [](const auto& e) { return e.is_number(); });
    if (numeric && j.size() > 8) {
      rows.emplace_back(prefix, "[" + std::to_string(j.size()) + " values]");
    } else if (numeric) {
      rows.emplace_back(prefix, j.dump());
    } else {
      for (std::size_t i = 0; i < j.size(); ++i)
        flatten_scalars(j[i], prefix + "[" + std::to_string(i) + "]", rows);
    }
  } else if (j.is_string()) {
    rows.emplace_back(prefix, j.get<std::string>());
  } else {
    rows.emplace_back(prefix, j.dump());
  }
}

}  // namespace detail

/// json: the whole report, keys sorted lexicographically at every level.
/// pretty: an aligned two-column table of the result's scalar fields.
inline std::string emit_report(const RunReport& report, OutputFormat format) {
  if (format == OutputFormat::json) return to_json(report).dump(2) + "\n";
  std::vector<std::pair<std::string, std::string>> rows;
  detail::flatten_scalars(report.result, "", rows);
  std::size_t width = 6;
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  std::ostringstream os;
  os << "divsat " << report.command << " (v" << report.version << ")\n";
  os << std::left << std::setw(static_cast<int>(width)) << "metric" << "  value\n";
  os << std::string(width, '-') << "  " << std::string(5, '-') << "\n";
  for (const auto& [k, v] : rows) os << std::left << std::setw(static_cast<int>(width)) << k << "  " << v << "\n";
  return os.str();
}

}  // namespace divsat
