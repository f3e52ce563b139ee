#pragma once

#include <charconv>
#include <ostream>
#include <string>
#include <vector>

#include "dbfl/scenarios.hpp"

namespace dbfl {

inline constexpr const char* kTraceHeader = "round,scenario,accuracy,participants,total_energy,per_node_energy_json";

// Shortest round-trip decimal form.
inline std::string format_number(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

inline std::string per_node_energy_json(const ScenarioResult& res, const RoundTrace& t) {
  std::string s = "{";
  for (std::size_t i = 0; i < res.device_ids.size(); ++i) {
    if (i) s += ',';
    s += '"' + std::to_string(res.device_ids[i]) + "\":" + format_number(from_ticks(t.node_energy[i]));
  }
  return s + '}';
}

// One row per round. Energy columns are the energy spent in that round;
// participants are device ids joined by ';'.
inline void write_trace_csv(std::ostream& os, const ScenarioResult& res) {
  os << kTraceHeader << '\n';
  for (const auto& t : res.rounds) {
    std::string ids;
    for (std::size_t k = 0; k < t.participants.size(); ++k) {
      if (k) ids += ';';
      ids += std::to_string(t.participants[k]);
    }
    os << t.round << ',' << to_string(res.kind) << ',' << format_number(t.accuracy) << ',' << ids << ','
       << format_number(from_ticks(t.total_energy())) << ',' << csv_quote(per_node_energy_json(res, t)) << '\n';
  }
}

inline constexpr const char* kSummaryHeader = "scenario,rounds,final_accuracy,total_energy";

inline void write_summary_csv(std::ostream& os, const std::vector<ScenarioResult>& results) {
  os << kSummaryHeader << '\n';
  for (const auto& r : results) {
    os << to_string(r.kind) << ',' << r.rounds.size() << ',' << format_number(r.final_accuracy()) << ','
       << format_number(from_ticks(r.total_energy())) << '\n';
  }
}

inline constexpr const char* kSweepHeader = "delay_per_meter_s,scenario,total_energy";

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << kSweepHeader << '\n';
  for (const auto& r : rows) {
    os << format_number(r.delay_per_meter_s) << ',' << to_string(r.kind) << ','
       << format_number(from_ticks(r.total_energy)) << '\n';
  }
}

}  // namespace dbfl
