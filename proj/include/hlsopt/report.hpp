#pragma once

// Machine- and human-readable reports for the analysis results and the
// per-stage progression of a recipe run.

#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "hlsopt/analysis.hpp"
#include "hlsopt/equivalence.hpp"
#include "hlsopt/transform/core.hpp"

namespace hlsopt {

struct StageReport {
  int stage = 0;
  TransformStep step;
  PerfReport before;
  PerfReport after;
  double fold = 1.0;         // steady-state fold: (I*N before) / (I*N after)
  double cycles_fold = 1.0;  // full modeled cycles before / after
  bool verified = false;
  Verdict verdict;
  std::vector<std::string> notes;
};

namespace report_detail {

inline nlohmann::json resources_json(const ResourceEstimate& r) {
  nlohmann::json j;
  j["onchip_bits"] = r.onchip_bits;
  j["register_elems"] = r.register_elems;
  j["fifo_count"] = r.fifo_count;
  j["offchip_interfaces"] = r.offchip_banks.size();
  nlohmann::json units = nlohmann::json::object();
  for (const auto& [op, n] : r.compute_units) units[op] = n;
  j["compute_units"] = units;
  if (!r.over_capacity.empty()) j["over_capacity"] = r.over_capacity;
  return j;
}

inline long long dominant_ii(const PerfReport& r) {
  const RegionPerf* d = r.dominant();
  return d ? d->ii : 1;
}

}  // namespace report_detail

inline nlohmann::json to_json(const PerfReport& r) {
  nlohmann::json j;
  j["total_cycles"] = r.total_cycles;
  j["steady_cycles"] = r.steady_cycles;
  j["seconds"] = r.seconds;
  j["offchip_bytes"] = r.offchip_bytes;
  j["resources"] = report_detail::resources_json(r.resources);
  nlohmann::json loops = nlohmann::json::array();
  for (const auto& l : r.loops) {
    nlohmann::json lj;
    lj["loop"] = l.loop_id;
    lj["trip_count"] = l.trip;
    lj["latency"] = l.latency;
    lj["ii"] = l.ii;
    lj["ii_reason"] = l.ii_reason;
    lj["cycles"] = l.cycles;
    lj["condition_depth"] = l.condition_depth;
    loops.push_back(lj);
  }
  j["loops"] = loops;
  if (!r.notes.empty()) j["notes"] = r.notes;
  return j;
}

inline std::string perf_text(const PerfReport& r) {
  std::ostringstream os;
  os << "total cycles: " << r.total_cycles << "  (steady " << r.steady_cycles
     << ", " << std::scientific << std::setprecision(3) << r.seconds
     << " s at the configured clock)\n";
  os << std::defaultfloat;
  os << "off-chip traffic: " << r.offchip_bytes << " bytes\n";
  os << "resources: " << r.resources.onchip_bits << " on-chip bits, "
     << r.resources.fifo_count << " FIFOs, "
     << r.resources.offchip_banks.size() << " memory interface(s)";
  for (const auto& [op, n] : r.resources.compute_units)
    os << ", " << op << " x" << n;
  os << "\n";
  for (const auto& warn : r.resources.over_capacity)
    os << "  over capacity: " << warn << "\n";
  if (!r.loops.empty()) {
    os << "pipelined loops:\n";
    for (const auto& l : r.loops) {
      os << "  " << std::left << std::setw(28) << l.loop_id << " N="
         << std::setw(9) << l.trip << " L=" << std::setw(5) << l.latency
         << " II=" << std::setw(4) << l.ii << " C=" << std::setw(10)
         << l.cycles << " depth=" << l.condition_depth;
      if (l.ii_reason != "none") os << "  [" << l.ii_reason << "]";
      os << "\n";
    }
  }
  return os.str();
}

inline nlohmann::json to_json(const StageReport& r) {
  nlohmann::json j;
  j["stage"] = r.stage;
  std::string t = r.step.name + " " + r.step.target;
  for (const auto& [key, value] : r.step.params) t += " " + key + "=" + value;
  j["transform"] = t;
  j["ii_before"] = report_detail::dominant_ii(r.before);
  j["ii_after"] = report_detail::dominant_ii(r.after);
  j["cycles_before"] = r.before.total_cycles;
  j["cycles_after"] = r.after.total_cycles;
  j["steady_before"] = r.before.steady_cycles;
  j["steady_after"] = r.after.steady_cycles;
  j["fold"] = r.fold;
  j["cycles_fold"] = r.cycles_fold;
  j["resources_before"] = report_detail::resources_json(r.before.resources);
  j["resources_after"] = report_detail::resources_json(r.after.resources);
  j["verdict"] = r.verified ? r.verdict.summary() : "not verified";
  if (!r.notes.empty()) j["notes"] = r.notes;
  return j;
}

inline std::string stage_text(const StageReport& r) {
  std::ostringstream os;
  std::string t = r.step.name + " " + r.step.target;
  for (const auto& [key, value] : r.step.params) t += " " + key + "=" + value;
  os << "stage " << std::left << std::setw(2) << r.stage << " " << std::setw(44)
     << t << " II " << std::setw(4) << report_detail::dominant_ii(r.before)
     << "-> " << std::setw(4) << report_detail::dominant_ii(r.after)
     << " cycles " << std::setw(10) << r.before.total_cycles << "-> "
     << std::setw(10) << r.after.total_cycles << " fold " << std::fixed
     << std::setprecision(2) << r.fold;
  os << "  " << (r.verified ? r.verdict.summary() : "not verified") << "\n";
  for (const auto& n : r.notes) os << "    - " << n << "\n";
  return os.str();
}

}  // namespace hlsopt
