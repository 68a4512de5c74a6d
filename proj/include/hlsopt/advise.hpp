#pragma once

// The transformation cheat sheet: each catalog entry with the
// characteristics of its effect on the code and hardware, and the
// objectives it can target. `advise` answers "which transformations help
// with objective X", annotated with the characteristic row.
//
// Characteristic columns:
//   PL enables pipelining; RE increases data reuse; PR increases or exposes
//   parallelism; ME optimizes memory accesses; RS does NOT significantly
//   increase resources; RT does NOT significantly impair routing; SC does
//   NOT change the loop-nest schedule; CC does NOT significantly increase
//   code complexity.
// Marks: "+" positive, "+!" very positive, "(+)" situational positive,
//   "-" negative, "-!" very negative, "(-)" situational negative,
//   "~" context dependent, "." no effect.
// Objective columns:
//   LD resolve loop-carried dependencies; IC resolve interface contention;
//   RE increase data reuse; CU increase parallelism; BW increase memory
//   bandwidth; PL reduce pipelining overhead; RT improve routing;
//   RS reduce resource utilization.

#include <array>
#include <set>
#include <string>
#include <vector>

#include "hlsopt/support.hpp"

namespace hlsopt {

inline const std::array<std::string, 8>& characteristic_codes() {
  static const std::array<std::string, 8> codes = {"PL", "RE", "PR", "ME",
                                                   "RS", "RT", "SC", "CC"};
  return codes;
}

inline const std::array<std::string, 8>& objective_codes() {
  static const std::array<std::string, 8> codes = {"LD", "IC", "RE", "CU",
                                                   "BW", "PL", "RT", "RS"};
  return codes;
}

inline const std::array<std::string, 8>& objective_descriptions() {
  static const std::array<std::string, 8> text = {
      "resolve loop-carried dependencies",
      "resolve interface contention",
      "increase data reuse",
      "increase parallelism",
      "increase memory bandwidth available to kernel",
      "reduce pipelining overhead",
      "improve routing results",
      "reduce resource utilization"};
  return text;
}

struct TransformInfo {
  std::string name;
  std::string category;  // pipelining | scaling | memory
  std::array<const char*, 8> characteristics;  // PL RE PR ME RS RT SC CC
  std::array<bool, 8> objectives;              // LD IC RE CU BW PL RT RS
};

/// The catalog matrix, in catalog order.
inline const std::vector<TransformInfo>& transform_table() {
  static const std::vector<TransformInfo> table = {
      {"accumulation interleaving", "pipelining",
       {"+", ".", ".", "~", "-", ".", "-", "~"},
       {true, false, false, false, false, false, false, false}},
      {"delay buffering", "pipelining",
       {"+", "+", "(+)", "+", "-", "(-)", ".", "-"},
       {false, true, true, false, false, false, false, false}},
      {"random access buffering", "pipelining",
       {"+", "+", "(+)", "+", "-", "-", "-", "-"},
       {false, true, true, false, false, false, false, false}},
      {"pipelined loop flattening", "pipelining",
       {"+", ".", ".", "+", ".", "~", ".", "-"},
       {false, false, false, false, false, true, false, false}},
      {"pipelined loop fusion", "pipelining",
       {"+", "(+)", ".", "~", ".", "(-)", ".", "-"},
       {false, false, false, false, false, true, false, false}},
      {"inlining", "pipelining",
       {"+", ".", "(+)", ".", "(-)", ".", ".", "+"},
       {false, true, false, false, false, false, false, false}},
      {"condition flattening", "pipelining",
       {"(+)", ".", ".", ".", "~", "+", ".", "-"},
       {false, false, false, false, false, false, true, false}},
      {"vectorization", "scaling",
       {".", ".", "+", "+", "-", "-", "-", "(-)"},
       {false, false, false, true, false, false, false, false}},
      {"replication", "scaling",
       {".", "+!", "+!", ".", "-!", "-!", "-", "-"},
       {false, false, true, true, false, false, false, false}},
      {"streaming dataflow", "scaling",
       {".", ".", "(+)", ".", "(-)", "+!", ".", "+"},
       {false, false, true, false, false, false, true, false}},
      {"tiling", "scaling",
       {".", "+", ".", "~", "-", "~", "-", "-"},
       {false, false, false, false, false, false, true, true}},
      {"memory access extraction", "memory",
       {"(+)", ".", ".", "+", "-", "+", ".", "-"},
       {false, true, false, false, true, false, false, false}},
      {"memory oversubscription", "memory",
       {".", ".", ".", "+", "-", ".", ".", "-"},
       {false, false, false, false, true, false, false, false}},
      {"memory striping", "memory",
       {".", ".", ".", "+", "-", "-", ".", "-"},
       {false, false, false, false, true, false, false, false}},
      {"type demotion", "memory",
       {".", ".", ".", "+", "+", "+", ".", "+"},
       {false, false, false, false, true, false, false, true}},
  };
  return table;
}

struct Advice {
  const TransformInfo* info;
  std::vector<std::string> matched_objectives;
};

/// Every transformation whose objective cell is marked for any requested
/// objective, ranked by the number of requested objectives it serves (ties
/// keep catalog order).
inline Result<std::vector<Advice>> advise(
    const std::set<std::string>& objectives) {
  using R = Result<std::vector<Advice>>;
  if (objectives.empty()) return R::failure("no objectives requested");
  std::vector<int> requested;
  for (const auto& code : objectives) {
    bool known = false;
    for (size_t i = 0; i < objective_codes().size(); ++i) {
      if (objective_codes()[i] == code) {
        requested.push_back(static_cast<int>(i));
        known = true;
      }
    }
    if (!known)
      return R::failure("unknown objective code '" + code +
                        "' (codes: LD IC RE CU BW PL RT RS)");
  }
  std::vector<Advice> out;
  for (const auto& info : transform_table()) {
    Advice a;
    a.info = &info;
    for (int idx : requested)
      if (info.objectives[idx]) a.matched_objectives.push_back(objective_codes()[idx]);
    if (!a.matched_objectives.empty()) out.push_back(std::move(a));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Advice& a, const Advice& b) {
                     return a.matched_objectives.size() >
                            b.matched_objectives.size();
                   });
  return out;
}

/// Stable text rendering of one catalog row (used by the golden test and
/// the command line).
inline std::string render_row(const TransformInfo& info) {
  std::string s = info.name + " [";
  for (size_t i = 0; i < characteristic_codes().size(); ++i) {
    if (i) s += " ";
    s += characteristic_codes()[i];
    s += "=";
    s += info.characteristics[i];
  }
  s += "]";
  return s;
}

}  // namespace hlsopt
