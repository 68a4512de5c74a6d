#pragma once

// Recipe files: an ordered list of transformation steps, one per line,
//   <name> <target> [key=value ...]
// Blank lines and '#' comments are ignored.

#include <sstream>

#include "hlsopt/parse.hpp"
#include "hlsopt/transform/core.hpp"
#include "hlsopt/transform/dataflow_extract.hpp"
#include "hlsopt/transform/delay.hpp"
#include "hlsopt/transform/interleave.hpp"
#include "hlsopt/transform/memory.hpp"
#include "hlsopt/transform/pipeline.hpp"
#include "hlsopt/transform/scaling.hpp"

namespace hlsopt {

inline Result<std::vector<TransformStep>> parse_recipe(const std::string& text) {
  using R = Result<std::vector<TransformStep>>;
  std::vector<TransformStep> steps;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    TransformStep step;
    if (!(ls >> step.name)) continue;  // blank
    if (!(ls >> step.target))
      return R::failure("recipe line " + std::to_string(lineno) +
                        ": expected '<name> <target> [key=value ...]'");
    std::string kv;
    while (ls >> kv) {
      auto eq = kv.find('=');
      if (eq == std::string::npos)
        return R::failure("recipe line " + std::to_string(lineno) +
                          ": malformed parameter '" + kv + "'");
      step.params[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

inline Result<DataType> parse_type_name(const std::string& s) {
  auto r = parse("kernel t(){ mem x: " + s + " @0; }");
  if (!r.ok()) return Result<DataType>::failure("unknown type '" + s + "'");
  return r->buffers[0].elem;
}

/// Applies one step of a recipe. The kernel must be parameter-bound.
inline TransformOutcome apply_step(const Kernel& k, const TransformStep& step,
                                   const DeviceConfig& config) {
  const std::string& name = step.name;
  if (name == "interchange")
    return interchange(k, step.target, step.param("inner").value_or(""));
  if (name == "interleave_accumulation")
    return interleave_accumulation(k, step.target, step, config);
  if (name == "infer_delay_buffers") {
    auto buffer = step.param("buffer");
    if (!buffer) return inapplicable("needs buffer=<name>");
    return infer_delay_buffers(k, step.target, *buffer);
  }
  if (name == "buffer_random_access")
    return buffer_random_access(k, step.target,
                                step.param("stage").value_or("both"), config);
  if (name == "fuse_pipelined_loops") {
    auto with = step.param("with");
    if (!with) return inapplicable("needs with=<second loop>");
    return fuse_pipelined_loops(k, step.target, *with,
                                step.param("level").value_or("auto"), config);
  }
  if (name == "flatten_loop_nest")
    return flatten_loop_nest(k, step.target,
                             step.param("iters").value_or("") == "registers");
  if (name == "inline_function") return inline_function(k, step.target);
  if (name == "flatten_condition") return flatten_condition(k, step.target);
  if (name == "vectorize") {
    auto w = step.int_param("W");
    if (!w) return inapplicable("needs W=<width>");
    return vectorize(k, step.target, *w,
                     step.param("style").value_or("vector_type"), config);
  }
  if (name == "replicate") {
    auto p = step.int_param("P");
    auto buffer = step.param("buffer");
    if (!p || !buffer) return inapplicable("needs P=<copies> buffer=<register>");
    std::set<std::string> share;
    if (auto sh = step.param("share")) {
      std::string cur;
      for (char c : *sh + ",") {
        if (c == ',') {
          if (!cur.empty()) share.insert(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
    }
    return replicate(k, step.target, *p, *buffer, share);
  }
  if (name == "extract_streaming_dataflow")
    return extract_streaming_dataflow(k, step);
  if (name == "tile_buffers") {
    auto t = step.int_param("T");
    if (!t) return inapplicable("needs T=<tile>");
    return tile_buffers(k, step.target, *t);
  }
  if (name == "extract_memory_accesses")
    return extract_memory_accesses(k, step.target);
  if (name == "oversubscribe_memory")
    return oversubscribe_memory(k, step.target, step, config);
  if (name == "stripe_memory") {
    auto list = step.param("banks");
    if (!list) return inapplicable("needs banks=<b0,b1,...>");
    std::vector<int> banks;
    std::string cur;
    for (char c : *list + ",") {
      if (c == ',') {
        if (!cur.empty()) {
          try {
            banks.push_back(std::stoi(cur));
          } catch (...) {
            return inapplicable("bad bank list '" + *list + "'");
          }
        }
        cur.clear();
      } else {
        cur += c;
      }
    }
    return stripe_memory(k, step.target, banks, config);
  }
  if (name == "demote_types") {
    auto type = step.param("type");
    if (!type) return inapplicable("needs type=<t>");
    auto t = parse_type_name(*type);
    if (!t.ok()) return inapplicable(t.error());
    return demote_types(k, step.target, *t);
  }
  return inapplicable("unknown transformation '" + name + "'");
}

}  // namespace hlsopt
