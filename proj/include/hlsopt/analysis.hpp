#pragma once

// Performance analysis: loop-carried dependences, initiation intervals,
// cycle counts, resource estimates and the vectorization bound.
//
// The cycle model composes as follows:
//   - flat pipelined region:  C = L + I * (N - 1), N the product of the
//     coalesced trip counts, L the critical path of one iteration body;
//   - non-pipelined loop over loops: C = N * (sum of inner loop cycles) plus
//     the latency of straight-line statements once (their issue overlaps the
//     next inner pipeline's fill, so only the final exposure is paid);
//   - non-pipelined loop over statements only: C = N * body latency;
//   - sequential siblings add;
//   - processing-element graph: C = max PE cycle count plus the pipeline
//     depths of the remaining PEs (latency is additive along the chain, the
//     slowest actor decides the steady-state rate).
//
// Initiation interval: I = max(1, target, recurrence, contention) where the
// recurrence bound is ceil(path_latency / distance) per loop-carried
// dependence and the contention bound is statically-counted accesses per
// iteration divided by ports, per interface. Chains of single-cycle integer
// register updates (loop state machines) do not constrain I; their depth is
// reported as the condition-depth metric instead.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hlsopt/device.hpp"
#include "hlsopt/ir.hpp"

namespace hlsopt {

// ---------------------------------------------------------------------------
// Results

struct Dependence {
  std::string buffer;
  std::string source_id;  // writing statement (or push)
  std::string sink_id;    // reading statement (or pop)
  std::string region_id;  // pipelined loop the distance is measured in
  std::optional<long long> distance;  // iterations; nullopt = unknown
  long long path_latency = 1;
  int path_ops = 0;          // dependent arithmetic/compare ops on the cycle
  bool state_update = false; // single-cycle integer register update chain
  bool through_fifo = false;
};

struct IiInfo {
  long long ii = 1;
  std::string reason = "none";  // none | target | recurrence(...) | contention(...) | call(...)
};

struct RegionPerf {
  std::string loop_id;
  long long trip = 0;     // flattened N
  long long latency = 0;  // L
  long long ii = 1;       // I
  std::string ii_reason;
  long long cycles = 0;  // L + I*(N-1)
  int condition_depth = 1;
};

struct ResourceEstimate {
  long long onchip_bits = 0;
  long long register_elems = 0;
  std::map<std::string, long long> compute_units;  // "mul.float" -> count
  int fifo_count = 0;
  std::set<int> offchip_banks;
  std::vector<std::string> over_capacity;

  bool exceeded() const { return !over_capacity.empty(); }
};

struct PerfReport {
  std::vector<RegionPerf> loops;
  long long total_cycles = 0;
  long long steady_cycles = 0;  // sum/max of I*N terms; latency-free
  double seconds = 0;
  double offchip_bytes = 0;
  ResourceEstimate resources;
  std::vector<std::string> notes;

  const RegionPerf* dominant() const {
    const RegionPerf* best = nullptr;
    for (const auto& r : loops)
      if (!best || r.ii * r.trip > best->ii * best->trip) best = &r;
    return best;
  }
};

/// floor(B / (f*S)): how many operands per cycle the bank can feed.
inline long long max_vector_width(const BankConfig& bank, const DataType& elem,
                                  const DeviceConfig& config) {
  double s = elem.lane_bytes();
  return static_cast<long long>(
      std::floor(bank.bandwidth_bytes_per_s / (config.clock_hz * s)));
}

inline long long max_vector_width(int bank, const DataType& elem,
                                  const DeviceConfig& config) {
  return max_vector_width(config.bank(bank), elem, config);
}

// ---------------------------------------------------------------------------
// Implementation details

namespace analysis_detail {

constexpr double kNever = -1e18;

// -- expression types -------------------------------------------------------

inline DataType infer_type(const ExprPtr& e, const Kernel& k) {
  switch (e->kind) {
    case ExprKind::IntLit:
    case ExprKind::IterRef:
    case ExprKind::ParamRef: return DataType::i32();
    case ExprKind::Read:
    case ExprKind::Pop: {
      const Buffer* b = k.find_buffer(e->name);
      return b ? b->elem : DataType::i32();
    }
    case ExprKind::Bin: {
      DataType a = infer_type(e->args[0], k);
      DataType b = infer_type(e->args[1], k);
      // Wider / more expressive side wins.
      auto rank = [](const DataType& t) {
        int r = t.width_bits;
        if (t.kind == TypeKind::Float) r += 1000;
        if (t.kind == TypeKind::FixedPoint) r += 500;
        return r;
      };
      DataType res = rank(a) >= rank(b) ? a : b;
      res.lanes = std::max(a.lanes, b.lanes);
      return res;
    }
    case ExprKind::Select: {
      DataType a = infer_type(e->args[1], k);
      DataType b = infer_type(e->args[2], k);
      return a.width_bits >= b.width_bits ? a : b;
    }
    case ExprKind::Cast: return e->cast_type;
  }
  return DataType::i32();
}

// -- pipelined regions ------------------------------------------------------

struct RegionInfo {
  int pe_index = -1;
  std::vector<const Stmt*> enclosing;  // sequential loops outside the region
  std::vector<const Stmt*> chain;      // coalesced loops, outermost first
  std::string id;
  long long flat_trip = -1;  // -1 when bounds are symbolic
  std::vector<long long> trips;
  std::vector<long long> lowers;

  const std::vector<StmtPtr>& body() const { return chain.back()->loop.body; }
  const LoopNode& loop() const { return chain.front()->loop; }
};

inline void collect_regions_in(const std::vector<StmtPtr>& body, int pe_index,
                               std::string prefix,
                               std::vector<const Stmt*>& loop_stack,
                               std::vector<RegionInfo>& out) {
  for (const auto& s : body) {
    if (s->kind == StmtKind::Guard) {
      collect_regions_in(s->body, pe_index, prefix, loop_stack, out);
      continue;
    }
    if (s->kind != StmtKind::Loop) continue;
    std::string id = prefix + "/" + s->loop.iterator;
    if (s->loop.pragma.is_pipeline()) {
      RegionInfo r;
      r.pe_index = pe_index;
      r.enclosing = loop_stack;
      r.chain.push_back(s.get());
      // Coalesce perfectly nested pragma-free single-loop bodies.
      const Stmt* cur = s.get();
      while (cur->loop.body.size() == 1 &&
             cur->loop.body[0]->kind == StmtKind::Loop &&
             cur->loop.body[0]->loop.pragma.kind == Pragma::Kind::None) {
        cur = cur->loop.body[0].get();
        r.chain.push_back(cur);
      }
      r.id = id;
      for (size_t i = 1; i < r.chain.size(); ++i)
        r.id += "." + r.chain[i]->loop.iterator;
      r.flat_trip = 1;
      for (const Stmt* l : r.chain) {
        auto lo = eval_const(l->loop.lower);
        auto n = trip_count(l->loop);
        r.lowers.push_back(lo.value_or(0));
        if (!n || r.flat_trip < 0) {
          r.flat_trip = -1;
          r.trips.push_back(-1);
        } else {
          r.trips.push_back(*n);
          r.flat_trip *= *n;
        }
      }
      out.push_back(std::move(r));
      // Nested pipeline pragmas inside a pipelined region are collected too
      // (they indicate a modeling problem reported elsewhere).
      loop_stack.push_back(s.get());
      collect_regions_in(s->loop.body, pe_index, id, loop_stack, out);
      loop_stack.pop_back();
    } else {
      loop_stack.push_back(s.get());
      collect_regions_in(s->loop.body, pe_index, id, loop_stack, out);
      loop_stack.pop_back();
    }
  }
}

inline std::vector<RegionInfo> collect_regions(const Kernel& k) {
  std::vector<RegionInfo> out;
  std::vector<const Stmt*> stack;
  collect_regions_in(k.top, -1, "top", stack, out);
  for (size_t i = 0; i < k.pes.size(); ++i) {
    stack.clear();
    collect_regions_in(k.pes[i].body, static_cast<int>(i),
                       "pe:" + k.pes[i].name, stack, out);
  }
  return out;
}

// -- critical path / cycle path engine --------------------------------------

struct PathState {
  double time = kNever;
  int chain = 0;       // dependent arithmetic ops along the max path
  bool impure = false; // multi-cycle op or non-register storage on the path
};

struct PathEngine {
  const Kernel& kernel;
  const DeviceConfig& config;
  // Cycle mode: only reads of `seed_buffer` (or pops of `seed_channel`)
  // start the clock; everything else is free. Critical-path mode: all leaves
  // start at their storage read latency.
  bool cycle_mode = false;
  std::string seed_name;
  bool seed_is_fifo = false;

  std::map<std::string, PathState> env;  // per-buffer forwarding within one iteration
  double max_completion = 0;
  PathState sink;        // cycle mode: completion at writes/pushes of seed
  bool sink_found = false;

  PathState leaf(double t) const { return {t, 0}; }

  PathState combine(std::vector<PathState> args, double latency, bool arith) {
    PathState r;
    for (const auto& a : args) {
      if (a.time <= kNever / 2) continue;  // dead operand: off the path
      r.time = std::max(r.time, a.time);
      r.chain = std::max(r.chain, a.chain);
      r.impure |= a.impure;
    }
    if (r.time <= kNever / 2) return r;  // nothing on path
    r.time += latency;
    if (arith) {
      r.chain += 1;
      if (latency > 1) r.impure = true;
    }
    return r;
  }

  PathState eval(const ExprPtr& e) {
    switch (e->kind) {
      case ExprKind::IntLit:
      case ExprKind::IterRef:
      case ExprKind::ParamRef: return leaf(cycle_mode ? kNever : 0);
      case ExprKind::Read: {
        const Buffer* b = kernel.find_buffer(e->name);
        double storage = b ? config.read_latency(b->space) : 1;
        PathState idx;
        for (const auto& i : e->args) {
          PathState s = eval(i);
          idx.time = std::max(idx.time, s.time);
          idx.chain = std::max(idx.chain, s.chain);
        }
        PathState r;
        if (cycle_mode) {
          bool seeded = !seed_is_fifo && e->name == seed_name;
          double from_storage = seeded ? storage : kNever;
          auto it = env.find(e->name);
          double from_fwd = it != env.end() ? it->second.time : kNever;
          r.time = std::max(from_storage, from_fwd);
          r.chain = it != env.end() ? it->second.chain : 0;
          if (it != env.end()) r.impure |= it->second.impure;
          if (seeded && b &&
              (b->space.kind != MemorySpace::Kind::Registers ||
               !b->elem.is_int()))
            r.impure = true;
        } else {
          auto it = env.find(e->name);
          r.time = it != env.end() ? it->second.time : storage;
          r.chain = it != env.end() ? it->second.chain : 0;
        }
        if (idx.time > kNever / 2) {
          r.time = std::max(r.time, idx.time + storage);
          r.chain = std::max(r.chain, idx.chain);
          r.impure |= idx.impure;
        }
        return r;
      }
      case ExprKind::Pop: {
        if (cycle_mode)
          return leaf(seed_is_fifo && e->name == seed_name
                          ? config.fifo_latency
                          : kNever);
        return leaf(config.fifo_latency);
      }
      case ExprKind::Bin: {
        DataType t = infer_type(e, kernel);
        double lat = config.op_latency(e->op, t);
        return combine({eval(e->args[0]), eval(e->args[1])}, lat, true);
      }
      case ExprKind::Select: {
        double lat = config.op_latency("select", infer_type(e, kernel));
        return combine({eval(e->args[0]), eval(e->args[1]), eval(e->args[2])},
                       lat, false);
      }
      case ExprKind::Cast: {
        double lat = config.op_latency("cast", e->cast_type);
        return combine({eval(e->args[0])}, lat, true);
      }
    }
    return leaf(kNever);
  }

  void run_stmt(const StmtPtr& s, PathState guard) {
    switch (s->kind) {
      case StmtKind::Assign: {
        PathState v = eval(s->value);
        for (const auto& i : s->indices) {
          PathState ix = eval(i);
          v.time = std::max(v.time, ix.time);
        }
        if (guard.time > v.time) v.time = guard.time;
        v.chain = std::max(v.chain, guard.chain);
        v.impure |= guard.time > kNever / 2 && guard.impure;
        if (v.time > kNever / 2) {
          env[s->target] = v;
          max_completion = std::max(max_completion, v.time);
          if (cycle_mode && !seed_is_fifo && s->target == seed_name) {
            if (!sink_found || v.time > sink.time) sink = v;
            sink_found = true;
          }
        }
        break;
      }
      case StmtKind::Push: {
        PathState v = eval(s->value);
        v.time = std::max(v.time, guard.time);
        if (v.time > kNever / 2) {
          v.time += config.fifo_latency;
          max_completion = std::max(max_completion, v.time);
          if (cycle_mode && seed_is_fifo && s->target == seed_name) {
            if (!sink_found || v.time > sink.time) sink = v;
            sink_found = true;
          }
        }
        break;
      }
      case StmtKind::Guard: {
        PathState c = eval(s->value);
        c.time = std::max(c.time, guard.time);
        c.chain = std::max(c.chain, guard.chain);
        for (const auto& inner : s->body) run_stmt(inner, c);
        break;
      }
      case StmtKind::Loop:
        // Unrolled (or to-be-coalesced) inner loop: iterations are laid out
        // in parallel hardware; latency counted once.
        for (const auto& inner : s->loop.body) run_stmt(inner, guard);
        break;
      case StmtKind::Call: {
        const Function* f = kernel.find_function(s->target);
        if (f)
          for (const auto& inner : f->body) run_stmt(inner, guard);
        break;
      }
    }
  }

  void run(const std::vector<StmtPtr>& body) {
    PathState none = leaf(cycle_mode ? kNever : 0);
    for (const auto& s : body) run_stmt(s, none);
  }
};

/// Critical path latency of one iteration of `body`, in cycles.
inline long long body_latency(const std::vector<StmtPtr>& body,
                              const Kernel& k, const DeviceConfig& config) {
  PathEngine eng{k, config};
  eng.run(body);
  return std::max<long long>(1, static_cast<long long>(std::llround(
                                    eng.max_completion)));
}

struct CyclePath {
  long long latency = 1;
  int ops = 0;
  bool state_update = false;
};

/// Latency of the read->...->write chain through `name` within one
/// iteration of `body` (the recurrence cycle).
inline std::optional<CyclePath> cycle_path(const std::vector<StmtPtr>& body,
                                           const Kernel& k,
                                           const DeviceConfig& config,
                                           const std::string& name,
                                           bool is_fifo) {
  PathEngine eng{k, config};
  eng.cycle_mode = true;
  eng.seed_name = name;
  eng.seed_is_fifo = is_fifo;
  eng.run(body);
  if (!eng.sink_found) return std::nullopt;
  CyclePath p;
  p.latency = std::max<long long>(
      1, static_cast<long long>(std::llround(eng.sink.time)));
  p.ops = eng.sink.chain;
  const Buffer* b = k.find_buffer(name);
  p.state_update = !is_fifo && b &&
                   b->space.kind == MemorySpace::Kind::Registers &&
                   b->elem.is_int() && !eng.sink.impure;
  return p;
}

// -- access collection -------------------------------------------------------

struct AccessEvent {
  std::string buffer;
  bool is_write = false;
  bool is_fifo = false;
  const std::vector<ExprPtr>* indices = nullptr;
  std::string stmt_id;
  bool data_dependent = false;
  long long unroll_mult = 1;  // static copies due to unrolled enclosing loops
};

inline bool is_data_dependent(const ExprPtr& e) {
  return classify_index(e) == IndexClass::DataDependent;
}

inline bool any_data_dependent(const std::vector<ExprPtr>& v) {
  for (const auto& e : v)
    if (is_data_dependent(e)) return true;
  return false;
}

/// Collects every static access in a region body: buffer reads/writes and
/// channel pops/pushes, with unroll multiplicities.
inline void collect_accesses(const std::vector<StmtPtr>& body,
                             const Kernel& k, const std::string& prefix,
                             long long unroll_mult,
                             std::vector<AccessEvent>& out) {
  auto scan_expr = [&](const ExprPtr& root, const std::string& id) {
    std::function<void(const ExprPtr&)> walk = [&](const ExprPtr& e) {
      if (!e) return;
      if (e->kind == ExprKind::Read) {
        AccessEvent ev;
        ev.buffer = e->name;
        ev.is_write = false;
        ev.indices = &e->args;
        ev.stmt_id = id;
        ev.data_dependent = any_data_dependent(e->args);
        ev.unroll_mult = unroll_mult;
        out.push_back(ev);
      } else if (e->kind == ExprKind::Pop) {
        AccessEvent ev;
        ev.buffer = e->name;
        ev.is_fifo = true;
        ev.stmt_id = id;
        ev.unroll_mult = unroll_mult;
        out.push_back(ev);
      }
      for (const auto& a : e->args) walk(a);
    };
    walk(root);
  };

  for (size_t i = 0; i < body.size(); ++i) {
    const StmtPtr& s = body[i];
    std::string id = prefix + "#" + std::to_string(i);
    switch (s->kind) {
      case StmtKind::Assign: {
        for (const auto& idx : s->indices) scan_expr(idx, id);
        scan_expr(s->value, id);
        AccessEvent ev;
        ev.buffer = s->target;
        ev.is_write = true;
        ev.indices = &s->indices;
        ev.stmt_id = id;
        ev.data_dependent = any_data_dependent(s->indices);
        ev.unroll_mult = unroll_mult;
        out.push_back(ev);
        break;
      }
      case StmtKind::Push: {
        scan_expr(s->value, id);
        AccessEvent ev;
        ev.buffer = s->target;
        ev.is_write = true;
        ev.is_fifo = true;
        ev.stmt_id = id;
        ev.unroll_mult = unroll_mult;
        out.push_back(ev);
        break;
      }
      case StmtKind::Guard:
        scan_expr(s->value, id);
        collect_accesses(s->body, k, id, unroll_mult, out);
        break;
      case StmtKind::Loop: {
        long long factor = 1;
        if (s->loop.pragma.is_unroll()) {
          if (s->loop.pragma.factor) factor = *s->loop.pragma.factor;
          else if (auto n = trip_count(s->loop)) factor = *n;
        }
        collect_accesses(s->loop.body, k, id + "/" + s->loop.iterator,
                         unroll_mult * factor, out);
        break;
      }
      case StmtKind::Call: {
        const Function* f = k.find_function(s->target);
        if (f) collect_accesses(f->body, k, id + "/" + s->target, unroll_mult, out);
        break;
      }
    }
  }
}

// -- quasi-affine evaluation & distance sampling -----------------------------

using IterEnv = std::map<std::string, long long>;

inline std::optional<long long> eval_qa(const ExprPtr& e, const IterEnv& env) {
  switch (e->kind) {
    case ExprKind::IntLit: return e->int_value;
    case ExprKind::IterRef: {
      auto it = env.find(e->name);
      if (it == env.end()) return std::nullopt;
      return it->second;
    }
    case ExprKind::ParamRef: return std::nullopt;  // bound kernels only
    case ExprKind::Bin: {
      auto a = eval_qa(e->args[0], env);
      auto b = eval_qa(e->args[1], env);
      if (!a || !b) return std::nullopt;
      switch (e->op) {
        case BinOp::Add: return *a + *b;
        case BinOp::Sub: return *a - *b;
        case BinOp::Mul: return *a * *b;
        case BinOp::Div: return *b == 0 ? std::nullopt : std::optional(*a / *b);
        case BinOp::Mod: return *b == 0 ? std::nullopt : std::optional(*a % *b);
        case BinOp::Min: return std::min(*a, *b);
        case BinOp::Max: return std::max(*a, *b);
        case BinOp::Lt: return *a < *b ? 1 : 0;
        case BinOp::Le: return *a <= *b ? 1 : 0;
        case BinOp::Eq: return *a == *b ? 1 : 0;
      }
      return std::nullopt;
    }
    case ExprKind::Select: {
      auto c = eval_qa(e->args[0], env);
      if (!c) return std::nullopt;
      return eval_qa(e->args[*c ? 1 : 2], env);
    }
    case ExprKind::Cast: return eval_qa(e->args[0], env);
    default: return std::nullopt;
  }
}

inline bool mentions_iterator(const ExprPtr& e,
                              const std::set<std::string>& names) {
  bool found = false;
  std::function<void(const ExprPtr&)> walk = [&](const ExprPtr& n) {
    if (!n || found) return;
    if (n->kind == ExprKind::IterRef && names.count(n->name)) found = true;
    for (const auto& a : n->args) walk(a);
  };
  walk(e);
  return found;
}

/// Iterates the flattened index space of a region, updating the iterator
/// environment per step. Enclosing sequential iterators stay at their lower
/// bounds.
struct RegionSpace {
  const RegionInfo& region;
  IterEnv env;
  bool valid = true;

  explicit RegionSpace(const RegionInfo& r) : region(r) {
    for (const Stmt* l : r.enclosing) {
      auto lo = eval_const(l->loop.lower);
      env[l->loop.iterator] = lo.value_or(0);
    }
    for (size_t i = 0; i < r.chain.size(); ++i)
      env[r.chain[i]->loop.iterator] = r.lowers[i];
    valid = r.flat_trip > 0;
  }

  void set(long long t) {
    long long rem = t;
    for (size_t i = region.chain.size(); i-- > 0;) {
      long long n = region.trips[i];
      env[region.chain[i]->loop.iterator] = region.lowers[i] + rem % n;
      rem /= n;
    }
  }
};

struct SampledBuffer {
  // distances observed per (writer stmt, reader stmt)
  std::map<std::pair<std::string, std::string>, std::set<long long>> distances;
  bool conservative = false;  // exact tracking impossible
};

/// Replays the region body over its flattened iteration space, recording for
/// each read the distance (in flattened iterations) since the last write of
/// the same element. Guards and selects with quasi-affine conditions are
/// resolved exactly; data-dependent control or indexing falls back to the
/// conservative path.
struct DistanceSampler {
  const Kernel& kernel;
  const RegionInfo& region;
  const std::set<std::string>& buffers;  // buffers with both reads and writes
  static constexpr long long kMaxSteps = 1 << 22;

  std::map<std::string, SampledBuffer> result;
  // last write time per buffer per flat element
  std::map<std::string, std::map<long long, std::pair<long long, std::string>>>
      last_write;
  std::map<std::string, std::vector<long long>> shapes;

  DistanceSampler(const Kernel& k, const RegionInfo& r,
                  const std::set<std::string>& bufs)
      : kernel(k), region(r), buffers(bufs) {
    for (const auto& name : bufs) {
      const Buffer* b = k.find_buffer(name);
      std::vector<long long> shape;
      bool ok = b != nullptr;
      if (b)
        for (const auto& e : b->shape) {
          auto v = eval_const(e);
          if (!v) ok = false;
          shape.push_back(v.value_or(1));
        }
      if (!ok) result[name].conservative = true;
      shapes[name] = shape;
    }
  }

  std::optional<long long> linearize(const std::string& buffer,
                                     const std::vector<ExprPtr>& indices,
                                     const IterEnv& env) {
    const auto& shape = shapes[buffer];
    if (indices.size() != shape.size()) return std::nullopt;
    long long flat = 0;
    for (size_t i = 0; i < indices.size(); ++i) {
      auto v = eval_qa(indices[i], env);
      if (!v) return std::nullopt;
      if (*v < 0 || *v >= shape[i]) return std::nullopt;  // oracle reports OOB
      flat = flat * shape[i] + *v;
    }
    return flat;
  }

  void read_event(const std::string& buffer, const std::vector<ExprPtr>& idx,
                  const IterEnv& env, long long t, const std::string& id) {
    if (!buffers.count(buffer)) return;
    auto loc = linearize(buffer, idx, env);
    if (!loc) {
      result[buffer].conservative = true;
      return;
    }
    auto& writes = last_write[buffer];
    auto it = writes.find(*loc);
    if (it == writes.end()) return;  // written before the loop, not carried
    long long d = t - it->second.first;
    if (d > 0)
      result[buffer].distances[{it->second.second, id}].insert(d);
  }

  void write_event(const std::string& buffer, const std::vector<ExprPtr>& idx,
                   const IterEnv& env, long long t, const std::string& id) {
    if (!buffers.count(buffer)) return;
    auto loc = linearize(buffer, idx, env);
    if (!loc) {
      result[buffer].conservative = true;
      return;
    }
    last_write[buffer][*loc] = {t, id};
  }

  // Collect reads in evaluation order; selects with resolvable conditions
  // follow the taken branch only.
  void scan_reads(const ExprPtr& e, IterEnv& env, long long t,
                  const std::string& id) {
    if (!e) return;
    switch (e->kind) {
      case ExprKind::Read:
        for (const auto& i : e->args) scan_reads(i, env, t, id);
        read_event(e->name, e->args, env, t, id);
        return;
      case ExprKind::Select: {
        scan_reads(e->args[0], env, t, id);
        auto c = eval_qa(e->args[0], env);
        if (c) {
          scan_reads(e->args[*c ? 1 : 2], env, t, id);
        } else {
          scan_reads(e->args[1], env, t, id);
          scan_reads(e->args[2], env, t, id);
        }
        return;
      }
      default:
        for (const auto& a : e->args) scan_reads(a, env, t, id);
        return;
    }
  }

  void run_body(const std::vector<StmtPtr>& body, IterEnv& env, long long t,
                const std::string& prefix) {
    for (size_t i = 0; i < body.size(); ++i) {
      const StmtPtr& s = body[i];
      std::string id = prefix + "#" + std::to_string(i);
      switch (s->kind) {
        case StmtKind::Assign: {
          for (const auto& ix : s->indices) scan_reads(ix, env, t, id);
          scan_reads(s->value, env, t, id);
          if (buffers.count(s->target)) {
            if (any_data_dependent(s->indices)) {
              result[s->target].conservative = true;
            } else {
              write_event(s->target, s->indices, env, t, id);
            }
          }
          break;
        }
        case StmtKind::Push: scan_reads(s->value, env, t, id); break;
        case StmtKind::Guard: {
          scan_reads(s->value, env, t, id);
          auto c = eval_qa(s->value, env);
          if (!c) {
            // Unresolvable guard: reads still scanned, writes make tracking
            // inexact.
            std::function<void(const std::vector<StmtPtr>&, const std::string&)>
                mark = [&](const std::vector<StmtPtr>& b, const std::string& p) {
                  for (size_t j = 0; j < b.size(); ++j) {
                    const StmtPtr& inner = b[j];
                    std::string iid = p + "#" + std::to_string(j);
                    if (inner->kind == StmtKind::Assign) {
                      for (const auto& ix : inner->indices)
                        scan_reads(ix, env, t, iid);
                      scan_reads(inner->value, env, t, iid);
                      if (buffers.count(inner->target))
                        result[inner->target].conservative = true;
                    } else if (inner->kind == StmtKind::Guard) {
                      scan_reads(inner->value, env, t, iid);
                      mark(inner->body, iid);
                    } else if (inner->kind == StmtKind::Loop) {
                      mark(inner->loop.body, iid + "/" + inner->loop.iterator);
                    } else if (inner->kind == StmtKind::Push) {
                      scan_reads(inner->value, env, t, iid);
                    }
                  }
                };
            mark(s->body, id);
          } else if (*c) {
            run_body(s->body, env, t, id);
          }
          break;
        }
        case StmtKind::Loop: {
          // Inner (unrolled) loop: iterate its literal range.
          auto lo = eval_qa(s->loop.lower, env);
          auto hi = eval_qa(s->loop.upper, env);
          std::string lid = id + "/" + s->loop.iterator;
          if (lo && hi && *hi - *lo <= 4096) {
            for (long long v = *lo; v < *hi; ++v) {
              env[s->loop.iterator] = v;
              run_body(s->loop.body, env, t, lid);
            }
            env.erase(s->loop.iterator);
          } else {
            for (const auto& name : buffers) {
              // cannot replay: anything it writes becomes conservative
              visit_stmts(s->loop.body, [&](const StmtPtr& inner) {
                if (inner->kind == StmtKind::Assign && inner->target == name)
                  result[name].conservative = true;
              });
            }
          }
          break;
        }
        case StmtKind::Call: {
          const Function* f = kernel.find_function(s->target);
          if (f) run_body(f->body, env, t, id + "/" + s->target);
          break;
        }
      }
    }
  }

  void run() {
    RegionSpace space(region);
    if (!space.valid || region.flat_trip > kMaxSteps) {
      for (const auto& name : buffers) result[name].conservative = true;
      return;
    }
    for (long long t = 0; t < region.flat_trip; ++t) {
      space.set(t);
      run_body(region.body(), space.env, t, region.id);
    }
  }
};

/// Minimal feasible collision distance for index vectors with data-dependent
/// components: dimensions whose write/read expressions coincide and are
/// quasi-affine constrain the distance to a multiple of their period.
inline std::optional<long long> min_collision_distance(
    const std::vector<ExprPtr>& w, const std::vector<ExprPtr>& r,
    const RegionInfo& region) {
  if (w.size() != r.size()) return std::nullopt;
  RegionSpace space(region);
  if (!space.valid) return std::nullopt;
  long long window = std::min<long long>(region.flat_trip, 1 << 16);
  long long constraint = 1;
  bool constrained = false;
  for (size_t dim = 0; dim < w.size(); ++dim) {
    if (!struct_equal(w[dim], r[dim])) continue;
    if (classify_index(w[dim]) != IndexClass::QuasiAffine) continue;
    // Period of the dimension over the flattened space.
    std::vector<long long> vals;
    vals.reserve(window);
    bool ok = true;
    for (long long t = 0; t < window && ok; ++t) {
      space.set(t);
      auto v = eval_qa(w[dim], space.env);
      if (!v) ok = false;
      else vals.push_back(*v);
    }
    if (!ok) continue;
    long long period = 0;
    for (long long p = 1; p < window; ++p) {
      if (vals[p] == vals[0]) {
        bool periodic = true;
        for (long long t = 0; t + p < window; ++t)
          if (vals[t + p] != vals[t]) {
            periodic = false;
            break;
          }
        if (periodic) {
          period = p;
          break;
        }
      }
    }
    if (period == 0) {
      // Never repeats within the window: no in-flight collision possible.
      return std::nullopt;
    }
    constraint = std::lcm(constraint, period);
    constrained = true;
  }
  if (!constrained || constraint <= 1) return std::nullopt;
  return constraint;
}

}  // namespace analysis_detail

// ---------------------------------------------------------------------------
// Dependences

/// All read-after-write pairs on the same buffer within each pipelined
/// region, with the iteration distance computed from the index expressions
/// (unknown when data-dependent) and the latency of the read->write chain.
inline std::vector<Dependence> find_dependences(const Kernel& k,
                                                const DeviceConfig& config) {
  namespace ad = analysis_detail;
  std::vector<Dependence> out;
  for (const auto& region : ad::collect_regions(k)) {
    std::vector<ad::AccessEvent> accesses;
    ad::collect_accesses(region.body(), k, region.id, 1, accesses);

    // Buffers read and written in the region; FIFOs popped and pushed.
    std::map<std::string, std::pair<bool, bool>> rw;  // name -> (read, written)
    std::map<std::string, bool> fifo_rw_read, fifo_rw_write;
    for (const auto& a : accesses) {
      if (a.is_fifo) {
        (a.is_write ? fifo_rw_write : fifo_rw_read)[a.buffer] = true;
      } else {
        auto& e = rw[a.buffer];
        (a.is_write ? e.second : e.first) = true;
      }
    }
    std::set<std::string> candidates;
    for (const auto& [name, e] : rw)
      if (e.first && e.second) candidates.insert(name);

    // Exact sampling where possible.
    ad::DistanceSampler sampler(k, region, candidates);
    if (!candidates.empty()) sampler.run();

    std::set<std::string> enclosing_names;
    for (const Stmt* l : region.enclosing)
      enclosing_names.insert(l->loop.iterator);

    for (const auto& name : candidates) {
      const Buffer* buf = k.find_buffer(name);
      auto path = ad::cycle_path(region.body(), k, config, name, false);
      long long lat = path ? path->latency : 1;

      const auto& sampled = sampler.result[name];
      if (!sampled.conservative && !sampled.distances.empty()) {
        for (const auto& [pair, dists] : sampled.distances) {
          Dependence d;
          d.buffer = name;
          d.source_id = pair.first;
          d.sink_id = pair.second;
          d.region_id = region.id;
          d.distance = dists.size() == 1 ? std::optional(*dists.begin())
                                         : std::nullopt;
          d.path_latency = lat;
          d.path_ops = path ? path->ops : 0;
          d.state_update = path && path->state_update;
          out.push_back(std::move(d));
        }
        continue;
      }
      if (!sampled.conservative && sampled.distances.empty()) {
        // No in-flight reuse observed. A location can still be revisited when
        // an enclosing loop re-executes the region with the same index map.
        bool dep_on_enclosing = false;
        for (const auto& a : accesses) {
          if (a.is_fifo || a.buffer != name || !a.indices) continue;
          for (const auto& ix : *a.indices)
            dep_on_enclosing |= ad::mentions_iterator(ix, enclosing_names);
        }
        if (!region.enclosing.empty() && !dep_on_enclosing &&
            region.flat_trip > 0) {
          Dependence d;
          d.buffer = name;
          d.source_id = region.id;
          d.sink_id = region.id;
          d.region_id = region.id;
          d.distance = region.flat_trip;
          d.path_latency = lat;
          d.path_ops = path ? path->ops : 0;
          d.state_update = path && path->state_update;
          out.push_back(std::move(d));
        }
        continue;
      }
      // Conservative: data-dependent indexing or unresolvable control.
      // Pairs whose affine dimensions can never coincide carry no
      // dependence; structural periodicity of matching quasi-affine
      // dimensions still bounds the distance from below.
      auto pair_disjoint = [](const std::vector<ExprPtr>& w,
                              const std::vector<ExprPtr>& r) {
        if (w.size() != r.size()) return false;
        for (size_t dim = 0; dim < w.size(); ++dim) {
          auto fw = affine_form(w[dim]);
          auto fr = affine_form(r[dim]);
          if (fw && fr && fw->coeffs == fr->coeffs &&
              fw->constant != fr->constant)
            return true;  // constant offset between identical affine parts
        }
        return false;
      };
      bool any_alias = false;
      bool structural_valid = true;
      std::optional<long long> structural;
      for (const auto& wa : accesses) {
        if (wa.is_fifo || !wa.is_write || wa.buffer != name || !wa.indices)
          continue;
        for (const auto& ra : accesses) {
          if (ra.is_fifo || ra.is_write || ra.buffer != name || !ra.indices)
            continue;
          if (pair_disjoint(*wa.indices, *ra.indices)) continue;
          any_alias = true;
          auto d = ad::min_collision_distance(*wa.indices, *ra.indices, region);
          if (d) structural = structural ? std::min(*structural, *d) : *d;
          else structural_valid = false;
        }
      }
      if (!any_alias) continue;  // every write/read pair provably disjoint
      if (!structural_valid) structural = std::nullopt;
      Dependence d;
      d.buffer = name;
      d.source_id = region.id;
      d.sink_id = region.id;
      d.region_id = region.id;
      d.distance = structural;
      d.path_latency = lat;
      d.path_ops = path ? path->ops : 0;
      d.state_update = path && path->state_update;
      (void)buf;
      out.push_back(std::move(d));
    }

    // FIFO channels both pushed and popped within the region behave as delay
    // lines: steady-state distance equals the channel depth.
    for (const auto& [name, popped] : fifo_rw_read) {
      if (!popped || !fifo_rw_write[name]) continue;
      const Buffer* b = k.find_buffer(name);
      if (!b) continue;
      auto path = ad::cycle_path(region.body(), k, config, name, true);
      Dependence d;
      d.buffer = name;
      d.source_id = region.id;
      d.sink_id = region.id;
      d.region_id = region.id;
      d.distance = b->space.depth;
      d.path_latency = path ? path->latency : 1;
      d.path_ops = path ? path->ops : 0;
      d.through_fifo = true;
      out.push_back(std::move(d));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initiation interval

namespace analysis_detail {

struct InterfaceUse {
  long long reads = 0;
  long long writes = 0;
};

/// Statically counted accesses per iteration, grouped per contended
/// interface. Off-chip accesses to striped buffers group by their bank
/// residue class (stride and offset modulo the bank count).
inline std::map<std::string, std::pair<InterfaceUse, long long>>
count_interface_use(const Kernel& k, const RegionInfo& region,
                    const DeviceConfig& config) {
  std::vector<AccessEvent> accesses;
  collect_accesses(region.body(), k, region.id, 1, accesses);
  // key -> (use, ports). Reads and writes tracked separately against their
  // own port counts; key identifies the interface.
  std::map<std::string, std::pair<InterfaceUse, long long>> reads, writes;

  auto bank_class = [&](const AccessEvent& a,
                        const Buffer& b) -> std::string {
    int nb = static_cast<int>(b.space.banks.size());
    if (nb <= 1) return "bank" + std::to_string(b.space.banks.empty() ? 0 : b.space.banks[0]);
    // Residue of the linearized index modulo the stripe count; accesses with
    // equal (stride, offset) classes always collide on the same bank.
    RegionSpace space(region);
    if (!space.valid || !a.indices) return "striped?";
    const Buffer* buf = &b;
    std::vector<long long> shape;
    for (const auto& e : buf->shape) shape.push_back(eval_const(e).value_or(1));
    auto lin_at = [&](long long t) -> std::optional<long long> {
      space.set(t);
      long long flat = 0;
      if (a.indices->size() != shape.size()) return std::nullopt;
      for (size_t i = 0; i < a.indices->size(); ++i) {
        auto v = eval_qa((*a.indices)[i], space.env);
        if (!v) return std::nullopt;
        flat = flat * shape[i] + *v;
      }
      return flat;
    };
    auto v0 = lin_at(0), v1 = lin_at(std::min<long long>(1, region.flat_trip - 1));
    if (!v0 || !v1) return "striped?";
    long long stride = (*v1 - *v0) % nb;
    long long off = *v0 % nb;
    return "stripe(" + std::to_string((stride + nb) % nb) + "," +
           std::to_string((off + nb) % nb) + ")";
  };

  for (const auto& a : accesses) {
    const Buffer* b = k.find_buffer(a.buffer);
    if (!b) continue;
    switch (b->space.kind) {
      case MemorySpace::Kind::OffChip: {
        std::string key = "memory " + a.buffer + " " + bank_class(a, *b);
        int bank0 = b->space.banks.empty() ? 0 : b->space.banks[0];
        const BankConfig& bc = config.bank(bank0);
        if (a.is_write) {
          auto& e = writes[key];
          e.first.writes += a.unroll_mult;
          e.second = bc.write_ports;
        } else {
          auto& e = reads[key];
          e.first.reads += a.unroll_mult;
          e.second = bc.read_ports;
        }
        break;
      }
      case MemorySpace::Kind::OnChipRam: {
        std::string key = "ram " + a.buffer;
        if (a.is_write) {
          auto& e = writes[key];
          e.first.writes += a.unroll_mult;
          e.second = b->space.write_ports;
        } else {
          auto& e = reads[key];
          e.first.reads += a.unroll_mult;
          e.second = b->space.read_ports;
        }
        break;
      }
      case MemorySpace::Kind::Fifo: {
        std::string key = "channel " + a.buffer;
        if (a.is_write) {
          auto& e = writes[key];
          e.first.writes += a.unroll_mult;
          e.second = 1;
        } else {
          auto& e = reads[key];
          e.first.reads += a.unroll_mult;
          e.second = 1;
        }
        break;
      }
      case MemorySpace::Kind::Registers: break;  // unlimited ports
    }
  }

  std::map<std::string, std::pair<InterfaceUse, long long>> merged;
  for (auto& [key, e] : reads) merged["read " + key] = e;
  for (auto& [key, e] : writes) merged["write " + key] = e;
  return merged;
}

inline bool region_has_call(const RegionInfo& region) {
  bool found = false;
  visit_stmts(region.body(), [&](const StmtPtr& s) {
    if (s->kind == StmtKind::Call) found = true;
  });
  return found;
}

inline IiInfo infer_ii_region(const RegionInfo& region, const Kernel& k,
                              const DeviceConfig& config,
                              const std::vector<Dependence>& deps,
                              int* condition_depth_out = nullptr) {
  long long ii = 1;
  std::string reason = "none";
  const LoopNode& l = region.loop();
  if (l.pragma.target_ii && *l.pragma.target_ii > ii) {
    ii = *l.pragma.target_ii;
    reason = "target";
  }
  int cond_depth = 1;
  for (const auto& d : deps) {
    if (d.region_id != region.id) continue;
    if (d.state_update) {
      cond_depth = std::max(cond_depth, d.path_ops);
      continue;
    }
    long long bound;
    std::string detail;
    if (d.distance) {
      bound = (d.path_latency + *d.distance - 1) / *d.distance;
      detail = "recurrence(" + d.buffer + ", distance=" +
               std::to_string(*d.distance) + ", latency=" +
               std::to_string(d.path_latency) + ")";
    } else {
      bound = d.path_latency;
      detail = "recurrence(" + d.buffer + ", distance=unknown, latency=" +
               std::to_string(d.path_latency) + ", conservative)";
    }
    if (bound > ii) {
      ii = bound;
      reason = detail;
    }
  }
  for (const auto& [key, use] : count_interface_use(k, region, config)) {
    long long accesses = use.first.reads + use.first.writes;
    long long ports = std::max<long long>(1, use.second);
    long long bound = (accesses + ports - 1) / ports;
    if (bound > ii) {
      ii = bound;
      reason = "contention(" + key + ", " + std::to_string(accesses) +
               " accesses/iteration, " + std::to_string(ports) + " ports)";
    }
  }
  if (region_has_call(region)) {
    // A non-inlined call cannot be scheduled into the pipeline; it
    // re-executes serially every iteration.
    long long bound = body_latency(region.body(), k, config);
    if (bound > ii) {
      ii = bound;
      reason = "call(not inlined)";
    }
  }
  if (condition_depth_out) *condition_depth_out = cond_depth;
  return {ii, reason};
}

}  // namespace analysis_detail

/// Initiation interval of a pipelined loop identified by its iterator name.
inline Result<IiInfo> infer_ii(const std::string& iterator, const Kernel& k,
                               const DeviceConfig& config) {
  namespace ad = analysis_detail;
  auto regions = ad::collect_regions(k);
  const ad::RegionInfo* target = nullptr;
  for (const auto& r : regions) {
    for (const Stmt* l : r.chain)
      if (l->loop.iterator == iterator) target = &r;
  }
  if (!target)
    return Result<IiInfo>::failure("no pipelined loop with iterator '" +
                                   iterator + "'");
  auto deps = find_dependences(k, config);
  return ad::infer_ii_region(*target, k, config, deps);
}

// ---------------------------------------------------------------------------
// Resources

inline ResourceEstimate estimate_resources(const Kernel& k,
                                           const DeviceConfig& config) {
  namespace ad = analysis_detail;
  ResourceEstimate res;

  for (const auto& b : k.buffers) {
    long long elems = b.elem.lanes;
    bool known = true;
    for (const auto& e : b.shape) {
      auto v = eval_const(e);
      if (!v) known = false;
      elems *= v.value_or(1);
    }
    (void)known;
    switch (b.space.kind) {
      case MemorySpace::Kind::OnChipRam:
        res.onchip_bits += elems * b.elem.width_bits;
        break;
      case MemorySpace::Kind::Registers:
        res.onchip_bits += elems * b.elem.width_bits;
        res.register_elems += elems;
        break;
      case MemorySpace::Kind::Fifo:
        res.onchip_bits +=
            static_cast<long long>(b.space.depth) * b.elem.total_bits();
        res.fifo_count += 1;
        break;
      case MemorySpace::Kind::OffChip:
        for (int bank : b.space.banks) res.offchip_banks.insert(bank);
        break;
    }
  }

  // Operations replicated by unrolling become parallel hardware units.
  std::function<void(const std::vector<StmtPtr>&, long long)> walk =
      [&](const std::vector<StmtPtr>& body, long long mult) {
        for (const auto& s : body) {
          auto count_expr = [&](const ExprPtr& root) {
            std::function<void(const ExprPtr&)> w = [&](const ExprPtr& e) {
              if (!e) return;
              if (e->kind == ExprKind::Bin) {
                DataType t = analysis_detail::infer_type(e, k);
                std::string key = std::string(DeviceConfig::op_name(e->op)) +
                                  "." + DeviceConfig::type_class(t);
                res.compute_units[key] += mult * t.lanes;
              }
              for (const auto& a : e->args) w(a);
            };
            w(root);
          };
          switch (s->kind) {
            case StmtKind::Assign:
              for (const auto& i : s->indices) count_expr(i);
              count_expr(s->value);
              break;
            case StmtKind::Push: count_expr(s->value); break;
            case StmtKind::Guard:
              count_expr(s->value);
              walk(s->body, mult);
              break;
            case StmtKind::Loop: {
              long long f = 1;
              if (s->loop.pragma.is_unroll()) {
                if (s->loop.pragma.factor) f = *s->loop.pragma.factor;
                else if (auto n = trip_count(s->loop)) f = *n;
              }
              count_expr(s->loop.lower);
              count_expr(s->loop.upper);
              walk(s->loop.body, mult * f);
              break;
            }
            case StmtKind::Call: {
              const Function* fn = k.find_function(s->target);
              if (fn) walk(fn->body, mult);
              break;
            }
          }
        }
      };
  walk(k.top, 1);
  for (const auto& pe : k.pes) walk(pe.body, 1);

  if (res.onchip_bits > config.onchip_bits_capacity)
    res.over_capacity.push_back(
        "onchip_bits " + std::to_string(res.onchip_bits) + " > capacity " +
        std::to_string(config.onchip_bits_capacity));
  if (res.register_elems > config.register_capacity_elems)
    res.over_capacity.push_back(
        "register elements " + std::to_string(res.register_elems) +
        " > capacity " + std::to_string(config.register_capacity_elems));
  if (res.fifo_count > config.fifo_count_capacity)
    res.over_capacity.push_back("fifo count " + std::to_string(res.fifo_count) +
                                " > capacity " +
                                std::to_string(config.fifo_count_capacity));
  for (const auto& [op, cap] : config.compute_unit_capacity) {
    if (cap <= 0) continue;
    // match both exact keys and class keys
    long long used = 0;
    for (const auto& [key, n] : res.compute_units) {
      if (key == op || key.substr(0, key.find('.')) == op) used += n;
      else if (key == op + ".float" || key == op + ".int") used += n;
    }
    if (used > cap)
      res.over_capacity.push_back("compute units " + op + " " +
                                  std::to_string(used) + " > capacity " +
                                  std::to_string(cap));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Cycle counts

namespace analysis_detail {

struct BodyCost {
  long long cycles = 0;
  long long steady = 0;   // sum of I*N terms
  long long depth = 0;    // max pipeline depth inside (for PE composition)
};

struct CycleModel {
  const Kernel& kernel;
  const DeviceConfig& config;
  const std::vector<Dependence>& deps;
  std::vector<RegionInfo> regions;
  PerfReport* report = nullptr;
  std::string error;

  const RegionInfo* region_of(const Stmt* loop_stmt) const {
    for (const auto& r : regions)
      if (r.chain.front() == loop_stmt) return &r;
    return nullptr;
  }

  BodyCost body_cost(const std::vector<StmtPtr>& body) {
    BodyCost total;
    long long loop_cycles = 0;
    bool has_loops = false;
    std::vector<StmtPtr> stmts;
    std::function<void(const std::vector<StmtPtr>&)> handle =
        [&](const std::vector<StmtPtr>& items) {
          for (const auto& s : items) {
            if (s->kind == StmtKind::Loop) {
              has_loops = true;
              BodyCost c = loop_cost(s.get());
              loop_cycles += c.cycles;
              total.steady += c.steady;
              total.depth = std::max(total.depth, c.depth);
            } else if (s->kind == StmtKind::Guard) {
              stmts.push_back(Stmt::guard(s->value, {}));
              handle(s->body);
            } else {
              stmts.push_back(s);
            }
          }
        };
    handle(body);
    long long stmt_latency =
        stmts.empty() ? 0 : body_latency(stmts, kernel, config);
    total.cycles = loop_cycles + stmt_latency;
    total.depth = std::max(total.depth, stmt_latency);
    (void)has_loops;
    return total;
  }

  BodyCost loop_cost(const Stmt* s) {
    const LoopNode& l = s->loop;
    auto n_opt = trip_count(l);
    if (!n_opt) {
      if (error.empty())
        error = "unbound parameter in bounds of loop '" + l.iterator + "'";
      return {};
    }
    long long n = std::max<long long>(0, *n_opt);

    if (l.pragma.is_pipeline()) {
      const RegionInfo* r = region_of(s);
      if (r && r->flat_trip > 0) {
        int cond_depth = 1;
        IiInfo ii = infer_ii_region(*r, kernel, config, deps, &cond_depth);
        long long lat = body_latency(r->body(), kernel, config);
        long long cycles = lat + ii.ii * (r->flat_trip - 1);
        if (report) {
          RegionPerf perf;
          perf.loop_id = r->id;
          perf.trip = r->flat_trip;
          perf.latency = lat;
          perf.ii = ii.ii;
          perf.ii_reason = ii.reason;
          perf.cycles = cycles;
          perf.condition_depth = cond_depth;
          report->loops.push_back(perf);
        }
        return {cycles, ii.ii * r->flat_trip, lat};
      }
      if (error.empty())
        error = "unbound parameter in pipelined loop '" + l.iterator + "'";
      return {};
    }

    if (l.pragma.is_unroll()) {
      // Fully parallel: latency of one body, no sequential iterations.
      BodyCost inner = body_cost(l.body);
      return {inner.cycles, inner.steady * n, inner.depth};
    }

    // Non-pipelined loop: split inner loops from straight-line statements.
    BodyCost loops_only;
    bool has_inner_loops = false;
    std::vector<StmtPtr> stmts;
    std::function<void(const std::vector<StmtPtr>&)> handle =
        [&](const std::vector<StmtPtr>& items) {
          for (const auto& it : items) {
            if (it->kind == StmtKind::Loop) {
              has_inner_loops = true;
              BodyCost c = loop_cost(it.get());
              loops_only.cycles += c.cycles;
              loops_only.steady += c.steady;
              loops_only.depth = std::max(loops_only.depth, c.depth);
            } else if (it->kind == StmtKind::Guard) {
              stmts.push_back(Stmt::guard(it->value, {}));
              handle(it->body);
            } else {
              stmts.push_back(it);
            }
          }
        };
    handle(l.body);
    long long stmts_latency =
        stmts.empty() ? 0 : body_latency(stmts, kernel, config);
    if (!has_inner_loops) {
      // Straight-line body re-executed serially.
      return {n * stmts_latency, 0, stmts_latency};
    }
    // Inner pipelines re-fill per iteration; surrounding statements overlap
    // the next fill and are only exposed once.
    return {n * loops_only.cycles + stmts_latency, n * loops_only.steady,
            std::max(loops_only.depth, stmts_latency)};
  }
};

}  // namespace analysis_detail

/// Full performance model. Requires bound parameters.
inline Result<PerfReport> cycle_count(const Kernel& k,
                                      const DeviceConfig& config) {
  namespace ad = analysis_detail;
  PerfReport report;
  auto deps = find_dependences(k, config);
  ad::CycleModel model{k, config, deps};
  model.regions = ad::collect_regions(k);
  model.report = &report;

  if (!k.has_pe_graph()) {
    ad::BodyCost cost = model.body_cost(k.top);
    if (!model.error.empty()) return Result<PerfReport>::failure(model.error);
    report.total_cycles = cost.cycles;
    report.steady_cycles = cost.steady;
  } else {
    // Latency is additive along the graph; the slowest PE sets the rate.
    long long max_cycles = 0;
    long long sum_depth = 0;
    long long max_depth_of_max = 0;
    long long max_steady = 0;
    std::vector<std::pair<long long, long long>> pe_costs;  // (cycles, depth)
    for (const auto& pe : k.pes) {
      ad::BodyCost c = model.body_cost(pe.body);
      if (!model.error.empty()) return Result<PerfReport>::failure(model.error);
      pe_costs.push_back({c.cycles, c.depth});
      max_steady = std::max(max_steady, c.steady);
    }
    size_t argmax = 0;
    for (size_t i = 0; i < pe_costs.size(); ++i)
      if (pe_costs[i].first > pe_costs[argmax].first) argmax = i;
    for (size_t i = 0; i < pe_costs.size(); ++i) {
      if (i == argmax) max_cycles = pe_costs[i].first;
      else sum_depth += pe_costs[i].second;
    }
    (void)max_depth_of_max;
    report.total_cycles = max_cycles + sum_depth;
    report.steady_cycles = max_steady;
  }

  report.seconds = config.clock_hz > 0
                       ? static_cast<double>(report.total_cycles) / config.clock_hz
                       : 0;
  report.resources = estimate_resources(k, config);

  // Off-chip traffic: accesses times executions times element size.
  double bytes = 0;
  std::function<void(const std::vector<StmtPtr>&, double)> traffic =
      [&](const std::vector<StmtPtr>& body, double mult) {
        for (const auto& s : body) {
          auto count_expr = [&](const ExprPtr& root) {
            std::function<void(const ExprPtr&)> w = [&](const ExprPtr& e) {
              if (!e) return;
              if (e->kind == ExprKind::Read) {
                const Buffer* b = k.find_buffer(e->name);
                if (b && b->space.kind == MemorySpace::Kind::OffChip)
                  bytes += mult * b->elem.bytes();
              }
              for (const auto& a : e->args) w(a);
            };
            w(root);
          };
          switch (s->kind) {
            case StmtKind::Assign: {
              for (const auto& i : s->indices) count_expr(i);
              count_expr(s->value);
              const Buffer* b = k.find_buffer(s->target);
              if (b && b->space.kind == MemorySpace::Kind::OffChip)
                bytes += mult * b->elem.bytes();
              break;
            }
            case StmtKind::Push: count_expr(s->value); break;
            case StmtKind::Guard:
              count_expr(s->value);
              traffic(s->body, mult);  // conservative: guards execute
              break;
            case StmtKind::Loop: {
              auto n = trip_count(s->loop);
              traffic(s->loop.body, mult * static_cast<double>(n.value_or(1)));
              break;
            }
            case StmtKind::Call: {
              const Function* f = k.find_function(s->target);
              if (f) traffic(f->body, mult);
              break;
            }
          }
        }
      };
  traffic(k.top, 1);
  for (const auto& pe : k.pes) traffic(pe.body, 1);
  report.offchip_bytes = bytes;

  return report;
}

}  // namespace hlsopt
