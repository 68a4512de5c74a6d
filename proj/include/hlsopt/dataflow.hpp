#pragma once

// Cooperative simulator for processing-element graphs. Each PE body is
// flattened to a small instruction list (loops become jumps, channel pops
// are hoisted in front of their statement); PEs are stepped round-robin and
// block on a pop of an empty channel or a push of a full one. Channels carry
// the handshake: functional output is independent of the scheduling order,
// which the test suite asserts by running both scheduler directions.
//
// A pop must not appear inside a select branch (conditional consumption is
// expressed with guard statements); the compiler rejects it.

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "hlsopt/interp.hpp"
#include "hlsopt/ir.hpp"

namespace hlsopt {

struct PeTrace {
  std::string name;
  long long iterations = 0;  // loop back-edges taken
  long long stalls = 0;      // scheduler turns spent blocked
  long long pushes = 0;
  long long pops = 0;
};

struct ChannelTrace {
  std::string name;
  long long pushes = 0;
  long long pops = 0;
  long long max_occupancy = 0;
  int depth = 0;
};

struct SimTrace {
  std::vector<PeTrace> pes;
  std::vector<ChannelTrace> channels;
  bool deadlock = false;
  std::vector<std::string> blocked_channels;  // on deadlock
  RunStats stats;

  bool conserved() const {
    for (const auto& c : channels)
      if (c.pushes != c.pops) return false;
    return true;
  }
};

struct DataflowOptions {
  InterpOptions interp;
  int fifo_depth_override = 0;  // 0 = use declared depths
  bool reverse_order = false;   // scheduler direction
};

struct DataflowResult {
  MemoryImage image;
  SimTrace trace;
};

namespace dataflow_detail {

struct Instr {
  enum class Op { Set, BranchFalse, Jump, Pop, Push, Assign, Halt };
  Op op = Op::Halt;
  std::string name;   // Set target / Pop temp / channel name
  std::string chan;   // Pop channel
  ExprPtr expr;       // Set value / branch condition / Push value
  StmtPtr stmt;       // Assign
  int target = -1;    // jump destination
  bool back_edge = false;
  bool int_expr = false;  // loop arithmetic; evaluated on the integer path
};

struct Compiler {
  const Kernel& kernel;
  std::vector<Instr> code;
  int temp_count = 0;
  std::string error;

  void emit(Instr i) { code.push_back(std::move(i)); }

  // Replaces pops with temps, emitting Pop instructions first (in
  // evaluation order). Pops inside selects are rejected.
  ExprPtr hoist_pops(const ExprPtr& e, bool in_select) {
    if (!e) return e;
    if (e->kind == ExprKind::Pop) {
      if (in_select) {
        if (error.empty())
          error = "pop of '" + e->name +
                  "' inside a select; use a guard statement instead";
        return e;
      }
      std::string tmp = "$pop" + std::to_string(temp_count++);
      Instr p;
      p.op = Instr::Op::Pop;
      p.name = tmp;
      p.chan = e->name;
      emit(std::move(p));
      return Expr::iter(tmp);
    }
    std::vector<ExprPtr> args;
    bool changed = false;
    for (size_t i = 0; i < e->args.size(); ++i) {
      bool sel = in_select || (e->kind == ExprKind::Select && i > 0);
      ExprPtr r = hoist_pops(e->args[i], sel);
      changed |= r != e->args[i];
      args.push_back(std::move(r));
    }
    if (!changed) return e;
    auto copy = std::make_shared<Expr>(*e);
    copy->args = std::move(args);
    return copy;
  }

  void compile_body(const std::vector<StmtPtr>& body) {
    for (const auto& s : body) compile_stmt(s);
  }

  void compile_stmt(const StmtPtr& s) {
    switch (s->kind) {
      case StmtKind::Assign: {
        auto copy = std::make_shared<Stmt>(*s);
        for (auto& ix : copy->indices) ix = hoist_pops(ix, false);
        copy->value = hoist_pops(copy->value, false);
        Instr i;
        i.op = Instr::Op::Assign;
        i.stmt = copy;
        emit(std::move(i));
        break;
      }
      case StmtKind::Push: {
        ExprPtr value = hoist_pops(s->value, false);
        Instr i;
        i.op = Instr::Op::Push;
        i.name = s->target;
        i.expr = value;
        emit(std::move(i));
        break;
      }
      case StmtKind::Guard: {
        ExprPtr cond = hoist_pops(s->value, false);
        Instr br;
        br.op = Instr::Op::BranchFalse;
        br.expr = cond;
        int at = static_cast<int>(code.size());
        emit(std::move(br));
        compile_body(s->body);
        code[at].target = static_cast<int>(code.size());
        break;
      }
      case StmtKind::Loop: {
        const LoopNode& l = s->loop;
        std::string it = l.iterator;
        Instr init;
        init.op = Instr::Op::Set;
        init.name = it;
        init.expr = l.lower;
        init.int_expr = true;
        emit(std::move(init));
        int head = static_cast<int>(code.size());
        Instr test;
        test.op = Instr::Op::BranchFalse;
        test.expr = Expr::lt(Expr::iter(it), l.upper);
        test.int_expr = true;
        int test_at = head;
        emit(std::move(test));
        compile_body(l.body);
        Instr inc;
        inc.op = Instr::Op::Set;
        inc.name = it;
        inc.expr = Expr::add(Expr::iter(it), Expr::lit(1));
        inc.int_expr = true;
        emit(std::move(inc));
        Instr jump;
        jump.op = Instr::Op::Jump;
        jump.target = head;
        jump.back_edge = true;
        emit(std::move(jump));
        code[test_at].target = static_cast<int>(code.size());
        break;
      }
      case StmtKind::Call: {
        const Function* f = kernel.find_function(s->target);
        if (f) compile_body(f->body);
        else if (error.empty())
          error = "call to unknown function '" + s->target + "'";
        break;
      }
    }
  }
};

struct Channel {
  std::deque<Value> q;
  int depth = 16;
  ChannelTrace trace;
  DataType elem;
};

struct PeState {
  std::vector<Instr> code;
  int pc = 0;
  interp_detail::Env env;
  PeTrace trace;
  bool done = false;
  std::string blocked_on;  // channel currently blocking this PE
};

}  // namespace dataflow_detail

/// Runs a processing-element-graph kernel to completion or deadlock.
inline Result<DataflowResult> run_dataflow(const Kernel& k,
                                           const MemoryImage& inputs,
                                           DataflowOptions opts = {}) {
  namespace dd = dataflow_detail;
  if (!k.has_pe_graph())
    return Result<DataflowResult>::failure(
        "kernel has no processing-element graph; use run_sequential");
  if (!k.parameters.empty())
    return Result<DataflowResult>::failure("parameters must be bound");

  auto img = allocate_image(k);
  if (!img) return Result<DataflowResult>::failure(img.error());
  MemoryImage image = std::move(img).value();
  for (const auto& [name, data] : inputs.buffers) {
    BufferData* dst = image.find(name);
    if (!dst) continue;
    if (dst->scalar_count() != data.scalar_count())
      return Result<DataflowResult>::failure(
          "input '" + name + "' has " + std::to_string(data.scalar_count()) +
          " scalars, kernel expects " + std::to_string(dst->scalar_count()));
    BufferData copy = data;
    copy.elem = dst->elem;
    copy.shape = dst->shape;
    image.buffers[name] = std::move(copy);
  }

  std::map<std::string, dd::Channel> channels;
  for (const auto& b : k.buffers) {
    if (b.space.kind != MemorySpace::Kind::Fifo) continue;
    dd::Channel c;
    c.depth = opts.fifo_depth_override > 0 ? opts.fifo_depth_override
                                           : std::max(1, b.space.depth);
    c.trace.name = b.name;
    c.trace.depth = c.depth;
    c.elem = b.elem;
    channels[b.name] = std::move(c);
  }

  std::vector<dd::PeState> pes(k.pes.size());
  for (size_t i = 0; i < k.pes.size(); ++i) {
    dd::Compiler comp{k};
    comp.compile_body(k.pes[i].body);
    if (!comp.error.empty())
      return Result<DataflowResult>::failure("pe '" + k.pes[i].name +
                                             "': " + comp.error);
    dd::Instr halt;
    halt.op = dd::Instr::Op::Halt;
    comp.emit(std::move(halt));
    pes[i].code = std::move(comp.code);
    pes[i].trace.name = k.pes[i].name;
  }

  interp_detail::Machine machine(k, image, opts.interp);
  SimTrace trace;
  machine.stats = &trace.stats;

  // One scheduler turn: run until a channel operation happens (or blocks),
  // the PE halts, or the instruction budget for the turn runs out.
  auto turn = [&](dd::PeState& pe) -> bool {  // returns true if progressed
    bool progressed = false;
    long long budget = 1 << 22;
    while (!pe.done && budget-- > 0) {
      dd::Instr& ins = pe.code[pe.pc];
      switch (ins.op) {
        case dd::Instr::Op::Halt: pe.done = true; return true;
        case dd::Instr::Op::Set: {
          Value& slot = pe.env.set(ins.name);
          if (ins.int_expr) {
            slot.type = DataType::i64();
            slot.i0 = machine.eval_index(ins.expr, pe.env);
          } else {
            slot = interp_detail::cast_value(machine.eval(ins.expr, pe.env),
                                             DataType::i64());
          }
          ++pe.pc;
          progressed = true;
          break;
        }
        case dd::Instr::Op::Jump:
          if (ins.back_edge) ++pe.trace.iterations;
          pe.pc = ins.target;
          progressed = true;
          break;
        case dd::Instr::Op::BranchFalse: {
          bool taken = ins.int_expr
                           ? machine.eval_index(ins.expr, pe.env) != 0
                           : interp_detail::truthy(
                                 machine.eval(ins.expr, pe.env));
          pe.pc = taken ? pe.pc + 1 : ins.target;
          progressed = true;
          break;
        }
        case dd::Instr::Op::Assign: {
          Value v = machine.eval(ins.stmt->value, pe.env);
          machine.store(ins.stmt->target, ins.stmt->indices, v, pe.env,
                        ins.stmt->span);
          ++pe.pc;
          progressed = true;
          break;
        }
        case dd::Instr::Op::Pop: {
          auto it = channels.find(ins.chan);
          if (it == channels.end())
            interp_detail::die("pop from unknown channel '" + ins.chan + "'");
          dd::Channel& c = it->second;
          if (c.q.empty()) {
            pe.blocked_on = ins.chan;
            ++pe.trace.stalls;
            return progressed;
          }
          pe.env.set(ins.name) = std::move(c.q.front());
          c.q.pop_front();
          c.trace.pops++;
          pe.trace.pops++;
          pe.blocked_on.clear();
          ++pe.pc;
          return true;  // channel op ends the turn
        }
        case dd::Instr::Op::Push: {
          auto it = channels.find(ins.name);
          if (it == channels.end())
            interp_detail::die("push to unknown channel '" + ins.name + "'");
          dd::Channel& c = it->second;
          if (static_cast<int>(c.q.size()) >= c.depth) {
            pe.blocked_on = ins.name;
            ++pe.trace.stalls;
            return progressed;
          }
          Value v = interp_detail::cast_value(machine.eval(ins.expr, pe.env),
                                              c.elem);
          c.q.push_back(std::move(v));
          c.trace.max_occupancy =
              std::max<long long>(c.trace.max_occupancy, c.q.size());
          c.trace.pushes++;
          pe.trace.pushes++;
          pe.blocked_on.clear();
          ++pe.pc;
          return true;
        }
      }
    }
    return progressed;
  };

  try {
    while (true) {
      bool all_done = true;
      bool any_progress = false;
      for (size_t n = 0; n < pes.size(); ++n) {
        size_t idx = opts.reverse_order ? pes.size() - 1 - n : n;
        dd::PeState& pe = pes[idx];
        if (pe.done) continue;
        all_done = false;
        if (turn(pe)) any_progress = true;
      }
      if (all_done) break;
      if (!any_progress) {
        trace.deadlock = true;
        std::set<std::string> blocked;
        for (const auto& pe : pes)
          if (!pe.done && !pe.blocked_on.empty()) blocked.insert(pe.blocked_on);
        trace.blocked_channels.assign(blocked.begin(), blocked.end());
        break;
      }
    }
  } catch (const interp_detail::InterpError& e) {
    return Result<DataflowResult>::failure(
        e.message + (e.span.valid() ? " at " + e.span.str() : ""));
  }

  for (auto& pe : pes) trace.pes.push_back(pe.trace);
  for (auto& [name, c] : channels) trace.channels.push_back(c.trace);
  return DataflowResult{std::move(image), std::move(trace)};
}

}  // namespace hlsopt
