#pragma once

// Scaling transformations: vectorization (folding a pipelined loop into
// W-lane operations), replication (P-fold unrolled compute with reused
// operands) and streaming-dataflow extraction into processing-element
// graphs.

#include "hlsopt/analysis.hpp"
#include "hlsopt/transform/core.hpp"

namespace hlsopt {

namespace transform_detail {

/// Affine stride of `index` with respect to iterator `it` (samples the form;
/// nullopt when not affine in it).
inline std::optional<long long> stride_of(const ExprPtr& index,
                                          const std::string& it) {
  auto form = affine_form(index);
  if (!form) return std::nullopt;
  auto found = form->coeffs.find(it);
  return found == form->coeffs.end() ? 0 : found->second;
}

inline std::optional<long long> affine_offset(const ExprPtr& index) {
  auto form = affine_form(index);
  if (!form) return std::nullopt;
  return form->constant;
}

struct VectorPlan {
  std::set<const Stmt*> fold_loops;      // loops whose trip folds by W
  std::set<std::string> widen_buffers;   // buffers/channels gaining lanes
  std::set<std::string> widen_regs;      // scalar registers holding vectors
};

}  // namespace transform_detail

// ---------------------------------------------------------------------------
// vectorize

inline TransformOutcome vectorize(const Kernel& k, const std::string& loop_it,
                                  long long w, const std::string& style,
                                  const DeviceConfig& config) {
  namespace td = transform_detail;
  if (w < 1) return inapplicable("W must be positive");
  auto loc = find_loop(k, loop_it);
  if (!loc.ok()) return inapplicable(loc.error());
  const Stmt* target = loc->target();
  if (!target->loop.pragma.is_pipeline())
    return inapplicable("'" + loop_it + "' is not pipelined");
  auto trip = trip_count(target->loop);
  auto lo = eval_const(target->loop.lower);
  if (!trip || !lo) return inapplicable("loop bounds must be bound");
  if (*trip % w != 0)
    return inapplicable("trip count " + std::to_string(*trip) +
                        " not divisible by W=" + std::to_string(w));
  if (w == 1) {
    TransformResult r;
    r.kernel = k;
    r.notes = {"W=1: kernel unchanged"};
    return r;
  }

  // ---- strip-mine / partial-unroll styles: a purely local rewrite ----
  if (style == "strip_mine_unroll" || style == "partial_unroll") {
    bool channel_ops = false;
    visit_stmts(target->loop.body, [&](const StmtPtr& s) {
      if (s->kind == StmtKind::Push) channel_ops = true;
      visit_exprs_shallow(s, [&](const ExprPtr& e) {
        if (e->kind == ExprKind::Pop) channel_ops = true;
      });
    });
    if (channel_ops)
      return inapplicable(
          "loop consumes channels; use style=vector_type to widen streams");
    std::set<std::string> taken = td::all_names(k);
    std::string w_it = td::fresh_name(taken, "w");
    ExprPtr lane = fold_expr(Expr::add(
        Expr::add(Expr::mul(Expr::iter(loop_it), Expr::lit(w)), Expr::iter(w_it)),
        Expr::lit(*lo)));
    auto body = substitute_refs(target->loop.body, {{loop_it, lane}});

    LoopNode inner;
    inner.iterator = w_it;
    inner.lower = Expr::lit(0);
    inner.upper = Expr::lit(w);
    inner.pragma = Pragma::unroll();
    inner.body = std::move(body);
    LoopNode outer;
    outer.iterator = loop_it;
    outer.lower = Expr::lit(0);
    outer.upper = Expr::lit(*trip / w);
    outer.pragma = target->loop.pragma;
    outer.body = {Stmt::make_loop(std::move(inner))};

    Kernel out = td::replace_stmt(k, target, {Stmt::make_loop(std::move(outer))});
    std::vector<std::string> notes;
    notes.push_back("strip-mined '" + loop_it + "' by " + std::to_string(w) +
                    " with a fully unrolled lane loop");
    if (style == "partial_unroll")
      notes.push_back(
          "partial unrolling realized by strip-mining (same fold and "
          "hardware; pragma form differs only in surface syntax)");
    // Off-chip bandwidth sanity note.
    long long wmax = std::numeric_limits<long long>::max();
    visit_stmts(target->loop.body, [&](const StmtPtr& s) {
      visit_exprs_shallow(s, [&](const ExprPtr& e) {
        if (e->kind != ExprKind::Read) return;
        const Buffer* b = k.find_buffer(e->name);
        if (b && b->space.kind == MemorySpace::Kind::OffChip)
          wmax = std::min(wmax, max_vector_width(b->space.banks[0],
                                                 b->elem.scalar(), config));
      });
    });
    if (wmax != std::numeric_limits<long long>::max() && w > wmax)
      notes.push_back("warning: W=" + std::to_string(w) +
                      " exceeds W_max=" + std::to_string(wmax) +
                      " sustainable by the memory interface");
    return td::finish(std::move(out), std::move(notes));
  }

  if (style != "vector_type" && !style.empty())
    return inapplicable("unknown style '" + style + "'");

  // ---- vector-type style: widen the data path through buffers/channels ----
  // Worklist over loops to fold: the target plus every peer loop pushing or
  // popping a widened channel, or accessing a widened buffer.
  td::VectorPlan plan;
  std::vector<const Stmt*> worklist = {target};
  std::map<const Stmt*, std::string> loop_iter;

  auto classify_loop = [&](const Stmt* l) -> Result<bool> {
    using R = Result<bool>;
    const std::string it = l->loop.iterator;
    auto n = trip_count(l->loop);
    if (!n || *n % w != 0)
      return R::failure("loop '" + it + "' has trip count not divisible by W");
    std::string err;
    visit_stmts(l->loop.body, [&](const StmtPtr& s) {
      if (!err.empty()) return;
      if (s->kind == StmtKind::Loop) {
        err = "inner loop '" + s->loop.iterator + "' inside vectorized loop";
        return;
      }
      if (s->kind == StmtKind::Guard &&
          td::contains_iterator(s->value, it)) {
        err = "lane-divergent guard in loop '" + it + "'";
        return;
      }
      auto handle_access = [&](const std::string& name,
                               const std::vector<ExprPtr>& indices) {
        const Buffer* b = k.find_buffer(name);
        if (!b || !err.empty()) return;
        bool uses_it = false;
        for (const auto& ix : indices) uses_it |= td::contains_iterator(ix, it);
        if (!uses_it) return;
        for (size_t d = 0; d + 1 < indices.size(); ++d)
          if (td::contains_iterator(indices[d], it)) {
            err = "iterator '" + it + "' in a non-innermost index of '" +
                  name + "'";
            return;
          }
        auto stride = td::stride_of(indices.back(), it);
        if (!stride || (*stride != 1 && *stride != 0)) {
          err = "non-unit stride access to '" + name + "' in loop '" + it + "'";
          return;
        }
        if (*stride == 1) {
          auto off = td::affine_offset(indices.back());
          if (!off || *off % w != 0) {
            // offsets must be W-aligned to regroup elements into lanes
            err = "misaligned access to '" + name + "' (offset not a "
                  "multiple of W)";
            return;
          }
          plan.widen_buffers.insert(name);
        }
      };
      if (s->kind == StmtKind::Assign) handle_access(s->target, s->indices);
      visit_exprs_shallow(s, [&](const ExprPtr& e) {
        if (e->kind == ExprKind::Read) handle_access(e->name, e->args);
        if (e->kind == ExprKind::Select &&
            td::contains_iterator(e->args[0], it) && err.empty())
          err = "lane-divergent select in loop '" + it + "'";
      });
      // channels popped/pushed once per iteration widen too
      if (s->kind == StmtKind::Push) plan.widen_buffers.insert(s->target);
      visit_exprs_shallow(s, [&](const ExprPtr& e) {
        if (e->kind == ExprKind::Pop) plan.widen_buffers.insert(e->name);
      });
    });
    if (!err.empty()) return R::failure(err);
    return true;
  };

  while (!worklist.empty()) {
    const Stmt* l = worklist.back();
    worklist.pop_back();
    if (plan.fold_loops.count(l)) continue;
    auto ok = classify_loop(l);
    if (!ok.ok()) return inapplicable(ok.error());
    plan.fold_loops.insert(l);
    loop_iter[l] = l->loop.iterator;
    // peers: loops elsewhere that access any widened buffer/channel
    for (const auto& name : std::set<std::string>(plan.widen_buffers)) {
      auto sites = td::collect_sites(k, name);
      // pushes/pops need a dedicated scan (collect_sites only covers
      // reads/writes of buffers)
      visit_stmts(k, [&](const StmtPtr&) {});
      for (const auto& site : sites) {
        const Stmt* innermost = nullptr;
        for (const Stmt* c : site.control)
          if (c->kind == StmtKind::Loop) innermost = c;
        if (innermost && !plan.fold_loops.count(innermost))
          worklist.push_back(innermost);
      }
    }
    // channel peers
    std::function<void(const std::vector<StmtPtr>&, std::vector<const Stmt*>&)>
        scan = [&](const std::vector<StmtPtr>& body,
                   std::vector<const Stmt*>& stack) {
          for (const auto& s : body) {
            const Stmt* innermost = nullptr;
            for (const Stmt* c : stack)
              if (c->kind == StmtKind::Loop) innermost = c;
            if (s->kind == StmtKind::Push && plan.widen_buffers.count(s->target) &&
                innermost && !plan.fold_loops.count(innermost))
              worklist.push_back(innermost);
            visit_exprs_shallow(s, [&](const ExprPtr& e) {
              if (e->kind == ExprKind::Pop && plan.widen_buffers.count(e->name) &&
                  innermost && !plan.fold_loops.count(innermost))
                worklist.push_back(innermost);
            });
            if (s->kind == StmtKind::Loop) {
              stack.push_back(s.get());
              scan(s->loop.body, stack);
              stack.pop_back();
            }
            if (s->kind == StmtKind::Guard) scan(s->body, stack);
          }
        };
    std::vector<const Stmt*> stack;
    scan(k.top, stack);
    for (const auto& pe : k.pes) {
      stack.clear();
      scan(pe.body, stack);
    }
  }

  // Only lane-1 buffers can widen; innermost extents must divide.
  for (const auto& name : plan.widen_buffers) {
    const Buffer* b = k.find_buffer(name);
    if (!b) continue;
    if (b->elem.lanes != 1)
      return inapplicable("'" + name + "' is already vector-typed");
    if (b->space.kind != MemorySpace::Kind::Fifo) {
      if (b->shape.empty())
        return inapplicable("scalar buffer '" + name + "' cannot widen");
      auto extent = eval_const(b->shape.back());
      if (!extent || *extent % w != 0)
        return inapplicable("innermost extent of '" + name +
                            "' not divisible by W");
    }
  }

  // Registers assigned vector-valued expressions widen as well (fixpoint).
  {
    bool changed = true;
    auto is_vector_expr = [&](const ExprPtr& e) {
      bool vec = false;
      std::function<void(const ExprPtr&)> walk = [&](const ExprPtr& n) {
        if (!n) return;
        if ((n->kind == ExprKind::Read || n->kind == ExprKind::Pop) &&
            (plan.widen_buffers.count(n->name) || plan.widen_regs.count(n->name)))
          vec = true;
        for (const auto& a : n->args) walk(a);
      };
      walk(e);
      return vec;
    };
    while (changed) {
      changed = false;
      for (const Stmt* l : plan.fold_loops) {
        visit_stmts(l->loop.body, [&](const StmtPtr& s) {
          if (s->kind != StmtKind::Assign) return;
          const Buffer* b = k.find_buffer(s->target);
          if (!b || !s->indices.empty()) return;
          if (plan.widen_buffers.count(s->target) ||
              plan.widen_regs.count(s->target))
            return;
          if (is_vector_expr(s->value)) {
            plan.widen_regs.insert(s->target);
            changed = true;
          }
        });
      }
    }
  }

  // ---- rewrite ----
  Kernel out = k;
  for (const auto& name : plan.widen_buffers) {
    Buffer* b = out.find_buffer(name);
    if (!b) continue;
    b->elem.lanes = static_cast<int>(w);
    if (b->space.kind != MemorySpace::Kind::Fifo) {
      auto extent = eval_const(b->shape.back());
      b->shape.back() = Expr::lit(*extent / w);
    }
  }
  for (const auto& name : plan.widen_regs) {
    Buffer* b = out.find_buffer(name);
    if (b) b->elem.lanes = static_cast<int>(w);
  }

  // Fold each loop and rescale the widened accesses inside it.
  for (const Stmt* l : plan.fold_loops) {
    const std::string it = l->loop.iterator;
    auto n = trip_count(l->loop);
    auto llo = eval_const(l->loop.lower);
    if (!n || !llo) return inapplicable("loop bounds must be bound");

    std::function<ExprPtr(const ExprPtr&)> rw_expr =
        [&](const ExprPtr& e) -> ExprPtr {
      if (e->kind == ExprKind::Read && plan.widen_buffers.count(e->name) &&
          !e->args.empty() && td::contains_iterator(e->args.back(), it)) {
        auto off = td::affine_offset(e->args.back());
        auto copy = std::make_shared<Expr>(*e);
        // index = it + c  ->  it + c/W (iterator now counts vectors)
        copy->args.back() = fold_expr(
            Expr::add(Expr::iter(it), Expr::lit(off.value_or(0) / w)));
        return copy;
      }
      return nullptr;
    };
    auto rw_stmt = [&](const StmtPtr& s) -> StmtPtr {
      if (s->kind == StmtKind::Assign && plan.widen_buffers.count(s->target) &&
          !s->indices.empty() &&
          td::contains_iterator(s->indices.back(), it)) {
        auto off = td::affine_offset(s->indices.back());
        auto copy = std::make_shared<Stmt>(*s);
        copy->indices.back() = fold_expr(
            Expr::add(Expr::iter(it), Expr::lit(off.value_or(0) / w)));
        return copy;
      }
      return nullptr;
    };

    auto copy = std::make_shared<Stmt>(*l);
    copy->loop.upper = fold_expr(
        Expr::add(Expr::lit(*llo + *n / w), Expr::lit(0)));
    copy->loop.lower = Expr::lit(*llo);
    copy->loop.body = rewrite_stmts(l->loop.body, rw_expr, rw_stmt);
    out = td::replace_stmt(out, l, {copy});
  }

  std::vector<std::string> notes;
  notes.push_back("vector width " + std::to_string(w) + " through " +
                  std::to_string(plan.widen_buffers.size()) +
                  " buffer(s)/channel(s); " +
                  std::to_string(plan.fold_loops.size()) +
                  " loop(s) folded");
  long long wmax = std::numeric_limits<long long>::max();
  for (const auto& name : plan.widen_buffers) {
    const Buffer* b = k.find_buffer(name);
    if (b && b->space.kind == MemorySpace::Kind::OffChip)
      wmax = std::min(wmax, max_vector_width(b->space.banks[0],
                                             b->elem.scalar(), config));
  }
  if (wmax != std::numeric_limits<long long>::max() && w > wmax)
    notes.push_back("warning: W=" + std::to_string(w) +
                    " exceeds W_max=" + std::to_string(wmax) +
                    " sustainable by the memory interface");
  return td::finish(std::move(out), std::move(notes));
}

// ---------------------------------------------------------------------------
// replicate

/// P-fold replication of the compute inside an outer loop: the reused
/// operand is buffered P-deep, the pipelined body is unrolled across the
/// copies, and the outer trip count folds by P. Streams named in `share`
/// stay common to all copies; every other channel consumed inside the
/// replicated scope is reordered at its producer.
inline TransformOutcome replicate(const Kernel& k, const std::string& loop_it,
                                  long long p, const std::string& reused,
                                  const std::set<std::string>& share) {
  namespace td = transform_detail;
  if (p < 1) return inapplicable("P must be positive");
  auto loc = find_loop(k, loop_it);
  if (!loc.ok()) return inapplicable(loc.error());
  const Stmt* outer = loc->target();
  auto n = trip_count(outer->loop);
  auto lo = eval_const(outer->loop.lower);
  if (!n || !lo || *lo != 0)
    return inapplicable("outer loop must be bound with zero lower bound");
  if (*n % p != 0)
    return inapplicable("P does not divide the outer trip count");
  if (p == 1) {
    TransformResult r;
    r.kernel = k;
    r.notes = {"P=1: kernel unchanged (buffer of one)"};
    return r;
  }

  const int host_pe = loc->pe_index;
  const Buffer* reused_decl = k.find_buffer(reused);
  if (!reused_decl || !reused_decl->is_scalar() ||
      reused_decl->space.kind != MemorySpace::Kind::Registers)
    return inapplicable("reused operand '" + reused +
                        "' must be a scalar register");

  // Locate the single load of the reused register inside the outer loop and
  // the single pipelined loop.
  const Stmt* load = nullptr;
  const Stmt* pipe = nullptr;
  visit_stmts(outer->loop.body, [&](const StmtPtr& s) {
    if (s->kind == StmtKind::Assign && s->target == reused) {
      if (!load) load = s.get();
      else load = reinterpret_cast<const Stmt*>(1);  // ambiguous
    }
    if (s->kind == StmtKind::Loop && s->loop.pragma.is_pipeline()) {
      if (!pipe) pipe = s.get();
      else pipe = reinterpret_cast<const Stmt*>(1);
    }
  });
  if (!load || load == reinterpret_cast<const Stmt*>(1))
    return inapplicable("need exactly one load of '" + reused +
                        "' inside '" + loop_it + "'");
  if (!pipe || pipe == reinterpret_cast<const Stmt*>(1))
    return inapplicable("need exactly one pipelined loop inside '" + loop_it +
                        "'");

  // The load's value: either a channel pop or a memory read whose indices
  // may use the outer iterator.
  bool load_from_channel = load->value->kind == ExprKind::Pop;
  if (!load_from_channel && load->value->kind != ExprKind::Read)
    return inapplicable("load of '" + reused +
                        "' must pop a channel or read memory");

  std::set<std::string> taken = td::all_names(k);
  std::string p_it = td::fresh_name(taken, "p");
  taken.insert(p_it);

  Kernel out = k;

  // Reused register becomes a P-deep buffer.
  out.find_buffer(reused)->shape = {Expr::lit(p)};

  // Channels popped inside the pipelined loop (other than shared streams)
  // and pushed channels are consumed per copy; collect them.
  std::set<std::string> per_copy_chans;
  visit_stmts(pipe->loop.body, [&](const StmtPtr& s) {
    if (s->kind == StmtKind::Push && !share.count(s->target))
      per_copy_chans.insert(s->target);
    visit_exprs_shallow(s, [&](const ExprPtr& e) {
      if (e->kind == ExprKind::Pop && !share.count(e->name))
        per_copy_chans.insert(e->name);
    });
  });
  if (load_from_channel) per_copy_chans.insert(load->value->name);

  // State buffers written inside the pipelined loop gain a copy dimension.
  std::set<std::string> per_copy_state;
  visit_stmts(pipe->loop.body, [&](const StmtPtr& s) {
    if (s->kind != StmtKind::Assign) return;
    const Buffer* b = k.find_buffer(s->target);
    if (!b) return;
    if (b->space.kind == MemorySpace::Kind::Registers ||
        b->space.kind == MemorySpace::Kind::OnChipRam)
      per_copy_state.insert(s->target);
  });
  for (const auto& name : per_copy_state) {
    Buffer* b = out.find_buffer(name);
    b->shape.push_back(Expr::lit(p));
  }

  // Hoist shared-channel pops in front of the unrolled body.
  std::vector<StmtPtr> hoists;
  std::map<std::string, std::string> shared_reg;  // channel -> register
  for (const auto& ch : share) {
    const Buffer* cb = k.find_buffer(ch);
    if (!cb || cb->space.kind != MemorySpace::Kind::Fifo)
      return inapplicable("shared stream '" + ch + "' is not a channel");
    std::string reg = td::fresh_name(taken, "b");
    taken.insert(reg);
    Buffer rb;
    rb.name = reg;
    rb.elem = cb->elem;
    rb.space = MemorySpace::registers();
    out.buffers.push_back(rb);
    shared_reg[ch] = reg;
    hoists.push_back(Stmt::assign(reg, {}, Expr::pop(ch)));
  }

  // Rewrite the pipelined body: shared pops -> register reads; reads of the
  // reused register -> indexed by p; per-copy state gains the [p] index.
  auto rw_body = [&](const std::vector<StmtPtr>& body) {
    auto expr_fn = [&](const ExprPtr& e) -> ExprPtr {
      if (e->kind == ExprKind::Pop && shared_reg.count(e->name))
        return Expr::read(shared_reg[e->name], {});
      if (e->kind == ExprKind::Read && e->name == reused)
        return Expr::read(reused, {Expr::iter(p_it)});
      if (e->kind == ExprKind::Read && per_copy_state.count(e->name)) {
        auto copy = std::make_shared<Expr>(*e);
        copy->args.push_back(Expr::iter(p_it));
        return ExprPtr(copy);
      }
      return nullptr;
    };
    auto stmt_fn = [&](const StmtPtr& s) -> StmtPtr {
      if (s->kind == StmtKind::Assign && per_copy_state.count(s->target)) {
        auto copy = std::make_shared<Stmt>(*s);
        copy->indices.push_back(Expr::iter(p_it));
        return StmtPtr(copy);
      }
      return nullptr;
    };
    return rewrite_stmts(body, expr_fn, stmt_fn);
  };

  LoopNode lane;
  lane.iterator = p_it;
  lane.lower = Expr::lit(0);
  lane.upper = Expr::lit(p);
  lane.pragma = Pragma::unroll();
  lane.body = rw_body(pipe->loop.body);

  LoopNode new_pipe;
  new_pipe.iterator = pipe->loop.iterator;
  new_pipe.lower = pipe->loop.lower;
  new_pipe.upper = pipe->loop.upper;
  new_pipe.pragma = pipe->loop.pragma;
  new_pipe.body = hoists;
  new_pipe.body.push_back(Stmt::make_loop(std::move(lane)));

  // The load statement replicates into a fill loop over the copies.
  std::string fill_it = td::fresh_name(taken, "pf");
  taken.insert(fill_it);
  StmtPtr fill;
  {
    ExprPtr value = load->value;
    if (!load_from_channel) {
      // substitute the outer iterator: row n -> n*P + pf
      std::map<std::string, ExprPtr> sub{
          {loop_it, fold_expr(Expr::add(
                        Expr::mul(Expr::iter(loop_it), Expr::lit(p)),
                        Expr::iter(fill_it)))}};
      value = substitute_refs(value, sub);
    }
    fill = Stmt::make_loop(fill_it, Expr::lit(0), Expr::lit(p),
                           Pragma::unroll(),
                           {Stmt::assign(reused, {Expr::iter(fill_it)}, value)});
  }

  // Rebuild the outer loop: trip folds by P; the load becomes the fill; the
  // pipelined loop is replaced.
  std::function<std::vector<StmtPtr>(const std::vector<StmtPtr>&)> rebuild =
      [&](const std::vector<StmtPtr>& body) -> std::vector<StmtPtr> {
    std::vector<StmtPtr> out_body;
    for (const auto& s : body) {
      if (s.get() == load) {
        out_body.push_back(fill);
        continue;
      }
      if (s.get() == pipe) {
        out_body.push_back(Stmt::make_loop(new_pipe));
        continue;
      }
      if (s->kind == StmtKind::Loop) {
        auto copy = std::make_shared<Stmt>(*s);
        copy->loop.body = rebuild(s->loop.body);
        out_body.push_back(copy);
        continue;
      }
      if (s->kind == StmtKind::Guard) {
        auto copy = std::make_shared<Stmt>(*s);
        copy->body = rebuild(s->body);
        out_body.push_back(copy);
        continue;
      }
      out_body.push_back(s);
    }
    return out_body;
  };

  LoopNode folded;
  folded.iterator = loop_it;
  folded.lower = Expr::lit(0);
  folded.upper = Expr::lit(*n / p);
  folded.pragma = outer->loop.pragma;
  folded.body = rebuild(outer->loop.body);
  out = td::replace_stmt(out, outer, {Stmt::make_loop(std::move(folded))});

  // ---- reorder producers/consumers of per-copy channels ----
  // The peer PE's outermost loop corresponds to the replicated loop: its
  // trip folds by P and a copy loop sinks innermost around the channel op.
  std::vector<std::string> notes;
  for (const auto& ch : per_copy_chans) {
    for (size_t pi = 0; pi < out.pes.size(); ++pi) {
      if (static_cast<int>(pi) == host_pe) continue;  // the compute PE itself
      ProcessingElement& pe = out.pes[pi];
      bool touches = false;
      visit_stmts(pe.body, [&](const StmtPtr& s) {
        if (s->kind == StmtKind::Push && s->target == ch) touches = true;
        visit_exprs_shallow(s, [&](const ExprPtr& e) {
          if (e->kind == ExprKind::Pop && e->name == ch) touches = true;
        });
      });
      if (!touches) continue;
      if (pe.body.size() != 1 || pe.body[0]->kind != StmtKind::Loop)
        return inapplicable("peer of channel '" + ch +
                            "' has an unsupported shape");
      const Stmt* peer_outer = pe.body[0].get();
      auto pn = trip_count(peer_outer->loop);
      if (!pn || *pn != *n)
        return inapplicable("peer of '" + ch +
                            "' does not iterate the replicated dimension");
      std::string peer_it = peer_outer->loop.iterator;
      std::string copy_it = td::fresh_name(taken, "pc");
      taken.insert(copy_it);
      // substitute peer outer iterator with peer_it*P + copy_it and wrap the
      // channel statement with the copy loop
      std::map<std::string, ExprPtr> sub{
          {peer_it, fold_expr(Expr::add(
                        Expr::mul(Expr::iter(peer_it), Expr::lit(p)),
                        Expr::iter(copy_it)))}};
      std::function<std::vector<StmtPtr>(const std::vector<StmtPtr>&)> sink =
          [&](const std::vector<StmtPtr>& body) -> std::vector<StmtPtr> {
        std::vector<StmtPtr> nb;
        for (const auto& s : body) {
          bool is_chan_op = (s->kind == StmtKind::Push && s->target == ch);
          if (!is_chan_op && s->kind == StmtKind::Assign) {
            visit_exprs_shallow(s, [&](const ExprPtr& e) {
              if (e->kind == ExprKind::Pop && e->name == ch) is_chan_op = true;
            });
          }
          if (is_chan_op) {
            auto sub_stmt = substitute_refs({s}, sub);
            nb.push_back(Stmt::make_loop(copy_it, Expr::lit(0), Expr::lit(p),
                                         Pragma::none(), sub_stmt));
            continue;
          }
          if (s->kind == StmtKind::Loop) {
            auto copy = std::make_shared<Stmt>(*s);
            copy->loop.body = sink(s->loop.body);
            nb.push_back(copy);
            continue;
          }
          if (s->kind == StmtKind::Guard) {
            auto copy = std::make_shared<Stmt>(*s);
            copy->body = sink(s->body);
            nb.push_back(copy);
            continue;
          }
          nb.push_back(s);
        }
        return nb;
      };
      auto new_outer = std::make_shared<Stmt>(*peer_outer);
      new_outer->loop.upper = Expr::lit(*n / p);
      new_outer->loop.body = sink(peer_outer->loop.body);
      pe.body = {new_outer};
      notes.push_back("peer '" + pe.name + "' reordered for " +
                      std::to_string(p) + " interleaved copies of '" + ch +
                      "'");
    }
  }

  // Shared streams' producers fold their replicated-dimension loop by P (the
  // same elements now serve P copies).
  for (const auto& ch : share) {
    for (size_t pi = 0; pi < out.pes.size(); ++pi) {
      if (static_cast<int>(pi) == host_pe) continue;
      ProcessingElement& pe = out.pes[pi];
      bool touches = false;
      visit_stmts(pe.body, [&](const StmtPtr& s) {
        if (s->kind == StmtKind::Push && s->target == ch) touches = true;
      });
      if (!touches) continue;
      if (pe.body.size() != 1 || pe.body[0]->kind != StmtKind::Loop)
        return inapplicable("producer of shared stream '" + ch +
                            "' has an unsupported shape");
      const Stmt* peer_outer = pe.body[0].get();
      auto pn = trip_count(peer_outer->loop);
      if (!pn || *pn != *n)
        return inapplicable("producer of '" + ch +
                            "' does not iterate the replicated dimension");
      auto copy = std::make_shared<Stmt>(*peer_outer);
      copy->loop.upper = Expr::lit(*n / p);
      pe.body = {copy};
      notes.push_back("shared stream '" + ch + "' producer folded by " +
                      std::to_string(p) + " (elements reused across copies)");
    }
  }

  notes.insert(notes.begin(),
               std::to_string(p) + "-fold replication: '" + reused +
                   "' buffered per copy, outer trip " + std::to_string(*n) +
                   " -> " + std::to_string(*n / p));
  return td::finish(std::move(out), std::move(notes));
}

}  // namespace hlsopt
