#pragma once

// Memory access transformations: extraction of off-chip accesses into
// dedicated reader/writer processing elements, random-access staging into
// on-chip shadows, bank striping, oversubscribed (widened) readers and type
// demotion.

#include <cctype>

#include "hlsopt/analysis.hpp"
#include "hlsopt/transform/core.hpp"

namespace hlsopt {

namespace transform_detail {

/// Clones a control path (loops and guards, outermost first) around a
/// payload statement list. Loop iterators are renamed through `renames`
/// (fresh names per clone keep loop identifiers unique across the kernel).
inline std::vector<StmtPtr> clone_control(
    const std::vector<const Stmt*>& control, std::vector<StmtPtr> payload,
    const std::map<std::string, ExprPtr>& renames) {
  if (!renames.empty()) payload = substitute_refs(payload, renames);
  for (size_t i = control.size(); i-- > 0;) {
    const Stmt* c = control[i];
    if (c->kind == StmtKind::Loop) {
      LoopNode l;
      auto it = renames.find(c->loop.iterator);
      l.iterator = it != renames.end() && it->second->kind == ExprKind::IterRef
                       ? it->second->name
                       : c->loop.iterator;
      l.lower = substitute_refs(c->loop.lower, renames);
      l.upper = substitute_refs(c->loop.upper, renames);
      l.pragma = c->loop.pragma;
      l.body = std::move(payload);
      payload = {Stmt::make_loop(std::move(l))};
    } else {
      payload = {Stmt::guard(substitute_refs(c->value, renames),
                             std::move(payload))};
    }
  }
  return payload;
}

/// Fresh-name map for every loop iterator on a control path.
inline std::map<std::string, ExprPtr> rename_control_iterators(
    const std::vector<const Stmt*>& control, std::set<std::string>& taken) {
  std::map<std::string, ExprPtr> renames;
  for (const Stmt* c : control) {
    if (c->kind != StmtKind::Loop) continue;
    std::string fresh = fresh_name(taken, c->loop.iterator);
    taken.insert(fresh);
    renames[c->loop.iterator] = Expr::iter(fresh);
  }
  return renames;
}

/// `iter == literal` (either side), for guard-driven domain collapse.
inline std::optional<std::pair<std::string, long long>> equality_cond(
    const ExprPtr& cond) {
  if (cond->kind != ExprKind::Bin || cond->op != BinOp::Eq) return std::nullopt;
  const ExprPtr& a = cond->args[0];
  const ExprPtr& b = cond->args[1];
  if (a->kind == ExprKind::IterRef) {
    if (auto v = eval_const(b)) return std::pair{a->name, *v};
  }
  if (b->kind == ExprKind::IterRef) {
    if (auto v = eval_const(a)) return std::pair{b->name, *v};
  }
  return std::nullopt;
}

/// Removes control loops whose payload only ever fires at one iteration
/// (guarded by `iter == literal`): the loop is dropped and the literal is
/// substituted. Select-path conditions collapse the same way when allowed.
struct CollapsedControl {
  std::vector<const Stmt*> control;
  std::vector<std::pair<ExprPtr, bool>> select_path;
  std::map<std::string, ExprPtr> subst;  // collapsed iterators -> literals
};

inline CollapsedControl collapse_control(
    const std::vector<const Stmt*>& control,
    const std::vector<std::pair<ExprPtr, bool>>& select_path,
    bool collapse_selects) {
  CollapsedControl out;
  std::set<std::string> loop_iters;
  for (const Stmt* c : control)
    if (c->kind == StmtKind::Loop) loop_iters.insert(c->loop.iterator);

  std::map<std::string, long long> collapsed;
  for (const Stmt* c : control) {
    if (c->kind != StmtKind::Guard) continue;
    if (auto eq = equality_cond(c->value))
      if (loop_iters.count(eq->first)) collapsed[eq->first] = eq->second;
  }
  if (collapse_selects) {
    for (const auto& [cond, then] : select_path) {
      if (!then) continue;  // only the taken-at-equality branch collapses
      if (auto eq = equality_cond(cond))
        if (loop_iters.count(eq->first)) collapsed[eq->first] = eq->second;
    }
  }
  for (const auto& [name, value] : collapsed)
    out.subst[name] = Expr::lit(value);

  for (const Stmt* c : control) {
    if (c->kind == StmtKind::Loop && collapsed.count(c->loop.iterator))
      continue;  // loop collapsed to a single iteration
    if (c->kind == StmtKind::Guard) {
      if (auto eq = equality_cond(c->value))
        if (collapsed.count(eq->first)) continue;  // guard now trivially true
    }
    out.control.push_back(c);
  }
  for (const auto& [cond, then] : select_path) {
    if (collapse_selects && then) {
      if (auto eq = equality_cond(cond))
        if (collapsed.count(eq->first)) continue;
    }
    out.select_path.push_back({cond, then});
  }
  return out;
}

/// Burst engines pipeline whole perfect nests: the flattened loop keeps the
/// stream at line rate with a single fill, instead of re-filling an inner
/// pipeline per outer iteration.
inline std::vector<StmtPtr> pipeline_innermost(std::vector<StmtPtr> body) {
  // Is this loop a perfect chain (single-loop bodies all the way down)?
  std::function<bool(const Stmt&)> perfect = [&](const Stmt& s) -> bool {
    if (s.loop.body.size() == 1 && s.loop.body[0]->kind == StmtKind::Loop)
      return perfect(*s.loop.body[0]);
    for (const auto& inner : s.loop.body)
      if (inner->kind == StmtKind::Loop) return false;
    return true;
  };
  std::function<StmtPtr(const StmtPtr&, bool)> strip =
      [&](const StmtPtr& s, bool top) -> StmtPtr {
    if (s->kind != StmtKind::Loop) return s;
    auto copy = std::make_shared<Stmt>(*s);
    copy->loop.pragma = top ? Pragma::pipeline() : Pragma::none();
    copy->loop.body.clear();
    for (const auto& inner : s->loop.body)
      copy->loop.body.push_back(strip(inner, false));
    return copy;
  };
  std::function<StmtPtr(const StmtPtr&)> fix = [&](const StmtPtr& s) -> StmtPtr {
    if (s->kind != StmtKind::Loop) return s;
    if (perfect(*s)) return strip(s, true);
    bool has_inner_loop = false;
    for (const auto& inner : s->loop.body)
      has_inner_loop |= inner->kind == StmtKind::Loop;
    auto copy = std::make_shared<Stmt>(*s);
    if (has_inner_loop) {
      copy->loop.body.clear();
      for (const auto& inner : s->loop.body)
        copy->loop.body.push_back(fix(inner));
    } else if (copy->loop.pragma.kind == Pragma::Kind::None) {
      copy->loop.pragma = Pragma::pipeline();
    }
    return copy;
  };
  for (auto& s : body) s = fix(s);
  return body;
}

/// Guard expression equivalent to a select-branch path.
inline std::vector<StmtPtr> wrap_select_path(
    const std::vector<std::pair<ExprPtr, bool>>& path,
    std::vector<StmtPtr> payload) {
  for (size_t i = path.size(); i-- > 0;) {
    ExprPtr cond = path[i].second
                       ? path[i].first
                       : Expr::eq(path[i].first, Expr::lit(0));
    payload = {Stmt::guard(cond, std::move(payload))};
  }
  return payload;
}

inline bool control_is_static(const Site& s) {
  for (const Stmt* c : s.control) {
    if (c->kind == StmtKind::Guard &&
        classify_index(c->value) != IndexClass::QuasiAffine)
      return false;
    if (c->kind == StmtKind::Loop &&
        (classify_index(c->loop.lower) != IndexClass::QuasiAffine ||
         classify_index(c->loop.upper) != IndexClass::QuasiAffine))
      return false;
  }
  for (const auto& [cond, then] : s.select_path)
    if (classify_index(cond) != IndexClass::QuasiAffine) return false;
  return true;
}

}  // namespace transform_detail

// ---------------------------------------------------------------------------
// extract_memory_accesses

/// Moves every access to an off-chip buffer out of the compute logic:
/// dedicated reader/writer PEs perform the memory traffic in the access
/// order of the compute code and exchange elements through FIFO channels.
/// Multiple reads sharing one control structure are staged through an
/// on-chip buffer so each region is fetched as a single long burst.
inline TransformOutcome extract_memory_accesses(const Kernel& k,
                                                const std::string& buffer) {
  namespace td = transform_detail;
  const Buffer* decl = k.find_buffer(buffer);
  if (!decl) return inapplicable("no buffer named '" + buffer + "'");
  if (decl->space.kind != MemorySpace::Kind::OffChip)
    return inapplicable("'" + buffer + "' is not off-chip");

  // Promote a loop-nest kernel to a single-PE graph first.
  Kernel work = k;
  if (!work.has_pe_graph()) {
    ProcessingElement pe;
    pe.name = "compute";
    pe.body = work.top;
    work.top.clear();
    work.pes.push_back(std::move(pe));
  }

  // All accesses must live in one PE.
  int host_pe = -1;
  for (size_t i = 0; i < work.pes.size(); ++i) {
    std::vector<td::Site> sites;
    std::vector<const Stmt*> control;
    td::collect_sites(work.pes[i].body, buffer, control, sites);
    if (sites.empty()) continue;
    if (host_pe >= 0)
      return inapplicable("'" + buffer + "' is accessed by several PEs");
    host_pe = static_cast<int>(i);
  }
  if (host_pe < 0) return inapplicable("no accesses to '" + buffer + "'");

  std::vector<td::Site> sites;
  {
    std::vector<const Stmt*> control;
    td::collect_sites(work.pes[host_pe].body, buffer, control, sites);
  }
  for (const auto& s : sites) {
    for (const auto& ix : s.indices)
      if (classify_index(ix) != IndexClass::QuasiAffine)
        return inapplicable("data-dependent address (cannot form burst): " +
                            td::describe_site(buffer, s));
    if (!td::control_is_static(s))
      return inapplicable("data-dependent control around access: " +
                          td::describe_site(buffer, s));
  }

  std::vector<td::Site> reads, writes;
  for (const auto& s : sites) (s.is_write ? writes : reads).push_back(s);

  std::set<std::string> taken = td::all_names(work);
  Kernel out = work;
  std::vector<std::string> notes;

  // ---- reads ----
  // Group read sites that share the same control path; each group becomes
  // one reader PE. Within a group, all but the last site are staged into
  // on-chip buffers by dedicated burst loops.
  std::vector<std::vector<size_t>> groups;
  for (size_t i = 0; i < reads.size(); ++i) {
    bool placed = false;
    for (auto& g : groups) {
      if (reads[g[0]].control == reads[i].control) {
        g.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) groups.push_back({i});
  }

  struct ReadPlan {
    const Expr* node;
    std::string channel;
  };
  std::vector<ReadPlan> read_plans;

  int chan_idx = 0;
  int reader_idx = 0;
  for (const auto& g : groups) {
    std::string pe_name = td::fresh_name(
        taken, "read_" + buffer + (reader_idx ? std::to_string(reader_idx) : ""));
    taken.insert(pe_name);
    ++reader_idx;
    std::vector<StmtPtr> pe_body;
    // Collapse loops that only fire at a single guarded iteration, then
    // rename the remaining iterators for this engine.
    td::CollapsedControl cc = td::collapse_control(
        reads[g[0]].control,
        g.size() == 1 ? reads[g[0]].select_path
                      : std::vector<std::pair<ExprPtr, bool>>{},
        g.size() == 1);
    auto renames = td::rename_control_iterators(cc.control, taken);
    for (const auto& [name, lit] : cc.subst) renames[name] = lit;

    // Stage all but the last site of the group.
    std::vector<std::string> staged;  // per group-site; empty = direct
    for (size_t gi = 0; gi + 1 < g.size(); ++gi) {
      const td::Site& s = reads[g[gi]];
      // Flat domain of the (collapsed) control loops.
      long long domain = 1;
      std::vector<const Stmt*> loops;
      for (const Stmt* c : cc.control)
        if (c->kind == StmtKind::Loop) loops.push_back(c);
      for (const Stmt* l : loops) {
        auto n = trip_count(l->loop);
        if (!n) return inapplicable("reader bounds must be bound");
        domain *= *n;
      }
      std::string stage = td::fresh_name(taken, buffer + "_stage");
      taken.insert(stage);
      Buffer sb;
      sb.name = stage;
      sb.elem = decl->elem;
      sb.shape = {Expr::lit(domain)};
      sb.space = MemorySpace::ram();
      out.buffers.push_back(sb);
      staged.push_back(stage);

      // flat index from the loop iterators
      ExprPtr flat = Expr::lit(0);
      for (const Stmt* l : loops) {
        auto n = trip_count(l->loop);
        flat = fold_expr(Expr::add(
            Expr::mul(flat, Expr::lit(*n)),
            fold_expr(Expr::sub(Expr::iter(l->loop.iterator), l->loop.lower))));
      }
      auto burst = td::clone_control(
          cc.control,
          td::wrap_select_path(
              g.size() == 1 ? cc.select_path : s.select_path,
              {Stmt::assign(stage, {flat}, Expr::read(buffer, s.indices))}),
          renames);
      for (const auto& st : burst) pe_body.push_back(st);
    }
    staged.push_back("");  // last site reads memory directly

    // Delivery loop: push every site's element in consumption order.
    std::vector<StmtPtr> delivery_payload;
    std::vector<std::string> channels;
    for (size_t gi = 0; gi < g.size(); ++gi) {
      const td::Site& s = reads[g[gi]];
      std::string ch = td::fresh_name(taken, buffer + "_r" + std::to_string(chan_idx++));
      taken.insert(ch);
      channels.push_back(ch);
      Buffer cb;
      cb.name = ch;
      cb.elem = decl->elem;
      cb.space = MemorySpace::fifo(16);
      out.buffers.push_back(cb);
    }
    {
      const td::Site& s0 = reads[g[0]];
      (void)s0;
      std::vector<const Stmt*> loops;
      for (const Stmt* c : cc.control)
        if (c->kind == StmtKind::Loop) loops.push_back(c);
      ExprPtr flat = Expr::lit(0);
      for (const Stmt* l : loops) {
        auto n = trip_count(l->loop);
        if (!n) return inapplicable("reader bounds must be bound");
        flat = fold_expr(Expr::add(
            Expr::mul(flat, Expr::lit(*n)),
            fold_expr(Expr::sub(Expr::iter(l->loop.iterator), l->loop.lower))));
      }
      for (size_t gi = 0; gi < g.size(); ++gi) {
        const td::Site& s = reads[g[gi]];
        ExprPtr value = staged[gi].empty()
                            ? Expr::read(buffer, s.indices)
                            : Expr::read(staged[gi], {flat});
        auto payload = td::wrap_select_path(
            g.size() == 1 ? cc.select_path : s.select_path,
            {Stmt::push(channels[gi], value)});
        for (const auto& st : payload) delivery_payload.push_back(st);
      }
      auto delivery = td::clone_control(cc.control, delivery_payload, renames);
      for (const auto& st : delivery) pe_body.push_back(st);
    }

    ProcessingElement pe;
    pe.name = pe_name;
    pe.body = td::pipeline_innermost(std::move(pe_body));
    out.pes.push_back(std::move(pe));

    for (size_t gi = 0; gi < g.size(); ++gi)
      read_plans.push_back({reads[g[gi]].read, channels[gi]});
    notes.push_back("reader '" + pe_name + "' serves " +
                    std::to_string(g.size()) + " access(es) to '" + buffer +
                    "'" + (g.size() > 1 ? " with burst staging" : ""));
  }

  // ---- writes ----
  struct WritePlan {
    const Stmt* stmt;
    std::string channel;
  };
  std::vector<WritePlan> write_plans;
  int writer_idx = 0;
  for (const auto& s : writes) {
    std::string ch = td::fresh_name(taken, buffer + "_w" + std::to_string(writer_idx));
    taken.insert(ch);
    Buffer cb;
    cb.name = ch;
    cb.elem = decl->elem;
    cb.space = MemorySpace::fifo(16);
    out.buffers.push_back(cb);
    std::string pe_name = td::fresh_name(
        taken, "write_" + buffer + (writer_idx ? std::to_string(writer_idx) : ""));
    taken.insert(pe_name);
    ++writer_idx;
    ProcessingElement pe;
    pe.name = pe_name;
    td::CollapsedControl cc = td::collapse_control(s.control, {}, false);
    auto renames = td::rename_control_iterators(cc.control, taken);
    for (const auto& [name, lit] : cc.subst) renames[name] = lit;
    pe.body = td::pipeline_innermost(td::clone_control(
        cc.control, {Stmt::assign(buffer, s.indices, Expr::pop(ch))}, renames));
    out.pes.push_back(std::move(pe));
    write_plans.push_back({s.stmt, ch});
    notes.push_back("writer '" + pe_name + "' drains '" + buffer + "'");
  }

  // ---- rewrite the compute PE ----
  // Reads inside select branches become guarded pops into registers; plain
  // reads become pops in place. Writes become pushes.
  std::vector<Buffer> new_regs;
  int tmp_idx = 0;
  std::function<std::vector<StmtPtr>(const std::vector<StmtPtr>&)> rw_body =
      [&](const std::vector<StmtPtr>& body) -> std::vector<StmtPtr> {
    std::vector<StmtPtr> out_body;
    for (const auto& s : body) {
      auto copy = std::make_shared<Stmt>(*s);
      if (copy->kind == StmtKind::Loop) {
        copy->loop.body = rw_body(copy->loop.body);
        out_body.push_back(copy);
        continue;
      }
      if (copy->kind == StmtKind::Guard) {
        copy->body = rw_body(copy->body);
        // fall through for reads in the condition
      }
      // write?
      for (const auto& wp : write_plans) {
        if (wp.stmt == s.get()) {
          copy = std::make_shared<Stmt>(*Stmt::push(wp.channel, copy->value));
          break;
        }
      }
      // reads, including conditional ones
      std::vector<StmtPtr> pre;
      std::function<ExprPtr(const ExprPtr&, bool)> rw_expr =
          [&](const ExprPtr& e, bool in_select) -> ExprPtr {
        if (!e) return e;
        if (e->kind == ExprKind::Read && e->name == buffer) {
          for (const auto& rp : read_plans) {
            if (rp.node != e.get()) continue;
            if (!in_select) return Expr::pop(rp.channel);
            // conditional consumption: pop under the original condition
            std::string tmp = td::fresh_name(taken, buffer + "_v" + std::to_string(tmp_idx++));
            taken.insert(tmp);
            Buffer rb;
            rb.name = tmp;
            rb.elem = decl->elem;
            rb.space = MemorySpace::registers();
            new_regs.push_back(rb);
            // find the site's select path to rebuild the guard
            for (const auto& site : reads) {
              if (site.read != e.get()) continue;
              auto guarded = td::wrap_select_path(
                  site.select_path,
                  {Stmt::assign(tmp, {}, Expr::pop(rp.channel))});
              for (const auto& g : guarded) pre.push_back(g);
            }
            return Expr::read(tmp, {});
          }
        }
        std::vector<ExprPtr> args;
        bool changed = false;
        for (size_t i = 0; i < e->args.size(); ++i) {
          bool sel = in_select || (e->kind == ExprKind::Select && i > 0);
          ExprPtr r = rw_expr(e->args[i], sel);
          changed |= r != e->args[i];
          args.push_back(std::move(r));
        }
        if (!changed) return e;
        auto ec = std::make_shared<Expr>(*e);
        ec->args = std::move(args);
        return ec;
      };
      auto c2 = std::make_shared<Stmt>(*copy);
      for (auto& ix : c2->indices) ix = rw_expr(ix, false);
      if (c2->value) c2->value = rw_expr(c2->value, false);
      for (const auto& p : pre) out_body.push_back(p);
      out_body.push_back(c2);
    }
    return out_body;
  };
  out.pes[host_pe].body = rw_body(out.pes[host_pe].body);
  for (const auto& rb : new_regs) out.buffers.push_back(rb);

  return td::finish(std::move(out), std::move(notes));
}

// ---------------------------------------------------------------------------
// buffer_random_access

inline TransformOutcome buffer_random_access(const Kernel& k,
                                             const std::string& buffer,
                                             const std::string& stage,
                                             const DeviceConfig& config) {
  namespace td = transform_detail;
  const Buffer* decl = k.find_buffer(buffer);
  if (!decl) return inapplicable("no buffer named '" + buffer + "'");
  if (decl->space.kind != MemorySpace::Kind::OffChip)
    return inapplicable("'" + buffer + "' is already on-chip");
  if (stage != "load" && stage != "store" && stage != "both")
    return inapplicable("stage must be load, store or both");
  if (k.has_pe_graph())
    return inapplicable("expects a loop-nest kernel (apply before extraction)");

  auto sites = td::collect_sites(k, buffer);
  if (sites.empty()) return inapplicable("no accesses to '" + buffer + "'");
  bool any_random = false;
  bool any_write = false;
  for (const auto& s : sites) {
    for (const auto& ix : s.indices)
      any_random |= classify_index(ix) == IndexClass::DataDependent;
    any_write |= s.is_write;
  }
  if (!any_random)
    return inapplicable("'" + buffer + "' has no random accesses");
  if (stage == "load" && any_write)
    return inapplicable("'" + buffer +
                        "' is written; staging needs store or both");

  long long elems = 1;
  for (const auto& e : decl->shape) {
    auto v = eval_const(e);
    if (!v) return inapplicable("extents must be bound");
    elems *= *v;
  }
  long long bits = elems * decl->elem.total_bits();
  if (bits > config.onchip_bits_capacity)
    return inapplicable("capacity exceeded: shadow needs " +
                        std::to_string(bits) + " bits, capacity " +
                        std::to_string(config.onchip_bits_capacity));

  // Span of top-level statements touching the buffer.
  size_t first = k.top.size(), last = 0;
  for (size_t i = 0; i < k.top.size(); ++i) {
    bool touches = false;
    std::function<void(const StmtPtr&)> walk = [&](const StmtPtr& s) {
      if (s->kind == StmtKind::Assign && s->target == buffer) touches = true;
      visit_exprs_shallow(s, [&](const ExprPtr& e) {
        if (e->kind == ExprKind::Read && e->name == buffer) touches = true;
      });
      if (s->kind == StmtKind::Loop)
        for (const auto& inner : s->loop.body) walk(inner);
      if (s->kind == StmtKind::Guard)
        for (const auto& inner : s->body) walk(inner);
    };
    walk(k.top[i]);
    if (touches) {
      first = std::min(first, i);
      last = std::max(last, i);
    }
  }

  std::set<std::string> taken = td::all_names(k);
  std::string shadow = td::fresh_name(taken, buffer + "_buf");
  taken.insert(shadow);

  Kernel out = k;
  Buffer sb;
  sb.name = shadow;
  sb.elem = decl->elem;
  sb.shape = decl->shape;
  sb.space = MemorySpace::ram();
  out.buffers.push_back(sb);

  auto copy_nest = [&](bool to_shadow) -> StmtPtr {
    std::vector<std::string> iters;
    std::vector<ExprPtr> idx;
    for (size_t d = 0; d < decl->shape.size(); ++d) {
      std::string it = td::fresh_name(taken, std::string(1, char('x' + (d % 3))) +
                                                 (d >= 3 ? std::to_string(d) : ""));
      taken.insert(it);
      iters.push_back(it);
      idx.push_back(Expr::iter(it));
    }
    StmtPtr stmt = to_shadow
                       ? Stmt::assign(shadow, idx, Expr::read(buffer, idx))
                       : Stmt::assign(buffer, idx, Expr::read(shadow, idx));
    for (size_t d = decl->shape.size(); d-- > 0;) {
      stmt = Stmt::make_loop(iters[d], Expr::lit(0), decl->shape[d],
                             d == decl->shape.size() - 1 ? Pragma::pipeline()
                                                         : Pragma::none(),
                             {stmt});
    }
    return stmt;
  };

  // Retarget accesses inside the span and splice copy loops around it.
  std::vector<StmtPtr> new_top;
  for (size_t i = 0; i < k.top.size(); ++i) {
    if (i == first && (stage == "load" || stage == "both"))
      new_top.push_back(copy_nest(true));
    if (i >= first && i <= last) {
      td::AccessRewrite rw;
      rw.buffer = buffer;
      rw.on_read = [&](const Expr& e) {
        return Expr::read(shadow, e.args);
      };
      rw.on_write = [&](const Stmt& s) {
        return Stmt::assign(shadow, s.indices, s.value);
      };
      auto rewritten = td::rewrite_accesses({k.top[i]}, rw);
      for (const auto& s : rewritten) new_top.push_back(s);
    } else {
      new_top.push_back(k.top[i]);
    }
    if (i == last && (stage == "store" || stage == "both"))
      new_top.push_back(copy_nest(false));
  }
  out.top = std::move(new_top);
  return td::finish(std::move(out),
                    {"random accesses to '" + buffer +
                     "' staged through on-chip shadow '" + shadow + "' (" +
                     stage + ")"});
}

// ---------------------------------------------------------------------------
// stripe_memory

inline TransformOutcome stripe_memory(const Kernel& k, const std::string& buffer,
                                      std::vector<int> banks,
                                      const DeviceConfig& config) {
  namespace td = transform_detail;
  const Buffer* decl = k.find_buffer(buffer);
  if (!decl) return inapplicable("no buffer named '" + buffer + "'");
  if (decl->space.kind != MemorySpace::Kind::OffChip)
    return inapplicable("'" + buffer + "' is not off-chip");
  if (banks.size() < 2) return inapplicable("need >=2 banks");
  std::set<int> uniq(banks.begin(), banks.end());
  if (uniq.size() != banks.size()) return inapplicable("duplicate banks");
  for (int b : banks)
    if (b < 0 || b >= config.num_banks())
      return inapplicable("bank " + std::to_string(b) + " out of range (device has " +
                          std::to_string(config.num_banks()) + ")");
  int nb = static_cast<int>(banks.size());

  Kernel out = k;
  out.find_buffer(buffer)->space.banks = banks;
  std::vector<std::string> notes;
  notes.push_back("'" + buffer + "' striped element-interleaved across " +
                  std::to_string(nb) + " banks");

  // Split single-loop reader/writer PEs serving this buffer into per-bank
  // engines joined by a combiner (reads) or fed by a splitter (writes).
  std::set<std::string> taken = td::all_names(out);
  std::vector<ProcessingElement> extra_pes;
  for (auto& pe : out.pes) {
    // match: pe { for i in 0..N { ch.push(buffer[...i...]) } }
    if (pe.body.size() != 1 || pe.body[0]->kind != StmtKind::Loop) continue;
    const LoopNode& l = pe.body[0]->loop;
    if (l.body.size() != 1) continue;
    const StmtPtr& only = l.body[0];
    auto n = trip_count(l);
    auto lo = eval_const(l.lower);
    if (!n || !lo || *lo != 0 || *n % nb != 0) continue;

    if (only->kind == StmtKind::Push && only->value->kind == ExprKind::Read &&
        only->value->name == buffer) {
      // reader: split
      std::string it = l.iterator;
      std::vector<std::string> lane_chans;
      std::vector<StmtPtr> combiner_body;
      for (int b = 0; b < nb; ++b) {
        std::string lane = td::fresh_name(taken, buffer + "_lane" + std::to_string(b));
        taken.insert(lane);
        lane_chans.push_back(lane);
        Buffer cb;
        cb.name = lane;
        cb.elem = decl->elem;
        cb.space = MemorySpace::fifo(16);
        out.buffers.push_back(cb);
        // per-bank reader reads elements with index = i*nb + b
        std::map<std::string, ExprPtr> sub{
            {it, fold_expr(Expr::add(
                     Expr::mul(Expr::iter(it), Expr::lit(nb)), Expr::lit(b)))}};
        std::vector<ExprPtr> idx;
        for (const auto& ix : only->value->args)
          idx.push_back(substitute_refs(ix, sub));
        ProcessingElement rp;
        rp.name = td::fresh_name(taken, pe.name + "_bank" + std::to_string(b));
        taken.insert(rp.name);
        rp.body = {Stmt::make_loop(it, Expr::lit(0), Expr::lit(*n / nb),
                                   l.pragma,
                                   {Stmt::push(lane, Expr::read(buffer, idx))})};
        extra_pes.push_back(std::move(rp));
        combiner_body.push_back(Stmt::push(only->target, Expr::pop(lane)));
      }
      // combiner keeps the original channel and PE name
      pe.body = {Stmt::make_loop(it, Expr::lit(0), Expr::lit(*n / nb),
                                 l.pragma, combiner_body)};
      notes.push_back("reader '" + pe.name + "' split into " +
                      std::to_string(nb) + " bank readers plus a combiner");
    } else if (only->kind == StmtKind::Assign && only->target == buffer &&
               only->value->kind == ExprKind::Pop) {
      // writer: splitter feeding per-bank writers
      std::string it = l.iterator;
      std::vector<StmtPtr> splitter_body;
      for (int b = 0; b < nb; ++b) {
        std::string lane = td::fresh_name(taken, buffer + "_wlane" + std::to_string(b));
        taken.insert(lane);
        Buffer cb;
        cb.name = lane;
        cb.elem = decl->elem;
        cb.space = MemorySpace::fifo(16);
        out.buffers.push_back(cb);
        std::map<std::string, ExprPtr> sub{
            {it, fold_expr(Expr::add(
                     Expr::mul(Expr::iter(it), Expr::lit(nb)), Expr::lit(b)))}};
        std::vector<ExprPtr> idx;
        for (const auto& ix : only->indices)
          idx.push_back(substitute_refs(ix, sub));
        ProcessingElement wp;
        wp.name = td::fresh_name(taken, pe.name + "_bank" + std::to_string(b));
        taken.insert(wp.name);
        wp.body = {Stmt::make_loop(it, Expr::lit(0), Expr::lit(*n / nb),
                                   l.pragma,
                                   {Stmt::assign(buffer, idx, Expr::pop(lane))})};
        extra_pes.push_back(std::move(wp));
        splitter_body.push_back(
            Stmt::push(lane, Expr::pop(only->value->name)));
      }
      pe.body = {Stmt::make_loop(it, Expr::lit(0), Expr::lit(*n / nb),
                                 l.pragma, splitter_body)};
      notes.push_back("writer '" + pe.name + "' split into a splitter plus " +
                      std::to_string(nb) + " bank writers");
    }
  }
  for (auto& pe : extra_pes) out.pes.push_back(std::move(pe));
  return td::finish(std::move(out), std::move(notes));
}

// ---------------------------------------------------------------------------
// oversubscribe_memory

inline TransformOutcome oversubscribe_memory(const Kernel& k,
                                             const std::string& channel,
                                             const TransformStep& step,
                                             const DeviceConfig& config) {
  namespace td = transform_detail;
  auto widen = step.int_param("widen");
  auto overclock = step.int_param("overclock");
  if (!widen && !overclock)
    return inapplicable("needs widen=<factor> or overclock=<ratio>");

  const Buffer* chan = k.find_buffer(channel);
  if (!chan || chan->space.kind != MemorySpace::Kind::Fifo)
    return inapplicable("'" + channel + "' is not a channel");

  if (overclock) {
    if (*overclock < 1) return inapplicable("ratio must be >= 1");
    TransformResult r;
    r.kernel = k;
    r.notes = {"memory engine feeding '" + channel + "' annotated with clock ratio " +
               std::to_string(*overclock) +
               " (modeled bandwidth scales by the ratio; apply "
               "bank.N.bandwidth in the device config for analysis)"};
    return r;
  }

  long long factor = *widen;
  if (factor < 1) return inapplicable("widen factor must be >= 1");
  if (factor == 1) {
    TransformResult r;
    r.kernel = k;
    r.notes = {"widen factor 1: kernel unchanged"};
    return r;
  }

  // Find the single producer: a PE whose (possibly nested) burst loop ends
  // in channel.push(buffer[f(i)]).
  for (size_t pi = 0; pi < k.pes.size(); ++pi) {
    const auto& pe = k.pes[pi];
    // descend through a perfect nest to the innermost single-push loop
    const Stmt* cursor = pe.body.size() == 1 && pe.body[0]->kind == StmtKind::Loop
                             ? pe.body[0].get()
                             : nullptr;
    long long outer_reps = 1;
    const Stmt* push_loop = nullptr;
    while (cursor) {
      const LoopNode& ln = cursor->loop;
      if (ln.body.size() != 1) break;
      if (ln.body[0]->kind == StmtKind::Loop) {
        auto reps = trip_count(ln);
        if (!reps) break;
        outer_reps *= *reps;
        cursor = ln.body[0].get();
        continue;
      }
      if (ln.body[0]->kind == StmtKind::Push && ln.body[0]->target == channel)
        push_loop = cursor;
      break;
    }
    if (!push_loop) continue;
    const LoopNode& l = push_loop->loop;
    const ExprPtr& value = l.body[0]->value;
    if (value->kind != ExprKind::Read) continue;
    const Buffer* mem = k.find_buffer(value->name);
    if (!mem || mem->space.kind != MemorySpace::Kind::OffChip)
      return inapplicable("producer of '" + channel + "' does not read memory");
    auto n = trip_count(l);
    auto lo = eval_const(l.lower);
    if (!n || !lo || *lo != 0) return inapplicable("producer bounds must be bound");
    if (*n % factor != 0)
      return inapplicable("widen factor does not divide the stream length");
    int bank0 = mem->space.banks.empty() ? 0 : mem->space.banks[0];
    double bytes = factor * mem->elem.bytes();
    if (bytes > config.bank(bank0).bus_width_bytes)
      return inapplicable("exceeds bus width: " + std::to_string(bytes) +
                          " bytes > " +
                          std::to_string(config.bank(bank0).bus_width_bytes));

    std::set<std::string> taken = td::all_names(k);
    std::string wide = td::fresh_name(taken, channel + "_wide");
    taken.insert(wide);
    std::string f_it = td::fresh_name(taken, "f");
    taken.insert(f_it);
    std::string gear = td::fresh_name(taken, "gear_" + channel);
    taken.insert(gear);

    Kernel out = k;
    Buffer wb;
    wb.name = wide;
    wb.elem = chan->elem;
    wb.space = MemorySpace::fifo(std::max<long long>(16, 4 * factor));
    out.buffers.push_back(wb);

    // Producer now issues `factor` consecutive reads per iteration (one wide
    // transaction on the bus) into the deep decoupling FIFO.
    std::map<std::string, ExprPtr> sub{
        {l.iterator,
         fold_expr(Expr::add(Expr::mul(Expr::iter(l.iterator), Expr::lit(factor)),
                             Expr::iter(f_it)))}};
    std::vector<ExprPtr> idx;
    for (const auto& ix : value->args) idx.push_back(substitute_refs(ix, sub));
    StmtPtr inner = Stmt::make_loop(
        f_it, Expr::lit(0), Expr::lit(factor), Pragma::unroll(),
        {Stmt::push(wide, Expr::read(value->name, idx))});
    StmtPtr folded = Stmt::make_loop(l.iterator, l.lower,
                                     Expr::lit(*n / factor), l.pragma, {inner});
    out = td::replace_stmt(out, push_loop, {folded});

    // Gearbox: narrow the wide stream to the consumer's element rate.
    ProcessingElement gb;
    gb.name = gear;
    std::string g_it = td::fresh_name(taken, "g");
    gb.body = {Stmt::make_loop(g_it, Expr::lit(0),
                               Expr::lit(outer_reps * *n), Pragma::pipeline(),
                               {Stmt::push(channel, Expr::pop(wide))})};
    out.pes.push_back(std::move(gb));

    return td::finish(
        std::move(out),
        {"reader of '" + channel + "' widened by " + std::to_string(factor) +
             " (" + std::to_string(static_cast<long long>(bytes)) +
             "-byte transactions) behind decoupling FIFO '" + wide + "'",
         "gearbox '" + gear + "' narrows the stream to consumer width"});
  }
  return inapplicable("no single-burst producer PE pushes '" + channel + "'");
}

// ---------------------------------------------------------------------------
// demote_types

inline TransformOutcome demote_types(const Kernel& k, const std::string& buffer,
                                     const DataType& to) {
  namespace td = transform_detail;
  const Buffer* decl = k.find_buffer(buffer);
  if (!decl) return inapplicable("no buffer named '" + buffer + "'");
  if (to.is_fixed()) {
    if (to.fraction_bits >= to.width_bits)
      return inapplicable("fixed-point fraction must be below the width");
  } else if (to.width_bits != 8 && to.width_bits != 16 && to.width_bits != 32 &&
             to.width_bits != 64) {
    return inapplicable(
        "unsupported width " + std::to_string(to.width_bits) +
        ": widths are restricted to 8, 16, 32 or 64 bits (intermediate widths "
        "such as 48-bit integers are outside this catalog)");
  }
  if (to.kind == TypeKind::Float && to.width_bits != 32 && to.width_bits != 64)
    return inapplicable("float widths are 32 or 64 bits");

  DataType target = to;
  target.lanes = decl->elem.lanes;
  if (target == decl->elem) {
    TransformResult r;
    r.kernel = k;
    r.notes = {"identity substitution: kernel unchanged"};
    return r;
  }

  Kernel out = k;
  out.find_buffer(buffer)->elem = target;
  // Explicit casts at write boundaries keep the conversion visible.
  td::AccessRewrite rw;
  rw.buffer = buffer;
  rw.on_write = [&](const Stmt& s) {
    if (s.value->kind == ExprKind::Cast && s.value->cast_type == target)
      return StmtPtr{};
    return Stmt::assign(s.target, s.indices, Expr::cast(target, s.value));
  };
  out.top = td::rewrite_accesses(out.top, rw);
  for (auto& pe : out.pes) pe.body = td::rewrite_accesses(pe.body, rw);
  for (auto& f : out.functions) f.body = td::rewrite_accesses(f.body, rw);

  const DataType& from = decl->elem;
  bool precision_loss =
      (from.is_float() && (to.is_fixed() || to.is_int() ||
                           to.width_bits < from.width_bits)) ||
      (from.is_fixed() && to.is_fixed() &&
       (to.fraction_bits < from.fraction_bits ||
        to.width_bits < from.width_bits)) ||
      (from.is_int() && to.is_float());
  return td::finish(
      std::move(out),
      {"'" + buffer + "' demoted from " + to_string(from.scalar()) + " to " +
           to_string(to.scalar()),
       std::string("equivalence mode: ") +
           (precision_loss ? "tolerance (precision reduced)" : "exact")},
      {}, precision_loss);
}

}  // namespace hlsopt
