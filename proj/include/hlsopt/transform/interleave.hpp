#pragma once

// Accumulation interleaving (transpose, tiled, single-loop and cross-input
// variants) and buffer tiling. These resolve loop-carried reduction
// dependences by keeping state for multiple concurrent accumulations.

#include <cctype>

#include "hlsopt/analysis.hpp"
#include "hlsopt/transform/core.hpp"

namespace hlsopt {

namespace transform_detail {

inline bool contains_read_of(const ExprPtr& e, const std::string& name) {
  bool found = false;
  std::function<void(const ExprPtr&)> walk = [&](const ExprPtr& n) {
    if (!n || found) return;
    if (n->kind == ExprKind::Read && n->name == name) found = true;
    for (const auto& a : n->args) walk(a);
  };
  walk(e);
  return found;
}

/// The scalar accumulation pattern: a pipelined loop whose body is a single
/// update of a scalar register through a self-referencing expression, with a
/// leading initializer and optional trailing write-out in the parent body.
struct ScalarAccum {
  const Stmt* parent = nullptr;  // enclosing loop
  const Stmt* loop = nullptr;    // the pipelined accumulation loop
  const Stmt* init = nullptr;    // acc = INIT (just before the loop)
  const Stmt* writeout = nullptr;  // OUT[...] = acc (just after; optional)
  std::string acc;
  ExprPtr rhs;  // update right-hand side (contains one read of acc)
};

inline std::optional<ScalarAccum> match_scalar_accum(
    const Kernel& k, const LoopLocation& loc, bool allow_multiple_reads = false) {
  const Stmt* loop = loc.target();
  if (!loop->loop.pragma.is_pipeline()) return std::nullopt;
  if (loop->loop.body.size() != 1) return std::nullopt;
  const StmtPtr& update = loop->loop.body[0];
  if (update->kind != StmtKind::Assign || !update->indices.empty())
    return std::nullopt;
  const Buffer* acc = k.find_buffer(update->target);
  if (!acc || !acc->is_scalar()) return std::nullopt;
  if (acc->space.kind != MemorySpace::Kind::Registers &&
      acc->space.kind != MemorySpace::Kind::OnChipRam)
    return std::nullopt;
  // exactly one self-read
  int reads = 0;
  std::function<void(const ExprPtr&)> count = [&](const ExprPtr& e) {
    if (e->kind == ExprKind::Read && e->name == update->target) ++reads;
    for (const auto& a : e->args) count(a);
  };
  count(update->value);
  if (reads != 1 && !(allow_multiple_reads && reads >= 1)) return std::nullopt;

  ScalarAccum m;
  m.loop = loop;
  m.acc = update->target;
  m.rhs = update->value;
  if (loc.path.size() >= 2) m.parent = loc.path[loc.path.size() - 2];
  const std::vector<StmtPtr>* pbody = enclosing_body(k, loop);
  if (!pbody) return std::nullopt;
  size_t pos = pbody->size();
  for (size_t i = 0; i < pbody->size(); ++i)
    if ((*pbody)[i].get() == loop) pos = i;
  if (pos == pbody->size()) return std::nullopt;
  if (pos >= 1) {
    const StmtPtr& before = (*pbody)[pos - 1];
    if (before->kind == StmtKind::Assign && before->target == m.acc &&
        before->indices.empty() && !contains_read_of(before->value, m.acc))
      m.init = before.get();
  }
  if (pos + 1 < pbody->size()) {
    const StmtPtr& after = (*pbody)[pos + 1];
    if (after->kind == StmtKind::Assign && after->value &&
        after->value->kind == ExprKind::Read && after->value->name == m.acc)
      m.writeout = after.get();
  }
  return m;
}

/// Replaces the unique read of `name` in an expression.
inline ExprPtr replace_read(const ExprPtr& e, const std::string& name,
                            const ExprPtr& with) {
  return rewrite_expr(e, [&](const ExprPtr& n) -> ExprPtr {
    if (n->kind == ExprKind::Read && n->name == name) return with;
    return nullptr;
  });
}

/// Off-chip/RAM reads in `e` that do not mention `avoid_iter`, hoistable in
/// front of a loop over that iterator. Maximal subtrees, deduplicated.
inline std::vector<ExprPtr> hoistable_reads(const Kernel& k, const ExprPtr& e,
                                            const std::string& avoid_iter,
                                            const std::string& acc) {
  std::vector<ExprPtr> out;
  std::function<void(const ExprPtr&)> walk = [&](const ExprPtr& n) {
    if (!n) return;
    if (n->kind == ExprKind::Read && n->name != acc) {
      const Buffer* b = k.find_buffer(n->name);
      bool external = b && (b->space.kind == MemorySpace::Kind::OffChip ||
                            b->space.kind == MemorySpace::Kind::OnChipRam);
      if (external && !contains_iterator(n, avoid_iter)) {
        for (const auto& seen : out)
          if (struct_equal(seen, n)) return;
        out.push_back(n);
        return;
      }
    }
    for (const auto& a : n->args) walk(a);
  };
  walk(e);
  return out;
}

}  // namespace transform_detail

// ---------------------------------------------------------------------------
// tile_buffers

/// Strip-mines a pipelined loop and shrinks the on-chip buffers whose extent
/// equals its trip count to the tile size. Sibling loops consuming those
/// buffers (write-out or fill phases) move under the new tile loop.
inline TransformOutcome tile_buffers(const Kernel& k, const std::string& loop_it,
                                     long long tile) {
  namespace td = transform_detail;
  auto loc = find_loop(k, loop_it);
  if (!loc.ok()) return inapplicable(loc.error());
  const Stmt* target = loc->target();
  if (!target->loop.pragma.is_pipeline())
    return inapplicable("'" + loop_it + "' is not pipelined");
  auto trip = trip_count(target->loop);
  auto lo = eval_const(target->loop.lower);
  if (!trip || !lo || *lo != 0)
    return inapplicable("loop must be bound with a zero lower bound");
  long long m = *trip;
  if (tile <= 0 || m % tile != 0)
    return inapplicable("tile size " + std::to_string(tile) +
                        " does not divide trip count " + std::to_string(m));
  if (tile == m)
    return td::finish(k, {"tile equals the trip count; kernel unchanged"});

  // On-chip buffers sized by this loop and indexed by a bare iterator.
  std::set<std::string> tiled_buffers;
  for (const auto& b : k.buffers) {
    if (b.space.kind != MemorySpace::Kind::OnChipRam &&
        b.space.kind != MemorySpace::Kind::Registers)
      continue;
    if (b.shape.size() != 1) continue;
    auto extent = eval_const(b.shape[0]);
    if (!extent || *extent != m) continue;
    auto sites = td::collect_sites(k, b.name);
    if (sites.empty()) continue;
    bool all_simple = true;
    for (const auto& s : sites) {
      all_simple &= s.indices.size() == 1 &&
                    s.indices[0]->kind == ExprKind::IterRef;
    }
    if (all_simple) tiled_buffers.insert(b.name);
  }
  if (tiled_buffers.empty())
    return inapplicable("no on-chip buffer sized by the trip count of '" +
                        loop_it + "'");

  // Common ancestor body of all accesses; the members containing them are
  // wrapped by the tile loop.
  std::vector<const Stmt*> access_stmts;
  for (const auto& name : tiled_buffers)
    for (const auto& s : td::collect_sites(k, name))
      access_stmts.push_back(s.stmt);

  // Find the body whose members cover all access statements.
  const std::vector<StmtPtr>* host = nullptr;
  std::vector<size_t> member_indexes;
  {
    std::function<bool(const std::vector<StmtPtr>&)> contains_all_somewhere =
        [&](const std::vector<StmtPtr>& body) -> bool {
      // Does this body (transitively) contain every access statement?
      std::set<const Stmt*> found;
      std::function<void(const std::vector<StmtPtr>&)> walk =
          [&](const std::vector<StmtPtr>& b) {
            for (const auto& s : b) {
              for (const Stmt* a : access_stmts)
                if (s.get() == a) found.insert(a);
              if (s->kind == StmtKind::Loop) walk(s->loop.body);
              if (s->kind == StmtKind::Guard) walk(s->body);
            }
          };
      walk(body);
      return found.size() ==
             std::set<const Stmt*>(access_stmts.begin(), access_stmts.end())
                 .size();
    };
    std::function<const std::vector<StmtPtr>*(const std::vector<StmtPtr>&)>
        descend = [&](const std::vector<StmtPtr>& body)
        -> const std::vector<StmtPtr>* {
      if (!contains_all_somewhere(body)) return nullptr;
      // try to descend into a single member containing everything
      for (const auto& s : body) {
        if (s->kind == StmtKind::Loop && contains_all_somewhere(s->loop.body))
          return descend(s->loop.body);
        if (s->kind == StmtKind::Guard && contains_all_somewhere(s->body))
          return descend(s->body);
      }
      return &body;
    };
    host = descend(k.top);
    for (const auto& pe : k.pes)
      if (!host) host = descend(pe.body);
    if (!host) return inapplicable("cannot locate the buffer's scope");
    for (size_t i = 0; i < host->size(); ++i) {
      bool touches = false;
      std::function<void(const StmtPtr&)> walk = [&](const StmtPtr& s) {
        for (const Stmt* a : access_stmts)
          if (s.get() == a) touches = true;
        if (s->kind == StmtKind::Loop)
          for (const auto& inner : s->loop.body) walk(inner);
        if (s->kind == StmtKind::Guard)
          for (const auto& inner : s->body) walk(inner);
      };
      walk((*host)[i]);
      if (touches) member_indexes.push_back(i);
    }
    for (size_t i = 1; i < member_indexes.size(); ++i)
      if (member_indexes[i] != member_indexes[i - 1] + 1)
        return inapplicable("buffer consumers are not adjacent");
  }

  std::set<std::string> taken = td::all_names(k);
  std::string tile_it = td::fresh_name(taken, loop_it + "o");

  // Rewrite one member: loops of trip `m` whose iterator indexes a tiled
  // buffer get trip `tile`; other uses of that iterator become
  // tile_it*tile + iterator.
  std::function<StmtPtr(const StmtPtr&)> rewrite_member =
      [&](const StmtPtr& s) -> StmtPtr {
    if (s->kind == StmtKind::Guard) {
      auto copy = std::make_shared<Stmt>(*s);
      copy->body.clear();
      for (const auto& inner : s->body)
        copy->body.push_back(rewrite_member(inner));
      return copy;
    }
    if (s->kind != StmtKind::Loop) return s;
    auto n = trip_count(s->loop);
    auto llo = eval_const(s->loop.lower);
    bool indexes_tiled = false;
    visit_stmts(s->loop.body, [&](const StmtPtr& inner) {
      auto check = [&](const std::string& buf, const std::vector<ExprPtr>& idx) {
        if (tiled_buffers.count(buf) && idx.size() == 1 &&
            idx[0]->kind == ExprKind::IterRef &&
            idx[0]->name == s->loop.iterator)
          indexes_tiled = true;
      };
      if (inner->kind == StmtKind::Assign) check(inner->target, inner->indices);
      visit_exprs_shallow(inner, [&](const ExprPtr& e) {
        if (e->kind == ExprKind::Read) check(e->name, e->args);
      });
    });
    if (indexes_tiled && n && *n == m && llo && *llo == 0) {
      // Retrip to the tile; non-buffer uses of the iterator shift by the tile
      // base. The substitution must not touch the tiled buffers' indexes, so
      // rewrite accesses first with a placeholder.
      const std::string it = s->loop.iterator;
      ExprPtr shifted = Expr::add(
          Expr::mul(Expr::iter(tile_it), Expr::lit(tile)), Expr::iter(it));
      // rewrite expressions bottom-up: reads of tiled buffers keep bare
      // iterator, every other IterRef(it) becomes shifted
      std::function<ExprPtr(const ExprPtr&, bool)> rw =
          [&](const ExprPtr& e, bool in_tiled_index) -> ExprPtr {
        if (!e) return e;
        if (e->kind == ExprKind::IterRef && e->name == it)
          return in_tiled_index ? e : shifted;
        auto copy = std::make_shared<Expr>(*e);
        bool changed = false;
        for (size_t i = 0; i < copy->args.size(); ++i) {
          bool tiled_idx =
              e->kind == ExprKind::Read && tiled_buffers.count(e->name);
          ExprPtr r = rw(copy->args[i], tiled_idx);
          changed |= r != copy->args[i];
          copy->args[i] = r;
        }
        return changed ? copy : e;
      };
      std::function<std::vector<StmtPtr>(const std::vector<StmtPtr>&)>
          rw_body = [&](const std::vector<StmtPtr>& body) {
            std::vector<StmtPtr> out;
            for (const auto& inner : body) {
              auto copy = std::make_shared<Stmt>(*inner);
              bool own_tiled = inner->kind == StmtKind::Assign &&
                               tiled_buffers.count(inner->target);
              for (auto& ix : copy->indices) ix = rw(ix, own_tiled);
              if (copy->value) copy->value = rw(copy->value, false);
              if (copy->kind == StmtKind::Loop) {
                copy->loop.lower = rw(copy->loop.lower, false);
                copy->loop.upper = rw(copy->loop.upper, false);
                copy->loop.body = rw_body(copy->loop.body);
              }
              if (copy->kind == StmtKind::Guard) copy->body = rw_body(copy->body);
              out.push_back(copy);
            }
            return out;
          };
      auto copy = std::make_shared<Stmt>(*s);
      copy->loop.upper = Expr::lit(tile);
      copy->loop.body = rw_body(s->loop.body);
      return copy;
    }
    // Recurse looking for matching loops deeper in.
    auto copy = std::make_shared<Stmt>(*s);
    copy->loop.body.clear();
    for (const auto& inner : s->loop.body)
      copy->loop.body.push_back(rewrite_member(inner));
    return copy;
  };

  std::vector<StmtPtr> wrapped;
  for (size_t i : member_indexes) wrapped.push_back(rewrite_member((*host)[i]));

  LoopNode tile_loop;
  tile_loop.iterator = tile_it;
  tile_loop.lower = Expr::lit(0);
  tile_loop.upper = Expr::lit(m / tile);
  tile_loop.body = std::move(wrapped);

  // Splice: replace the first member with the tile loop, drop the rest.
  Kernel out = k;
  for (auto& b : out.buffers)
    if (tiled_buffers.count(b.name)) b.shape = {Expr::lit(tile)};
  out = td::replace_stmt(out, (*host)[member_indexes.front()].get(),
                         {Stmt::make_loop(std::move(tile_loop))});
  for (size_t j = 1; j < member_indexes.size(); ++j)
    out = td::replace_stmt(out, (*host)[member_indexes[j]].get(), {});

  std::string names;
  for (const auto& n : tiled_buffers) names += " " + n;
  return td::finish(std::move(out),
                    {"tiled '" + loop_it + "' by " + std::to_string(tile) +
                     "; buffers reduced to tile size:" + names});
}

// ---------------------------------------------------------------------------
// interleave_accumulation

inline TransformOutcome interleave_accumulation(const Kernel& k,
                                                const std::string& loop_it,
                                                const TransformStep& step,
                                                const DeviceConfig& config) {
  namespace td = transform_detail;
  std::string mode = step.param("mode").value_or("transpose");
  auto loc = find_loop(k, loop_it);
  if (!loc.ok()) return inapplicable(loc.error());
  const Stmt* loop = loc->target();
  if (!loop->loop.pragma.is_pipeline())
    return inapplicable("'" + loop_it + "' is not pipelined");

  // ---- transpose and tiled share the buffered-expansion machinery ----
  auto expand = [&](long long tile) -> TransformOutcome {
    auto m = td::match_scalar_accum(k, *loc);
    if (!m || !m->parent)
      return inapplicable(
          "no scalar accumulation with an enclosing loop to interleave");
    if (!m->init)
      return inapplicable("missing accumulator initializer before the loop");
    auto np = trip_count(m->parent->loop);
    auto lop = eval_const(m->parent->loop.lower);
    auto lol = eval_const(loop->loop.lower);
    auto nl = trip_count(loop->loop);
    if (!np || !lop || !lol || !nl)
      return inapplicable("loop bounds must be bound");
    if (*lop != 0) return inapplicable("parent loop must start at zero");
    bool tiled = tile > 0;
    if (tiled && *np % tile != 0)
      return inapplicable("tile " + std::to_string(tile) +
                          " does not divide parent trip count " +
                          std::to_string(*np));
    long long depth = tiled ? tile : *np;

    std::set<std::string> taken = td::all_names(k);
    std::string v_reg = td::fresh_name(taken, "v");
    taken.insert(v_reg);
    std::string t_it;
    if (tiled) {
      t_it = td::fresh_name(taken, "t");
      taken.insert(t_it);
    }

    const std::string p_it = m->parent->loop.iterator;
    const std::string l_it = loop->loop.iterator;
    // Accumulator index inside the new pipelined loop.
    ExprPtr slot = Expr::iter(tiled ? t_it : p_it);
    // Parent-iterator value seen by initializer/write-out/update exprs.
    ExprPtr p_value =
        tiled ? fold_expr(Expr::add(
                    Expr::mul(Expr::iter(p_it), Expr::lit(tile)),
                    Expr::iter(t_it)))
              : Expr::iter(p_it);
    std::map<std::string, ExprPtr> psub{{p_it, p_value}};

    ExprPtr init_rhs = substitute_refs(m->init->value, psub);
    ExprPtr reset = Expr::sel(
        Expr::eq(Expr::iter(l_it), Expr::lit(*lol)), init_rhs,
        Expr::read(m->acc, {slot}));
    ExprPtr update = td::replace_read(substitute_refs(m->rhs, psub), m->acc,
                                      reset);

    // Hoist accumulation-invariant external reads in front of the pipeline.
    std::vector<StmtPtr> hoists;
    std::vector<Buffer> hoist_regs;
    std::string inner_it = tiled ? t_it : p_it;
    for (const auto& read :
         td::hoistable_reads(k, update, inner_it, m->acc)) {
      const Expr& r = *read;
      std::string base = r.name;
      for (auto& c : base) c = static_cast<char>(std::tolower(c));
      std::string reg = td::fresh_name(taken, base.substr(0, 1));
      taken.insert(reg);
      Buffer rb;
      rb.name = reg;
      rb.elem = k.find_buffer(r.name)->elem;
      rb.space = MemorySpace::registers();
      hoist_regs.push_back(rb);
      hoists.push_back(Stmt::assign(reg, {}, read));
      update = rewrite_expr(update, [&](const ExprPtr& n) -> ExprPtr {
        if (struct_equal(n, read)) return Expr::read(reg, {});
        return nullptr;
      });
    }

    std::vector<StmtPtr> pipe_body;
    pipe_body.push_back(Stmt::assign(v_reg, {}, update));
    pipe_body.push_back(
        Stmt::assign(m->acc, {slot}, Expr::read(v_reg, {})));
    if (m->writeout) {
      auto wo = std::make_shared<Stmt>(*m->writeout);
      for (auto& ix : wo->indices) ix = substitute_refs(ix, psub);
      wo->value = Expr::read(v_reg, {});
      ExprPtr last = Expr::eq(Expr::iter(l_it),
                              fold_expr(Expr::sub(loop->loop.upper, Expr::lit(1))));
      pipe_body.push_back(Stmt::guard(last, {wo}));
    }

    LoopNode pipe;
    pipe.iterator = inner_it;
    pipe.lower = tiled ? Expr::lit(0) : m->parent->loop.lower;
    pipe.upper = tiled ? Expr::lit(tile) : m->parent->loop.upper;
    pipe.pragma = Pragma::pipeline(loop->loop.pragma.target_ii);
    pipe.body = std::move(pipe_body);

    LoopNode reduction;  // the old accumulation loop, now outer
    reduction.iterator = l_it;
    reduction.lower = loop->loop.lower;
    reduction.upper = loop->loop.upper;
    reduction.pragma = Pragma::none();
    reduction.body = std::move(hoists);
    reduction.body.push_back(Stmt::make_loop(std::move(pipe)));

    std::vector<StmtPtr> replacement;
    if (tiled) {
      LoopNode outer;
      outer.iterator = p_it;
      outer.lower = Expr::lit(0);
      outer.upper = Expr::lit(*np / tile);
      outer.pragma = m->parent->loop.pragma;
      outer.body = {Stmt::make_loop(std::move(reduction))};
      replacement = {Stmt::make_loop(std::move(outer))};
    } else {
      replacement = {Stmt::make_loop(std::move(reduction))};
    }

    Kernel out = k;
    // The accumulator becomes a buffer of one element per concurrent chain.
    if (Buffer* acc = out.find_buffer(m->acc)) {
      acc->shape = {Expr::lit(depth)};
      if (acc->space.kind == MemorySpace::Kind::Registers &&
          depth > config.register_capacity_elems)
        acc->space = MemorySpace::ram();
    }
    Buffer vb;
    vb.name = v_reg;
    vb.elem = out.find_buffer(m->acc)->elem;
    vb.space = MemorySpace::registers();
    out.buffers.push_back(vb);
    for (const auto& rb : hoist_regs) out.buffers.push_back(rb);

    // Replace parent loop wholesale (init and write-out were absorbed).
    std::vector<StmtPtr> new_parent_body;
    for (const auto& s : m->parent->loop.body) {
      if (s.get() == m->init || s.get() == m->loop ||
          (m->writeout && s.get() == m->writeout)) {
        if (s.get() == m->loop)
          for (const auto& r : replacement) new_parent_body.push_back(r);
        continue;
      }
      new_parent_body.push_back(s);
    }
    // The parent loop header is absorbed into the new nest; its body must
    // have consisted solely of the initializer, the loop and the write-out.
    if (new_parent_body.size() != replacement.size() ||
        !std::equal(replacement.begin(), replacement.end(),
                    new_parent_body.begin()))
      return inapplicable(
          "parent loop has unrelated statements next to the accumulation");
    out = td::replace_stmt(out, m->parent, replacement);

    std::vector<std::string> notes;
    notes.push_back(std::string(tiled ? "tiled" : "transposed") +
                    " accumulation: '" + m->acc + "' expanded to " +
                    std::to_string(depth) + " concurrent chains");
    if (m->writeout) notes.push_back("write-out fused under completion guard");
    // Honest warning when the interleaving depth cannot cover the latency.
    auto ii_after = [&]() -> std::optional<long long> {
      auto r = infer_ii(inner_it, out, config);
      if (!r.ok()) return std::nullopt;
      return r->ii;
    }();
    if (ii_after && *ii_after > 1)
      notes.push_back("ii remains >1: " + std::to_string(*ii_after));
    return td::finish(std::move(out), std::move(notes));
  };

  if (mode == "transpose") return expand(0);
  if (mode == "tiled") {
    auto t = step.int_param("T");
    if (!t) return inapplicable("tiled mode needs T=<tile>");
    // Scalar-register accumulation under an outer loop: expand and tile.
    if (td::match_scalar_accum(k, *loc) &&
        td::match_scalar_accum(k, *loc)->parent)
      return expand(*t);
    // Indexed additive update (data-dependent index): partial buffers.
    {
      const Stmt* update = nullptr;
      for (const auto& s : loop->loop.body) {
        if (s->kind != StmtKind::Assign) continue;
        if (!s->indices.empty() && td::contains_read_of(s->value, s->target)) {
          if (update) return inapplicable("multiple indexed updates");
          update = s.get();
        }
      }
      if (update) {
        // B[e] = B[e] + g with structurally equal read/write indices.
        const std::string buf = update->target;
        const ExprPtr& rhs = update->value;
        bool ok = rhs->kind == ExprKind::Bin && rhs->op == BinOp::Add;
        const Expr* self = nullptr;
        if (ok) {
          for (int side = 0; side < 2; ++side) {
            const ExprPtr& cand = rhs->args[side];
            if (cand->kind == ExprKind::Read && cand->name == buf)
              self = cand.get();
          }
        }
        if (!ok || !self)
          return inapplicable("indexed update is not an addition into '" +
                              buf + "'");
        if (self->args.size() != update->indices.size())
          return inapplicable("read/write rank mismatch");
        for (size_t d = 0; d < update->indices.size(); ++d)
          if (!struct_equal(self->args[d], update->indices[d]))
            return inapplicable("read and write indices differ");

        const Buffer* decl = k.find_buffer(buf);
        if (!decl || decl->space.kind == MemorySpace::Kind::OffChip)
          return inapplicable("accumulation buffer must live on chip");
        long long tpart = *t;
        if (tpart < 1) return inapplicable("T must be positive");
        auto lol = eval_const(loop->loop.lower);
        if (!lol) return inapplicable("loop bounds must be bound");

        std::set<std::string> taken = td::all_names(k);
        std::string part = td::fresh_name(taken, buf + "_part");
        taken.insert(part);

        Kernel out = k;
        Buffer pb = *decl;
        pb.name = part;
        pb.shape.insert(pb.shape.begin(), Expr::lit(tpart));
        out.buffers.push_back(pb);

        // zero partials
        std::vector<std::string> zits;
        std::vector<StmtPtr> zero_body;
        {
          std::vector<ExprPtr> idx;
          std::string zt = td::fresh_name(taken, "z");
          taken.insert(zt);
          zits.push_back(zt);
          idx.push_back(Expr::iter(zt));
          for (size_t d = 0; d < decl->shape.size(); ++d) {
            std::string zi = td::fresh_name(taken, "z" + std::to_string(d));
            taken.insert(zi);
            zits.push_back(zi);
            idx.push_back(Expr::iter(zi));
          }
          StmtPtr stmt = Stmt::assign(part, idx, Expr::lit(0));
          for (size_t d = decl->shape.size(); d-- > 0;) {
            stmt = Stmt::make_loop(zits[d + 1], Expr::lit(0), decl->shape[d],
                                   d == decl->shape.size() - 1
                                       ? Pragma::pipeline()
                                       : Pragma::none(),
                                   {stmt});
          }
          stmt = Stmt::make_loop(zits[0], Expr::lit(0), Expr::lit(tpart),
                                 Pragma::none(), {stmt});
          zero_body.push_back(stmt);
        }

        // rewrite the update to hit partial (l - lo) % T
        ExprPtr lane = fold_expr(Expr::mod(
            Expr::sub(Expr::iter(loop_it), Expr::lit(*lol)), Expr::lit(tpart)));
        auto rw_access = [&](const Expr& e) -> ExprPtr {
          if (e.kind == ExprKind::Read && e.name == buf) {
            std::vector<ExprPtr> idx = e.args;
            idx.insert(idx.begin(), lane);
            return Expr::read(part, std::move(idx));
          }
          return nullptr;
        };
        auto rw_write = [&](const Stmt& s) -> StmtPtr {
          if (s.kind == StmtKind::Assign && s.target == buf) {
            std::vector<ExprPtr> idx = s.indices;
            idx.insert(idx.begin(), lane);
            return Stmt::assign(part, std::move(idx), s.value);
          }
          return nullptr;
        };
        auto new_loop = std::make_shared<Stmt>(*loop);
        td::AccessRewrite rw;
        rw.buffer = buf;
        rw.on_read = rw_access;
        rw.on_write = rw_write;
        new_loop->loop.body = td::rewrite_accesses(loop->loop.body, rw);

        // merge partials back
        std::vector<StmtPtr> merge;
        {
          std::vector<std::string> mits;
          std::vector<ExprPtr> idx;
          for (size_t d = 0; d < decl->shape.size(); ++d) {
            std::string mi = td::fresh_name(taken, "w" + std::to_string(d));
            taken.insert(mi);
            mits.push_back(mi);
            idx.push_back(Expr::iter(mi));
          }
          ExprPtr sum = Expr::read(buf, idx);
          for (long long p = 0; p < tpart; ++p) {
            std::vector<ExprPtr> pidx = idx;
            pidx.insert(pidx.begin(), Expr::lit(p));
            sum = Expr::add(sum, Expr::read(part, pidx));
          }
          StmtPtr stmt = Stmt::assign(buf, idx, sum);
          for (size_t d = decl->shape.size(); d-- > 0;) {
            stmt = Stmt::make_loop(mits[d], Expr::lit(0), decl->shape[d],
                                   d == decl->shape.size() - 1
                                       ? Pragma::pipeline()
                                       : Pragma::none(),
                                   {stmt});
          }
          merge.push_back(stmt);
        }

        std::vector<StmtPtr> replacement = zero_body;
        replacement.push_back(new_loop);
        for (const auto& s : merge) replacement.push_back(s);
        out = td::replace_stmt(out, loop, replacement);
        bool flt = decl->elem.is_float();
        return td::finish(
            std::move(out),
            {"interleaved '" + buf + "' across " + std::to_string(tpart) +
             " partial buffers with a merge pass"},
            {}, flt);
      }
    }
    // Otherwise fall back to buffer tiling (transposed-shape input).
    return tile_buffers(k, loop_it, *t);
  }

  if (mode == "single_loop") {
    auto kk = step.int_param("K");
    if (!kk) return inapplicable("single_loop mode needs K=<lanes>");
    long long lanes = *kk;
    auto m = td::match_scalar_accum(k, *loc);
    if (!m) return inapplicable("no scalar accumulation to interleave");
    // rhs must be acc + X
    const ExprPtr& rhs = m->rhs;
    if (rhs->kind != ExprKind::Bin || rhs->op != BinOp::Add)
      return inapplicable("two-stage interleaving needs an additive update");
    ExprPtr term;
    if (rhs->args[0]->kind == ExprKind::Read && rhs->args[0]->name == m->acc)
      term = rhs->args[1];
    else if (rhs->args[1]->kind == ExprKind::Read &&
             rhs->args[1]->name == m->acc)
      term = rhs->args[0];
    else
      return inapplicable("update must add directly into the accumulator");
    auto nl = trip_count(loop->loop);
    auto lol = eval_const(loop->loop.lower);
    if (!nl || !lol) return inapplicable("loop bounds must be bound");
    if (*nl < lanes)
      return inapplicable("trip count below the interleaving depth");

    std::set<std::string> taken = td::all_names(k);
    std::string part = td::fresh_name(taken, m->acc + "_part");
    taken.insert(part);
    std::string red_it = td::fresh_name(taken, "r");
    taken.insert(red_it);

    Kernel out = k;
    const Buffer* accb = k.find_buffer(m->acc);
    Buffer pb;
    pb.name = part;
    pb.elem = accb->elem;
    pb.shape = {Expr::lit(lanes)};
    pb.space = lanes <= config.register_capacity_elems
                   ? MemorySpace::registers()
                   : MemorySpace::ram();
    out.buffers.push_back(pb);

    ExprPtr lane = fold_expr(Expr::mod(
        Expr::sub(Expr::iter(loop_it), Expr::lit(*lol)), Expr::lit(lanes)));
    ExprPtr warm = Expr::lt(Expr::iter(loop_it), Expr::lit(*lol + lanes));
    ExprPtr prev = Expr::sel(warm, Expr::lit(0), Expr::read(part, {lane}));
    auto stage1 = std::make_shared<Stmt>(*loop);
    stage1->loop.body = {
        Stmt::assign(part, {lane}, Expr::add(prev, term))};

    LoopNode red;
    red.iterator = red_it;
    red.lower = Expr::lit(0);
    red.upper = Expr::lit(lanes);
    red.pragma = Pragma::none();  // serial reduction stage
    red.body = {Stmt::assign(
        m->acc, {},
        Expr::add(Expr::read(m->acc, {}), Expr::read(part, {Expr::iter(red_it)})))};

    Kernel final = td::replace_stmt(
        out, loop, {StmtPtr(stage1), Stmt::make_loop(std::move(red))});
    bool flt = accb->elem.is_float();
    return td::finish(std::move(final),
                      {"two-stage accumulation: " + std::to_string(lanes) +
                           " partial sums, serial reduction stage not pipelined"},
                      {}, flt);
  }

  if (mode == "cross_input") {
    auto n = step.int_param("N");
    if (!n) return inapplicable("cross_input mode needs N=<inputs>");
    long long lanes = *n;
    if (lanes < 1) return inapplicable("N must be positive");
    auto m = td::match_scalar_accum(k, *loc, /*allow_multiple_reads=*/true);
    // Here the recurrence may be any self-referencing update (including
    // non-commutative ones); what we need is the init/write-out pair.
    if (!m) {
      // relax: single statement updating a scalar register with >=1 self read
      return inapplicable("no scalar state update to interleave across inputs");
    }
    if (!m->init || !m->writeout)
      return inapplicable(
          "state must be loaded from an input and stored to an output");
    if (m->init->value->kind != ExprKind::Read)
      return inapplicable("state initializer must read an input buffer");
    const std::string in_buf = m->init->value->name;
    const std::string out_buf = m->writeout->target;
    const Buffer* in_decl = k.find_buffer(in_buf);
    const Buffer* out_decl = k.find_buffer(out_buf);
    if (!in_decl || !out_decl ||
        in_decl->space.kind != MemorySpace::Kind::OffChip ||
        out_decl->space.kind != MemorySpace::Kind::OffChip)
      return inapplicable("state endpoints must be off-chip buffers");

    std::set<std::string> taken = td::all_names(k);
    std::string q_it = td::fresh_name(taken, "i");
    taken.insert(q_it);
    std::string bank = td::fresh_name(taken, m->acc + "_b");
    taken.insert(bank);
    std::string r_reg = td::fresh_name(taken, "r");
    taken.insert(r_reg);
    std::string v_reg = td::fresh_name(taken, "v");
    taken.insert(v_reg);

    Kernel out = k;
    const DataType elem = k.find_buffer(m->acc)->elem;
    // widen interface buffers by an input dimension
    for (auto* decl : {out.find_buffer(in_buf), out.find_buffer(out_buf)})
      decl->shape.insert(decl->shape.begin(), Expr::lit(lanes));
    Buffer bb;
    bb.name = bank;
    bb.elem = elem;
    bb.shape = {Expr::lit(lanes)};
    bb.space = MemorySpace::ram();
    out.buffers.push_back(bb);
    Buffer rr;
    rr.name = r_reg;
    rr.elem = elem;
    rr.space = MemorySpace::registers();
    out.buffers.push_back(rr);
    Buffer vv = rr;
    vv.name = v_reg;
    out.buffers.push_back(vv);

    auto lo_t = eval_const(loop->loop.lower);
    if (!lo_t) return inapplicable("loop bounds must be bound");

    std::vector<ExprPtr> in_idx = {Expr::iter(q_it)};
    for (const auto& ix : m->init->value->args) in_idx.push_back(ix);
    std::vector<ExprPtr> out_idx = {Expr::iter(q_it)};
    for (const auto& ix : m->writeout->indices) out_idx.push_back(ix);

    ExprPtr first = Expr::eq(Expr::iter(loop_it), Expr::lit(*lo_t));
    ExprPtr read = Expr::sel(first, Expr::read(in_buf, in_idx),
                             Expr::read(bank, {Expr::iter(q_it)}));
    ExprPtr next = td::replace_read(m->rhs, m->acc, Expr::read(r_reg, {}));

    ExprPtr upper_minus_1 =
        fold_expr(Expr::sub(loop->loop.upper, Expr::lit(1)));
    std::vector<StmtPtr> inner_body = {
        Stmt::assign(r_reg, {}, read), Stmt::assign(v_reg, {}, next),
        Stmt::guard(Expr::lt(Expr::iter(loop_it), upper_minus_1),
                    {Stmt::assign(bank, {Expr::iter(q_it)},
                                  Expr::read(v_reg, {}))}),
        Stmt::guard(Expr::le(upper_minus_1, Expr::iter(loop_it)),
                    {Stmt::assign(out_buf, out_idx, Expr::read(v_reg, {}))})};

    LoopNode inner;
    inner.iterator = q_it;
    inner.lower = Expr::lit(0);
    inner.upper = Expr::lit(lanes);
    inner.pragma = Pragma::pipeline(loop->loop.pragma.target_ii);
    inner.body = std::move(inner_body);

    LoopNode outer;
    outer.iterator = loop_it;
    outer.lower = loop->loop.lower;
    outer.upper = loop->loop.upper;
    outer.pragma = Pragma::none();
    outer.body = {Stmt::make_loop(std::move(inner))};

    // remove init, loop, writeout; insert the interleaved nest
    out = td::replace_stmt(out, m->init, {});
    out = td::replace_stmt(out, loop, {Stmt::make_loop(std::move(outer))});
    out = td::replace_stmt(out, m->writeout, {});
    // the old state register may be dead now; keep it (harmless) unless unused
    EquivalenceMap io;
    io.replicate_inputs = static_cast<int>(lanes);
    io.note = "interface widened to " + std::to_string(lanes) +
              " independent inputs";
    return td::finish(std::move(out),
                      {"interleaved " + std::to_string(lanes) +
                           " independent inputs across the recurrence",
                       "kernel signature changed: '" + in_buf + "' and '" +
                           out_buf + "' gained a leading input dimension"},
                      io, false);
  }

  return inapplicable("unknown mode '" + mode + "'");
}

}  // namespace hlsopt
