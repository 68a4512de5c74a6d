#pragma once

// Pipeline-enabling rewrites: function inlining, loop interchange, pipelined
// loop fusion, loop-nest flattening and condition flattening.

#include <functional>

#include "hlsopt/analysis.hpp"
#include "hlsopt/transform/core.hpp"

namespace hlsopt {

// ---------------------------------------------------------------------------
// inline_function

inline TransformOutcome inline_function(const Kernel& k,
                                        const std::string& name) {
  const Function* fn = k.find_function(name);
  if (!fn) return inapplicable("no function named '" + name + "'");

  // Reject call cycles reachable from this function.
  {
    std::set<std::string> visiting, done;
    std::function<bool(const std::string&)> cyclic =
        [&](const std::string& f) -> bool {
      if (visiting.count(f)) return true;
      if (done.count(f)) return false;
      const Function* body = k.find_function(f);
      if (!body) return false;
      visiting.insert(f);
      bool cycle = false;
      visit_stmts(body->body, [&](const StmtPtr& s) {
        if (s->kind == StmtKind::Call && cyclic(s->target)) cycle = true;
      });
      visiting.erase(f);
      done.insert(f);
      return cycle;
    };
    if (cyclic(name)) return inapplicable("recursion through '" + name + "'");
  }

  int sites = 0;
  auto splice = [&](const std::vector<StmtPtr>& body,
                    auto&& self) -> std::vector<StmtPtr> {
    std::vector<StmtPtr> out;
    for (const auto& s : body) {
      if (s->kind == StmtKind::Call && s->target == name) {
        ++sites;
        for (const auto& inner : fn->body) out.push_back(inner);
        continue;
      }
      if (s->kind == StmtKind::Loop) {
        auto copy = std::make_shared<Stmt>(*s);
        copy->loop.body = self(s->loop.body, self);
        out.push_back(copy);
      } else if (s->kind == StmtKind::Guard) {
        auto copy = std::make_shared<Stmt>(*s);
        copy->body = self(s->body, self);
        out.push_back(copy);
      } else {
        out.push_back(s);
      }
    }
    return out;
  };

  Kernel out = k;
  out.top = splice(k.top, splice);
  for (auto& pe : out.pes) pe.body = splice(pe.body, splice);
  for (auto& f : out.functions)
    if (f.name != name) f.body = splice(f.body, splice);
  if (sites == 0) return inapplicable("no call sites of '" + name + "'");
  // Drop the function once nothing references it.
  bool still_called = false;
  visit_stmts(out, [&](const StmtPtr& s) {
    if (s->kind == StmtKind::Call && s->target == name) still_called = true;
  });
  if (!still_called) {
    std::vector<Function> keep;
    for (auto& f : out.functions)
      if (f.name != name) keep.push_back(std::move(f));
    out.functions = std::move(keep);
  }
  return transform_detail::finish(
      std::move(out),
      {"inlined '" + name + "' at " + std::to_string(sites) + " site(s)"});
}

// ---------------------------------------------------------------------------
// interchange

namespace transform_detail {
using hlsopt::AffineForm;
using hlsopt::affine_form;
}  // namespace transform_detail

/// Swaps a perfectly nested loop pair: iterators and bounds exchange places,
/// pragmas stay positional (the inner position keeps its pipeline pragma).
/// Legality is checked conservatively with distance vectors; anything the
/// affine analysis cannot prove safe is rejected.
inline TransformOutcome interchange(const Kernel& k, const std::string& outer_it,
                                    const std::string& inner_it_hint = "") {
  namespace td = transform_detail;
  auto loc = find_loop(k, outer_it);
  if (!loc.ok()) return inapplicable(loc.error());
  const Stmt* outer = loc->target();
  if (outer->loop.body.size() != 1 ||
      outer->loop.body[0]->kind != StmtKind::Loop)
    return inapplicable("imperfect nest: '" + outer_it +
                        "' does not contain exactly one loop");
  const Stmt* inner = outer->loop.body[0].get();
  if (!inner_it_hint.empty() && inner->loop.iterator != inner_it_hint)
    return inapplicable("inner loop is '" + inner->loop.iterator + "', not '" +
                        inner_it_hint + "'");

  const std::string a = outer->loop.iterator;
  const std::string b = inner->loop.iterator;

  // Dependence legality. For every buffer written in the body, pair all
  // accesses and derive the (outer, inner) distance vector from the affine
  // index difference; the swapped vector must stay lexicographically
  // non-negative.
  std::map<std::string, std::vector<std::pair<bool, std::vector<ExprPtr>>>>
      accesses;  // buffer -> (is_write, indices)
  visit_stmts(inner->loop.body, [&](const StmtPtr& s) {
    if (s->kind == StmtKind::Assign)
      accesses[s->target].push_back({true, s->indices});
    visit_exprs_shallow(s, [&](const ExprPtr& e) {
      if (e->kind == ExprKind::Read)
        accesses[e->name].push_back({false, e->args});
    });
  });
  for (const auto& [buffer, list] : accesses) {
    bool any_write = false;
    for (const auto& [w, idx] : list) any_write |= w;
    if (!any_write) continue;
    for (size_t i = 0; i < list.size(); ++i) {
      for (size_t j = 0; j < list.size(); ++j) {
        if (!list[i].first) continue;  // source must be a write
        const auto& wi = list[i].second;
        const auto& rj = list[j].second;
        if (wi.size() != rj.size())
          return inapplicable("cannot prove legality: inconsistent rank on '" +
                              buffer + "'");
        // Solve coeff * delta = offset difference per dimension.
        std::optional<long long> da, db;
        bool free_a = true, free_b = true;
        bool unsolvable = false;
        for (size_t d = 0; d < wi.size(); ++d) {
          auto fw = td::affine_form(wi[d]);
          auto fr = td::affine_form(rj[d]);
          if (!fw || !fr) {
            unsolvable = true;
            break;
          }
          auto coeff = [&](const td::AffineForm& f, const std::string& it) {
            auto it2 = f.coeffs.find(it);
            return it2 == f.coeffs.end() ? 0 : it2->second;
          };
          long long caw = coeff(*fw, a), cbw = coeff(*fw, b);
          long long car = coeff(*fr, a), cbr = coeff(*fr, b);
          // Other symbols must agree exactly.
          auto others = [&](const td::AffineForm& f) {
            std::map<std::string, long long> o = f.coeffs;
            o.erase(a);
            o.erase(b);
            return o;
          };
          if (others(*fw) != others(*fr) || caw != car || cbw != cbr) {
            unsolvable = true;
            break;
          }
          long long rhs = fw->constant - fr->constant;
          // caw*da + cbw*db = rhs
          if (caw != 0 && cbw == 0) {
            if (rhs % caw) {
              unsolvable = true;
              break;
            }
            long long v = rhs / caw;
            if (da && *da != v) {
              unsolvable = true;
              break;
            }
            da = v;
            free_a = false;
          } else if (cbw != 0 && caw == 0) {
            if (rhs % cbw) {
              unsolvable = true;
              break;
            }
            long long v = rhs / cbw;
            if (db && *db != v) {
              unsolvable = true;
              break;
            }
            db = v;
            free_b = false;
          } else if (caw == 0 && cbw == 0) {
            if (rhs != 0) {
              // disjoint locations: no dependence from this pair
              da = db = 0;
              free_a = free_b = false;
              unsolvable = false;
              goto pair_done;
            }
          } else {
            unsolvable = true;  // coupled dimensions: give up
            break;
          }
        }
        if (unsolvable)
          return inapplicable(
              "cannot prove interchange legality for buffer '" + buffer + "'");
        {
          // Free components mean the dependence recurs at any distance in
          // that loop; safety requires the constrained picture to survive
          // the swap. A fully free vector (scalar reduction) reverses order.
          long long va = da.value_or(0), vb = db.value_or(0);
          if (free_a && free_b)
            return inapplicable("loop-carried reduction on '" + buffer +
                                "' prevents interchange");
          // Normalize direction to lexicographically positive.
          if (free_a) {
            // (any, vb): after swap (vb, any); need vb >= 0
            if (vb < 0)
              return inapplicable("dependence on '" + buffer +
                                  "' reverses under interchange");
          } else if (free_b) {
            if (va < 0)
              return inapplicable("dependence on '" + buffer +
                                  "' reverses under interchange");
          } else {
            if (va < 0 || (va == 0 && vb < 0)) {
              va = -va;
              vb = -vb;
            }
            // swapped vector (vb, va) must be lexicographically >= 0
            if (vb < 0 || (vb == 0 && va < 0))
              return inapplicable("dependence distance (" +
                                  std::to_string(va) + "," +
                                  std::to_string(vb) + ") on '" + buffer +
                                  "' reverses under interchange");
          }
        }
      pair_done:;
      }
    }
  }

  LoopNode new_inner;
  new_inner.iterator = a;
  new_inner.lower = outer->loop.lower;
  new_inner.upper = outer->loop.upper;
  new_inner.pragma = inner->loop.pragma;  // positional
  new_inner.body = inner->loop.body;
  LoopNode new_outer;
  new_outer.iterator = b;
  new_outer.lower = inner->loop.lower;
  new_outer.upper = inner->loop.upper;
  new_outer.pragma = outer->loop.pragma;
  new_outer.body = {Stmt::make_loop(std::move(new_inner))};

  Kernel out = td::replace_stmt(k, outer, {Stmt::make_loop(std::move(new_outer))});
  return td::finish(std::move(out),
                    {"interchanged '" + a + "' and '" + b + "'"});
}

// ---------------------------------------------------------------------------
// fuse_pipelined_loops

inline TransformOutcome fuse_pipelined_loops(const Kernel& k,
                                             const std::string& first_it,
                                             const std::string& second_it,
                                             const std::string& level_str,
                                             const DeviceConfig& config) {
  namespace td = transform_detail;
  auto loc_a = find_loop(k, first_it);
  if (!loc_a.ok()) return inapplicable(loc_a.error());
  auto loc_b = find_loop(k, second_it);
  if (!loc_b.ok()) return inapplicable(loc_b.error());
  const Stmt* la = loc_a->target();
  const Stmt* lb = loc_b->target();

  const std::vector<StmtPtr>* body = td::enclosing_body(k, la);
  if (!body || body != td::enclosing_body(k, lb))
    return inapplicable("loops are not siblings");
  size_t pos_a = 0, pos_b = 0;
  for (size_t i = 0; i < body->size(); ++i) {
    if ((*body)[i].get() == la) pos_a = i;
    if ((*body)[i].get() == lb) pos_b = i;
  }
  if (pos_b != pos_a + 1)
    return inapplicable("loops must be adjacent siblings");
  if (!la->loop.pragma.is_pipeline() || !lb->loop.pragma.is_pipeline())
    return inapplicable("both loops must be pipelined");

  auto na = trip_count(la->loop);
  auto nb = trip_count(lb->loop);
  if (!na || !nb) return inapplicable("loop bounds must be bound");

  // Condition 1: equal initiation intervals.
  auto deps = find_dependences(k, config);
  auto regions = analysis_detail::collect_regions(k);
  auto region_ii = [&](const Stmt* l) -> std::optional<long long> {
    for (const auto& r : regions)
      if (r.chain.front() == l)
        return analysis_detail::infer_ii_region(r, k, config, deps).ii;
    return std::nullopt;
  };
  auto ii_a = region_ii(la);
  auto ii_b = region_ii(lb);
  if (!ii_a || !ii_b) return inapplicable("loops must be flat pipelined loops");
  if (*ii_a != *ii_b)
    return inapplicable("differing initiation intervals (" +
                        std::to_string(*ii_a) + " vs " + std::to_string(*ii_b) +
                        ")");

  // Coarse inter-loop dependence check for levels 2/3: the second loop may
  // read what the first writes only at the matching iteration index.
  auto fine_grained_ok = [&]() -> bool {
    std::map<std::string, std::vector<std::vector<ExprPtr>>> writes_a;
    visit_stmts(la->loop.body, [&](const StmtPtr& s) {
      if (s->kind == StmtKind::Assign)
        writes_a[s->target].push_back(s->indices);
    });
    bool ok = true;
    visit_stmts(lb->loop.body, [&](const StmtPtr& s) {
      visit_exprs_shallow(s, [&](const ExprPtr& e) {
        if (e->kind != ExprKind::Read || !writes_a.count(e->name)) return;
        // every matching write index must equal the read index after
        // renaming iterators to a common name
        std::map<std::string, ExprPtr> ra{{la->loop.iterator, Expr::iter("$t")}};
        std::map<std::string, ExprPtr> rb{{lb->loop.iterator, Expr::iter("$t")}};
        for (const auto& widx : writes_a[e->name]) {
          if (widx.size() != e->args.size()) {
            ok = false;
            return;
          }
          for (size_t d = 0; d < widx.size(); ++d) {
            ExprPtr w = substitute_refs(widx[d], ra);
            ExprPtr r = substitute_refs(e->args[d], rb);
            if (!struct_equal(w, r)) ok = false;
          }
        }
      });
    });
    return ok;
  };

  int level = 0;
  if (level_str == "auto" || level_str.empty()) {
    if (*na == *nb && fine_grained_ok()) level = 3;
    else if (fine_grained_ok()) level = 2;
    else level = 1;
  } else {
    level = std::stoi(level_str);
    if (level < 1 || level > 3) return inapplicable("level must be 1..3 or auto");
    if (level >= 2 && !fine_grained_ok())
      return inapplicable(
          "level " + std::to_string(level) +
          " needs fine-grained or no dependences between the loops");
    if (level == 3 && *na != *nb)
      return inapplicable("level 3 needs equal loop bounds");
  }

  auto lo_a = eval_const(la->loop.lower);
  auto lo_b = eval_const(lb->loop.lower);
  if (!lo_a || !lo_b) return inapplicable("loop bounds must be literal");

  std::set<std::string> taken = td::all_names(k);
  std::string it = la->loop.iterator;  // fused iterator keeps the first name

  std::vector<StmtPtr> fused_body;
  Pragma pragma = Pragma::pipeline(la->loop.pragma.target_ii);
  long long trip = 0;
  auto body_a = substitute_refs(
      la->loop.body,
      {{it, fold_expr(Expr::add(Expr::iter(it), Expr::lit(*lo_a)))}});
  if (level == 1) {
    trip = *na + *nb;
    auto body_b = substitute_refs(
        lb->loop.body,
        {{lb->loop.iterator,
          fold_expr(Expr::add(Expr::sub(Expr::iter(it), Expr::lit(*na)),
                              Expr::lit(*lo_b)))}});
    fused_body.push_back(
        Stmt::guard(Expr::lt(Expr::iter(it), Expr::lit(*na)), body_a));
    fused_body.push_back(
        Stmt::guard(Expr::le(Expr::lit(*na), Expr::iter(it)), body_b));
  } else if (level == 2) {
    trip = std::max(*na, *nb);
    auto body_b = substitute_refs(
        lb->loop.body,
        {{lb->loop.iterator,
          fold_expr(Expr::add(Expr::iter(it), Expr::lit(*lo_b)))}});
    fused_body.push_back(
        Stmt::guard(Expr::lt(Expr::iter(it), Expr::lit(*na)), body_a));
    fused_body.push_back(
        Stmt::guard(Expr::lt(Expr::iter(it), Expr::lit(*nb)), body_b));
  } else {
    trip = *na;
    auto body_b = substitute_refs(
        lb->loop.body,
        {{lb->loop.iterator,
          fold_expr(Expr::add(Expr::iter(it), Expr::lit(*lo_b)))}});
    fused_body = body_a;
    for (const auto& s : body_b) fused_body.push_back(s);
  }
  (void)taken;

  LoopNode fused;
  fused.iterator = it;
  fused.lower = Expr::lit(0);
  fused.upper = Expr::lit(trip);
  fused.pragma = pragma;
  fused.body = std::move(fused_body);

  // Replace both loops with the fused one.
  Kernel out = td::replace_stmt(k, la, {Stmt::make_loop(std::move(fused))});
  out = td::replace_stmt(out, lb, {});
  return td::finish(std::move(out),
                    {"fused '" + first_it + "' and '" + second_it +
                     "' at level " + std::to_string(level)});
}

// ---------------------------------------------------------------------------
// flatten_loop_nest

/// Coalesces an outer loop with its pipelined inner loop into one flat
/// pipelined loop; leading/trailing statements are absorbed under first/last
/// iteration guards. `register_iterators` reconstructs the original
/// iterators in explicit registers (increment-then-compare updates) instead
/// of div/mod expressions.
inline TransformOutcome flatten_loop_nest(const Kernel& k,
                                          const std::string& outer_it,
                                          bool register_iterators = false) {
  namespace td = transform_detail;
  auto loc = find_loop(k, outer_it);
  if (!loc.ok()) return inapplicable(loc.error());
  const Stmt* outer = loc->target();
  if (outer->loop.pragma.is_pipeline())
    return inapplicable("'" + outer_it + "' is itself pipelined");

  // Split body into leading statements, the pipelined inner loop, trailing.
  // Fully unrolled loops are parallel hardware and absorb like statements.
  const Stmt* inner = nullptr;
  std::vector<StmtPtr> leading, trailing;
  for (const auto& s : outer->loop.body) {
    if (s->kind == StmtKind::Loop && !s->loop.pragma.is_unroll()) {
      if (inner) return inapplicable("more than one inner loop");
      if (!s->loop.pragma.is_pipeline())
        return inapplicable("inner loop is not pipelined");
      inner = s.get();
      continue;
    }
    bool has_loop_inside = false;
    if (s->kind == StmtKind::Guard)
      visit_stmts(s->body, [&](const StmtPtr& g) {
        if (g->kind == StmtKind::Loop) has_loop_inside = true;
      });
    if (has_loop_inside)
      return inapplicable("guarded side loops cannot be absorbed");
    (inner ? trailing : leading).push_back(s);
  }
  if (!inner) return inapplicable("no pipelined inner loop");

  auto n_out = trip_count(outer->loop);
  auto n_in = trip_count(inner->loop);
  auto lo_out = eval_const(outer->loop.lower);
  auto lo_in = eval_const(inner->loop.lower);
  if (!n_out || !n_in || !lo_out || !lo_in)
    return inapplicable("loop bounds must be bound");
  if (td::contains_iterator(inner->loop.lower, outer_it) ||
      td::contains_iterator(inner->loop.upper, outer_it))
    return inapplicable("inner bounds depend on the outer iterator");

  std::set<std::string> taken = td::all_names(k);
  std::string flat_it =
      td::fresh_name(taken, outer->loop.iterator + inner->loop.iterator);
  taken.insert(flat_it);

  long long ni = *n_in;
  std::vector<StmtPtr> body;
  std::vector<std::string> notes;
  std::string o_reg, i_reg;
  Kernel out = k;

  if (!register_iterators) {
    ExprPtr o_expr = fold_expr(Expr::add(
        Expr::div(Expr::iter(flat_it), Expr::lit(ni)), Expr::lit(*lo_out)));
    ExprPtr i_expr = fold_expr(Expr::add(
        Expr::mod(Expr::iter(flat_it), Expr::lit(ni)), Expr::lit(*lo_in)));
    std::map<std::string, ExprPtr> sub{{outer->loop.iterator, o_expr},
                                       {inner->loop.iterator, i_expr}};
    ExprPtr first = Expr::eq(Expr::mod(Expr::iter(flat_it), Expr::lit(ni)),
                             Expr::lit(0));
    ExprPtr last = Expr::eq(Expr::mod(Expr::iter(flat_it), Expr::lit(ni)),
                            Expr::lit(ni - 1));
    if (!leading.empty())
      body.push_back(Stmt::guard(first, substitute_refs(leading, sub)));
    for (const auto& s : substitute_refs(inner->loop.body, sub))
      body.push_back(s);
    if (!trailing.empty())
      body.push_back(Stmt::guard(last, substitute_refs(trailing, sub)));
    notes.push_back("iterators reconstructed with division/modulo");
  } else {
    // Explicit iterator registers with software-style increment-then-compare
    // updates (condition flattening later halves their depth).
    o_reg = td::fresh_name(taken, outer->loop.iterator + "_r");
    taken.insert(o_reg);
    i_reg = td::fresh_name(taken, inner->loop.iterator + "_r");
    taken.insert(i_reg);
    Buffer ob;
    ob.name = o_reg;
    ob.elem = DataType::i32();
    ob.space = MemorySpace::registers();
    Buffer ib = ob;
    ib.name = i_reg;
    out.buffers.push_back(ob);
    out.buffers.push_back(ib);

    std::map<std::string, ExprPtr> sub{
        {outer->loop.iterator, Expr::read(o_reg, {})},
        {inner->loop.iterator, Expr::read(i_reg, {})}};
    ExprPtr first = Expr::eq(Expr::read(i_reg, {}), Expr::lit(*lo_in));
    ExprPtr last =
        Expr::eq(Expr::read(i_reg, {}), Expr::lit(*lo_in + ni - 1));
    if (!leading.empty())
      body.push_back(Stmt::guard(first, substitute_refs(leading, sub)));
    for (const auto& s : substitute_refs(inner->loop.body, sub))
      body.push_back(s);
    if (!trailing.empty())
      body.push_back(Stmt::guard(last, substitute_refs(trailing, sub)));
    // Updates: increment then compare against the bound (outer first: it
    // consumes the pre-update inner register).
    ExprPtr i_plus = Expr::add(Expr::read(i_reg, {}), Expr::lit(1));
    ExprPtr wrap = Expr::eq(i_plus, Expr::lit(*lo_in + ni));
    body.push_back(Stmt::assign(
        o_reg, {},
        Expr::sel(wrap, Expr::add(Expr::read(o_reg, {}), Expr::lit(1)),
                  Expr::read(o_reg, {}))));
    body.push_back(
        Stmt::assign(i_reg, {}, Expr::sel(wrap, Expr::lit(*lo_in), i_plus)));
    notes.push_back("iterators reconstructed in registers (" + o_reg + ", " +
                    i_reg + ")");
  }

  LoopNode flat;
  flat.iterator = flat_it;
  flat.lower = Expr::lit(0);
  flat.upper = Expr::lit(*n_out * ni);
  flat.pragma = Pragma::pipeline(inner->loop.pragma.target_ii);
  flat.body = std::move(body);

  std::vector<StmtPtr> replacement;
  if (register_iterators) {
    // Seed the registers before the flattened loop.
    replacement.push_back(Stmt::assign(o_reg, {}, Expr::lit(*lo_out)));
    replacement.push_back(Stmt::assign(i_reg, {}, Expr::lit(*lo_in)));
  }
  replacement.push_back(Stmt::make_loop(std::move(flat)));
  out = td::replace_stmt(out, outer, replacement);
  notes.insert(notes.begin(), "flattened '" + outer->loop.iterator + "' and '" +
                                  inner->loop.iterator + "' into '" + flat_it +
                                  "' (" + std::to_string(*n_out * ni) +
                                  " iterations)");
  return td::finish(std::move(out), std::move(notes));
}

// ---------------------------------------------------------------------------
// flatten_condition

/// Rewrites increment-then-compare register updates, comparing the live
/// value against bound-minus-one instead: the add and the compare then run
/// in parallel, halving the update's logic depth. Terminal register values
/// differ from software semantics (the iterator is left at its reset value
/// rather than one past the bound).
inline TransformOutcome flatten_condition(const Kernel& k,
                                          const std::string& loop_it) {
  namespace td = transform_detail;
  auto loc = find_loop(k, loop_it);
  if (!loc.ok()) return inapplicable(loc.error());
  const Stmt* loop = loc->target();

  int rewrites = 0;
  // Pattern: select(eq(X + 1, BOUND), ..., ...) -> select(eq(X, BOUND-1), ...)
  auto fix_cond = [&](const ExprPtr& e) -> ExprPtr {
    if (e->kind != ExprKind::Select) return nullptr;
    const ExprPtr& cond = e->args[0];
    if (cond->kind != ExprKind::Bin || cond->op != BinOp::Eq) return nullptr;
    const ExprPtr& lhs = cond->args[0];
    if (lhs->kind != ExprKind::Bin || lhs->op != BinOp::Add) return nullptr;
    if (lhs->args[1]->kind != ExprKind::IntLit ||
        lhs->args[1]->int_value != 1)
      return nullptr;
    ExprPtr flat = Expr::eq(
        lhs->args[0],
        fold_expr(Expr::sub(cond->args[1], Expr::lit(1))));
    ++rewrites;
    return Expr::sel(flat, e->args[1], e->args[2]);
  };

  auto new_body = rewrite_stmts(loop->loop.body, fix_cond);
  if (rewrites == 0) return inapplicable("pattern not found: no "
                                         "increment-then-compare update");
  auto copy = std::make_shared<Stmt>(*loop);
  copy->loop.body = std::move(new_body);
  Kernel out = td::replace_stmt(k, loop, {copy});
  return td::finish(std::move(out),
                    {"flattened " + std::to_string(rewrites) +
                     " increment-then-compare update(s)"});
}

}  // namespace hlsopt
