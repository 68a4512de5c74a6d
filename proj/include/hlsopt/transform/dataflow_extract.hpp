#pragma once

// Streaming-dataflow extraction: partitions a kernel into processing
// elements connected by FIFO channels.
//
// Three shapes are supported:
//   - replicate_pes over a time loop (chained sweeps): each of the P
//     timesteps becomes one PE; planes stream from a memory loader through
//     the chain into a memory writer;
//   - replicate_pes over an unrolled lane dimension (after replication):
//     each lane becomes one PE and the shared stream is passed down the
//     chain (a systolic arrangement);
//   - stage_loops: adjacent top-level pipelined loops become PEs, with
//     on-chip intermediates in matching order turned into channels.

#include "hlsopt/analysis.hpp"
#include "hlsopt/transform/core.hpp"

namespace hlsopt {

namespace transform_detail {

inline std::vector<StmtPtr> rename_buffers(
    const std::vector<StmtPtr>& body,
    const std::map<std::string, std::string>& names) {
  auto expr_fn = [&](const ExprPtr& e) -> ExprPtr {
    if ((e->kind == ExprKind::Read || e->kind == ExprKind::Pop) &&
        names.count(e->name)) {
      auto copy = std::make_shared<Expr>(*e);
      copy->name = names.at(e->name);
      return ExprPtr(copy);
    }
    return nullptr;
  };
  auto stmt_fn = [&](const StmtPtr& s) -> StmtPtr {
    if ((s->kind == StmtKind::Assign || s->kind == StmtKind::Push) &&
        names.count(s->target)) {
      auto copy = std::make_shared<Stmt>(*s);
      copy->target = names.at(s->target);
      return StmtPtr(copy);
    }
    return nullptr;
  };
  return rewrite_stmts(body, expr_fn, stmt_fn);
}

}  // namespace transform_detail

// ---------------------------------------------------------------------------
// time-chain replication (stencil-style)

namespace transform_detail {

inline TransformOutcome chain_time_loop(const Kernel& k, long long p) {
  // Pattern: top = [ for t in 0..T { sweep } ] with the sweep reading plane
  // f(t) of an off-chip array and writing plane f(t+1).
  const Stmt* tloop = nullptr;
  for (const auto& s : k.top) {
    if (s->kind == StmtKind::Loop) {
      if (tloop) return inapplicable("top level has several loops");
      tloop = s.get();
    }
  }
  if (!tloop) return inapplicable("no outer time loop");
  auto t_trip = trip_count(tloop->loop);
  auto t_lo = eval_const(tloop->loop.lower);
  if (!t_trip || !t_lo || *t_lo != 0)
    return inapplicable("time loop must be bound with zero lower bound");
  if (*t_trip != p)
    return inapplicable(
        "chained replication needs P equal to the time trip count (" +
        std::to_string(*t_trip) +
        "); multiple passes would read back memory written in the same "
        "graph");
  const std::string t_it = tloop->loop.iterator;

  // The streamed buffer: off-chip, read at plane indices containing t and
  // written at the same plane shifted by one.
  std::string stream_buf;
  for (const auto& b : k.buffers) {
    if (b.space.kind != MemorySpace::Kind::OffChip) continue;
    auto sites = collect_sites(k, b.name);
    bool reads_t = false;
    for (const auto& s : sites)
      if (!s.is_write)
        for (const auto& ix : s.indices)
          reads_t |= contains_iterator(ix, t_it);
    if (reads_t) {
      if (!stream_buf.empty())
        return inapplicable("several buffers stream through the time loop");
      stream_buf = b.name;
    }
  }
  if (stream_buf.empty())
    return inapplicable("no off-chip buffer indexed by the time iterator");
  const Buffer* decl = k.find_buffer(stream_buf);

  std::vector<Site> sites = collect_sites(k, stream_buf);
  const Site* read_site = nullptr;
  const Site* write_site = nullptr;
  for (const auto& s : sites) {
    if (s.is_write) {
      if (write_site) return inapplicable("several writes to the stream buffer");
      write_site = &s;
    } else {
      if (read_site) return inapplicable("several reads of the stream buffer "
                                         "(apply delay buffering first)");
      read_site = &s;
    }
  }
  if (!read_site || !write_site)
    return inapplicable("stream buffer needs one read and one write");

  // plane(t) of the read must become plane(t+1) at the write
  if (read_site->indices.empty() || write_site->indices.empty())
    return inapplicable("stream buffer must have a leading plane index");
  ExprPtr read_plane = read_site->indices[0];
  ExprPtr write_plane = write_site->indices[0];
  {
    std::map<std::string, ExprPtr> bump{
        {t_it, Expr::add(Expr::iter(t_it), Expr::lit(1))}};
    if (!struct_equal(fold_expr(substitute_refs(read_plane, bump)),
                      fold_expr(write_plane)))
      return inapplicable(
          "write plane is not the read plane advanced by one step");
  }

  // Plane element count (suffix dims).
  long long plane_scalars = decl->elem.lanes;
  std::vector<long long> suffix;
  for (size_t d = 1; d < decl->shape.size(); ++d) {
    auto e = eval_const(decl->shape[d]);
    if (!e) return inapplicable("extents must be bound");
    suffix.push_back(*e);
    plane_scalars *= *e;
  }
  long long plane_elems = 1;
  for (long long e : suffix) plane_elems *= e;

  std::set<std::string> taken = all_names(k);
  auto fresh = [&](const std::string& base) {
    std::string n = fresh_name(taken, base);
    taken.insert(n);
    return n;
  };

  Kernel out = k;
  out.top.clear();

  // Stage channels between the PEs.
  std::vector<std::string> stage;
  for (long long i = 0; i <= p; ++i) {
    std::string ch = fresh("st" + std::to_string(i));
    Buffer cb;
    cb.name = ch;
    cb.elem = decl->elem;
    cb.space = MemorySpace::fifo(16);
    out.buffers.push_back(cb);
    stage.push_back(ch);
  }

  // Loader: push plane f(0) in row-major order.
  {
    std::string q = fresh("ql");
    std::vector<ExprPtr> idx;
    idx.push_back(fold_expr(
        substitute_refs(read_plane, {{t_it, Expr::lit(0)}})));
    ExprPtr pos = Expr::iter(q);
    for (size_t d = 0; d < suffix.size(); ++d) {
      long long stride = 1;
      for (size_t d2 = d + 1; d2 < suffix.size(); ++d2) stride *= suffix[d2];
      idx.push_back(
          fold_expr(Expr::mod(Expr::div(pos, Expr::lit(stride)),
                              Expr::lit(suffix[d]))));
    }
    ProcessingElement pe;
    pe.name = fresh("load_" + stream_buf);
    pe.body = {Stmt::make_loop(q, Expr::lit(0), Expr::lit(plane_elems),
                               Pragma::pipeline(),
                               {Stmt::push(stage[0], Expr::read(stream_buf, idx))})};
    out.pes.push_back(std::move(pe));
  }

  // Sweep PEs: the time-loop body with t = step, reads popped from the
  // upstream channel, writes pushed downstream, private copies of the
  // sweep's on-chip state.
  for (long long step = 0; step < p; ++step) {
    std::map<std::string, ExprPtr> tsub{{t_it, Expr::lit(step)}};
    auto body = substitute_refs(tloop->loop.body, tsub);

    std::string in_ch = stage[step];
    std::string out_ch = stage[step + 1];
    auto expr_fn = [&](const ExprPtr& e) -> ExprPtr {
      if (e->kind == ExprKind::Read && e->name == stream_buf)
        return Expr::pop(in_ch);
      return nullptr;
    };
    auto stmt_fn = [&](const StmtPtr& s) -> StmtPtr {
      if (s->kind == StmtKind::Assign && s->target == stream_buf)
        return Stmt::push(out_ch, s->value);
      return nullptr;
    };
    body = rewrite_stmts(body, expr_fn, stmt_fn);

    // private state: clone every on-chip buffer the body touches
    std::map<std::string, std::string> renames;
    std::set<std::string> used;
    visit_stmts(body, [&](const StmtPtr& s) {
      if (s->kind == StmtKind::Assign || s->kind == StmtKind::Push)
        used.insert(s->target);
      visit_exprs_shallow(s, [&](const ExprPtr& e) {
        if (e->kind == ExprKind::Read || e->kind == ExprKind::Pop)
          used.insert(e->name);
      });
    });
    for (const auto& name : used) {
      const Buffer* b = k.find_buffer(name);
      if (!b || b->space.kind == MemorySpace::Kind::OffChip) continue;
      if (name == in_ch || name == out_ch) continue;
      std::string pvt = fresh(name + "_s" + std::to_string(step));
      Buffer copy = *b;
      copy.name = pvt;
      out.buffers.push_back(copy);
      renames[name] = pvt;
    }
    body = transform_detail::rename_buffers(body, renames);

    ProcessingElement pe;
    pe.name = fresh("sweep" + std::to_string(step));
    pe.body = std::move(body);
    out.pes.push_back(std::move(pe));
  }

  // Writer: drain the final stage into plane f(P).
  {
    std::string q = fresh("qw");
    std::vector<ExprPtr> idx;
    idx.push_back(fold_expr(
        substitute_refs(read_plane, {{t_it, Expr::lit(p)}})));
    ExprPtr pos = Expr::iter(q);
    for (size_t d = 0; d < suffix.size(); ++d) {
      long long stride = 1;
      for (size_t d2 = d + 1; d2 < suffix.size(); ++d2) stride *= suffix[d2];
      idx.push_back(
          fold_expr(Expr::mod(Expr::div(pos, Expr::lit(stride)),
                              Expr::lit(suffix[d]))));
    }
    ProcessingElement pe;
    pe.name = fresh("store_" + stream_buf);
    pe.body = {Stmt::make_loop(q, Expr::lit(0), Expr::lit(plane_elems),
                               Pragma::pipeline(),
                               {Stmt::assign(stream_buf, idx,
                                             Expr::pop(stage[p]))})};
    out.pes.push_back(std::move(pe));
  }

  // Drop buffers that became dead (the original on-chip state is now only
  // referenced through per-PE clones).
  {
    std::set<std::string> referenced;
    visit_stmts(out, [&](const StmtPtr& s) {
      if (s->kind == StmtKind::Assign || s->kind == StmtKind::Push)
        referenced.insert(s->target);
      visit_exprs_shallow(s, [&](const ExprPtr& e) {
        if (e->kind == ExprKind::Read || e->kind == ExprKind::Pop)
          referenced.insert(e->name);
      });
    });
    std::vector<Buffer> kept;
    for (const auto& b : out.buffers)
      if (referenced.count(b.name) ||
          b.space.kind == MemorySpace::Kind::OffChip)
        kept.push_back(b);
    out.buffers = std::move(kept);
  }

  // Equivalence obligation: only the final plane (and the untouched input
  // plane) remain memory-visible.
  EquivalenceMap io;
  {
    IoRegion r;
    r.buffer_a = r.buffer_b = stream_buf;
    r.offset_a = r.offset_b = p * plane_scalars;
    r.count = plane_scalars;
    io.outputs.push_back(r);
    io.note = "intermediate planes stream through channels; plane " +
              std::to_string(p) + " is compared";
  }
  return transform_detail::finish(
      std::move(out),
      {std::to_string(p) + " chained sweep PEs between a memory loader and "
                           "writer"},
      io);
}

// ---------------------------------------------------------------------------
// lane-split replication (systolic, after `replicate`)

inline TransformOutcome split_lanes(const Kernel& k, long long p,
                                    const std::set<std::string>& share) {
  if (!k.has_pe_graph())
    return inapplicable("lane splitting expects a PE graph (extract memory "
                        "accesses first)");
  // compute PE = the one containing unroll loops of factor P
  int host = -1;
  for (size_t i = 0; i < k.pes.size(); ++i) {
    bool has_unroll = false;
    visit_stmts(k.pes[i].body, [&](const StmtPtr& s) {
      if (s->kind == StmtKind::Loop && s->loop.pragma.is_unroll()) {
        long long f = s->loop.pragma.factor.value_or(
            trip_count(s->loop).value_or(0));
        if (f == p) has_unroll = true;
      }
    });
    if (has_unroll) {
      if (host >= 0) return inapplicable("several PEs carry lane unrolls");
      host = static_cast<int>(i);
    }
  }
  if (host < 0)
    return inapplicable("no unrolled lane dimension of factor " +
                        std::to_string(p) + " (apply replicate first)");
  const ProcessingElement& compute = k.pes[host];

  // Unroll iterators of factor p in the compute PE.
  std::set<std::string> lane_iters;
  visit_stmts(compute.body, [&](const StmtPtr& s) {
    if (s->kind == StmtKind::Loop && s->loop.pragma.is_unroll()) {
      long long f =
          s->loop.pragma.factor.value_or(trip_count(s->loop).value_or(0));
      if (f == p) lane_iters.insert(s->loop.iterator);
    }
  });

  // Channels with ops inside lane unrolls split per lane; channels popped
  // outside them chain through the PEs when shared.
  std::set<std::string> split_chans, shared_chans;
  {
    std::function<void(const std::vector<StmtPtr>&, bool)> scan =
        [&](const std::vector<StmtPtr>& body, bool in_lane) {
          for (const auto& s : body) {
            bool lane = in_lane;
            if (s->kind == StmtKind::Loop)
              lane |= lane_iters.count(s->loop.iterator) > 0;
            if (s->kind == StmtKind::Push)
              (in_lane ? split_chans : shared_chans).insert(s->target);
            visit_exprs_shallow(s, [&](const ExprPtr& e) {
              if (e->kind == ExprKind::Pop)
                (in_lane ? split_chans : shared_chans).insert(e->name);
            });
            if (s->kind == StmtKind::Loop) scan(s->loop.body, lane);
            if (s->kind == StmtKind::Guard) scan(s->body, lane);
          }
        };
    scan(compute.body, false);
  }
  for (const auto& ch : share)
    if (!shared_chans.count(ch))
      return inapplicable("share target '" + ch +
                          "' is not consumed outside the lane unroll");
  // shared channels default: everything popped outside lanes
  std::set<std::string> chains = share.empty() ? shared_chans : share;

  // Buffers sliced per lane (last extent == p, always indexed by a lane
  // iterator) versus cloned per lane.
  std::set<std::string> state;
  visit_stmts(compute.body, [&](const StmtPtr& s) {
    if (s->kind == StmtKind::Assign || s->kind == StmtKind::Push)
      state.insert(s->target);
    visit_exprs_shallow(s, [&](const ExprPtr& e) {
      if (e->kind == ExprKind::Read) state.insert(e->name);
    });
  });
  std::set<std::string> sliced, cloned;
  for (const auto& name : state) {
    const Buffer* b = k.find_buffer(name);
    if (!b) continue;
    if (b->space.kind == MemorySpace::Kind::OffChip ||
        b->space.kind == MemorySpace::Kind::Fifo)
      continue;
    bool last_is_lane = false;
    if (!b->shape.empty()) {
      auto e = eval_const(b->shape.back());
      if (e && *e == p) {
        last_is_lane = true;
        auto sites = transform_detail::collect_sites(k, name);
        for (const auto& site : sites) {
          if (site.indices.empty()) continue;
          const ExprPtr& last = site.indices.back();
          bool is_lane_iter = last->kind == ExprKind::IterRef &&
                              lane_iters.count(last->name);
          last_is_lane &= is_lane_iter;
        }
      }
    }
    (last_is_lane ? sliced : cloned).insert(name);
  }

  std::set<std::string> taken = transform_detail::all_names(k);
  auto fresh = [&](const std::string& base) {
    std::string n = transform_detail::fresh_name(taken, base);
    taken.insert(n);
    return n;
  };

  Kernel out = k;
  out.pes.clear();

  // channel lane copies
  std::map<std::string, std::vector<std::string>> lane_chan;
  for (const auto& ch : split_chans) {
    const Buffer* cb = k.find_buffer(ch);
    if (!cb) continue;
    for (long long lane = 0; lane < p; ++lane) {
      std::string n = fresh(ch + "_l" + std::to_string(lane));
      Buffer copy = *cb;
      copy.name = n;
      out.buffers.push_back(copy);
      lane_chan[ch].push_back(n);
    }
  }
  // chain channels for shared streams
  std::map<std::string, std::vector<std::string>> chain_chan;
  for (const auto& ch : chains) {
    const Buffer* cb = k.find_buffer(ch);
    if (!cb) continue;
    for (long long lane = 1; lane < p; ++lane) {
      std::string n = fresh(ch + "_fwd" + std::to_string(lane));
      Buffer copy = *cb;
      copy.name = n;
      out.buffers.push_back(copy);
      chain_chan[ch].push_back(n);
    }
  }

  // build lane PEs
  for (long long lane = 0; lane < p; ++lane) {
    // instantiate lane unrolls at this lane
    std::function<std::vector<StmtPtr>(const std::vector<StmtPtr>&)> inst =
        [&](const std::vector<StmtPtr>& body) -> std::vector<StmtPtr> {
      std::vector<StmtPtr> nb;
      for (const auto& s : body) {
        if (s->kind == StmtKind::Loop && lane_iters.count(s->loop.iterator)) {
          auto inner = substitute_refs(s->loop.body,
                                       {{s->loop.iterator, Expr::lit(lane)}});
          for (const auto& st : inst(inner)) nb.push_back(st);
          continue;
        }
        auto copy = std::make_shared<Stmt>(*s);
        if (copy->kind == StmtKind::Loop) copy->loop.body = inst(copy->loop.body);
        if (copy->kind == StmtKind::Guard) copy->body = inst(copy->body);
        nb.push_back(copy);
      }
      return nb;
    };
    auto body = inst(compute.body);

    // slice lane-indexed buffers, clone the rest
    std::map<std::string, std::string> renames;
    for (const auto& name : sliced) {
      std::string n = fresh(name + "_l" + std::to_string(lane));
      const Buffer* b = k.find_buffer(name);
      Buffer copy = *b;
      copy.name = n;
      copy.shape.pop_back();
      out.buffers.push_back(copy);
      renames[name] = n;
      // drop the trailing (now constant) index
      auto drop_expr = [&](const ExprPtr& e) -> ExprPtr {
        if (e->kind == ExprKind::Read && e->name == name && !e->args.empty()) {
          auto copy2 = std::make_shared<Expr>(*e);
          copy2->args.pop_back();
          return ExprPtr(copy2);
        }
        return nullptr;
      };
      auto drop_stmt = [&](const StmtPtr& s) -> StmtPtr {
        if (s->kind == StmtKind::Assign && s->target == name &&
            !s->indices.empty()) {
          auto copy2 = std::make_shared<Stmt>(*s);
          copy2->indices.pop_back();
          return StmtPtr(copy2);
        }
        return nullptr;
      };
      body = rewrite_stmts(body, drop_expr, drop_stmt);
    }
    for (const auto& name : cloned) {
      std::string n = fresh(name + "_l" + std::to_string(lane));
      const Buffer* b = k.find_buffer(name);
      Buffer copy = *b;
      copy.name = n;
      out.buffers.push_back(copy);
      renames[name] = n;
    }
    // per-lane channels
    for (const auto& [ch, lanes] : lane_chan) renames[ch] = lanes[lane];
    // shared chains: lane 0 pops the original; later lanes pop the forward
    for (const auto& ch : chains)
      if (lane > 0) renames[ch] = chain_chan[ch][lane - 1];
    body = transform_detail::rename_buffers(body, renames);

    // forward shared values downstream right after their pop
    if (lane + 1 < p) {
      std::function<std::vector<StmtPtr>(const std::vector<StmtPtr>&)> fwd =
          [&](const std::vector<StmtPtr>& b2) -> std::vector<StmtPtr> {
        std::vector<StmtPtr> nb;
        for (const auto& s : b2) {
          auto copy = std::make_shared<Stmt>(*s);
          if (copy->kind == StmtKind::Loop) copy->loop.body = fwd(copy->loop.body);
          if (copy->kind == StmtKind::Guard) copy->body = fwd(copy->body);
          nb.push_back(copy);
          if (s->kind == StmtKind::Assign && s->value &&
              s->value->kind == ExprKind::Pop) {
            for (const auto& ch : chains) {
              std::string source = lane == 0 ? ch : chain_chan[ch][lane - 1];
              if (s->value->name == source) {
                // push the just-popped value to the next lane
                ExprPtr v = s->indices.empty()
                                ? Expr::read(s->target, {})
                                : Expr::read(s->target, s->indices);
                nb.push_back(Stmt::push(chain_chan[ch][lane], v));
              }
            }
          }
        }
        return nb;
      };
      body = fwd(body);
    }

    ProcessingElement pe;
    pe.name = fresh(compute.name + "_l" + std::to_string(lane));
    pe.body = std::move(body);
    out.pes.push_back(std::move(pe));
  }

  // rewrite peer PEs: copy loops of trip p around split-channel ops unroll
  // into per-lane statements
  for (size_t i = 0; i < k.pes.size(); ++i) {
    if (static_cast<int>(i) == host) continue;
    const ProcessingElement& peer = k.pes[i];
    std::function<std::vector<StmtPtr>(const std::vector<StmtPtr>&)> rw =
        [&](const std::vector<StmtPtr>& body) -> std::vector<StmtPtr> {
      std::vector<StmtPtr> nb;
      for (const auto& s : body) {
        bool is_copy_loop = false;
        std::string op_chan;
        if (s->kind == StmtKind::Loop) {
          auto n = trip_count(s->loop);
          if (n && *n == p && s->loop.pragma.kind != Pragma::Kind::Pipeline) {
            // The copy loop wraps the channel op directly (not through a
            // nested loop); an enclosing loop that happens to share the trip
            // count must not match.
            std::function<void(const std::vector<StmtPtr>&)> direct =
                [&](const std::vector<StmtPtr>& b2) {
                  for (const auto& inner : b2) {
                    if (inner->kind == StmtKind::Loop) continue;
                    if (inner->kind == StmtKind::Guard) {
                      direct(inner->body);
                      continue;
                    }
                    if (inner->kind == StmtKind::Push &&
                        split_chans.count(inner->target))
                      op_chan = inner->target;
                    visit_exprs_shallow(inner, [&](const ExprPtr& e) {
                      if (e->kind == ExprKind::Pop && split_chans.count(e->name))
                        op_chan = e->name;
                    });
                  }
                };
            direct(s->loop.body);
            is_copy_loop = !op_chan.empty();
          }
        }
        if (is_copy_loop) {
          for (long long lane = 0; lane < p; ++lane) {
            auto inst = substitute_refs(s->loop.body,
                                        {{s->loop.iterator, Expr::lit(lane)}});
            std::map<std::string, std::string> renames{
                {op_chan, lane_chan[op_chan][lane]}};
            inst = transform_detail::rename_buffers(inst, renames);
            for (const auto& st : inst) nb.push_back(st);
          }
          continue;
        }
        auto copy = std::make_shared<Stmt>(*s);
        if (copy->kind == StmtKind::Loop) copy->loop.body = rw(copy->loop.body);
        if (copy->kind == StmtKind::Guard) copy->body = rw(copy->body);
        nb.push_back(copy);
      }
      return nb;
    };
    ProcessingElement pe = peer;
    pe.body = rw(peer.body);
    out.pes.push_back(std::move(pe));
  }

  // drop dead buffers (original sliced/cloned state, split channels)
  {
    std::set<std::string> referenced;
    visit_stmts(out, [&](const StmtPtr& s) {
      if (s->kind == StmtKind::Assign || s->kind == StmtKind::Push)
        referenced.insert(s->target);
      visit_exprs_shallow(s, [&](const ExprPtr& e) {
        if (e->kind == ExprKind::Read || e->kind == ExprKind::Pop)
          referenced.insert(e->name);
      });
    });
    std::vector<Buffer> kept;
    for (const auto& b : out.buffers)
      if (referenced.count(b.name) ||
          b.space.kind == MemorySpace::Kind::OffChip)
        kept.push_back(b);
    out.buffers = std::move(kept);
  }

  std::string chain_names;
  for (const auto& ch : chains) chain_names += " " + ch;
  return transform_detail::finish(
      std::move(out),
      {std::to_string(p) + " lane PEs in a chain; shared stream(s)" +
           (chain_names.empty() ? std::string(" none") : chain_names) +
           " passed downstream",
       "per-lane start/drain behavior realized with lane-indexed channels"});
}

// ---------------------------------------------------------------------------
// stage_loops: adjacent pipelined loops become PEs

inline TransformOutcome stage_loops_mode(const Kernel& k) {
  if (k.has_pe_graph()) return inapplicable("kernel is already a PE graph");
  if (k.top.size() < 2) return inapplicable("need at least two stages");
  for (const auto& s : k.top)
    if (s->kind != StmtKind::Loop)
      return inapplicable("top level must consist of loops only");

  // On-chip intermediates written by exactly one stage and read by exactly
  // one later stage, both at the bare iterator, stream through channels.
  std::map<std::string, std::pair<int, int>> writer_reader;
  for (const auto& b : k.buffers) {
    if (b.space.kind != MemorySpace::Kind::OnChipRam) continue;
    int w = -1, r = -1;
    bool simple = b.shape.size() == 1;
    for (size_t i = 0; i < k.top.size() && simple; ++i) {
      std::vector<Site> sites;
      std::vector<const Stmt*> control;
      collect_sites({k.top[i]}, b.name, control, sites);
      for (const auto& site : sites) {
        bool bare = site.indices.size() == 1 &&
                    site.indices[0]->kind == ExprKind::IterRef;
        if (!bare) simple = false;
        if (site.is_write) {
          if (w >= 0 && w != static_cast<int>(i)) simple = false;
          w = static_cast<int>(i);
        } else {
          if (r >= 0 && r != static_cast<int>(i)) simple = false;
          r = static_cast<int>(i);
        }
      }
    }
    if (simple && w >= 0 && r >= 0 && w < r) writer_reader[b.name] = {w, r};
  }
  if (writer_reader.empty())
    return inapplicable("no streaming intermediate between the stages");

  Kernel out = k;
  out.top.clear();
  std::set<std::string> taken = all_names(k);
  for (size_t i = 0; i < k.top.size(); ++i) {
    ProcessingElement pe;
    pe.name = fresh_name(taken, "stage" + std::to_string(i));
    taken.insert(pe.name);
    std::vector<StmtPtr> body = {k.top[i]};
    for (const auto& [name, wr] : writer_reader) {
      if (wr.first != static_cast<int>(i) && wr.second != static_cast<int>(i))
        continue;
      AccessRewrite rw;
      rw.buffer = name;
      if (wr.second == static_cast<int>(i))
        rw.on_read = [&name](const Expr&) { return Expr::pop(name); };
      if (wr.first == static_cast<int>(i))
        rw.on_write = [&name](const Stmt& s) {
          return Stmt::push(name, s.value);
        };
      body = rewrite_accesses(body, rw);
    }
    pe.body = std::move(body);
    out.pes.push_back(std::move(pe));
  }
  for (const auto& [name, wr] : writer_reader) {
    Buffer* b = out.find_buffer(name);
    auto depth_src = eval_const(b->shape[0]);
    b->space = MemorySpace::fifo(16);
    b->shape.clear();
    (void)depth_src;
  }
  return finish(std::move(out),
                {std::to_string(k.top.size()) + " stages as PEs; " +
                 std::to_string(writer_reader.size()) +
                 " intermediate(s) turned into channels"});
}

}  // namespace transform_detail

inline TransformOutcome extract_streaming_dataflow(const Kernel& k,
                                                   const TransformStep& step) {
  namespace td = transform_detail;
  auto pes = step.int_param("pes");
  if (step.param("mode").value_or("") == "stages" ||
      step.target == "stages")
    return td::stage_loops_mode(k);
  if (!pes) return inapplicable("needs pes=<P> (or target 'stages')");
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
  if (k.has_pe_graph()) return td::split_lanes(k, *pes, share);
  return td::chain_time_loop(k, *pes);
}

}  // namespace hlsopt
