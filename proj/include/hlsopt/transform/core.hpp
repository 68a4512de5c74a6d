#pragma once

// Shared machinery for the transformation catalog: the step/result types,
// kernel surgery helpers (statement replacement, fresh names, buffer edits)
// and access-site collection.
//
// Every transformation is a pure rewrite: it either returns a new kernel that
// validates and is oracle-equivalent to its input, or an "inapplicable: ..."
// error and the input is left untouched. No partial rewrites.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hlsopt/equivalence.hpp"
#include "hlsopt/ir.hpp"
#include "hlsopt/print.hpp"

namespace hlsopt {

/// One entry of a recipe: which transformation, on what, with which knobs.
struct TransformStep {
  std::string name;
  std::string target;  // loop iterator / buffer / function name
  std::map<std::string, std::string> params;

  std::optional<std::string> param(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end()) return std::nullopt;
    return it->second;
  }
  std::optional<long long> int_param(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end()) return std::nullopt;
    try {
      size_t used = 0;
      long long v = std::stoll(it->second, &used);
      if (used != it->second.size()) return std::nullopt;
      return v;
    } catch (...) {
      return std::nullopt;
    }
  }
};

struct TransformResult {
  Kernel kernel;
  std::vector<std::string> notes;  // what changed, warnings
  EquivalenceMap io_map;           // equivalence obligation adjustments
  bool needs_tolerance = false;    // reassociation or precision change
};

using TransformOutcome = Result<TransformResult>;

inline TransformOutcome inapplicable(const std::string& why) {
  return TransformOutcome::failure("inapplicable: " + why);
}

namespace transform_detail {

// -- names -------------------------------------------------------------------

inline std::set<std::string> all_names(const Kernel& k) {
  std::set<std::string> names;
  names.insert(k.parameters.begin(), k.parameters.end());
  for (const auto& b : k.buffers) names.insert(b.name);
  for (const auto& f : k.functions) names.insert(f.name);
  for (const auto& pe : k.pes) names.insert(pe.name);
  visit_stmts(k, [&](const StmtPtr& s) {
    if (s->kind == StmtKind::Loop) names.insert(s->loop.iterator);
  });
  return names;
}

inline std::string fresh_name(const std::set<std::string>& taken,
                              const std::string& base) {
  if (!taken.count(base)) return base;
  for (int i = 2;; ++i) {
    std::string candidate = base + std::to_string(i);
    if (!taken.count(candidate)) return candidate;
  }
}

inline std::string fresh_name(const Kernel& k, const std::string& base) {
  return fresh_name(all_names(k), base);
}

// -- statement surgery -------------------------------------------------------

inline std::vector<StmtPtr> replace_in_body(
    const std::vector<StmtPtr>& body, const Stmt* target,
    const std::vector<StmtPtr>& replacement, bool& done) {
  std::vector<StmtPtr> out;
  out.reserve(body.size());
  for (const auto& s : body) {
    if (s.get() == target) {
      for (const auto& r : replacement) out.push_back(r);
      done = true;
      continue;
    }
    if (s->kind == StmtKind::Loop) {
      auto inner = replace_in_body(s->loop.body, target, replacement, done);
      if (inner.size() != s->loop.body.size() ||
          !std::equal(inner.begin(), inner.end(), s->loop.body.begin())) {
        auto copy = std::make_shared<Stmt>(*s);
        copy->loop.body = std::move(inner);
        out.push_back(copy);
        continue;
      }
    } else if (s->kind == StmtKind::Guard) {
      auto inner = replace_in_body(s->body, target, replacement, done);
      if (inner.size() != s->body.size() ||
          !std::equal(inner.begin(), inner.end(), s->body.begin())) {
        auto copy = std::make_shared<Stmt>(*s);
        copy->body = std::move(inner);
        out.push_back(copy);
        continue;
      }
    }
    out.push_back(s);
  }
  return out;
}

/// Replaces one statement (anywhere in top, PE bodies or functions) with a
/// statement list, rebuilding the path to it.
inline Kernel replace_stmt(const Kernel& k, const Stmt* target,
                           const std::vector<StmtPtr>& replacement) {
  Kernel out = k;
  bool done = false;
  out.top = replace_in_body(k.top, target, replacement, done);
  for (auto& pe : out.pes)
    if (!done) pe.body = replace_in_body(pe.body, target, replacement, done);
  for (auto& f : out.functions)
    if (!done) f.body = replace_in_body(f.body, target, replacement, done);
  return out;
}

/// The body list that syntactically contains a statement, or null.
inline const std::vector<StmtPtr>* enclosing_body(const Kernel& k,
                                                  const Stmt* target) {
  const std::vector<StmtPtr>* found = nullptr;
  std::function<void(const std::vector<StmtPtr>&)> walk =
      [&](const std::vector<StmtPtr>& body) {
        for (const auto& s : body) {
          if (s.get() == target) found = &body;
          if (found) return;
          if (s->kind == StmtKind::Loop) walk(s->loop.body);
          if (s->kind == StmtKind::Guard) walk(s->body);
        }
      };
  walk(k.top);
  for (const auto& pe : k.pes)
    if (!found) walk(pe.body);
  for (const auto& f : k.functions)
    if (!found) walk(f.body);
  return found;
}

// -- buffer edits --------------------------------------------------------------

inline Kernel with_buffer(const Kernel& k, Buffer b) {
  Kernel out = k;
  out.buffers.push_back(std::move(b));
  return out;
}

inline void retype_buffer(Kernel& k, const std::string& name,
                          const DataType& elem) {
  if (Buffer* b = k.find_buffer(name)) b->elem = elem;
}

inline void reshape_buffer(Kernel& k, const std::string& name,
                           std::vector<ExprPtr> shape) {
  if (Buffer* b = k.find_buffer(name)) b->shape = std::move(shape);
}

inline void drop_buffer(Kernel& k, const std::string& name) {
  for (auto it = k.buffers.begin(); it != k.buffers.end(); ++it)
    if (it->name == name) {
      k.buffers.erase(it);
      return;
    }
}

// -- access sites --------------------------------------------------------------

/// One syntactic access to a buffer, with the control path leading to it.
struct Site {
  bool is_write = false;
  const Stmt* stmt = nullptr;           // statement containing the access
  const Expr* read = nullptr;           // read expression (when !is_write)
  std::vector<ExprPtr> indices;
  std::vector<const Stmt*> control;     // enclosing loops and guards, outermost first
  // Select conditions on the path to the read, innermost last. `second` is
  // true when the read sits in the then-branch.
  std::vector<std::pair<ExprPtr, bool>> select_path;
};

inline void collect_sites(const std::vector<StmtPtr>& body,
                          const std::string& buffer,
                          std::vector<const Stmt*>& control,
                          std::vector<Site>& out) {
  for (const auto& s : body) {
    auto scan_expr = [&](const ExprPtr& root) {
      std::vector<std::pair<ExprPtr, bool>> select_path;
      std::function<void(const ExprPtr&)> walk = [&](const ExprPtr& e) {
        if (!e) return;
        if (e->kind == ExprKind::Read && e->name == buffer) {
          Site site;
          site.is_write = false;
          site.stmt = s.get();
          site.read = e.get();
          site.indices = e->args;
          site.control = control;
          site.select_path = select_path;
          out.push_back(std::move(site));
        }
        if (e->kind == ExprKind::Select) {
          walk(e->args[0]);
          select_path.emplace_back(e->args[0], true);
          walk(e->args[1]);
          select_path.back().second = false;
          walk(e->args[2]);
          select_path.pop_back();
          return;
        }
        for (const auto& a : e->args) walk(a);
      };
      walk(root);
    };
    switch (s->kind) {
      case StmtKind::Assign:
        for (const auto& i : s->indices) scan_expr(i);
        scan_expr(s->value);
        if (s->target == buffer) {
          Site site;
          site.is_write = true;
          site.stmt = s.get();
          site.indices = s->indices;
          site.control = control;
          out.push_back(std::move(site));
        }
        break;
      case StmtKind::Push: scan_expr(s->value); break;
      case StmtKind::Guard:
        scan_expr(s->value);
        control.push_back(s.get());
        collect_sites(s->body, buffer, control, out);
        control.pop_back();
        break;
      case StmtKind::Loop:
        control.push_back(s.get());
        collect_sites(s->loop.body, buffer, control, out);
        control.pop_back();
        break;
      case StmtKind::Call: break;  // functions scanned separately
    }
  }
}

inline std::vector<Site> collect_sites(const Kernel& k,
                                       const std::string& buffer) {
  std::vector<Site> out;
  std::vector<const Stmt*> control;
  collect_sites(k.top, buffer, control, out);
  for (const auto& pe : k.pes) {
    control.clear();
    collect_sites(pe.body, buffer, control, out);
  }
  for (const auto& f : k.functions) {
    control.clear();
    collect_sites(f.body, buffer, control, out);
  }
  return out;
}

// -- misc ----------------------------------------------------------------------

inline std::string describe_site(const std::string& buffer, const Site& s) {
  std::string d = buffer;
  for (const auto& ix : s.indices) {
    d += "[";
    d += print_expr(ix);
    d += "]";
  }
  return d;
}

inline bool contains_iterator(const ExprPtr& e, const std::string& name) {
  bool found = false;
  std::function<void(const ExprPtr&)> walk = [&](const ExprPtr& n) {
    if (!n || found) return;
    if (n->kind == ExprKind::IterRef && n->name == name) found = true;
    for (const auto& a : n->args) walk(a);
  };
  walk(e);
  return found;
}

/// Rewrites buffer reads/writes of `buffer` through an index and name map.
struct AccessRewrite {
  std::string buffer;
  std::function<ExprPtr(const Expr&)> on_read;   // null result = keep
  std::function<StmtPtr(const Stmt&)> on_write;  // null result = keep
};

inline std::vector<StmtPtr> rewrite_accesses(const std::vector<StmtPtr>& body,
                                             const AccessRewrite& rw) {
  auto expr_fn = [&](const ExprPtr& e) -> ExprPtr {
    if (rw.on_read && e->kind == ExprKind::Read && e->name == rw.buffer)
      return rw.on_read(*e);
    return nullptr;
  };
  auto stmt_fn = [&](const StmtPtr& s) -> StmtPtr {
    if (rw.on_write && s->kind == StmtKind::Assign && s->target == rw.buffer)
      return rw.on_write(*s);
    return nullptr;
  };
  return rewrite_stmts(body, expr_fn, stmt_fn);
}

/// Validation gate every transform runs before returning.
inline TransformOutcome finish(Kernel kernel, std::vector<std::string> notes,
                               EquivalenceMap io_map = {},
                               bool needs_tolerance = false) {
  auto diags = validate(kernel);
  if (!diags.empty()) {
    std::string msg = "internal: transformed kernel fails validation:";
    for (const auto& d : diags) msg += " [" + d.message + "]";
    return TransformOutcome::failure(msg);
  }
  TransformResult r;
  r.kernel = std::move(kernel);
  r.notes = std::move(notes);
  r.io_map = std::move(io_map);
  r.needs_tolerance = needs_tolerance;
  return r;
}

}  // namespace transform_detail

}  // namespace hlsopt
