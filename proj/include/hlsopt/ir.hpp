#pragma once

// Core intermediate representation for loop-nest kernels: data types, memory
// spaces, buffers, expressions, statements, loops and whole kernels, plus the
// structural utilities (equality, rewriting, validation, parameter binding)
// shared by every other component.
//
// Values are immutable after construction: expressions and statements are
// held through shared_ptr<const>, kernels are plain value types. All
// operations build new trees instead of mutating.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hlsopt/support.hpp"

namespace hlsopt {

// ---------------------------------------------------------------------------
// Source locations

struct SourceSpan {
  int line = 0;  // 1-based; 0 means synthesized by a transformation
  int column = 0;
  int length = 0;

  bool valid() const { return line > 0; }
  std::string str() const {
    if (!valid()) return "<generated>";
    return std::to_string(line) + ":" + std::to_string(column);
  }
};

// ---------------------------------------------------------------------------
// Data types

enum class TypeKind { SignedInt, UnsignedInt, Float, FixedPoint };

struct DataType {
  TypeKind kind = TypeKind::SignedInt;
  int width_bits = 32;
  int fraction_bits = 0;  // fixed-point only
  int lanes = 1;          // vector width; 1 = scalar

  bool is_float() const { return kind == TypeKind::Float; }
  bool is_fixed() const { return kind == TypeKind::FixedPoint; }
  bool is_int() const {
    return kind == TypeKind::SignedInt || kind == TypeKind::UnsignedInt;
  }
  bool is_scalar() const { return lanes == 1; }
  int total_bits() const { return width_bits * lanes; }
  /// Operand size in bytes (all lanes).
  double bytes() const { return total_bits() / 8.0; }
  /// One lane's size in bytes.
  double lane_bytes() const { return width_bits / 8.0; }

  DataType with_lanes(int n) const {
    DataType t = *this;
    t.lanes = n;
    return t;
  }
  DataType scalar() const { return with_lanes(1); }

  static DataType ints(int w) { return {TypeKind::SignedInt, w, 0, 1}; }
  static DataType uints(int w) { return {TypeKind::UnsignedInt, w, 0, 1}; }
  static DataType i32() { return ints(32); }
  static DataType i64() { return ints(64); }
  static DataType u32() { return uints(32); }
  static DataType f32() { return {TypeKind::Float, 32, 0, 1}; }
  static DataType f64() { return {TypeKind::Float, 64, 0, 1}; }
  static DataType fixed(int w, int f) { return {TypeKind::FixedPoint, w, f, 1}; }

  friend bool operator==(const DataType&, const DataType&) = default;
};

inline std::string to_string(const DataType& t) {
  std::string base;
  switch (t.kind) {
    case TypeKind::SignedInt: base = "i" + std::to_string(t.width_bits); break;
    case TypeKind::UnsignedInt: base = "u" + std::to_string(t.width_bits); break;
    case TypeKind::Float: base = "f" + std::to_string(t.width_bits); break;
    case TypeKind::FixedPoint:
      base = "fixed<" + std::to_string(t.width_bits) + "," +
             std::to_string(t.fraction_bits) + ">";
      break;
  }
  if (t.lanes > 1) return "vec<" + base + "," + std::to_string(t.lanes) + ">";
  return base;
}

// ---------------------------------------------------------------------------
// Memory spaces

struct MemorySpace {
  enum class Kind { OffChip, OnChipRam, Registers, Fifo };

  Kind kind = Kind::OffChip;
  std::vector<int> banks = {0};  // OffChip; more than one entry once striped
  int read_ports = 1;            // OnChipRam
  int write_ports = 1;           // OnChipRam
  int depth = 16;                // Fifo

  static MemorySpace off_chip(int bank = 0) {
    MemorySpace s;
    s.kind = Kind::OffChip;
    s.banks = {bank};
    return s;
  }
  static MemorySpace ram(int rports = 1, int wports = 1) {
    MemorySpace s;
    s.kind = Kind::OnChipRam;
    s.read_ports = rports;
    s.write_ports = wports;
    return s;
  }
  static MemorySpace registers() {
    MemorySpace s;
    s.kind = Kind::Registers;
    return s;
  }
  static MemorySpace fifo(int depth = 16) {
    MemorySpace s;
    s.kind = Kind::Fifo;
    s.depth = depth;
    return s;
  }

  friend bool operator==(const MemorySpace&, const MemorySpace&) = default;
};

// ---------------------------------------------------------------------------
// Expressions

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprKind {
  IntLit,    // integer literal
  IterRef,   // loop iterator
  ParamRef,  // kernel parameter
  Read,      // buffer element read, affine or data-dependent indices
  Pop,       // blocking FIFO pop
  Bin,       // binary arithmetic / comparison
  Select,    // cond ? a : b
  Cast,      // type conversion
};

enum class BinOp { Add, Sub, Mul, Div, Mod, Min, Max, Lt, Le, Eq };

struct Expr {
  ExprKind kind = ExprKind::IntLit;
  long long int_value = 0;      // IntLit
  std::string name;             // IterRef/ParamRef ident, Read buffer, Pop channel
  BinOp op = BinOp::Add;        // Bin
  DataType cast_type;           // Cast
  std::vector<ExprPtr> args;    // Read indices; Bin {a,b}; Select {c,t,f}; Cast {x}
  SourceSpan span;

  static ExprPtr lit(long long v) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::IntLit;
    e->int_value = v;
    return e;
  }
  static ExprPtr iter(std::string name) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::IterRef;
    e->name = std::move(name);
    return e;
  }
  static ExprPtr param(std::string name) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::ParamRef;
    e->name = std::move(name);
    return e;
  }
  static ExprPtr read(std::string buffer, std::vector<ExprPtr> indices) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Read;
    e->name = std::move(buffer);
    e->args = std::move(indices);
    return e;
  }
  static ExprPtr pop(std::string channel) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Pop;
    e->name = std::move(channel);
    return e;
  }
  static ExprPtr bin(BinOp op, ExprPtr a, ExprPtr b) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Bin;
    e->op = op;
    e->args = {std::move(a), std::move(b)};
    return e;
  }
  static ExprPtr sel(ExprPtr c, ExprPtr t, ExprPtr f) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Select;
    e->args = {std::move(c), std::move(t), std::move(f)};
    return e;
  }
  static ExprPtr cast(DataType type, ExprPtr x) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Cast;
    e->cast_type = type;
    e->args = {std::move(x)};
    return e;
  }

  // Shorthand builders for the common arithmetic cases.
  static ExprPtr add(ExprPtr a, ExprPtr b) { return bin(BinOp::Add, a, b); }
  static ExprPtr sub(ExprPtr a, ExprPtr b) { return bin(BinOp::Sub, a, b); }
  static ExprPtr mul(ExprPtr a, ExprPtr b) { return bin(BinOp::Mul, a, b); }
  static ExprPtr div(ExprPtr a, ExprPtr b) { return bin(BinOp::Div, a, b); }
  static ExprPtr mod(ExprPtr a, ExprPtr b) { return bin(BinOp::Mod, a, b); }
  static ExprPtr lt(ExprPtr a, ExprPtr b) { return bin(BinOp::Lt, a, b); }
  static ExprPtr le(ExprPtr a, ExprPtr b) { return bin(BinOp::Le, a, b); }
  static ExprPtr eq(ExprPtr a, ExprPtr b) { return bin(BinOp::Eq, a, b); }
};

inline const char* to_string(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Mod: return "%";
    case BinOp::Min: return "min";
    case BinOp::Max: return "max";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Eq: return "==";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Statements and loops

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;

struct Pragma {
  enum class Kind { None, Pipeline, Unroll, Dataflow };
  Kind kind = Kind::None;
  std::optional<int> target_ii;  // pipeline
  std::optional<int> factor;     // unroll; nullopt means full

  bool is_pipeline() const { return kind == Kind::Pipeline; }
  bool is_unroll() const { return kind == Kind::Unroll; }
  static Pragma none() { return {}; }
  static Pragma pipeline(std::optional<int> ii = std::nullopt) {
    Pragma p;
    p.kind = Kind::Pipeline;
    p.target_ii = ii;
    return p;
  }
  static Pragma unroll(std::optional<int> factor = std::nullopt) {
    Pragma p;
    p.kind = Kind::Unroll;
    p.factor = factor;
    return p;
  }
  friend bool operator==(const Pragma&, const Pragma&) = default;
};

struct LoopNode {
  std::string iterator;
  ExprPtr lower;
  ExprPtr upper;  // exclusive; trip count = upper - lower
  Pragma pragma;
  std::vector<StmtPtr> body;
};

enum class StmtKind { Assign, Push, Loop, Call, Guard };

struct Stmt {
  StmtKind kind = StmtKind::Assign;
  std::string target;            // Assign lvalue buffer / Push channel / Call name
  std::vector<ExprPtr> indices;  // Assign lvalue indices
  ExprPtr value;                 // Assign rhs / Push value / Guard condition
  LoopNode loop;                 // Loop
  std::vector<StmtPtr> body;     // Guard body
  SourceSpan span;

  static StmtPtr assign(std::string buffer, std::vector<ExprPtr> indices,
                        ExprPtr rhs) {
    auto s = std::make_shared<Stmt>();
    s->kind = StmtKind::Assign;
    s->target = std::move(buffer);
    s->indices = std::move(indices);
    s->value = std::move(rhs);
    return s;
  }
  static StmtPtr push(std::string channel, ExprPtr value) {
    auto s = std::make_shared<Stmt>();
    s->kind = StmtKind::Push;
    s->target = std::move(channel);
    s->value = std::move(value);
    return s;
  }
  static StmtPtr make_loop(LoopNode node) {
    auto s = std::make_shared<Stmt>();
    s->kind = StmtKind::Loop;
    s->loop = std::move(node);
    return s;
  }
  static StmtPtr make_loop(std::string iterator, ExprPtr lower, ExprPtr upper,
                           Pragma pragma, std::vector<StmtPtr> body) {
    LoopNode n;
    n.iterator = std::move(iterator);
    n.lower = std::move(lower);
    n.upper = std::move(upper);
    n.pragma = pragma;
    n.body = std::move(body);
    return make_loop(std::move(n));
  }
  static StmtPtr call(std::string name) {
    auto s = std::make_shared<Stmt>();
    s->kind = StmtKind::Call;
    s->target = std::move(name);
    return s;
  }
  static StmtPtr guard(ExprPtr cond, std::vector<StmtPtr> body) {
    auto s = std::make_shared<Stmt>();
    s->kind = StmtKind::Guard;
    s->value = std::move(cond);
    s->body = std::move(body);
    return s;
  }
};

// ---------------------------------------------------------------------------
// Buffers, functions, kernels

struct Buffer {
  std::string name;
  DataType elem;
  std::vector<ExprPtr> shape;  // extents; literals or parameter expressions
  MemorySpace space;
  SourceSpan span;

  bool is_scalar() const { return shape.empty(); }
};

struct Function {
  std::string name;
  std::vector<StmtPtr> body;
};

struct ProcessingElement {
  std::string name;
  std::vector<StmtPtr> body;
};

/// A parsed program: parameter symbols, buffer declarations and either a
/// statement tree (`top`) or a graph of processing elements connected by
/// FIFO channels (after streaming-dataflow extraction).
struct Kernel {
  std::string name;
  std::vector<std::string> parameters;
  std::vector<Buffer> buffers;
  std::vector<Function> functions;
  std::vector<StmtPtr> top;
  std::vector<ProcessingElement> pes;

  bool has_pe_graph() const { return !pes.empty(); }

  const Buffer* find_buffer(std::string_view name) const {
    for (const auto& b : buffers)
      if (b.name == name) return &b;
    return nullptr;
  }
  Buffer* find_buffer(std::string_view name) {
    for (auto& b : buffers)
      if (b.name == name) return &b;
    return nullptr;
  }
  const Function* find_function(std::string_view name) const {
    for (const auto& f : functions)
      if (f.name == name) return &f;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Structural equality (source spans ignored)

bool struct_equal(const ExprPtr& a, const ExprPtr& b);
bool struct_equal(const StmtPtr& a, const StmtPtr& b);

inline bool struct_equal(const std::vector<ExprPtr>& a,
                         const std::vector<ExprPtr>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!struct_equal(a[i], b[i])) return false;
  return true;
}

inline bool struct_equal(const std::vector<StmtPtr>& a,
                         const std::vector<StmtPtr>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!struct_equal(a[i], b[i])) return false;
  return true;
}

inline bool struct_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case ExprKind::IntLit: return a->int_value == b->int_value;
    case ExprKind::IterRef:
    case ExprKind::ParamRef:
    case ExprKind::Pop: return a->name == b->name;
    case ExprKind::Read:
      return a->name == b->name && struct_equal(a->args, b->args);
    case ExprKind::Bin:
      return a->op == b->op && struct_equal(a->args, b->args);
    case ExprKind::Select: return struct_equal(a->args, b->args);
    case ExprKind::Cast:
      return a->cast_type == b->cast_type && struct_equal(a->args, b->args);
  }
  return false;
}

inline bool struct_equal(const LoopNode& a, const LoopNode& b) {
  return a.iterator == b.iterator && struct_equal(a.lower, b.lower) &&
         struct_equal(a.upper, b.upper) && a.pragma == b.pragma &&
         struct_equal(a.body, b.body);
}

inline bool struct_equal(const StmtPtr& a, const StmtPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case StmtKind::Assign:
      return a->target == b->target && struct_equal(a->indices, b->indices) &&
             struct_equal(a->value, b->value);
    case StmtKind::Push:
      return a->target == b->target && struct_equal(a->value, b->value);
    case StmtKind::Loop: return struct_equal(a->loop, b->loop);
    case StmtKind::Call: return a->target == b->target;
    case StmtKind::Guard:
      return struct_equal(a->value, b->value) && struct_equal(a->body, b->body);
  }
  return false;
}

inline bool struct_equal(const Buffer& a, const Buffer& b) {
  return a.name == b.name && a.elem == b.elem && a.space == b.space &&
         struct_equal(a.shape, b.shape);
}

inline bool struct_equal(const Kernel& a, const Kernel& b) {
  if (a.name != b.name || a.parameters != b.parameters) return false;
  if (a.buffers.size() != b.buffers.size()) return false;
  for (size_t i = 0; i < a.buffers.size(); ++i)
    if (!struct_equal(a.buffers[i], b.buffers[i])) return false;
  if (a.functions.size() != b.functions.size()) return false;
  for (size_t i = 0; i < a.functions.size(); ++i) {
    if (a.functions[i].name != b.functions[i].name) return false;
    if (!struct_equal(a.functions[i].body, b.functions[i].body)) return false;
  }
  if (!struct_equal(a.top, b.top)) return false;
  if (a.pes.size() != b.pes.size()) return false;
  for (size_t i = 0; i < a.pes.size(); ++i) {
    if (a.pes[i].name != b.pes[i].name) return false;
    if (!struct_equal(a.pes[i].body, b.pes[i].body)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Traversal and rewriting

/// Visits every statement in a body, recursing into loops and guards.
inline void visit_stmts(const std::vector<StmtPtr>& body,
                        const std::function<void(const StmtPtr&)>& fn) {
  for (const auto& s : body) {
    fn(s);
    if (s->kind == StmtKind::Loop) visit_stmts(s->loop.body, fn);
    if (s->kind == StmtKind::Guard) visit_stmts(s->body, fn);
  }
}

/// Visits every statement in a kernel (top, PE bodies and functions).
inline void visit_stmts(const Kernel& k,
                        const std::function<void(const StmtPtr&)>& fn) {
  visit_stmts(k.top, fn);
  for (const auto& pe : k.pes) visit_stmts(pe.body, fn);
  for (const auto& f : k.functions) visit_stmts(f.body, fn);
}

/// Visits every expression of a statement (not recursing into nested stmts).
inline void visit_exprs_shallow(const StmtPtr& s,
                                const std::function<void(const ExprPtr&)>& fn) {
  std::function<void(const ExprPtr&)> walk = [&](const ExprPtr& e) {
    if (!e) return;
    fn(e);
    for (const auto& a : e->args) walk(a);
  };
  switch (s->kind) {
    case StmtKind::Assign:
      for (const auto& i : s->indices) walk(i);
      walk(s->value);
      break;
    case StmtKind::Push:
    case StmtKind::Guard: walk(s->value); break;
    case StmtKind::Loop:
      walk(s->loop.lower);
      walk(s->loop.upper);
      break;
    case StmtKind::Call: break;
  }
}

/// Bottom-up expression rewrite. `fn` receives a node whose children are
/// already rewritten and may return a replacement (or null to keep it).
inline ExprPtr rewrite_expr(
    const ExprPtr& e, const std::function<ExprPtr(const ExprPtr&)>& fn) {
  if (!e) return e;
  std::vector<ExprPtr> args;
  args.reserve(e->args.size());
  bool changed = false;
  for (const auto& a : e->args) {
    ExprPtr r = rewrite_expr(a, fn);
    changed |= (r != a);
    args.push_back(std::move(r));
  }
  ExprPtr cur = e;
  if (changed) {
    auto copy = std::make_shared<Expr>(*e);
    copy->args = std::move(args);
    cur = copy;
  }
  if (ExprPtr replaced = fn(cur)) return replaced;
  return cur;
}

/// Statement-tree rewrite, applied innermost-first to expressions and
/// outermost statements rebuilt as needed.
inline std::vector<StmtPtr> rewrite_stmts(
    const std::vector<StmtPtr>& body,
    const std::function<ExprPtr(const ExprPtr&)>& expr_fn,
    const std::function<StmtPtr(const StmtPtr&)>& stmt_fn = nullptr) {
  std::vector<StmtPtr> out;
  out.reserve(body.size());
  for (const auto& s : body) {
    auto copy = std::make_shared<Stmt>(*s);
    if (expr_fn) {
      for (auto& i : copy->indices) i = rewrite_expr(i, expr_fn);
      if (copy->value) copy->value = rewrite_expr(copy->value, expr_fn);
      if (copy->kind == StmtKind::Loop) {
        copy->loop.lower = rewrite_expr(copy->loop.lower, expr_fn);
        copy->loop.upper = rewrite_expr(copy->loop.upper, expr_fn);
      }
    }
    if (copy->kind == StmtKind::Loop)
      copy->loop.body = rewrite_stmts(copy->loop.body, expr_fn, stmt_fn);
    if (copy->kind == StmtKind::Guard)
      copy->body = rewrite_stmts(copy->body, expr_fn, stmt_fn);
    StmtPtr result = copy;
    if (stmt_fn) {
      if (StmtPtr replaced = stmt_fn(result)) result = replaced;
    }
    out.push_back(std::move(result));
  }
  return out;
}

/// Substitutes iterator/parameter references by name.
inline ExprPtr substitute_refs(const ExprPtr& e,
                               const std::map<std::string, ExprPtr>& map) {
  return rewrite_expr(e, [&](const ExprPtr& n) -> ExprPtr {
    if (n->kind == ExprKind::IterRef || n->kind == ExprKind::ParamRef) {
      auto it = map.find(n->name);
      if (it != map.end()) return it->second;
    }
    return nullptr;
  });
}

inline std::vector<StmtPtr> substitute_refs(
    const std::vector<StmtPtr>& body,
    const std::map<std::string, ExprPtr>& map) {
  return rewrite_stmts(body, [&](const ExprPtr& n) -> ExprPtr {
    if (n->kind == ExprKind::IterRef || n->kind == ExprKind::ParamRef) {
      auto it = map.find(n->name);
      if (it != map.end()) return it->second;
    }
    return nullptr;
  });
}

// ---------------------------------------------------------------------------
// Constant folding / evaluation of parameter-level expressions

/// Evaluates an expression containing only literals (and, with `bindings`,
/// parameter references). Returns nullopt for anything else.
inline std::optional<long long> eval_const(
    const ExprPtr& e,
    const std::map<std::string, long long>* bindings = nullptr) {
  if (!e) return std::nullopt;
  switch (e->kind) {
    case ExprKind::IntLit: return e->int_value;
    case ExprKind::ParamRef:
      if (bindings) {
        auto it = bindings->find(e->name);
        if (it != bindings->end()) return it->second;
      }
      return std::nullopt;
    case ExprKind::Bin: {
      auto a = eval_const(e->args[0], bindings);
      auto b = eval_const(e->args[1], bindings);
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
      auto c = eval_const(e->args[0], bindings);
      if (!c) return std::nullopt;
      return eval_const(e->args[*c ? 1 : 2], bindings);
    }
    default: return std::nullopt;
  }
}

/// Simplifies literal arithmetic (used to keep generated code readable).
inline ExprPtr fold_expr(const ExprPtr& e) {
  return rewrite_expr(e, [](const ExprPtr& n) -> ExprPtr {
    if (n->kind == ExprKind::Bin) {
      const ExprPtr& a = n->args[0];
      const ExprPtr& b = n->args[1];
      if (a->kind == ExprKind::IntLit && b->kind == ExprKind::IntLit) {
        if (auto v = eval_const(n)) return Expr::lit(*v);
      }
      bool a0 = a->kind == ExprKind::IntLit && a->int_value == 0;
      bool b0 = b->kind == ExprKind::IntLit && b->int_value == 0;
      bool a1 = a->kind == ExprKind::IntLit && a->int_value == 1;
      bool b1 = b->kind == ExprKind::IntLit && b->int_value == 1;
      switch (n->op) {
        case BinOp::Add:
          if (a0) return b;
          if (b0) return a;
          break;
        case BinOp::Sub:
          if (b0) return a;
          break;
        case BinOp::Mul:
          if (a1) return b;
          if (b1) return a;
          if (a0 || b0) return Expr::lit(0);
          break;
        case BinOp::Div:
          if (b1) return a;
          break;
        case BinOp::Mod:
          if (b1) return Expr::lit(0);
          break;
        default: break;
      }
    }
    return nullptr;
  });
}

/// Affine decomposition of an index expression over a set of iterators:
/// index = constant + sum(coeff[i] * iter_i). Fails on anything else.
struct AffineForm {
  std::map<std::string, long long> coeffs;
  long long constant = 0;
};

inline std::optional<AffineForm> affine_form(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::IntLit: {
      AffineForm f;
      f.constant = e->int_value;
      return f;
    }
    case ExprKind::IterRef: {
      AffineForm f;
      f.coeffs[e->name] = 1;
      return f;
    }
    case ExprKind::Bin: {
      auto a = affine_form(e->args[0]);
      auto b = affine_form(e->args[1]);
      if (!a || !b) return std::nullopt;
      AffineForm f;
      switch (e->op) {
        case BinOp::Add:
        case BinOp::Sub: {
          long long sign = e->op == BinOp::Add ? 1 : -1;
          f = *a;
          f.constant += sign * b->constant;
          for (const auto& [name, c] : b->coeffs) f.coeffs[name] += sign * c;
          return f;
        }
        case BinOp::Mul: {
          const AffineForm* lin = nullptr;
          long long scale = 0;
          if (a->coeffs.empty()) {
            lin = &*b;
            scale = a->constant;
          } else if (b->coeffs.empty()) {
            lin = &*a;
            scale = b->constant;
          } else {
            return std::nullopt;
          }
          f.constant = lin->constant * scale;
          for (const auto& [name, c] : lin->coeffs)
            f.coeffs[name] = c * scale;
          return f;
        }
        default: return std::nullopt;
      }
    }
    default: return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Loop lookup

/// Where a loop lives: which root body it was found in, and the chain of
/// enclosing loops (outermost first, target last).
struct LoopLocation {
  int pe_index = -1;  // -1 = kernel top, otherwise index into Kernel::pes
  std::vector<const Stmt*> path;  // enclosing Loop statements, target last

  const Stmt* target() const { return path.empty() ? nullptr : path.back(); }
  std::string id() const {
    std::string s = pe_index < 0 ? "top" : "pe" + std::to_string(pe_index);
    for (const Stmt* l : path) s += "/" + l->loop.iterator;
    return s;
  }
};

/// Finds the loop with the given iterator name. Errors when absent or
/// ambiguous (two loops sharing the iterator name).
inline Result<LoopLocation> find_loop(const Kernel& k,
                                      std::string_view iterator) {
  std::vector<LoopLocation> found;
  std::function<void(const std::vector<StmtPtr>&, LoopLocation&)> walk =
      [&](const std::vector<StmtPtr>& body, LoopLocation& cur) {
        for (const auto& s : body) {
          if (s->kind == StmtKind::Loop) {
            cur.path.push_back(s.get());
            if (s->loop.iterator == iterator) found.push_back(cur);
            walk(s->loop.body, cur);
            cur.path.pop_back();
          } else if (s->kind == StmtKind::Guard) {
            walk(s->body, cur);
          }
        }
      };
  LoopLocation cur;
  cur.pe_index = -1;
  walk(k.top, cur);
  for (size_t i = 0; i < k.pes.size(); ++i) {
    cur = LoopLocation{};
    cur.pe_index = static_cast<int>(i);
    walk(k.pes[i].body, cur);
  }
  if (found.empty())
    return Result<LoopLocation>::failure("no loop with iterator '" +
                                         std::string(iterator) + "'");
  if (found.size() > 1)
    return Result<LoopLocation>::failure("ambiguous loop iterator '" +
                                         std::string(iterator) + "'");
  return found.front();
}

// ---------------------------------------------------------------------------
// Affine / index classification

/// Classification of a buffer index expression with respect to the enclosing
/// loop iterators: quasi-affine (affine plus division/modulo by positive
/// literals), data-dependent (contains a buffer read or FIFO pop), or other
/// (rejected by validation).
enum class IndexClass { QuasiAffine, DataDependent, Invalid };

inline IndexClass classify_index(const ExprPtr& e) {
  // Data-dependence wins: any read/pop anywhere makes the index dynamic.
  bool data = false;
  std::function<void(const ExprPtr&)> scan = [&](const ExprPtr& n) {
    if (!n) return;
    if (n->kind == ExprKind::Read || n->kind == ExprKind::Pop) data = true;
    for (const auto& a : n->args) scan(a);
  };
  scan(e);
  if (data) return IndexClass::DataDependent;

  // Otherwise require quasi-affine structure: +,- freely; * only when one
  // side is iterator-free; /,% only by iterator-free divisors; select with
  // quasi-affine branches and an iterator/parameter-level condition.
  std::function<bool(const ExprPtr&)> no_iter = [&](const ExprPtr& n) -> bool {
    if (!n) return true;
    if (n->kind == ExprKind::IterRef) return false;
    for (const auto& a : n->args)
      if (!no_iter(a)) return false;
    return true;
  };
  std::function<bool(const ExprPtr&)> quasi = [&](const ExprPtr& n) -> bool {
    if (!n) return true;
    switch (n->kind) {
      case ExprKind::IntLit:
      case ExprKind::IterRef:
      case ExprKind::ParamRef: return true;
      case ExprKind::Bin:
        switch (n->op) {
          case BinOp::Add:
          case BinOp::Sub:
          case BinOp::Min:
          case BinOp::Max: return quasi(n->args[0]) && quasi(n->args[1]);
          case BinOp::Mul:
            return (no_iter(n->args[0]) || no_iter(n->args[1])) &&
                   quasi(n->args[0]) && quasi(n->args[1]);
          case BinOp::Div:
          case BinOp::Mod: return quasi(n->args[0]) && no_iter(n->args[1]);
          case BinOp::Lt:
          case BinOp::Le:
          case BinOp::Eq: return quasi(n->args[0]) && quasi(n->args[1]);
        }
        return false;
      case ExprKind::Select:
        return quasi(n->args[0]) && quasi(n->args[1]) && quasi(n->args[2]);
      case ExprKind::Cast: return quasi(n->args[0]);
      default: return false;
    }
  };
  return quasi(e) ? IndexClass::QuasiAffine : IndexClass::Invalid;
}

// ---------------------------------------------------------------------------
// Validation

struct Diagnostic {
  std::string message;
  SourceSpan span;
};

std::vector<Diagnostic> validate(const Kernel& k);

namespace detail {

struct ValidateCtx {
  const Kernel& kernel;
  std::vector<Diagnostic>& diags;
  std::vector<std::string> iterators;

  void emit(std::string msg, SourceSpan span = {}) {
    diags.push_back({std::move(msg), span});
  }

  bool known_symbol(const std::string& name) const {
    for (const auto& p : kernel.parameters)
      if (p == name) return true;
    for (const auto& i : iterators)
      if (i == name) return true;
    return false;
  }

  void check_expr(const ExprPtr& e) {
    if (!e) return;
    switch (e->kind) {
      case ExprKind::IterRef: {
        bool bound = false;
        for (const auto& i : iterators) bound |= (i == e->name);
        if (!bound)
          emit("iterator '" + e->name + "' not bound by an enclosing loop",
               e->span);
        break;
      }
      case ExprKind::ParamRef:
        if (std::find(kernel.parameters.begin(), kernel.parameters.end(),
                      e->name) == kernel.parameters.end())
          emit("unknown parameter '" + e->name + "'", e->span);
        break;
      case ExprKind::Read: {
        const Buffer* b = kernel.find_buffer(e->name);
        if (!b) {
          emit("read of undeclared buffer '" + e->name + "'", e->span);
        } else {
          if (b->space.kind == MemorySpace::Kind::Fifo)
            emit("buffer '" + e->name + "' is a FIFO; use pop()", e->span);
          if (e->args.size() != b->shape.size())
            emit("buffer '" + e->name + "' expects " +
                     std::to_string(b->shape.size()) + " indices, got " +
                     std::to_string(e->args.size()),
                 e->span);
          for (const auto& idx : e->args) {
            if (classify_index(idx) == IndexClass::Invalid)
              emit("non-affine index into buffer '" + e->name + "'",
                   idx->span.valid() ? idx->span : e->span);
            check_expr(idx);
          }
          return;  // indices already checked
        }
        break;
      }
      case ExprKind::Pop: {
        const Buffer* b = kernel.find_buffer(e->name);
        if (!b)
          emit("pop from undeclared channel '" + e->name + "'", e->span);
        else if (b->space.kind != MemorySpace::Kind::Fifo)
          emit("pop from non-FIFO buffer '" + e->name + "'", e->span);
        break;
      }
      default: break;
    }
    for (const auto& a : e->args) check_expr(a);
  }

  void check_body(const std::vector<StmtPtr>& body) {
    for (const auto& s : body) check_stmt(s);
  }

  void check_stmt(const StmtPtr& s) {
    switch (s->kind) {
      case StmtKind::Assign: {
        const Buffer* b = kernel.find_buffer(s->target);
        if (!b) {
          emit("assignment to undeclared buffer '" + s->target + "'", s->span);
        } else {
          if (b->space.kind == MemorySpace::Kind::Fifo)
            emit("buffer '" + s->target + "' is a FIFO; use push()", s->span);
          if (s->indices.size() != b->shape.size())
            emit("buffer '" + s->target + "' expects " +
                     std::to_string(b->shape.size()) + " indices, got " +
                     std::to_string(s->indices.size()),
                 s->span);
        }
        for (const auto& idx : s->indices) {
          if (classify_index(idx) == IndexClass::Invalid)
            emit("non-affine index into buffer '" + s->target + "'",
                 idx->span.valid() ? idx->span : s->span);
          check_expr(idx);
        }
        check_expr(s->value);
        break;
      }
      case StmtKind::Push: {
        const Buffer* b = kernel.find_buffer(s->target);
        if (!b)
          emit("push to undeclared channel '" + s->target + "'", s->span);
        else if (b->space.kind != MemorySpace::Kind::Fifo)
          emit("push to non-FIFO buffer '" + s->target + "'", s->span);
        check_expr(s->value);
        break;
      }
      case StmtKind::Loop: {
        const LoopNode& l = s->loop;
        check_expr(l.lower);
        check_expr(l.upper);
        if (classify_index(l.lower) != IndexClass::QuasiAffine ||
            classify_index(l.upper) != IndexClass::QuasiAffine)
          emit("loop bounds must be affine in parameters", s->span);
        for (const auto& name : iterators)
          if (name == l.iterator)
            emit("iterator '" + l.iterator + "' shadows an enclosing loop",
                 s->span);
        iterators.push_back(l.iterator);
        check_body(l.body);
        iterators.pop_back();
        break;
      }
      case StmtKind::Call: {
        if (!kernel.find_function(s->target))
          emit("call to undeclared function '" + s->target + "'", s->span);
        break;
      }
      case StmtKind::Guard:
        check_expr(s->value);
        check_body(s->body);
        break;
    }
  }
};

}  // namespace detail

/// Checks every structural invariant; returns one diagnostic per violation.
/// Total: never throws, an empty result means the kernel is well-formed.
inline std::vector<Diagnostic> validate(const Kernel& k) {
  std::vector<Diagnostic> diags;
  detail::ValidateCtx ctx{k, diags, {}};

  // Buffer declarations.
  std::set<std::string> names;
  for (const auto& b : k.buffers) {
    if (!names.insert(b.name).second)
      ctx.emit("duplicate buffer name '" + b.name + "'", b.span);
    const DataType& t = b.elem;
    if (t.kind == TypeKind::FixedPoint) {
      if (t.fraction_bits >= t.width_bits)
        ctx.emit("fixed-point fraction bits must be below width in '" +
                     b.name + "'",
                 b.span);
      if (t.width_bits <= 0 || t.width_bits > 64)
        ctx.emit("unsupported fixed-point width in '" + b.name + "'", b.span);
    } else if (t.width_bits != 8 && t.width_bits != 16 && t.width_bits != 32 &&
               t.width_bits != 64) {
      ctx.emit("unsupported width " + std::to_string(t.width_bits) +
                   " for buffer '" + b.name + "' (must be 8, 16, 32 or 64)",
               b.span);
    }
    if (t.kind == TypeKind::Float && t.width_bits != 32 && t.width_bits != 64)
      ctx.emit("float width must be 32 or 64 in '" + b.name + "'", b.span);
    if (t.lanes < 1)
      ctx.emit("vector lanes must be >= 1 in '" + b.name + "'", b.span);
    if (b.space.kind == MemorySpace::Kind::Fifo && b.space.depth < 1)
      ctx.emit("FIFO depth must be >= 1 in '" + b.name + "'", b.span);
    if (b.space.kind == MemorySpace::Kind::OffChip) {
      if (b.space.banks.empty())
        ctx.emit("off-chip buffer '" + b.name + "' has no bank", b.span);
      for (int bank : b.space.banks)
        if (bank < 0)
          ctx.emit("negative bank index on buffer '" + b.name + "'", b.span);
    }
    for (const auto& extent : b.shape) {
      if (classify_index(extent) != IndexClass::QuasiAffine) {
        ctx.emit("extent of buffer '" + b.name + "' must be affine in "
                 "parameters",
                 b.span);
      } else if (auto v = eval_const(extent); v && *v <= 0) {
        ctx.emit("non-positive extent in buffer '" + b.name + "'", b.span);
      }
      // extents must not reference iterators
      bool uses_iter = false;
      std::function<void(const ExprPtr&)> scan = [&](const ExprPtr& e) {
        if (!e) return;
        if (e->kind == ExprKind::IterRef) uses_iter = true;
        for (const auto& a : e->args) scan(a);
      };
      scan(extent);
      if (uses_iter)
        ctx.emit("extent of buffer '" + b.name + "' references an iterator",
                 b.span);
    }
  }

  // Execution root.
  if (k.has_pe_graph() && !k.top.empty())
    ctx.emit("kernel has both top-level statements and processing elements");

  // Statement checks.
  ctx.check_body(k.top);
  for (const auto& f : k.functions) ctx.check_body(f.body);
  for (const auto& pe : k.pes) ctx.check_body(pe.body);

  // Call graph recursion.
  {
    std::map<std::string, std::vector<std::string>> calls;
    for (const auto& f : k.functions) {
      auto& out = calls[f.name];
      visit_stmts(f.body, [&](const StmtPtr& s) {
        if (s->kind == StmtKind::Call) out.push_back(s->target);
      });
    }
    std::set<std::string> done;
    std::function<bool(const std::string&, std::set<std::string>&)> cyclic =
        [&](const std::string& f, std::set<std::string>& stack) -> bool {
      if (stack.count(f)) return true;
      if (done.count(f)) return false;
      stack.insert(f);
      for (const auto& callee : calls[f])
        if (cyclic(callee, stack)) return true;
      stack.erase(f);
      done.insert(f);
      return false;
    };
    for (const auto& f : k.functions) {
      std::set<std::string> stack;
      if (cyclic(f.name, stack)) {
        ctx.emit("recursion in function '" + f.name + "'");
        break;
      }
    }
  }

  // FIFO channel endpoints: in a PE graph every channel must have exactly one
  // writer PE and one reader PE.
  if (k.has_pe_graph()) {
    std::map<std::string, std::set<std::string>> writers, readers;
    for (const auto& pe : k.pes) {
      visit_stmts(pe.body, [&](const StmtPtr& s) {
        if (s->kind == StmtKind::Push) writers[s->target].insert(pe.name);
        visit_exprs_shallow(s, [&](const ExprPtr& e) {
          if (e->kind == ExprKind::Pop) readers[e->name].insert(pe.name);
        });
      });
    }
    for (const auto& b : k.buffers) {
      if (b.space.kind != MemorySpace::Kind::Fifo) continue;
      size_t w = writers[b.name].size();
      size_t r = readers[b.name].size();
      if (w == 0 && r == 0) continue;  // unused channel is only a warning-free no-op
      if (w > 1)
        ctx.emit("channel '" + b.name + "' has multiple writers", b.span);
      if (r > 1)
        ctx.emit("channel '" + b.name + "' has multiple readers", b.span);
      if (w == 0)
        ctx.emit("channel '" + b.name + "' is read but never written", b.span);
      if (r == 0)
        ctx.emit("channel '" + b.name + "' is written but never read", b.span);
    }
  }

  return diags;
}

// ---------------------------------------------------------------------------
// Parameter binding

/// Replaces all parameter references by literals and re-checks positivity of
/// extents and trip counts. All free parameters must be covered.
inline Result<Kernel> substitute_params(
    const Kernel& k, const std::map<std::string, long long>& bindings) {
  for (const auto& p : k.parameters)
    if (!bindings.count(p))
      return Result<Kernel>::failure("missing binding " + p);

  std::map<std::string, ExprPtr> map;
  for (const auto& [name, value] : bindings) map[name] = Expr::lit(value);

  auto rewrite_fold = [&](const std::vector<StmtPtr>& body) {
    auto substituted = substitute_refs(body, map);
    return rewrite_stmts(substituted, [](const ExprPtr& e) -> ExprPtr {
      ExprPtr f = fold_expr(e);
      return f == e ? nullptr : f;
    });
  };

  Kernel out = k;
  out.parameters.clear();
  for (auto& b : out.buffers)
    for (auto& extent : b.shape)
      extent = fold_expr(substitute_refs(extent, map));
  out.top = rewrite_fold(k.top);
  out.functions.clear();
  for (const auto& f : k.functions)
    out.functions.push_back({f.name, rewrite_fold(f.body)});
  out.pes.clear();
  for (const auto& pe : k.pes)
    out.pes.push_back({pe.name, rewrite_fold(pe.body)});

  // Positivity checks now that everything is literal.
  for (const auto& b : out.buffers)
    for (const auto& extent : b.shape) {
      auto v = eval_const(extent);
      if (v && *v <= 0)
        return Result<Kernel>::failure("non-positive extent in buffer '" +
                                       b.name + "'");
    }
  std::string trip_error;
  visit_stmts(out, [&](const StmtPtr& s) {
    if (s->kind != StmtKind::Loop || !trip_error.empty()) return;
    auto lo = eval_const(s->loop.lower);
    auto hi = eval_const(s->loop.upper);
    if (lo && hi && *hi - *lo <= 0)
      trip_error = "non-positive trip count in loop '" + s->loop.iterator + "'";
  });
  if (!trip_error.empty()) return Result<Kernel>::failure(trip_error);
  return out;
}

/// Trip count of a loop when bounds are literal.
inline std::optional<long long> trip_count(const LoopNode& l) {
  auto lo = eval_const(l.lower);
  auto hi = eval_const(l.upper);
  if (!lo || !hi) return std::nullopt;
  return *hi - *lo;
}

}  // namespace hlsopt
