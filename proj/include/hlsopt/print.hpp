#pragma once

// Pretty-printer emitting the canonical textual form of a kernel. The output
// round-trips through parse() and is deterministic: declarations, functions
// and processing elements keep their declaration order.

#include <sstream>
#include <string>

#include "hlsopt/ir.hpp"

namespace hlsopt {

namespace detail {

// Precedence levels: 0 ternary, 1 comparison, 2 additive, 3 multiplicative,
// 4 primary.
inline int precedence(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Select: return 0;
    case ExprKind::Bin:
      switch (e.op) {
        case BinOp::Lt:
        case BinOp::Le:
        case BinOp::Eq: return 1;
        case BinOp::Add:
        case BinOp::Sub: return 2;
        case BinOp::Mul:
        case BinOp::Div:
        case BinOp::Mod: return 3;
        case BinOp::Min:
        case BinOp::Max: return 4;  // printed as calls
      }
      return 4;
    default: return 4;
  }
}

class Printer {
 public:
  std::string print_expr(const Expr& e) {
    std::ostringstream os;
    expr(os, e, 0);
    return os.str();
  }

  void expr(std::ostream& os, const Expr& e, int min_prec) {
    int prec = precedence(e);
    bool parens = prec < min_prec;
    if (parens) os << "(";
    switch (e.kind) {
      case ExprKind::IntLit: os << e.int_value; break;
      case ExprKind::IterRef:
      case ExprKind::ParamRef: os << e.name; break;
      case ExprKind::Read:
        os << e.name;
        for (const auto& i : e.args) {
          os << "[";
          expr(os, *i, 0);
          os << "]";
        }
        break;
      case ExprKind::Pop: os << e.name << ".pop()"; break;
      case ExprKind::Bin:
        if (e.op == BinOp::Min || e.op == BinOp::Max) {
          os << (e.op == BinOp::Min ? "min(" : "max(");
          expr(os, *e.args[0], 0);
          os << ", ";
          expr(os, *e.args[1], 0);
          os << ")";
        } else {
          // Left-associative: the right operand needs parens at equal
          // precedence for -, /, %; comparisons are non-associative.
          expr(os, *e.args[0], prec);
          os << " " << to_string(e.op) << " ";
          expr(os, *e.args[1], prec + 1);
        }
        break;
      case ExprKind::Select:
        expr(os, *e.args[0], 1);
        os << " ? ";
        expr(os, *e.args[1], 0);
        os << " : ";
        expr(os, *e.args[2], 0);
        break;
      case ExprKind::Cast:
        os << "cast<" << to_string(e.cast_type) << ">(";
        expr(os, *e.args[0], 0);
        os << ")";
        break;
    }
    if (parens) os << ")";
  }

  void stmt(std::ostream& os, const Stmt& s, int depth) {
    switch (s.kind) {
      case StmtKind::Assign:
        indent(os, depth) << s.target;
        for (const auto& i : s.indices) {
          os << "[";
          expr(os, *i, 0);
          os << "]";
        }
        os << " = ";
        expr(os, *s.value, 0);
        os << ";\n";
        break;
      case StmtKind::Push:
        indent(os, depth) << s.target << ".push(";
        expr(os, *s.value, 0);
        os << ");\n";
        break;
      case StmtKind::Call:
        indent(os, depth) << "call " << s.target << ";\n";
        break;
      case StmtKind::Guard:
        indent(os, depth) << "if ";
        expr(os, *s.value, 0);
        os << " {\n";
        body(os, s.body, depth + 1);
        indent(os, depth) << "}\n";
        break;
      case StmtKind::Loop: {
        const LoopNode& l = s.loop;
        switch (l.pragma.kind) {
          case Pragma::Kind::Pipeline:
            indent(os, depth) << "#pipeline";
            if (l.pragma.target_ii) os << " ii " << *l.pragma.target_ii;
            os << "\n";
            break;
          case Pragma::Kind::Unroll:
            indent(os, depth) << "#unroll";
            if (l.pragma.factor) os << " " << *l.pragma.factor;
            os << "\n";
            break;
          case Pragma::Kind::Dataflow:
            indent(os, depth) << "#dataflow\n";
            break;
          case Pragma::Kind::None: break;
        }
        indent(os, depth) << "for " << l.iterator << " in ";
        expr(os, *l.lower, 1);
        os << "..";
        expr(os, *l.upper, 1);
        os << " {\n";
        body(os, l.body, depth + 1);
        indent(os, depth) << "}\n";
        break;
      }
    }
  }

  void body(std::ostream& os, const std::vector<StmtPtr>& stmts, int depth) {
    for (const auto& s : stmts) stmt(os, *s, depth);
  }

  std::ostream& indent(std::ostream& os, int depth) {
    for (int i = 0; i < depth; ++i) os << "  ";
    return os;
  }
};

}  // namespace detail

inline std::string print_expr(const ExprPtr& e) {
  detail::Printer p;
  return p.print_expr(*e);
}

/// Canonical text for a kernel; parse(print(k)) is structurally equal to k
/// for any valid kernel.
inline std::string print(const Kernel& k) {
  detail::Printer p;
  std::ostringstream os;
  os << "kernel " << k.name << "(";
  for (size_t i = 0; i < k.parameters.size(); ++i) {
    if (i) os << ", ";
    os << k.parameters[i];
  }
  os << ") {\n";
  for (const auto& b : k.buffers) {
    const char* space = "mem";
    switch (b.space.kind) {
      case MemorySpace::Kind::OffChip: space = "mem"; break;
      case MemorySpace::Kind::OnChipRam: space = "ram"; break;
      case MemorySpace::Kind::Registers: space = "reg"; break;
      case MemorySpace::Kind::Fifo: space = "fifo"; break;
    }
    os << "  " << space << " " << b.name;
    for (const auto& extent : b.shape) {
      os << "[";
      p.expr(os, *extent, 0);
      os << "]";
    }
    os << ": " << to_string(b.elem);
    if (b.space.kind == MemorySpace::Kind::OffChip) {
      for (int bank : b.space.banks) os << " @" << bank;
    }
    if (b.space.kind == MemorySpace::Kind::Fifo)
      os << " depth " << b.space.depth;
    os << ";\n";
  }
  for (const auto& f : k.functions) {
    os << "  func " << f.name << " {\n";
    p.body(os, f.body, 2);
    os << "  }\n";
  }
  p.body(os, k.top, 1);
  for (const auto& pe : k.pes) {
    os << "  pe " << pe.name << " {\n";
    p.body(os, pe.body, 2);
    os << "  }\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace hlsopt
