#pragma once

// Recursive-descent parser for the kernel DSL. Deterministic and total:
// arbitrary byte strings produce either a Kernel or a syntax error with a
// source span; nesting depth is bounded so malformed input cannot blow the
// stack.
//
// Grammar (whitespace-insensitive, '//' line comments):
//   kernel   := "kernel" IDENT "(" [IDENT ("," IDENT)*] ")" "{" decl* item* "}"
//   decl     := space IDENT dims ":" type ("@" INT)* ["depth" INT] ";"
//   space    := "mem" | "ram" | "reg" | "fifo"
//   dims     := ("[" expr "]")*
//   type     := ("i"|"u"|"f") INT | "fixed<"INT","INT">" | "vec<"type","INT">"
//   item     := loop | stmt | "func" IDENT "{" item* "}" | "pe" IDENT "{" item* "}"
//   loop     := pragma? "for" IDENT "in" expr ".." expr "{" item* "}"
//   pragma   := "#pipeline" ["ii" INT] | "#unroll" [INT] | "#dataflow"
//   stmt     := lval "=" expr ";" | IDENT ".push(" expr ");" | "call" IDENT ";"
//             | "if" expr "{" item* "}"
//   lval     := IDENT ("[" expr "]")*
//   expr     := ternary over cmp over +,- over *,/,% over primary;
//               primary also: IDENT".pop()", "min(a,b)", "max(a,b)",
//               "cast<"type">("expr")", "(" expr ")", "-" primary

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "hlsopt/ir.hpp"
#include "hlsopt/support.hpp"

namespace hlsopt {

namespace detail {

struct Token {
  enum class Kind { Ident, Int, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  long long value = 0;
  SourceSpan span;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Result<std::vector<Token>> run() {
    std::vector<Token> out;
    while (true) {
      skip_ws();
      if (pos_ >= src_.size()) break;
      SourceSpan span{line_, col_, 1};
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                src_[pos_] == '_'))
          advance();
        Token t;
        t.kind = Token::Kind::Ident;
        t.text = std::string(src_.substr(start, pos_ - start));
        span.length = static_cast<int>(pos_ - start);
        t.span = span;
        out.push_back(std::move(t));
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c))) {
        size_t start = pos_;
        while (pos_ < src_.size() &&
               std::isdigit(static_cast<unsigned char>(src_[pos_])))
          advance();
        std::string digits(src_.substr(start, pos_ - start));
        if (digits.size() > 18)
          return Result<std::vector<Token>>::failure(
              "integer literal too large at " + span.str());
        Token t;
        t.kind = Token::Kind::Int;
        t.text = digits;
        t.value = std::stoll(digits);
        span.length = static_cast<int>(digits.size());
        t.span = span;
        out.push_back(std::move(t));
        continue;
      }
      // Two-character punctuation first.
      static const char* two[] = {"..", "==", "<="};
      bool matched = false;
      for (const char* p : two) {
        if (src_.substr(pos_).starts_with(p)) {
          out.push_back({Token::Kind::Punct, p, 0, span});
          advance();
          advance();
          matched = true;
          break;
        }
      }
      if (matched) continue;
      static const std::string singles = "(){}[]:;,@.=<>+-*/%?#";
      if (singles.find(c) != std::string::npos) {
        out.push_back({Token::Kind::Punct, std::string(1, c), 0, span});
        advance();
        continue;
      }
      return Result<std::vector<Token>>::failure(
          std::string("unexpected character '") + c + "' at " + span.str());
    }
    out.push_back({Token::Kind::End, "<eof>", 0, {line_, col_, 0}});
    return out;
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  void skip_ws() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

struct ParseError {
  std::string message;
  SourceSpan span;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Result<Kernel> run() {
    try {
      Kernel k = parse_kernel();
      if (!at_end())
        fail("trailing input after kernel");
      return k;
    } catch (const ParseError& e) {
      return Result<Kernel>::failure(e.message + " at " + e.span.str());
    }
  }

 private:
  static constexpr int kMaxDepth = 200;

  // -- token helpers --------------------------------------------------------
  const Token& peek(int ahead = 0) const {
    size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  bool at_end() const { return peek().kind == Token::Kind::End; }
  const Token& next() {
    const Token& t = peek();
    if (t.kind != Token::Kind::End) ++pos_;
    return t;
  }
  bool is_punct(std::string_view p, int ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == Token::Kind::Punct && t.text == p;
  }
  bool is_ident(std::string_view name, int ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == Token::Kind::Ident && t.text == name;
  }
  bool accept_punct(std::string_view p) {
    if (is_punct(p)) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool accept_ident(std::string_view name) {
    if (is_ident(name)) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect_punct(std::string_view p) {
    if (!accept_punct(p))
      fail("expected '" + std::string(p) + "', found '" + peek().text + "'");
  }
  std::string expect_ident(const char* what) {
    if (peek().kind != Token::Kind::Ident)
      fail(std::string("expected ") + what + ", found '" + peek().text + "'");
    return next().text;
  }
  long long expect_int(const char* what) {
    if (peek().kind != Token::Kind::Int)
      fail(std::string("expected ") + what + ", found '" + peek().text + "'");
    return next().value;
  }
  [[noreturn]] void fail(std::string msg) const {
    throw ParseError{std::move(msg), peek().span};
  }

  // -- scope ----------------------------------------------------------------
  bool is_buffer(const std::string& name) const {
    return kernel_.find_buffer(name) != nullptr;
  }
  bool is_param(const std::string& name) const {
    for (const auto& p : kernel_.parameters)
      if (p == name) return true;
    return false;
  }
  bool is_iterator(const std::string& name) const {
    for (const auto& i : iterators_)
      if (i == name) return true;
    return false;
  }

  // -- grammar --------------------------------------------------------------
  Kernel parse_kernel() {
    if (!accept_ident("kernel")) fail("expected 'kernel'");
    kernel_.name = expect_ident("kernel name");
    expect_punct("(");
    if (!is_punct(")")) {
      kernel_.parameters.push_back(expect_ident("parameter name"));
      while (accept_punct(","))
        kernel_.parameters.push_back(expect_ident("parameter name"));
    }
    expect_punct(")");
    expect_punct("{");
    while (is_ident("mem") || is_ident("ram") || is_ident("reg") ||
           is_ident("fifo"))
      parse_decl();
    while (!is_punct("}") && !at_end()) {
      if (accept_ident("func")) {
        Function f;
        f.name = expect_ident("function name");
        if (kernel_.find_function(f.name))
          fail("duplicate function '" + f.name + "'");
        expect_punct("{");
        f.body = parse_items(0);
        expect_punct("}");
        kernel_.functions.push_back(std::move(f));
      } else if (accept_ident("pe")) {
        ProcessingElement pe;
        pe.name = expect_ident("processing element name");
        for (const auto& other : kernel_.pes)
          if (other.name == pe.name)
            fail("duplicate processing element '" + pe.name + "'");
        expect_punct("{");
        pe.body = parse_items(0);
        expect_punct("}");
        kernel_.pes.push_back(std::move(pe));
      } else {
        kernel_.top.push_back(parse_item(0));
      }
    }
    expect_punct("}");
    return std::move(kernel_);
  }

  void parse_decl() {
    SourceSpan span = peek().span;
    std::string space_word = next().text;
    Buffer b;
    b.span = span;
    b.name = expect_ident("buffer name");
    if (is_buffer(b.name)) fail("duplicate declaration of '" + b.name + "'");
    if (is_param(b.name)) fail("'" + b.name + "' is already a parameter");
    while (accept_punct("[")) {
      b.shape.push_back(parse_expr(0));
      expect_punct("]");
    }
    expect_punct(":");
    b.elem = parse_type();
    std::vector<int> banks;
    while (accept_punct("@"))
      banks.push_back(static_cast<int>(expect_int("bank index")));
    int depth = 0;
    bool has_depth = false;
    if (accept_ident("depth")) {
      depth = static_cast<int>(expect_int("FIFO depth"));
      has_depth = true;
    }
    expect_punct(";");
    if (space_word == "mem") {
      b.space = MemorySpace::off_chip();
      if (!banks.empty()) b.space.banks = banks;
    } else if (space_word == "ram") {
      b.space = MemorySpace::ram();
    } else if (space_word == "reg") {
      b.space = MemorySpace::registers();
    } else {
      b.space = MemorySpace::fifo(has_depth ? depth : 16);
    }
    if (space_word != "mem" && !banks.empty())
      fail("'@bank' only applies to off-chip buffers");
    if (space_word != "fifo" && has_depth)
      fail("'depth' only applies to FIFO channels");
    kernel_.buffers.push_back(std::move(b));
  }

  DataType parse_type() {
    std::string word = expect_ident("type");
    if (word == "fixed") {
      expect_punct("<");
      int w = static_cast<int>(expect_int("width"));
      expect_punct(",");
      int f = static_cast<int>(expect_int("fraction bits"));
      expect_punct(">");
      return DataType::fixed(w, f);
    }
    if (word == "vec") {
      expect_punct("<");
      DataType base = parse_type();
      expect_punct(",");
      int lanes = static_cast<int>(expect_int("lane count"));
      expect_punct(">");
      if (base.lanes != 1) fail("nested vector types are not supported");
      return base.with_lanes(lanes);
    }
    if (word.size() >= 2 &&
        (word[0] == 'i' || word[0] == 'u' || word[0] == 'f')) {
      bool digits = true;
      for (size_t i = 1; i < word.size(); ++i)
        digits &= std::isdigit(static_cast<unsigned char>(word[i])) != 0;
      if (digits) {
        int w = std::stoi(word.substr(1));
        switch (word[0]) {
          case 'i': return DataType::ints(w);
          case 'u': return DataType::uints(w);
          case 'f': return DataType{TypeKind::Float, w, 0, 1};
        }
      }
    }
    fail("unknown type '" + word + "'");
  }

  Pragma parse_pragma() {
    expect_punct("#");
    std::string word = expect_ident("pragma name");
    if (word == "pipeline") {
      std::optional<int> ii;
      if (accept_ident("ii")) {
        long long v = expect_int("target initiation interval");
        if (v < 1) fail("target initiation interval must be positive");
        ii = static_cast<int>(v);
      }
      return Pragma::pipeline(ii);
    }
    if (word == "unroll") {
      std::optional<int> factor;
      if (peek().kind == Token::Kind::Int) {
        long long v = expect_int("unroll factor");
        if (v < 1) fail("unroll factor must be positive");
        factor = static_cast<int>(v);
      }
      return Pragma::unroll(factor);
    }
    if (word == "dataflow") return Pragma{Pragma::Kind::Dataflow, {}, {}};
    fail("unknown pragma '#" + word + "'");
  }

  std::vector<StmtPtr> parse_items(int depth) {
    std::vector<StmtPtr> out;
    while (!is_punct("}") && !at_end()) out.push_back(parse_item(depth));
    return out;
  }

  StmtPtr parse_item(int depth) {
    if (depth > kMaxDepth) fail("nesting too deep");
    SourceSpan span = peek().span;
    if (is_ident("func") || is_ident("pe"))
      fail("'" + peek().text + "' blocks must appear at kernel top level");
    if (is_punct("#") || is_ident("for")) {
      Pragma pragma;
      if (is_punct("#")) pragma = parse_pragma();
      if (!accept_ident("for")) fail("expected 'for' after pragma");
      LoopNode l;
      l.pragma = pragma;
      l.iterator = expect_ident("iterator name");
      if (is_buffer(l.iterator) || is_param(l.iterator))
        fail("iterator '" + l.iterator + "' shadows a declaration");
      if (!accept_ident("in")) fail("expected 'in'");
      l.lower = parse_expr(depth + 1);
      expect_punct("..");
      l.upper = parse_expr(depth + 1);
      expect_punct("{");
      iterators_.push_back(l.iterator);
      l.body = parse_items(depth + 1);
      iterators_.pop_back();
      expect_punct("}");
      auto s = Stmt::make_loop(std::move(l));
      const_cast<Stmt*>(s.get())->span = span;
      return s;
    }
    if (accept_ident("call")) {
      std::string name = expect_ident("function name");
      expect_punct(";");
      auto s = Stmt::call(name);
      const_cast<Stmt*>(s.get())->span = span;
      return s;
    }
    if (accept_ident("if")) {
      ExprPtr cond = parse_expr(depth + 1);
      expect_punct("{");
      std::vector<StmtPtr> body = parse_items(depth + 1);
      expect_punct("}");
      auto s = Stmt::guard(std::move(cond), std::move(body));
      const_cast<Stmt*>(s.get())->span = span;
      return s;
    }
    // Assignment or push.
    std::string name = expect_ident("statement");
    if (is_punct(".")) {
      expect_punct(".");
      std::string method = expect_ident("channel method");
      if (method != "push") fail("unknown method '" + method + "'");
      expect_punct("(");
      ExprPtr value = parse_expr(depth + 1);
      expect_punct(")");
      expect_punct(";");
      auto s = Stmt::push(name, std::move(value));
      const_cast<Stmt*>(s.get())->span = span;
      return s;
    }
    if (!is_buffer(name)) fail("assignment to undeclared buffer '" + name + "'");
    std::vector<ExprPtr> indices;
    while (accept_punct("[")) {
      indices.push_back(parse_expr(depth + 1));
      expect_punct("]");
    }
    expect_punct("=");
    ExprPtr rhs = parse_expr(depth + 1);
    expect_punct(";");
    auto s = Stmt::assign(name, std::move(indices), std::move(rhs));
    const_cast<Stmt*>(s.get())->span = span;
    return s;
  }

  ExprPtr parse_expr(int depth) {
    if (depth > kMaxDepth) fail("expression nesting too deep");
    ExprPtr cond = parse_cmp(depth);
    if (accept_punct("?")) {
      ExprPtr then_e = parse_expr(depth + 1);
      expect_punct(":");
      ExprPtr else_e = parse_expr(depth + 1);
      return Expr::sel(std::move(cond), std::move(then_e), std::move(else_e));
    }
    return cond;
  }

  ExprPtr parse_cmp(int depth) {
    ExprPtr lhs = parse_add(depth);
    while (true) {
      BinOp op;
      if (is_punct("<") ) op = BinOp::Lt;
      else if (is_punct("<=")) op = BinOp::Le;
      else if (is_punct("==")) op = BinOp::Eq;
      else break;
      next();
      lhs = Expr::bin(op, lhs, parse_add(depth));
    }
    return lhs;
  }

  ExprPtr parse_add(int depth) {
    ExprPtr lhs = parse_mul(depth);
    while (true) {
      BinOp op;
      if (is_punct("+")) op = BinOp::Add;
      else if (is_punct("-")) op = BinOp::Sub;
      else break;
      next();
      lhs = Expr::bin(op, lhs, parse_mul(depth));
    }
    return lhs;
  }

  ExprPtr parse_mul(int depth) {
    ExprPtr lhs = parse_primary(depth);
    while (true) {
      BinOp op;
      if (is_punct("*")) op = BinOp::Mul;
      else if (is_punct("/")) op = BinOp::Div;
      else if (is_punct("%")) op = BinOp::Mod;
      else break;
      next();
      lhs = Expr::bin(op, lhs, parse_primary(depth));
    }
    return lhs;
  }

  ExprPtr parse_primary(int depth) {
    if (depth > kMaxDepth) fail("expression nesting too deep");
    SourceSpan span = peek().span;
    if (accept_punct("(")) {
      ExprPtr e = parse_expr(depth + 1);
      expect_punct(")");
      return e;
    }
    if (accept_punct("-")) {
      if (peek().kind == Token::Kind::Int) {
        auto e = Expr::lit(-next().value);
        const_cast<Expr*>(e.get())->span = span;
        return e;
      }
      return Expr::sub(Expr::lit(0), parse_primary(depth + 1));
    }
    if (peek().kind == Token::Kind::Int) {
      auto e = Expr::lit(next().value);
      const_cast<Expr*>(e.get())->span = span;
      return e;
    }
    if (is_ident("min") || is_ident("max")) {
      BinOp op = is_ident("min") ? BinOp::Min : BinOp::Max;
      next();
      expect_punct("(");
      ExprPtr a = parse_expr(depth + 1);
      expect_punct(",");
      ExprPtr b = parse_expr(depth + 1);
      expect_punct(")");
      return Expr::bin(op, std::move(a), std::move(b));
    }
    if (is_ident("cast")) {
      next();
      expect_punct("<");
      DataType t = parse_type();
      expect_punct(">");
      expect_punct("(");
      ExprPtr e = parse_expr(depth + 1);
      expect_punct(")");
      return Expr::cast(t, std::move(e));
    }
    std::string name = expect_ident("expression");
    if (is_punct(".")) {
      expect_punct(".");
      std::string method = expect_ident("channel method");
      if (method != "pop") fail("unknown method '" + method + "'");
      expect_punct("(");
      expect_punct(")");
      auto e = Expr::pop(name);
      const_cast<Expr*>(e.get())->span = span;
      return e;
    }
    if (is_punct("[") || is_buffer(name)) {
      std::vector<ExprPtr> indices;
      while (accept_punct("[")) {
        indices.push_back(parse_expr(depth + 1));
        expect_punct("]");
      }
      auto e = Expr::read(name, std::move(indices));
      const_cast<Expr*>(e.get())->span = span;
      return e;
    }
    ExprPtr e;
    if (is_iterator(name)) e = Expr::iter(name);
    else if (is_param(name)) e = Expr::param(name);
    else fail("unknown identifier '" + name + "'");
    const_cast<Expr*>(e.get())->span = span;
    return e;
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  Kernel kernel_;
  std::vector<std::string> iterators_;
};

}  // namespace detail

/// Parses DSL text into a kernel. Total: any input yields either a kernel or
/// a syntax error with a source location.
inline Result<Kernel> parse(std::string_view text) {
  detail::Lexer lexer(text);
  auto tokens = lexer.run();
  if (!tokens) return Result<Kernel>::failure(tokens.error());
  detail::Parser parser(std::move(tokens).value());
  return parser.run();
}

}  // namespace hlsopt
