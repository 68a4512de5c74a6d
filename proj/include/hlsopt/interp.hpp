#pragma once

// Executable reference semantics: a sequential interpreter that ignores
// pragmas and runs statements in program order. Unrolled loops execute in
// ascending iteration order, which fixes the floating-point reassociation
// order for reference outputs.
//
// Value semantics: integer arithmetic wraps modulo 2^width; fixed-point is
// scaled integer arithmetic rounding toward zero on casts; f32 results are
// rounded to float precision after every operation.
//
// Scalars are stored inline in Value (no allocation); only vector-typed
// values (lanes > 1) spill to heap storage. The evaluator is shared by the
// sequential interpreter and the dataflow simulator.

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "hlsopt/ir.hpp"
#include "hlsopt/support.hpp"

namespace hlsopt {

// ---------------------------------------------------------------------------
// Runtime values

struct Value {
  // Lanes up to 8 live inline (no allocation on the evaluation hot path);
  // wider vectors spill to the heap.
  static constexpr int kInline = 8;
  DataType type;
  long long i0 = 0;  // lane 0 for int/fixed types (fixed stores raw scaled)
  double f0 = 0;     // lane 0 for float types
  std::array<long long, kInline - 1> irest{};
  std::array<double, kInline - 1> frest{};
  std::vector<long long> iover;  // lanes kInline.. (int/fixed)
  std::vector<double> fover;     // lanes kInline.. (float)

  int lanes() const { return type.lanes; }
  bool is_float() const { return type.is_float(); }

  long long iget(int l) const {
    if (l == 0) return i0;
    return l < kInline ? irest[l - 1] : iover[l - kInline];
  }
  double fget(int l) const {
    if (l == 0) return f0;
    return l < kInline ? frest[l - 1] : fover[l - kInline];
  }
  void iset(int l, long long v) {
    if (l == 0) i0 = v;
    else if (l < kInline) irest[l - 1] = v;
    else iover[l - kInline] = v;
  }
  void fset(int l, double v) {
    if (l == 0) f0 = v;
    else if (l < kInline) frest[l - 1] = v;
    else fover[l - kInline] = v;
  }
  void spill(int lanes_total) {
    if (lanes_total > kInline) {
      if (type.is_float()) fover.resize(lanes_total - kInline);
      else iover.resize(lanes_total - kInline);
    }
  }

  static Value scalar_int(long long v, DataType t = DataType::i32()) {
    Value out;
    out.type = t.scalar();
    out.i0 = v;
    return out;
  }
};

namespace interp_detail {

inline long long wrap_int(long long v, const DataType& t) {
  if (t.width_bits >= 64) return v;
  unsigned long long mask = (1ULL << t.width_bits) - 1;
  unsigned long long u = static_cast<unsigned long long>(v) & mask;
  if (t.kind == TypeKind::UnsignedInt) return static_cast<long long>(u);
  // sign extend (fixed-point and signed ints)
  if (u & (1ULL << (t.width_bits - 1))) u |= ~mask;
  return static_cast<long long>(u);
}

inline double round_float(double v, const DataType& t) {
  return t.width_bits == 32 ? static_cast<double>(static_cast<float>(v)) : v;
}

struct InterpError {
  std::string message;
  SourceSpan span;
};

[[noreturn]] inline void die(std::string msg, SourceSpan span = {}) {
  throw InterpError{std::move(msg), span};
}

inline DataType promote(const DataType& a, const DataType& b) {
  DataType r;
  r.lanes = std::max(a.lanes, b.lanes);
  if (a.kind == TypeKind::Float || b.kind == TypeKind::Float) {
    r.kind = TypeKind::Float;
    int w = 32;
    if (a.kind == TypeKind::Float) w = std::max(w, a.width_bits);
    if (b.kind == TypeKind::Float) w = std::max(w, b.width_bits);
    r.width_bits = w;
    return r;
  }
  if (a.kind == TypeKind::FixedPoint || b.kind == TypeKind::FixedPoint) {
    const DataType& fx = a.kind == TypeKind::FixedPoint ? a : b;
    r.kind = TypeKind::FixedPoint;
    r.width_bits = std::max(a.width_bits, b.width_bits);
    r.fraction_bits = fx.fraction_bits;
    if (a.kind == TypeKind::FixedPoint && b.kind == TypeKind::FixedPoint)
      r.fraction_bits = std::max(a.fraction_bits, b.fraction_bits);
    return r;
  }
  r.kind = (a.kind == TypeKind::UnsignedInt && b.kind == TypeKind::UnsignedInt)
               ? TypeKind::UnsignedInt
               : TypeKind::SignedInt;
  r.width_bits = std::max(a.width_bits, b.width_bits);
  return r;
}

// Scalar lane conversion.
inline void convert_lane(const DataType& from, long long iv_in, double fv_in,
                         const DataType& to, long long& iout, double& fout) {
  if (from.is_float()) {
    if (to.is_float()) fout = round_float(fv_in, to);
    else if (to.is_fixed())
      iout = wrap_int(
          static_cast<long long>(fv_in * std::pow(2.0, to.fraction_bits)), to);
    else iout = wrap_int(static_cast<long long>(fv_in), to);
  } else if (from.is_fixed()) {
    if (to.is_float())
      fout = round_float(
          static_cast<double>(iv_in) / std::pow(2.0, from.fraction_bits), to);
    else if (to.is_fixed()) {
      int shift = to.fraction_bits - from.fraction_bits;
      long long v = shift >= 0 ? iv_in << shift : iv_in / (1LL << -shift);
      iout = wrap_int(v, to);
    } else {
      iout = wrap_int(iv_in / (1LL << from.fraction_bits), to);
    }
  } else {
    if (to.is_float()) fout = round_float(static_cast<double>(iv_in), to);
    else if (to.is_fixed()) iout = wrap_int(iv_in << to.fraction_bits, to);
    else iout = wrap_int(iv_in, to);
  }
}

inline Value cast_value(const Value& src, DataType to) {
  if (src.type == to) return src;
  if (to.lanes == 1 && src.type.lanes == 1) {
    Value out;
    out.type = to;
    convert_lane(src.type, src.i0, src.f0, to, out.i0, out.f0);
    return out;
  }
  Value out;
  out.type = to;
  out.spill(to.lanes);
  if (src.type.lanes == 1) {  // broadcast
    long long iv = 0;
    double fv = 0;
    convert_lane(src.type, src.i0, src.f0, to, iv, fv);
    for (int l = 0; l < to.lanes; ++l) {
      if (to.is_float()) out.fset(l, fv);
      else out.iset(l, iv);
    }
    return out;
  }
  if (src.type.lanes != to.lanes)
    die("cast between vector widths " + std::to_string(src.type.lanes) +
        " and " + std::to_string(to.lanes));
  for (int l = 0; l < to.lanes; ++l) {
    long long iv = 0;
    double fv = 0;
    convert_lane(src.type, src.type.is_float() ? 0 : src.iget(l),
                 src.type.is_float() ? src.fget(l) : 0, to, iv, fv);
    if (to.is_float()) out.fset(l, fv);
    else out.iset(l, iv);
  }
  return out;
}

inline long long scalar_int_of(const Value& v) {
  if (v.type.is_float()) return static_cast<long long>(v.f0);
  if (v.type.is_fixed()) return v.i0 / (1LL << v.type.fraction_bits);
  return v.i0;
}

inline double binop_float(BinOp op, double u, double v, bool& is_cmp,
                          bool& cmp_result) {
  switch (op) {
    case BinOp::Add: return u + v;
    case BinOp::Sub: return u - v;
    case BinOp::Mul: return u * v;
    case BinOp::Div: return u / v;
    case BinOp::Mod: return std::fmod(u, v);
    case BinOp::Min: return std::min(u, v);
    case BinOp::Max: return std::max(u, v);
    case BinOp::Lt: is_cmp = true; cmp_result = u < v; return 0;
    case BinOp::Le: is_cmp = true; cmp_result = u <= v; return 0;
    case BinOp::Eq: is_cmp = true; cmp_result = u == v; return 0;
  }
  return 0;
}

inline long long binop_int(BinOp op, long long u, long long v,
                           const DataType& t, bool& is_cmp, bool& cmp_result) {
  bool fixed = t.is_fixed();
  switch (op) {
    case BinOp::Add: return u + v;
    case BinOp::Sub: return u - v;
    case BinOp::Mul: return fixed ? ((u * v) / (1LL << t.fraction_bits)) : u * v;
    case BinOp::Div:
      if (v == 0) die("integer division by zero");
      return fixed ? ((u * (1LL << t.fraction_bits)) / v) : u / v;
    case BinOp::Mod:
      if (v == 0) die("integer modulo by zero");
      return u % v;
    case BinOp::Min: return std::min(u, v);
    case BinOp::Max: return std::max(u, v);
    case BinOp::Lt: is_cmp = true; cmp_result = u < v; return 0;
    case BinOp::Le: is_cmp = true; cmp_result = u <= v; return 0;
    case BinOp::Eq: is_cmp = true; cmp_result = u == v; return 0;
  }
  return 0;
}

inline Value binop(BinOp op, const Value& a, const Value& b) {
  // Mixed scalar integer fast path: no lane conversion needed.
  if (a.type.lanes == 1 && b.type.lanes == 1 && a.type.is_int() &&
      b.type.is_int() && !(a.type == b.type)) {
    DataType rt = promote(a.type, b.type);
    bool is_cmp = false, cmp_result = false;
    long long r = binop_int(op, wrap_int(a.i0, rt), wrap_int(b.i0, rt), rt,
                            is_cmp, cmp_result);
    Value out;
    if (is_cmp) {
      out.type = DataType::i32();
      out.i0 = cmp_result ? 1 : 0;
    } else {
      out.type = rt;
      out.i0 = wrap_int(r, rt);
    }
    return out;
  }
  // Scalar fast path: same type, no promotion needed beyond kind check.
  if (a.type.lanes == 1 && b.type.lanes == 1 && a.type == b.type) {
    const DataType& rt = a.type;
    bool is_cmp = false, cmp_result = false;
    Value out;
    if (rt.is_float()) {
      double r = binop_float(op, a.f0, b.f0, is_cmp, cmp_result);
      if (is_cmp) {
        out.type = DataType::i32();
        out.i0 = cmp_result ? 1 : 0;
      } else {
        out.type = rt;
        out.f0 = round_float(r, rt);
      }
    } else {
      long long r = binop_int(op, a.i0, b.i0, rt, is_cmp, cmp_result);
      if (is_cmp) {
        out.type = DataType::i32();
        out.i0 = cmp_result ? 1 : 0;
      } else {
        out.type = rt;
        out.i0 = wrap_int(r, rt);
      }
    }
    return out;
  }

  DataType rt = promote(a.type, b.type);
  Value x = cast_value(a, rt);
  Value y = cast_value(b, rt);
  bool cmp_op = op == BinOp::Lt || op == BinOp::Le || op == BinOp::Eq;
  Value out;
  out.type = cmp_op ? DataType::i32().with_lanes(rt.lanes) : rt;
  out.spill(rt.lanes);
  for (int l = 0; l < rt.lanes; ++l) {
    bool is_cmp = false, cmp_result = false;
    if (rt.is_float()) {
      double r = binop_float(op, x.fget(l), y.fget(l), is_cmp, cmp_result);
      if (is_cmp) out.iset(l, cmp_result ? 1 : 0);
      else out.fset(l, round_float(r, rt));
    } else {
      long long r = binop_int(op, x.iget(l), y.iget(l), rt, is_cmp, cmp_result);
      if (is_cmp) out.iset(l, cmp_result ? 1 : 0);
      else out.iset(l, wrap_int(r, rt));
    }
  }
  return out;
}

inline bool truthy(const Value& v) {
  return v.type.is_float() ? v.f0 != 0 : v.i0 != 0;
}

// -- evaluation environment (iterators and VM temporaries) -------------------

class Env {
 public:
  Value* find(const std::string& name) {
    for (size_t i = slots_.size(); i-- > 0;)
      if (slots_[i].first == name) return &slots_[i].second;
    return nullptr;
  }
  Value& set(const std::string& name) {
    if (Value* v = find(name)) return *v;
    slots_.emplace_back(name, Value{});
    return slots_.back().second;
  }
  void erase(const std::string& name) {
    for (size_t i = slots_.size(); i-- > 0;)
      if (slots_[i].first == name) {
        slots_.erase(slots_.begin() + static_cast<long>(i));
        return;
      }
  }

 private:
  std::vector<std::pair<std::string, Value>> slots_;
};

}  // namespace interp_detail

// ---------------------------------------------------------------------------
// Memory images

struct BufferData {
  DataType elem;
  std::vector<long long> shape;
  std::vector<long long> ints;  // flat scalar lanes, row-major
  std::vector<double> floats;
  std::vector<bool> written;
  bool poisoned_read = false;  // an uninitialized on-chip read happened

  long long scalar_count() const {
    long long n = elem.lanes;
    for (long long e : shape) n *= e;
    return n;
  }
  bool is_float() const { return elem.is_float(); }

  void allocate() {
    long long n = scalar_count();
    if (is_float()) floats.assign(n, 0.0);
    else ints.assign(n, 0);
    written.assign(n, false);
  }

  double as_double(long long idx) const {
    return is_float() ? floats[idx]
                      : (elem.is_fixed()
                             ? static_cast<double>(ints[idx]) /
                                   std::pow(2.0, elem.fraction_bits)
                             : static_cast<double>(ints[idx]));
  }
};

/// Per-buffer flat value arrays (row-major). The external state of a kernel
/// run: inputs are loaded into it, outputs read back from it.
struct MemoryImage {
  std::map<std::string, BufferData> buffers;

  BufferData* find(const std::string& name) {
    auto it = buffers.find(name);
    return it == buffers.end() ? nullptr : &it->second;
  }
  const BufferData* find(const std::string& name) const {
    auto it = buffers.find(name);
    return it == buffers.end() ? nullptr : &it->second;
  }
};

/// Allocates a zero-initialized, unwritten image with every buffer of the
/// kernel. Parameters must be bound.
inline Result<MemoryImage> allocate_image(const Kernel& k) {
  MemoryImage img;
  for (const auto& b : k.buffers) {
    BufferData data;
    data.elem = b.elem;
    for (const auto& e : b.shape) {
      auto v = eval_const(e);
      if (!v)
        return Result<MemoryImage>::failure("unbound extent in buffer '" +
                                            b.name + "'");
      data.shape.push_back(*v);
    }
    data.allocate();
    img.buffers[b.name] = std::move(data);
  }
  return img;
}

// -- memory image text files --------------------------------------------------
//
// One file per buffer:
//   <name> <type> <extent>*     (header line)
//   values, whitespace separated, row-major

inline std::string save_memory_text(const std::string& name,
                                    const BufferData& b) {
  std::ostringstream os;
  os << name << " " << to_string(b.elem);
  for (long long e : b.shape) os << " " << e;
  os << "\n";
  long long n = b.scalar_count();
  for (long long i = 0; i < n; ++i) {
    if (i) os << (i % 16 == 0 ? "\n" : " ");
    if (b.is_float()) {
      std::ostringstream v;
      v.precision(17);
      v << b.floats[i];
      os << v.str();
    } else {
      os << b.ints[i];
    }
  }
  os << "\n";
  return os.str();
}

inline Result<std::pair<std::string, BufferData>> parse_memory_text(
    const std::string& text) {
  using R = Result<std::pair<std::string, BufferData>>;
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header)) return R::failure("empty memory file");
  std::istringstream hs(header);
  std::string name, type_str;
  hs >> name >> type_str;
  if (name.empty() || type_str.empty())
    return R::failure("malformed memory header '" + header + "'");
  auto parse_type = [&](const std::string& s) -> Result<DataType> {
    std::string t = s;
    int lanes = 1;
    try {
      if (t.rfind("vec<", 0) == 0 && t.back() == '>') {
        auto comma = t.rfind(',');
        lanes = std::stoi(t.substr(comma + 1, t.size() - comma - 2));
        t = t.substr(4, comma - 4);
      }
      DataType d;
      if (t.rfind("fixed<", 0) == 0 && t.back() == '>') {
        auto comma = t.find(',');
        d = DataType::fixed(
            std::stoi(t.substr(6, comma - 6)),
            std::stoi(t.substr(comma + 1, t.size() - comma - 2)));
      } else if (t.size() >= 2 && (t[0] == 'i' || t[0] == 'u' || t[0] == 'f')) {
        int w = std::stoi(t.substr(1));
        d = t[0] == 'i' ? DataType::ints(w)
                        : (t[0] == 'u' ? DataType::uints(w)
                                       : DataType{TypeKind::Float, w, 0, 1});
      } else {
        return Result<DataType>::failure("unknown type '" + s + "'");
      }
      return d.with_lanes(lanes);
    } catch (...) {
      return Result<DataType>::failure("unknown type '" + s + "'");
    }
  };
  auto elem = parse_type(type_str);
  if (!elem) return R::failure(elem.error());
  BufferData b;
  b.elem = *elem;
  long long extent;
  while (hs >> extent) b.shape.push_back(extent);
  b.allocate();
  long long n = b.scalar_count();
  for (long long i = 0; i < n; ++i) {
    if (b.is_float()) {
      if (!(in >> b.floats[i]))
        return R::failure("memory file for '" + name + "' ends early");
    } else {
      if (!(in >> b.ints[i]))
        return R::failure("memory file for '" + name + "' ends early");
    }
    b.written[i] = true;
  }
  return std::pair{name, std::move(b)};
}

// ---------------------------------------------------------------------------
// Sequential interpreter

struct InterpOptions {
  double poison = 0.0;  // value produced by uninitialized on-chip reads
  long long max_steps = 1LL << 42;  // hard stop against runaway loops
};

/// Dynamic access counters from one oracle run.
struct RunStats {
  long long offchip_reads = 0;
  long long offchip_writes = 0;
  double offchip_bytes = 0;
};

namespace interp_detail {

struct Machine {
  const Kernel& kernel;
  MemoryImage& image;
  InterpOptions opts;
  std::map<std::string, std::deque<Value>> fifos;
  struct BufferRef {
    BufferData* data;
    const Buffer* decl;
    bool offchip;
  };
  std::unordered_map<std::string_view, BufferRef> refs;
  long long steps = 0;
  RunStats* stats = nullptr;

  explicit Machine(const Kernel& k, MemoryImage& img, InterpOptions o)
      : kernel(k), image(img), opts(o) {
    for (const auto& b : k.buffers) {
      BufferData* data = image.find(b.name);
      refs[b.name] = {data, &b,
                      b.space.kind == MemorySpace::Kind::OffChip};
    }
  }

  const BufferRef& ref(const std::string& name, SourceSpan span) {
    auto it = refs.find(name);
    if (it == refs.end() || !it->second.data)
      die("unknown buffer '" + name + "'", span);
    return it->second;
  }

  // Index expressions evaluate in 64-bit integer arithmetic; non-integer
  // subexpressions (data-dependent indices through typed reads) truncate the
  // same way the general path does.
  long long eval_index(const ExprPtr& e, Env& env) {
    switch (e->kind) {
      case ExprKind::IntLit: return e->int_value;
      case ExprKind::IterRef: {
        Value* v = env.find(e->name);
        if (!v) die("unbound identifier '" + e->name + "'", e->span);
        return scalar_int_of(*v);
      }
      case ExprKind::Bin: {
        long long a = eval_index(e->args[0], env);
        long long b = eval_index(e->args[1], env);
        switch (e->op) {
          case BinOp::Add: return a + b;
          case BinOp::Sub: return a - b;
          case BinOp::Mul: return a * b;
          case BinOp::Div:
            if (b == 0) die("integer division by zero", e->span);
            return a / b;
          case BinOp::Mod:
            if (b == 0) die("integer modulo by zero", e->span);
            return a % b;
          case BinOp::Min: return std::min(a, b);
          case BinOp::Max: return std::max(a, b);
          case BinOp::Lt: return a < b ? 1 : 0;
          case BinOp::Le: return a <= b ? 1 : 0;
          case BinOp::Eq: return a == b ? 1 : 0;
        }
        return 0;
      }
      case ExprKind::Select:
        return eval_index(e->args[0], env) ? eval_index(e->args[1], env)
                                           : eval_index(e->args[2], env);
      default: return scalar_int_of(eval(e, env));
    }
  }

  long long flat_index(const BufferRef& r, const std::vector<ExprPtr>& indices,
                       Env& env, SourceSpan span) {
    const BufferData& data = *r.data;
    if (indices.size() != data.shape.size())
      die("buffer '" + r.decl->name + "' indexed with " +
              std::to_string(indices.size()) + " of " +
              std::to_string(data.shape.size()) + " dimensions",
          span);
    long long flat = 0;
    for (size_t d = 0; d < indices.size(); ++d) {
      long long x = eval_index(indices[d], env);
      if (x < 0 || x >= data.shape[d])
        die("out-of-bounds access to '" + r.decl->name + "': index " +
                std::to_string(x) + " outside [0, " +
                std::to_string(data.shape[d]) + ") in dimension " +
                std::to_string(d),
            span);
      flat = flat * data.shape[d] + x;
    }
    return flat * data.elem.lanes;
  }

  Value load(const std::string& name, const std::vector<ExprPtr>& indices,
             Env& env, SourceSpan span) {
    const BufferRef& r = ref(name, span);
    BufferData& data = *r.data;
    long long base = flat_index(r, indices, env, span);
    if (stats && r.offchip) {
      stats->offchip_reads += 1;
      stats->offchip_bytes += data.elem.bytes();
    }
    Value out;
    out.type = data.elem;
    out.spill(data.elem.lanes);
    for (int l = 0; l < data.elem.lanes; ++l) {
      long long idx = base + l;
      if (!data.written[idx]) {
        if (r.offchip)
          die("read of uninitialized off-chip data: '" + name + "' element " +
                  std::to_string(idx),
              span);
        data.poisoned_read = true;
        if (data.is_float()) out.fset(l, opts.poison);
        else out.iset(l, static_cast<long long>(opts.poison));
        continue;
      }
      if (data.is_float()) out.fset(l, data.floats[idx]);
      else out.iset(l, data.ints[idx]);
    }
    return out;
  }

  void store(const std::string& name, const std::vector<ExprPtr>& indices,
             const Value& value, Env& env, SourceSpan span) {
    const BufferRef& r = ref(name, span);
    BufferData& data = *r.data;
    long long base = flat_index(r, indices, env, span);
    if (stats && r.offchip) {
      stats->offchip_writes += 1;
      stats->offchip_bytes += data.elem.bytes();
    }
    Value v = cast_value(value, data.elem);
    for (int l = 0; l < data.elem.lanes; ++l) {
      long long idx = base + l;
      if (data.is_float()) data.floats[idx] = v.fget(l);
      else data.ints[idx] = v.iget(l);
      data.written[idx] = true;
    }
  }

  Value eval(const ExprPtr& e, Env& env) {
    if (++steps > opts.max_steps) die("step limit exceeded");
    switch (e->kind) {
      case ExprKind::IntLit: return Value::scalar_int(e->int_value);
      case ExprKind::IterRef: {
        Value* v = env.find(e->name);
        if (!v) die("unbound identifier '" + e->name + "'", e->span);
        return *v;
      }
      case ExprKind::ParamRef:
        die("unbound parameter '" + e->name + "'", e->span);
      case ExprKind::Read: return load(e->name, e->args, env, e->span);
      case ExprKind::Pop: {
        auto& q = fifos[e->name];
        if (q.empty()) die("pop from empty channel '" + e->name + "'", e->span);
        Value v = std::move(q.front());
        q.pop_front();
        return v;
      }
      case ExprKind::Bin:
        return binop(e->op, eval(e->args[0], env), eval(e->args[1], env));
      case ExprKind::Select:
        // Only the taken branch is evaluated; guards against reading
        // uninitialized data on the untaken side.
        return truthy(eval(e->args[0], env)) ? eval(e->args[1], env)
                                             : eval(e->args[2], env);
      case ExprKind::Cast:
        return cast_value(eval(e->args[0], env), e->cast_type);
    }
    die("unreachable expression kind");
  }

  void exec(const StmtPtr& s, Env& env) {
    if (++steps > opts.max_steps) die("step limit exceeded");
    switch (s->kind) {
      case StmtKind::Assign: {
        Value v = eval(s->value, env);
        store(s->target, s->indices, v, env, s->span);
        break;
      }
      case StmtKind::Push: {
        const BufferRef& r = ref(s->target, s->span);
        if (r.decl->space.kind != MemorySpace::Kind::Fifo)
          die("push to non-channel '" + s->target + "'", s->span);
        fifos[s->target].push_back(
            cast_value(eval(s->value, env), r.decl->elem));
        break;
      }
      case StmtKind::Loop: {
        long long a = scalar_int_of(eval(s->loop.lower, env));
        long long b = scalar_int_of(eval(s->loop.upper, env));
        Value& slot = env.set(s->loop.iterator);
        slot.type = DataType::i64();
        for (long long v = a; v < b; ++v) {
          env.set(s->loop.iterator).i0 = v;
          for (const auto& inner : s->loop.body) exec(inner, env);
        }
        env.erase(s->loop.iterator);
        break;
      }
      case StmtKind::Call: {
        const Function* f = kernel.find_function(s->target);
        if (!f) die("call to unknown function '" + s->target + "'", s->span);
        for (const auto& inner : f->body) exec(inner, env);
        break;
      }
      case StmtKind::Guard: {
        if (truthy(eval(s->value, env)))
          for (const auto& inner : s->body) exec(inner, env);
        break;
      }
    }
  }
};

}  // namespace interp_detail

/// Runs a kernel with a statement-tree root sequentially. `inputs` supplies
/// initial buffer contents by name (unknown names are ignored); all other
/// buffers start uninitialized.
inline Result<MemoryImage> run_sequential(const Kernel& k,
                                          const MemoryImage& inputs,
                                          InterpOptions opts = {},
                                          RunStats* stats = nullptr) {
  if (k.has_pe_graph())
    return Result<MemoryImage>::failure(
        "kernel has a processing-element graph; use run_dataflow");
  if (!k.parameters.empty())
    return Result<MemoryImage>::failure("parameters must be bound");
  auto img = allocate_image(k);
  if (!img) return img;
  MemoryImage image = std::move(img).value();
  for (const auto& [name, data] : inputs.buffers) {
    BufferData* dst = image.find(name);
    if (!dst) continue;
    if (dst->scalar_count() != data.scalar_count())
      return Result<MemoryImage>::failure(
          "input '" + name + "' has " + std::to_string(data.scalar_count()) +
          " scalars, kernel expects " + std::to_string(dst->scalar_count()));
    BufferData copy = data;
    copy.elem = dst->elem;
    copy.shape = dst->shape;
    image.buffers[name] = std::move(copy);
  }
  interp_detail::Machine m(k, image, opts);
  m.stats = stats;
  interp_detail::Env env;
  try {
    for (const auto& s : k.top) m.exec(s, env);
  } catch (const interp_detail::InterpError& e) {
    return Result<MemoryImage>::failure(
        e.message + (e.span.valid() ? " at " + e.span.str() : ""));
  }
  return image;
}

}  // namespace hlsopt
