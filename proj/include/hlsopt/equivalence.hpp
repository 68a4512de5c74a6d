#pragma once

// Equivalence oracle: runs two kernels on the same seeded random inputs and
// compares their externally visible (off-chip) outputs. Integer outputs must
// match exactly; float outputs are compared with relative+absolute tolerance
// when tolerance mode is on (required after transforms that reassociate
// floating-point reductions or demote types).

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hlsopt/dataflow.hpp"
#include "hlsopt/interp.hpp"
#include "hlsopt/ir.hpp"

namespace hlsopt {

/// Region-level output mapping between two kernels, recorded by transforms
/// whose result does not touch the same memory footprint (for example a
/// PE chain that skips intermediate planes, or cross-input interleaving).
struct IoRegion {
  std::string buffer_a;
  long long offset_a = 0;
  std::string buffer_b;
  long long offset_b = 0;
  long long count = 0;  // scalars
};

struct EquivalenceMap {
  std::vector<IoRegion> outputs;  // empty: derive from common written buffers
  int replicate_inputs = 1;       // >1 after cross-input interleaving
  std::string note;
};

struct Verdict {
  bool pass = false;
  int trials = 0;
  unsigned long long seed = 0;
  bool tolerance_mode = false;
  double rel_tol = 0;
  double abs_tol = 0;
  std::string error;           // setup failure (signature mismatch, crash)
  std::string counterexample;  // first mismatch, with input values
  std::string note;

  std::string summary() const {
    if (!error.empty()) return "error: " + error;
    std::ostringstream os;
    os << (pass ? "pass" : "FAIL") << " (" << trials << " trials, seed "
       << seed;
    if (tolerance_mode)
      os << ", tolerance rel=" << rel_tol << " abs=" << abs_tol;
    else
      os << ", exact";
    os << ")";
    if (!pass && !counterexample.empty()) os << ": " << counterexample;
    return os.str();
  }
};

namespace equiv_detail {

struct BufferUse {
  bool read = false;
  bool written = false;
};

inline std::map<std::string, BufferUse> offchip_use(const Kernel& k) {
  std::map<std::string, BufferUse> use;
  auto offchip = [&](const std::string& name) -> bool {
    const Buffer* b = k.find_buffer(name);
    return b && b->space.kind == MemorySpace::Kind::OffChip;
  };
  visit_stmts(k, [&](const StmtPtr& s) {
    if (s->kind == StmtKind::Assign && offchip(s->target))
      use[s->target].written = true;
    visit_exprs_shallow(s, [&](const ExprPtr& e) {
      if (e->kind == ExprKind::Read && offchip(e->name)) use[e->name].read = true;
    });
  });
  return use;
}

inline void fill_random(BufferData& data, std::mt19937_64& rng) {
  long long n = data.scalar_count();
  if (data.is_float()) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (long long i = 0; i < n; ++i)
      data.floats[i] = interp_detail::round_float(dist(rng), data.elem);
  } else if (data.elem.kind == TypeKind::UnsignedInt) {
    std::uniform_int_distribution<long long> dist(0, 1024);
    for (long long i = 0; i < n; ++i) data.ints[i] = dist(rng);
  } else {
    std::uniform_int_distribution<long long> dist(-1024, 1024);
    for (long long i = 0; i < n; ++i)
      data.ints[i] = interp_detail::wrap_int(dist(rng), data.elem);
  }
  data.written.assign(n, true);
}

inline Result<MemoryImage> run_kernel(const Kernel& k,
                                      const MemoryImage& inputs) {
  if (k.has_pe_graph()) {
    auto r = run_dataflow(k, inputs);
    if (!r) return Result<MemoryImage>::failure(r.error());
    if (r->trace.deadlock) {
      std::string chans;
      for (const auto& c : r->trace.blocked_channels) chans += " " + c;
      return Result<MemoryImage>::failure("deadlock; blocked channels:" + chans);
    }
    return std::move(r->image);
  }
  return run_sequential(k, inputs);
}

inline std::string show_inputs(const MemoryImage& inputs, long long limit = 24) {
  std::ostringstream os;
  for (const auto& [name, data] : inputs.buffers) {
    os << " " << name << "=[";
    long long n = std::min(limit, data.scalar_count());
    for (long long i = 0; i < n; ++i) {
      if (i) os << ",";
      if (data.is_float()) os << data.floats[i];
      else os << data.ints[i];
    }
    if (n < data.scalar_count()) os << ",...";
    os << "]";
  }
  return os.str();
}

}  // namespace equiv_detail

/// Runs both kernels on `trials` seeded random inputs and compares outputs.
/// Kernels must be parameter-bound. Region mapping per `map`; by default the
/// off-chip buffers written by both kernels are compared in full.
inline Verdict check_equivalence(const Kernel& a, const Kernel& b, int trials,
                                 unsigned long long seed, bool tolerance_mode,
                                 const EquivalenceMap& map = {}) {
  namespace ed = equiv_detail;
  Verdict v;
  v.trials = trials;
  v.seed = seed;
  v.tolerance_mode = tolerance_mode;
  v.note = map.note;

  auto use_a = ed::offchip_use(a);
  auto use_b = ed::offchip_use(b);

  // Input set: off-chip buffers read by either kernel.
  std::set<std::string> input_names;
  for (const auto& [name, use] : use_a)
    if (use.read) input_names.insert(name);
  for (const auto& [name, use] : use_b)
    if (use.read) input_names.insert(name);

  // Output regions.
  std::vector<IoRegion> outputs = map.outputs;
  if (outputs.empty()) {
    for (const auto& [name, use] : use_a) {
      if (!use.written) continue;
      auto itb = use_b.find(name);
      if (itb == use_b.end() || !itb->second.written) continue;
      const Buffer* decl_a = a.find_buffer(name);
      const Buffer* decl_b = b.find_buffer(name);
      if (!decl_a || !decl_b) continue;
      IoRegion r;
      r.buffer_a = r.buffer_b = name;
      r.count = -1;  // full buffer
      outputs.push_back(r);
    }
    if (outputs.empty()) {
      v.error = "no common off-chip output buffers to compare";
      return v;
    }
  }

  int replicate = std::max(1, map.replicate_inputs);

  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * (trial + 1));

    // Generate inputs sized for kernel b (the replicated side when
    // cross-input interleaving is involved).
    MemoryImage inputs_b;
    for (const auto& name : input_names) {
      const Buffer* decl = b.find_buffer(name);
      if (!decl) decl = a.find_buffer(name);
      if (!decl) continue;
      BufferData data;
      data.elem = decl->elem;
      for (const auto& e : decl->shape) {
        auto ext = eval_const(e);
        if (!ext) {
          v.error = "unbound extent in input '" + name + "'";
          return v;
        }
        data.shape.push_back(*ext);
      }
      data.allocate();
      ed::fill_random(data, rng);
      inputs_b.buffers[name] = std::move(data);
    }

    auto result_b = ed::run_kernel(b, inputs_b);
    if (!result_b) {
      v.error = "kernel '" + b.name + "': " + result_b.error();
      return v;
    }

    for (int rep = 0; rep < replicate; ++rep) {
      // Slice the inputs for kernel a.
      MemoryImage inputs_a;
      for (const auto& [name, data] : inputs_b.buffers) {
        const Buffer* decl_a = a.find_buffer(name);
        if (!decl_a) continue;
        BufferData slice;
        slice.elem = decl_a->elem;
        for (const auto& e : decl_a->shape)
          slice.shape.push_back(eval_const(e).value_or(1));
        slice.allocate();
        long long n = slice.scalar_count();
        long long offset = static_cast<long long>(rep) * n;
        if (offset + n > data.scalar_count()) {
          v.error = "input '" + name + "' too small for " +
                    std::to_string(replicate) + " interleaved runs";
          return v;
        }
        for (long long i = 0; i < n; ++i) {
          if (slice.is_float()) slice.floats[i] = data.floats[offset + i];
          else slice.ints[i] = data.ints[offset + i];
          slice.written[i] = data.written[offset + i];
        }
        inputs_a.buffers[name] = std::move(slice);
      }

      auto result_a = ed::run_kernel(a, inputs_a);
      if (!result_a) {
        v.error = "kernel '" + a.name + "': " + result_a.error();
        return v;
      }

      for (const auto& region : outputs) {
        const BufferData* da = result_a->find(region.buffer_a);
        const BufferData* db = result_b->find(region.buffer_b);
        if (!da || !db) {
          v.error = "output buffer '" + region.buffer_a + "'/'" +
                    region.buffer_b + "' missing";
          return v;
        }
        long long count = region.count < 0 ? da->scalar_count() : region.count;
        long long off_a = region.offset_a;
        long long off_b =
            region.offset_b + (replicate > 1 ? rep * count : 0);
        if (off_a + count > da->scalar_count() ||
            off_b + count > db->scalar_count()) {
          v.error = "output region out of range for '" + region.buffer_a + "'";
          return v;
        }
        bool flt = da->is_float() || db->is_float();
        double rel = 0, abs = 0;
        if (flt && tolerance_mode) {
          // The narrower side decides the comparison precision.
          int width = std::min(da->is_float() ? da->elem.width_bits : 64,
                               db->is_float() ? db->elem.width_bits : 64);
          rel = width == 32 ? 1e-5 : 1e-12;
          abs = width == 32 ? 1e-6 : 1e-13;
          v.rel_tol = rel;
          v.abs_tol = abs;
        }
        for (long long i = 0; i < count; ++i) {
          bool ok;
          double xa = 0, xb = 0;
          if (flt) {
            xa = da->as_double(off_a + i);
            xb = db->as_double(off_b + i);
            ok = tolerance_mode
                     ? std::abs(xa - xb) <=
                           abs + rel * std::max(std::abs(xa), std::abs(xb))
                     : xa == xb;
          } else {
            ok = da->ints[off_a + i] == db->ints[off_b + i];
            xa = static_cast<double>(da->ints[off_a + i]);
            xb = static_cast<double>(db->ints[off_b + i]);
          }
          if (!ok) {
            std::ostringstream os;
            os << "trial " << trial;
            if (replicate > 1) os << " (interleaved input " << rep << ")";
            os << ": output '" << region.buffer_a << "' scalar " << i
               << ": " << xa << " vs " << xb << "; inputs:"
               << ed::show_inputs(inputs_a);
            v.counterexample = os.str();
            return v;
          }
        }
      }
    }
  }
  v.pass = true;
  return v;
}

}  // namespace hlsopt
