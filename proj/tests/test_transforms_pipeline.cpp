#include <catch2/catch_amalgamated.hpp>

#include "hlsopt/analysis.hpp"
#include "hlsopt/equivalence.hpp"
#include "hlsopt/parse.hpp"
#include "hlsopt/print.hpp"
#include "hlsopt/transform/interleave.hpp"
#include "hlsopt/transform/pipeline.hpp"
#include "testutil.hpp"

using namespace hlsopt;
using hlsopt::test::parse_or_die;

namespace {

Kernel bind(const Kernel& k, std::map<std::string, long long> b) {
  return std::move(substitute_params(k, b)).value();
}

void expect_equivalent(const Kernel& a, const Kernel& b, bool tol,
                       const EquivalenceMap& map = {}) {
  Verdict v = check_equivalence(a, b, 12, 5, tol, map);
  INFO(v.summary());
  CHECK(v.pass);
}

}  // namespace

// ---------------------------------------------------------------------------
// interchange

TEST_CASE("interchange swaps a parallel nest and is an involution") {
  Kernel k = bind(parse_or_die(R"(kernel t(N, M) {
    mem a[N][M]: i32 @0;
    mem b[N][M]: i32 @1;
    for i in 0..N {
      #pipeline
      for j in 0..M {
        b[i][j] = a[i][j] * 2;
      }
    }
  })"),
                  {{"N", 6}, {"M", 9}});
  auto once = interchange(k, "i");
  REQUIRE(once.ok());
  const Stmt& outer = *once->kernel.top[0];
  CHECK(outer.loop.iterator == "j");
  CHECK(outer.loop.body[0]->loop.iterator == "i");
  CHECK(outer.loop.body[0]->loop.pragma.is_pipeline());
  expect_equivalent(k, once->kernel, false);

  auto twice = interchange(once->kernel, "j");
  REQUIRE(twice.ok());
  CHECK(struct_equal(twice->kernel, k));
}

TEST_CASE("interchange rejects an imperfect nest") {
  Kernel k = bind(parse_or_die(R"(kernel t(N, M) {
    mem a[N][M]: i32 @0;
    mem c[N]: i32 @1;
    for i in 0..N {
      c[i] = 0;
      #pipeline
      for j in 0..M {
        a[i][j] = 1;
      }
    }
  })"),
                  {{"N", 4}, {"M", 4}});
  auto r = interchange(k, "i");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().find("imperfect nest") != std::string::npos);
}

TEST_CASE("interchange rejects a direction-reversing dependence") {
  // a[i][j] = a[i-1][j+1]: distance (1,-1) becomes (-1,1) after the swap.
  Kernel k = bind(parse_or_die(R"(kernel t(N, M) {
    mem a[N][M]: i32 @0;
    for i in 1..N {
      #pipeline
      for j in 0..M - 1 {
        a[i][j] = a[i - 1][j + 1];
      }
    }
  })"),
                  {{"N", 6}, {"M", 6}});
  auto r = interchange(k, "i");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().find("reverses") != std::string::npos);
}

TEST_CASE("interchange rejects a scalar reduction") {
  Kernel k = bind(parse_or_die(test::naive_matmul_text("i32")),
                  {{"N", 4}, {"K", 4}, {"M", 4}});
  auto r = interchange(k, "m");  // m and k form the perfect pair
  REQUIRE_FALSE(r.ok());
}

// ---------------------------------------------------------------------------
// interleave_accumulation: transpose

TEST_CASE("transpose interleaving removes the matmul recurrence") {
  for (const char* elem : {"f32", "i32"}) {
    Kernel k = bind(parse_or_die(test::naive_matmul_text(elem)),
                    {{"N", 4}, {"K", 8}, {"M", 16}});
    DeviceConfig cfg;
    auto ii0 = infer_ii("k", k, cfg);
    REQUIRE(ii0.ok());

    auto r = interleave_accumulation(k, "k", {"interleave_accumulation", "k",
                                              {{"mode", "transpose"}}},
                                     cfg);
    REQUIRE(r.ok());
    REQUIRE(validate(r->kernel).empty());

    // Pipelined loop is now the m loop; the recurrence is gone.
    auto ii1 = infer_ii("m", r->kernel, cfg);
    REQUIRE(ii1.ok());
    if (std::string(elem) == "f32") {
      CHECK(ii0->ii == 8);
      CHECK(ii1->ii == 1);
    }
    // Accumulator expanded to one element per output column.
    const Buffer* acc = r->kernel.find_buffer("acc");
    REQUIRE(acc);
    REQUIRE(acc->shape.size() == 1);
    CHECK(*eval_const(acc->shape[0]) == 16);

    // Exact equivalence: per-location accumulation order is preserved.
    expect_equivalent(k, r->kernel, false);
  }
}

TEST_CASE("transpose interleaving hoists the reused operand") {
  Kernel k = bind(parse_or_die(test::naive_matmul_text("f32")),
                  {{"N", 4}, {"K", 4}, {"M", 8}});
  DeviceConfig cfg;
  auto r = interleave_accumulation(
      k, "k", {"interleave_accumulation", "k", {{"mode", "transpose"}}}, cfg);
  REQUIRE(r.ok());
  // A[n][k] is loaded once per k iteration into a register.
  std::string text = print(r->kernel);
  CHECK(text.find("a = A[n][k];") != std::string::npos);
}

// ---------------------------------------------------------------------------
// interleave_accumulation: tiled

TEST_CASE("tiled interleaving produces the strip-mined shape") {
  Kernel k = bind(parse_or_die(test::naive_matmul_text("f32")),
                  {{"N", 4}, {"K", 8}, {"M", 16}});
  DeviceConfig cfg;
  auto r = interleave_accumulation(
      k, "k",
      {"interleave_accumulation", "k", {{"mode", "tiled"}, {"T", "16"}}}, cfg);
  REQUIRE(r.ok());
  const Buffer* acc = r->kernel.find_buffer("acc");
  REQUIRE(acc);
  CHECK(*eval_const(acc->shape[0]) == 16);
  expect_equivalent(k, r->kernel, false);
  DeviceConfig cfg2;
  auto ii = infer_ii("t", r->kernel, cfg2);
  REQUIRE(ii.ok());
  CHECK(ii->ii == 1);
}

TEST_CASE("tiled interleaving below the latency warns about residual ii") {
  Kernel k = bind(parse_or_die(test::naive_matmul_text("f32")),
                  {{"N", 2}, {"K", 8}, {"M", 16}});
  DeviceConfig cfg;
  auto r = interleave_accumulation(
      k, "k",
      {"interleave_accumulation", "k", {{"mode", "tiled"}, {"T", "4"}}}, cfg);
  REQUIRE(r.ok());  // applied, with a warning
  bool warned = false;
  for (const auto& n : r->notes)
    warned |= n.find("ii remains >1: 2") != std::string::npos;
  CHECK(warned);  // ceil(8 / 4) = 2
  expect_equivalent(k, r->kernel, false);
}

TEST_CASE("tiled interleaving with partial buffers fixes the histogram") {
  Kernel k = bind(parse_or_die(R"(kernel hist(N) {
    mem data[N]: u32 @0;
    mem out[64]: u32 @1;
    ram bins[64]: u32;
    reg b: u32;
    for z in 0..64 {
      bins[z] = 0;
    }
    #pipeline
    for i in 0..N {
      b = data[i] % 64;
      bins[b] = bins[b] + 1;
    }
    for w in 0..64 {
      out[w] = bins[w];
    }
  })"),
                  {{"N", 128}});
  DeviceConfig cfg;
  auto ii0 = infer_ii("i", k, cfg);
  REQUIRE(ii0.ok());
  CHECK(ii0->ii == 2);

  auto r = interleave_accumulation(
      k, "i", {"interleave_accumulation", "i", {{"mode", "tiled"}, {"T", "2"}}},
      cfg);
  REQUIRE(r.ok());
  REQUIRE(validate(r->kernel).empty());
  auto ii1 = infer_ii("i", r->kernel, cfg);
  REQUIRE(ii1.ok());
  CHECK(ii1->ii == 1);
  expect_equivalent(k, r->kernel, false);  // unsigned adds commute exactly
}

// ---------------------------------------------------------------------------
// interleave_accumulation: single_loop

TEST_CASE("single-loop interleaving builds the two-stage reduction") {
  Kernel k = bind(parse_or_die(R"(kernel s(N) {
    mem arr[N]: f64 @0;
    mem res[1]: f64 @1;
    reg acc: f64;
    acc = 0;
    #pipeline
    for i in 0..N {
      acc = acc + arr[i];
    }
    res[0] = acc;
  })"),
                  {{"N", 64}});
  DeviceConfig cfg;
  auto ii0 = infer_ii("i", k, cfg);
  REQUIRE(ii0.ok());
  CHECK(ii0->ii == 8);

  auto r = interleave_accumulation(
      k, "i",
      {"interleave_accumulation", "i", {{"mode", "single_loop"}, {"K", "16"}}},
      cfg);
  REQUIRE(r.ok());
  auto ii1 = infer_ii("i", r->kernel, cfg);
  REQUIRE(ii1.ok());
  CHECK(ii1->ii == 1);
  // Stage-2 reduction loop exists and is not pipelined.
  bool has_serial_reduction = false;
  visit_stmts(r->kernel, [&](const StmtPtr& s) {
    if (s->kind == StmtKind::Loop && s->loop.iterator == "r" &&
        s->loop.pragma.kind == Pragma::Kind::None)
      has_serial_reduction = true;
  });
  CHECK(has_serial_reduction);
  expect_equivalent(k, r->kernel, true);  // reassociated float sum
}

// ---------------------------------------------------------------------------
// interleave_accumulation: cross_input

TEST_CASE("cross-input interleaving pipelines across independent inputs") {
  Kernel k = bind(parse_or_die(R"(kernel solver(T) {
    mem x0[1]: f32 @0;
    mem xt[1]: f32 @1;
    reg state: f32;
    state = x0[0];
    #pipeline
    for t in 0..T {
      state = state + state * 3;
    }
    xt[0] = state;
  })"),
                  {{"T", 12}});
  DeviceConfig cfg;
  auto ii0 = infer_ii("t", k, cfg);
  REQUIRE(ii0.ok());
  CHECK(ii0->ii > 1);  // latency of the step feeds back every iteration

  auto r = interleave_accumulation(
      k, "t",
      {"interleave_accumulation", "t", {{"mode", "cross_input"}, {"N", "16"}}},
      cfg);
  REQUIRE(r.ok());
  REQUIRE(validate(r->kernel).empty());
  CHECK(r->io_map.replicate_inputs == 16);
  const Buffer* in = r->kernel.find_buffer("x0");
  REQUIRE(in);
  CHECK(in->shape.size() == 2);  // leading input dimension added
  auto ii1 = infer_ii("i", r->kernel, cfg);
  REQUIRE(ii1.ok());
  CHECK(ii1->ii == 1);  // 16 interleaved inputs cover the latency
  expect_equivalent(k, r->kernel, false, r->io_map);
}

// ---------------------------------------------------------------------------
// tile_buffers

TEST_CASE("tile_buffers shrinks the accumulation buffer") {
  Kernel k = bind(parse_or_die(R"(kernel t(N, K, M) {
    mem A[N][K]: f32 @0;
    mem B[K][M]: f32 @1;
    mem C[N][M]: f32 @0;
    ram acc[M]: f32;
    reg a: f32;
    for n in 0..N {
      for k in 0..K {
        a = A[n][k];
        #pipeline
        for m in 0..M {
          acc[m] = (k == 0 ? C[n][m] : acc[m]) + a * B[k][m];
        }
      }
      #pipeline
      for m2 in 0..M {
        C[n][m2] = acc[m2];
      }
    }
  })"),
                  {{"N", 2}, {"K", 4}, {"M", 32}});
  DeviceConfig cfg;
  auto before = estimate_resources(k, cfg);
  auto r = tile_buffers(k, "m", 8);
  REQUIRE(r.ok());
  REQUIRE(validate(r->kernel).empty());
  auto after = estimate_resources(r->kernel, cfg);
  const Buffer* acc = r->kernel.find_buffer("acc");
  REQUIRE(acc);
  CHECK(*eval_const(acc->shape[0]) == 8);
  CHECK(before.onchip_bits - after.onchip_bits == (32 - 8) * 32);
  expect_equivalent(k, r->kernel, false);

  // T == M: identity.
  auto same = tile_buffers(k, "m", 32);
  REQUIRE(same.ok());
  CHECK(struct_equal(same->kernel, k));

  // Non-dividing tile.
  CHECK_FALSE(tile_buffers(k, "m", 5).ok());
}

// ---------------------------------------------------------------------------
// fuse_pipelined_loops

namespace {
const char* two_loops = R"(kernel f(N0, N1) {
  mem a[N0]: i32 @0;
  mem b[N1]: i32 @1;
  mem c[N0]: i32 @0;
  mem d[N1]: i32 @1;
  #pipeline
  for i in 0..N0 {
    c[i] = a[i] + 1;
  }
  #pipeline
  for j in 0..N1 {
    d[j] = b[j] * 2;
  }
})";
}

TEST_CASE("independent equal-bound loops fuse at level 3") {
  Kernel k = bind(parse_or_die(two_loops), {{"N0", 100}, {"N1", 100}});
  DeviceConfig cfg;
  auto r = fuse_pipelined_loops(k, "i", "j", "auto", cfg);
  REQUIRE(r.ok());
  bool level3 = false;
  for (const auto& n : r->notes) level3 |= n.find("level 3") != std::string::npos;
  CHECK(level3);
  auto report = cycle_count(r->kernel, cfg);
  REQUIRE(report.ok());
  REQUIRE(report->loops.size() == 1);
  CHECK(report->loops[0].trip == 100);
  CHECK(report->total_cycles == report->loops[0].latency + 1 * (100 - 1));
  expect_equivalent(k, r->kernel, false);
}

TEST_CASE("independent unequal-bound loops fuse at level 2") {
  Kernel k = bind(parse_or_die(two_loops), {{"N0", 7}, {"N1", 100}});
  DeviceConfig cfg;
  auto r = fuse_pipelined_loops(k, "i", "j", "auto", cfg);
  REQUIRE(r.ok());
  auto report = cycle_count(r->kernel, cfg);
  REQUIRE(report.ok());
  CHECK(report->loops[0].trip == 100);  // max(N0, N1)
  expect_equivalent(k, r->kernel, false);
}

TEST_CASE("coarse dependence forces level 1") {
  Kernel k = bind(parse_or_die(R"(kernel f(N) {
    mem a[N]: i32 @0;
    mem out[N]: i32 @1;
    ram s[N]: i32;
    #pipeline
    for i in 0..N {
      s[i] = a[i] + 3;
    }
    #pipeline
    for j in 0..N {
      out[j] = s[N - 1 - j];
    }
  })"),
                  {{"N", 50}});
  DeviceConfig cfg;
  auto r = fuse_pipelined_loops(k, "i", "j", "auto", cfg);
  REQUIRE(r.ok());
  bool level1 = false;
  for (const auto& n : r->notes) level1 |= n.find("level 1") != std::string::npos;
  CHECK(level1);
  auto report = cycle_count(r->kernel, cfg);
  REQUIRE(report.ok());
  CHECK(report->loops[0].trip == 100);  // N0 + N1
  expect_equivalent(k, r->kernel, false);
}

TEST_CASE("differing initiation intervals refuse to fuse") {
  Kernel k = bind(parse_or_die(R"(kernel f(N) {
    mem a[N]: f32 @0;
    mem out1[1]: f32 @1;
    mem out2[N]: f32 @1;
    reg acc: f32;
    acc = 0;
    #pipeline
    for i in 0..N {
      acc = acc + a[i];
    }
    out1[0] = acc;
    #pipeline
    for j in 0..N {
      out2[j] = a[j] * 2;
    }
  })"),
                  {{"N", 32}});
  DeviceConfig cfg;
  // The loops are not adjacent (write-out between them); move j next to i is
  // not possible, so target the pair that IS adjacent after reordering:
  // simply expect the differing-ii error once adjacency holds.
  auto r = fuse_pipelined_loops(k, "i", "j", "auto", cfg);
  REQUIRE_FALSE(r.ok());
}

TEST_CASE("fusion level formulas for constructed pairs") {
  // Eq.1 composition across all three levels at several bound combinations.
  DeviceConfig cfg;
  for (auto [n0, n1] : {std::pair{1LL, 7LL}, {7LL, 7LL}, {100LL, 7LL}}) {
    Kernel k = bind(parse_or_die(two_loops), {{"N0", n0}, {"N1", n1}});
    auto before = cycle_count(k, cfg);
    REQUIRE(before.ok());
    long long l0 = before->loops[0].latency;
    long long l1 = before->loops[1].latency;
    CHECK(before->total_cycles == (l0 + n0 - 1) + (l1 + n1 - 1));

    auto lvl1 = fuse_pipelined_loops(k, "i", "j", "1", cfg);
    REQUIRE(lvl1.ok());
    auto r1 = cycle_count(lvl1->kernel, cfg);
    REQUIRE(r1.ok());
    CHECK(r1->total_cycles == r1->loops[0].latency + (n0 + n1 - 1));

    auto lvl2 = fuse_pipelined_loops(k, "i", "j", "2", cfg);
    REQUIRE(lvl2.ok());
    auto r2 = cycle_count(lvl2->kernel, cfg);
    REQUIRE(r2.ok());
    CHECK(r2->total_cycles ==
          r2->loops[0].latency + (std::max(n0, n1) - 1));

    if (n0 == n1) {
      auto lvl3 = fuse_pipelined_loops(k, "i", "j", "3", cfg);
      REQUIRE(lvl3.ok());
      auto r3 = cycle_count(lvl3->kernel, cfg);
      REQUIRE(r3.ok());
      CHECK(r3->total_cycles == r3->loops[0].latency + (n0 - 1));
    } else {
      CHECK_FALSE(fuse_pipelined_loops(k, "i", "j", "3", cfg).ok());
    }
  }
}

// ---------------------------------------------------------------------------
// flatten_loop_nest

namespace {
const char* nest_text = R"(kernel nest(N0, N1) {
  mem a[N1][N0]: i32 @0;
  mem b[N1][N0]: i32 @1;
  mem c[N1]: i32 @1;
  for i in 0..N1 {
    #pipeline
    for j in 0..N0 {
      b[i][j] = a[i][j] + 1;
    }
    c[i] = i;
  }
})";
}

TEST_CASE("flattening collapses fill/drain overhead") {
  DeviceConfig cfg;
  for (auto [n0, n1] : {std::pair{4LL, 1000LL}, {16LL, 16LL}}) {
    Kernel k = bind(parse_or_die(nest_text), {{"N0", n0}, {"N1", n1}});
    auto before = cycle_count(k, cfg);
    REQUIRE(before.ok());
    long long l0 = before->loops[0].latency;
    CHECK(before->total_cycles == n1 * (l0 + n0 - 1) + 1);

    auto r = flatten_loop_nest(k, "i");
    REQUIRE(r.ok());
    auto after = cycle_count(r->kernel, cfg);
    REQUIRE(after.ok());
    REQUIRE(after->loops.size() == 1);
    CHECK(after->loops[0].trip == n0 * n1);
    CHECK(after->total_cycles == after->loops[0].latency + n0 * n1 - 1);
    expect_equivalent(k, r->kernel, false);
  }
}

TEST_CASE("flattening with N1=1 is identity up to guard simplification") {
  Kernel k = bind(parse_or_die(nest_text), {{"N0", 8}, {"N1", 1}});
  auto r = flatten_loop_nest(k, "i");
  REQUIRE(r.ok());
  auto report = cycle_count(r->kernel, DeviceConfig{});
  REQUIRE(report.ok());
  CHECK(report->loops[0].trip == 8);
  expect_equivalent(k, r->kernel, false);
}

TEST_CASE("flattening refuses a non-pipelined inner loop") {
  Kernel k = bind(parse_or_die(R"(kernel nest(N) {
    mem a[N][N]: i32 @0;
    for i in 0..N {
      for j in 0..N {
        a[i][j] = 0;
      }
    }
  })"),
                  {{"N", 4}});
  CHECK_FALSE(flatten_loop_nest(k, "i").ok());
}

TEST_CASE("register-iterator flattening enables condition flattening") {
  Kernel k = bind(parse_or_die(nest_text), {{"N0", 8}, {"N1", 6}});
  DeviceConfig cfg;
  auto r = flatten_loop_nest(k, "i", /*register_iterators=*/true);
  REQUIRE(r.ok());
  REQUIRE(validate(r->kernel).empty());
  expect_equivalent(k, r->kernel, false);

  // Depth before: increment feeds the compare (2 dependent int ops).
  auto before = cycle_count(r->kernel, cfg);
  REQUIRE(before.ok());
  CHECK(before->loops[0].condition_depth == 2);

  auto flat = flatten_condition(r->kernel, "ij");
  REQUIRE(flat.ok());
  auto after = cycle_count(flat->kernel, cfg);
  REQUIRE(after.ok());
  CHECK(after->loops[0].condition_depth == 1);
  CHECK(after->loops[0].condition_depth < before->loops[0].condition_depth);
  expect_equivalent(k, flat->kernel, false);

  // Applying it again finds nothing.
  auto again = flatten_condition(flat->kernel, "ij");
  REQUIRE_FALSE(again.ok());
  CHECK(again.error().find("pattern not found") != std::string::npos);
}

// ---------------------------------------------------------------------------
// inline_function

TEST_CASE("inlining enables pipelining of the enclosing loop") {
  Kernel k = bind(parse_or_die(R"(kernel f(N) {
    mem a[N]: i32 @0;
    mem out[N]: i32 @1;
    reg t: i32;
    reg i_cur: i32;
    func body {
      t = a[i_cur] * 3 + 1;
    }
    #pipeline
    for i in 0..N {
      i_cur = i;
      call body;
      out[i] = t;
    }
  })"),
                  {{"N", 16}});
  DeviceConfig cfg;
  auto ii0 = infer_ii("i", k, cfg);
  REQUIRE(ii0.ok());
  CHECK(ii0->reason.find("call") != std::string::npos);

  auto r = inline_function(k, "body");
  REQUIRE(r.ok());
  CHECK(r->kernel.functions.empty());
  auto ii1 = infer_ii("i", r->kernel, cfg);
  REQUIRE(ii1.ok());
  CHECK(ii1->ii == 1);
  expect_equivalent(k, r->kernel, false);
}

TEST_CASE("inlining twice duplicates compute resources") {
  Kernel k = bind(parse_or_die(R"(kernel f(N) {
    mem a[N]: i32 @0;
    mem out[N]: i32 @1;
    reg t: i32;
    func accum {
      t = t * 3 + 1;
    }
    for i in 0..N {
      t = a[i];
      call accum;
      call accum;
      out[i] = t;
    }
  })"),
                  {{"N", 8}});
  DeviceConfig cfg;
  auto r = inline_function(k, "accum");
  REQUIRE(r.ok());
  auto res = estimate_resources(r->kernel, cfg);
  CHECK(res.compute_units["mul.int"] == 2);
  CHECK(res.compute_units["add.int"] == 2);
  expect_equivalent(k, r->kernel, false);
}

TEST_CASE("self-recursive callee is rejected") {
  Kernel k;
  k.name = "rec";
  Function f;
  f.name = "loop_forever";
  f.body = {Stmt::call("loop_forever")};
  k.functions.push_back(f);
  k.top.push_back(Stmt::call("loop_forever"));
  auto r = inline_function(k, "loop_forever");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().find("recursion") != std::string::npos);
}
