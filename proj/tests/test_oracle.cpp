#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "hlsopt/dataflow.hpp"
#include "hlsopt/equivalence.hpp"
#include "hlsopt/interp.hpp"
#include "hlsopt/parse.hpp"
#include "testutil.hpp"

using namespace hlsopt;
using hlsopt::test::parse_or_die;

namespace {

/// Independent brute-force matrix multiplication C = A*B + C over flat
/// row-major arrays; the reference the interpreter is checked against.
template <class T>
std::vector<T> brute_force_matmul(const std::vector<T>& a,
                                  const std::vector<T>& b, std::vector<T> c,
                                  long long n, long long kk, long long m) {
  for (long long i = 0; i < n; ++i)
    for (long long j = 0; j < m; ++j) {
      T acc = c[i * m + j];
      for (long long k = 0; k < kk; ++k) acc = acc + a[i * kk + k] * b[k * m + j];
      c[i * m + j] = acc;
    }
  return c;
}

Kernel bound_matmul(long long n, long long kk, long long m,
                    const std::string& elem) {
  Kernel k = parse_or_die(test::naive_matmul_text(elem));
  return std::move(substitute_params(k, {{"N", n}, {"K", kk}, {"M", m}})).value();
}

BufferData make_ints(std::vector<long long> shape, std::vector<long long> vals,
                     DataType t = DataType::i32()) {
  BufferData b;
  b.elem = t;
  b.shape = std::move(shape);
  b.allocate();
  for (size_t i = 0; i < vals.size(); ++i) b.ints[i] = vals[i];
  b.written.assign(b.written.size(), true);
  return b;
}

}  // namespace

TEST_CASE("integer matmul matches the brute-force oracle") {
  const long long n = 4, kk = 4, m = 4;
  Kernel kernel = bound_matmul(n, kk, m, "i32");
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<long long> dist(-50, 50);
  std::vector<long long> a(n * kk), b(kk * m), c(n * m);
  for (auto& x : a) x = dist(rng);
  for (auto& x : b) x = dist(rng);
  for (auto& x : c) x = dist(rng);

  MemoryImage inputs;
  inputs.buffers["A"] = make_ints({n, kk}, a);
  inputs.buffers["B"] = make_ints({kk, m}, b);
  inputs.buffers["C"] = make_ints({n, m}, c);

  auto out = run_sequential(kernel, inputs);
  REQUIRE(out.ok());
  auto expected = brute_force_matmul(a, b, c, n, kk, m);
  const BufferData* cout = out->find("C");
  REQUIRE(cout);
  for (long long i = 0; i < n * m; ++i) CHECK(cout->ints[i] == expected[i]);
}

TEST_CASE("f32 matmul matches a float brute-force oracle bit for bit") {
  // Same accumulation order, so even float results are identical.
  const long long n = 3, kk = 5, m = 4;
  Kernel kernel = bound_matmul(n, kk, m, "f32");
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1, 1);
  std::vector<float> a(n * kk), b(kk * m), c(n * m);
  for (auto& x : a) x = static_cast<float>(dist(rng));
  for (auto& x : b) x = static_cast<float>(dist(rng));
  for (auto& x : c) x = static_cast<float>(dist(rng));

  auto fill = [](std::vector<long long> shape, const std::vector<float>& v) {
    BufferData d;
    d.elem = DataType::f32();
    d.shape = std::move(shape);
    d.allocate();
    for (size_t i = 0; i < v.size(); ++i) d.floats[i] = v[i];
    d.written.assign(d.written.size(), true);
    return d;
  };
  MemoryImage inputs;
  inputs.buffers["A"] = fill({n, kk}, a);
  inputs.buffers["B"] = fill({kk, m}, b);
  inputs.buffers["C"] = fill({n, m}, c);

  auto out = run_sequential(kernel, inputs);
  REQUIRE(out.ok());
  auto expected = brute_force_matmul(a, b, c, n, kk, m);
  const BufferData* cout = out->find("C");
  for (long long i = 0; i < n * m; ++i)
    CHECK(static_cast<float>(cout->floats[i]) == expected[i]);
}

TEST_CASE("empty kernel leaves inputs unchanged") {
  Kernel k = parse_or_die("kernel e(){}");
  MemoryImage inputs;
  auto out = run_sequential(k, inputs);
  REQUIRE(out.ok());
  CHECK(out->buffers.empty());
}

TEST_CASE("out-of-bounds read is an error with the offending index") {
  Kernel k = parse_or_die(R"(kernel oob(N) {
    mem A[N]: i32 @0;
    mem B[N]: i32 @1;
    for i in 0..N {
      B[i] = A[i + 1];
    }
  })");
  Kernel bound = std::move(substitute_params(k, {{"N", 4}})).value();
  MemoryImage inputs;
  inputs.buffers["A"] = make_ints({4}, {1, 2, 3, 4});
  auto out = run_sequential(bound, inputs);
  REQUIRE_FALSE(out.ok());
  CHECK(out.error().find("out-of-bounds") != std::string::npos);
  CHECK(out.error().find("A") != std::string::npos);
}

TEST_CASE("uninitialized off-chip read errors; on-chip read poisons") {
  Kernel k = parse_or_die(R"(kernel u(N) {
    mem A[N]: i32 @0;
    mem B[N]: i32 @1;
    for i in 0..N {
      B[i] = A[i];
    }
  })");
  Kernel bound = std::move(substitute_params(k, {{"N", 4}})).value();
  auto out = run_sequential(bound, MemoryImage{});
  REQUIRE_FALSE(out.ok());
  CHECK(out.error().find("uninitialized off-chip") != std::string::npos);

  Kernel k2 = parse_or_die(R"(kernel u2(N) {
    mem B[N]: i32 @1;
    ram t[N]: i32;
    for i in 0..N {
      B[i] = t[i];
    }
  })");
  Kernel bound2 = std::move(substitute_params(k2, {{"N", 4}})).value();
  auto out2 = run_sequential(bound2, MemoryImage{});
  REQUIRE(out2.ok());
  CHECK(out2->find("t")->poisoned_read);
}

TEST_CASE("integer arithmetic wraps modulo 2^width") {
  Kernel k = parse_or_die(R"(kernel w() {
    mem out[2]: i8 @0;
    out[0] = 127 + 1;
    out[1] = cast<i8>(300);
  })");
  auto result = run_sequential(k, MemoryImage{});
  REQUIRE(result.ok());
  CHECK(result->find("out")->ints[0] == -128);
  CHECK(result->find("out")->ints[1] == 44);  // 300 mod 256
}

TEST_CASE("fixed-point multiply keeps the scale, casts round toward zero") {
  Kernel k = parse_or_die(R"(kernel fx() {
    mem out[2]: fixed<16,8> @0;
    reg a: fixed<16,8>;
    reg b: fixed<16,8>;
    a = cast<fixed<16,8>>(3) / 2;
    b = a * a;
    out[0] = b;
    out[1] = cast<fixed<16,8>>(0 - 3) / 2;
  })");
  auto result = run_sequential(k, MemoryImage{});
  REQUIRE(result.ok());
  // 1.5 * 1.5 = 2.25 -> raw 576 at scale 2^8
  CHECK(result->find("out")->ints[0] == 576);
  // -1.5 rounding toward zero on the division: raw -384
  CHECK(result->find("out")->ints[1] == -384);
}

TEST_CASE("sequential FIFO semantics support delay buffers") {
  Kernel k = parse_or_die(R"(kernel d(N) {
    mem in[N]: i32 @0;
    mem out[N]: i32 @1;
    fifo line: i32 depth 4;
    #pipeline
    for i in 0..N {
      if 4 <= i {
        out[i] = line.pop();
      }
      if i < 4 {
        out[i] = 0;
      }
      line.push(in[i]);
    }
  })");
  Kernel bound = std::move(substitute_params(k, {{"N", 8}})).value();
  MemoryImage inputs;
  inputs.buffers["in"] = make_ints({8}, {1, 2, 3, 4, 5, 6, 7, 8});
  auto out = run_sequential(bound, inputs);
  REQUIRE(out.ok());
  std::vector<long long> expect = {0, 0, 0, 0, 1, 2, 3, 4};
  for (int i = 0; i < 8; ++i) CHECK(out->find("out")->ints[i] == expect[i]);
}

TEST_CASE("three-PE chain equals the sequential kernel") {
  const char* seq_text = R"(kernel scale(N) {
    mem in[N]: i32 @0;
    mem out[N]: i32 @1;
    #pipeline
    for i in 0..N {
      out[i] = in[i] * 3 + 1;
    }
  })";
  const char* chain_text = R"(kernel scale(N) {
    mem in[N]: i32 @0;
    mem out[N]: i32 @1;
    fifo a: i32 depth 16;
    fifo b: i32 depth 16;
    pe reader {
      #pipeline
      for i in 0..N {
        a.push(in[i]);
      }
    }
    pe compute {
      #pipeline
      for i in 0..N {
        b.push(a.pop() * 3 + 1);
      }
    }
    pe writer {
      #pipeline
      for i in 0..N {
        out[i] = b.pop();
      }
    }
  })";
  Kernel seq = std::move(substitute_params(parse_or_die(seq_text), {{"N", 16}})).value();
  Kernel chain = std::move(substitute_params(parse_or_die(chain_text), {{"N", 16}})).value();
  REQUIRE(validate(chain).empty());

  MemoryImage inputs;
  std::vector<long long> vals;
  for (int i = 0; i < 16; ++i) vals.push_back(i * 7 - 20);
  inputs.buffers["in"] = make_ints({16}, vals);

  auto ref = run_sequential(seq, inputs);
  REQUIRE(ref.ok());
  auto flow = run_dataflow(chain, inputs);
  REQUIRE(flow.ok());
  CHECK_FALSE(flow->trace.deadlock);
  for (int i = 0; i < 16; ++i)
    CHECK(flow->image.find("out")->ints[i] == ref->find("out")->ints[i]);

  // Conservation: pushes equal pops on every channel.
  CHECK(flow->trace.conserved());
  for (const auto& c : flow->trace.channels) {
    CHECK(c.pushes == 16);
    CHECK(c.pops == 16);
  }

  // Scheduler order does not change the output.
  DataflowOptions rev;
  rev.reverse_order = true;
  auto flow2 = run_dataflow(chain, inputs, rev);
  REQUIRE(flow2.ok());
  for (int i = 0; i < 16; ++i)
    CHECK(flow2->image.find("out")->ints[i] == ref->find("out")->ints[i]);
}

TEST_CASE("deadlock is reported with the blocked channel set") {
  // The consumer needs two elements of lookahead but the channel holds one.
  Kernel k = parse_or_die(R"(kernel dl(N) {
    mem in[N]: i32 @0;
    mem out[N]: i32 @1;
    fifo a: i32 depth 1;
    fifo b: i32 depth 1;
    pe producer {
      for i in 0..N {
        a.push(in[i]);
        b.push(in[i] + 1);
      }
    }
    pe consumer {
      for i in 0..N {
        out[i] = b.pop() + a.pop();
      }
    }
  })");
  // producer: pushes a then b; with depth 1 it can hold one element each.
  // consumer pops b first. For N=3 the producer fills a, blocks pushing b?
  // No: it pushes a[0], b[0]; consumer pops b[0], blocks on a? It pops b
  // first, then a. This ordering completes; force the deadlock with a
  // consumer that pops two elements of `a` before touching `b`.
  Kernel k2 = parse_or_die(R"(kernel dl2(N) {
    mem in[N]: i32 @0;
    mem out[N]: i32 @1;
    fifo a: i32 depth 1;
    fifo b: i32 depth 1;
    pe producer {
      for i in 0..N {
        a.push(in[i]);
        b.push(in[i] + 1);
      }
    }
    pe consumer {
      for i in 0..N {
        out[i] = a.pop() + a.pop() + b.pop();
      }
    }
  })");
  (void)k;
  Kernel bound = std::move(substitute_params(k2, {{"N", 4}})).value();
  MemoryImage inputs;
  inputs.buffers["in"] = make_ints({4}, {1, 2, 3, 4});
  auto flow = run_dataflow(bound, inputs);
  REQUIRE(flow.ok());
  CHECK(flow->trace.deadlock);
  REQUIRE_FALSE(flow->trace.blocked_channels.empty());
}

TEST_CASE("kernel is equivalent to itself") {
  Kernel k = bound_matmul(4, 4, 4, "i32");
  Verdict v = check_equivalence(k, k, 8, 1, false);
  INFO(v.summary());
  CHECK(v.pass);
}

TEST_CASE("equivalence detects a real difference with a counterexample") {
  Kernel a = bound_matmul(4, 4, 4, "i32");
  Kernel b = parse_or_die(R"(kernel matmul(N, K, M) {
    mem A[N][K]: i32 @0;
    mem B[K][M]: i32 @1;
    mem C[N][M]: i32 @0;
    reg acc: i32;
    for n in 0..N {
      for m in 0..M {
        acc = C[n][m];
        #pipeline
        for k in 0..K {
          acc = acc + A[n][k] * B[k][m] + 1;
        }
        C[n][m] = acc;
      }
    }
  })");
  Kernel bb = std::move(substitute_params(b, {{"N", 4}, {"K", 4}, {"M", 4}})).value();
  Verdict v = check_equivalence(a, bb, 4, 1, false);
  CHECK_FALSE(v.pass);
  CHECK(v.counterexample.find("output 'C'") != std::string::npos);
}

TEST_CASE("reassociated float sum passes in tolerance mode") {
  // Same sum in two association orders: forward, and strip-mined in two
  // partial accumulators.
  const char* fwd = R"(kernel s(N) {
    mem a[N]: f32 @0;
    mem out[1]: f32 @1;
    reg acc: f32;
    acc = 0;
    #pipeline
    for i in 0..N {
      acc = acc + a[i];
    }
    out[0] = acc;
  })";
  const char* part = R"(kernel s(N) {
    mem a[N]: f32 @0;
    mem out[1]: f32 @1;
    reg acc0: f32;
    reg acc1: f32;
    acc0 = 0;
    acc1 = 0;
    #pipeline
    for i in 0..N/2 {
      acc0 = acc0 + a[2*i];
      acc1 = acc1 + a[2*i + 1];
    }
    out[0] = acc0 + acc1;
  })";
  Kernel a = std::move(substitute_params(parse_or_die(fwd), {{"N", 64}})).value();
  Kernel b = std::move(substitute_params(parse_or_die(part), {{"N", 64}})).value();
  Verdict tol = check_equivalence(a, b, 16, 3, true);
  INFO(tol.summary());
  CHECK(tol.pass);
  CHECK(tol.rel_tol == 1e-5);
}

TEST_CASE("interpreter runs are deterministic") {
  Kernel k = bound_matmul(4, 4, 4, "f32");
  Verdict v1 = check_equivalence(k, k, 4, 42, false);  // exact, same seeds
  CHECK(v1.pass);
}

TEST_CASE("memory image text round trip") {
  BufferData b;
  b.elem = DataType::f32();
  b.shape = {2, 3};
  b.allocate();
  for (int i = 0; i < 6; ++i) b.floats[i] = 0.5f * i - 1.0f;
  b.written.assign(6, true);
  std::string text = save_memory_text("grid", b);
  auto parsed = parse_memory_text(text);
  REQUIRE(parsed.ok());
  CHECK(parsed->first == "grid");
  CHECK(parsed->second.shape == std::vector<long long>{2, 3});
  for (int i = 0; i < 6; ++i) CHECK(parsed->second.floats[i] == b.floats[i]);
}

TEST_CASE("run stats count off-chip accesses") {
  Kernel k = parse_or_die(R"(kernel t(N) {
    mem a[N]: i32 @0;
    mem b[N]: i32 @1;
    for i in 0..N {
      b[i] = a[i] + a[i];
    }
  })");
  Kernel bound = std::move(substitute_params(k, {{"N", 8}})).value();
  MemoryImage inputs;
  inputs.buffers["a"] = make_ints({8}, {0, 1, 2, 3, 4, 5, 6, 7});
  RunStats stats;
  auto out = run_sequential(bound, inputs, {}, &stats);
  REQUIRE(out.ok());
  CHECK(stats.offchip_reads == 16);
  CHECK(stats.offchip_writes == 8);
}
