#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "hlsopt/analysis.hpp"
#include "hlsopt/device.hpp"
#include "hlsopt/parse.hpp"
#include "testutil.hpp"

using namespace hlsopt;
using hlsopt::test::parse_or_die;

namespace {

Kernel bound_matmul(long long n = 8, long long kk = 8, long long m = 8,
                    const std::string& elem = "f32") {
  Kernel k = parse_or_die(test::naive_matmul_text(elem));
  return std::move(substitute_params(k, {{"N", n}, {"K", kk}, {"M", m}})).value();
}

}  // namespace

TEST_CASE("scalar accumulation carries a distance-1 dependence at L(fadd)") {
  DeviceConfig cfg;
  Kernel k = bound_matmul();
  auto deps = find_dependences(k, cfg);
  REQUIRE_FALSE(deps.empty());
  bool found = false;
  for (const auto& d : deps) {
    if (d.buffer == "acc") {
      found = true;
      REQUIRE(d.distance.has_value());
      CHECK(*d.distance == 1);
      CHECK(d.path_latency == 8);  // f32 addition
      CHECK_FALSE(d.state_update);
    }
  }
  CHECK(found);
}

TEST_CASE("naive matmul k-loop gets ii=8 from the recurrence") {
  DeviceConfig cfg;
  Kernel k = bound_matmul();
  auto ii = infer_ii("k", k, cfg);
  REQUIRE(ii.ok());
  CHECK(ii->ii == 8);
  CHECK(ii->reason.find("recurrence") != std::string::npos);
}

TEST_CASE("integer accumulation pipelines directly") {
  DeviceConfig cfg;
  Kernel k = bound_matmul(8, 8, 8, "i32");
  auto ii = infer_ii("k", k, cfg);
  REQUIRE(ii.ok());
  CHECK(ii->ii == 1);
}

TEST_CASE("buffered accumulation: same location written every M iterations") {
  // Transposed loop shape: acc[m] written at iteration m of the pipelined
  // m-loop, read again M iterations later when the k-loop advances.
  Kernel k = parse_or_die(R"(kernel t(N, K, M) {
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
      for m2 in 0..M {
        C[n][m2] = acc[m2];
      }
    }
  })");
  REQUIRE(validate(k).empty());
  Kernel bound = std::move(substitute_params(k, {{"N", 4}, {"K", 4}, {"M", 16}})).value();
  DeviceConfig cfg;
  auto deps = find_dependences(bound, cfg);
  bool found = false;
  for (const auto& d : deps)
    if (d.buffer == "acc" && d.distance) {
      found = true;
      CHECK(*d.distance == 16);
    }
  REQUIRE(found);
  auto ii = infer_ii("m", bound, cfg);
  REQUIRE(ii.ok());
  CHECK(ii->ii == 1);  // distance 16 >= path latency (ram read 1 + fadd 8)
}

TEST_CASE("loop with no writes yields no dependences") {
  Kernel k = parse_or_die(R"(kernel r(N) {
    mem a[N]: i32 @0;
    mem b[N]: i32 @1;
    #pipeline
    for i in 0..N {
      b[i] = a[i] + 1;
    }
  })");
  Kernel bound = std::move(substitute_params(k, {{"N", 64}})).value();
  CHECK(find_dependences(bound, DeviceConfig{}).empty());
}

TEST_CASE("two off-chip reads of one interface force ii=2 by contention") {
  // One array read twice per iteration through a single-port memory bank.
  Kernel k = parse_or_die(R"(kernel c(N) {
    mem A[N]: i32 @0;
    mem B[N]: i32 @1;
    #pipeline
    for i in 0..N/2 {
      B[i] = A[i] + A[N/2 + i];
    }
  })");
  Kernel bound = std::move(substitute_params(k, {{"N", 64}})).value();
  DeviceConfig cfg;
  auto ii = infer_ii("i", bound, cfg);
  REQUIRE(ii.ok());
  CHECK(ii->ii == 2);
  CHECK(ii->reason.find("contention") != std::string::npos);
}

TEST_CASE("histogram: unknown-distance recurrence gives ii = path latency") {
  Kernel k = parse_or_die(R"(kernel hist(N) {
    mem data[N]: u32 @0;
    mem out[256]: u32 @1;
    ram bins[256]: u32;
    reg b: u32;
    for z in 0..256 {
      bins[z] = 0;
    }
    #pipeline
    for i in 0..N {
      b = data[i] % 256;
      bins[b] = bins[b] + 1;
    }
    for w in 0..256 {
      out[w] = bins[w];
    }
  })");
  Kernel bound = std::move(substitute_params(k, {{"N", 128}})).value();
  DeviceConfig cfg;
  auto ii = infer_ii("i", bound, cfg);
  REQUIRE(ii.ok());
  CHECK(ii->ii == 2);  // RAM read 1 + integer add 1
  CHECK(ii->reason.find("recurrence") != std::string::npos);
  CHECK(ii->reason.find("unknown") != std::string::npos);
}

TEST_CASE("partial accumulation buffers bound the distance structurally") {
  // Two interleaved partial histograms: same bin can only repeat after two
  // iterations, so the 2-cycle update chain reaches ii=1.
  Kernel k = parse_or_die(R"(kernel hist2(N) {
    mem data[N]: u32 @0;
    mem out[256]: u32 @1;
    ram bins[2][256]: u32;
    reg b: u32;
    #pipeline
    for i in 0..N {
      b = data[i] % 256;
      bins[i % 2][b] = bins[i % 2][b] + 1;
    }
    for w in 0..256 {
      out[w] = bins[0][w] + bins[1][w];
    }
  })");
  Kernel bound = std::move(substitute_params(k, {{"N", 128}})).value();
  DeviceConfig cfg;
  auto ii = infer_ii("i", bound, cfg);
  REQUIRE(ii.ok());
  CHECK(ii->ii == 1);
}

TEST_CASE("single flat pipelined loop follows C = L + I*(N-1)") {
  // L = 5 via a chain of four unit adds after an off-chip read; I = 1.
  Kernel k = parse_or_die(R"(kernel f(N) {
    mem a[N]: i32 @0;
    mem b[N]: i32 @1;
    #pipeline
    for i in 0..N {
      b[i] = a[i] + 1 + 1 + 1 + 1;
    }
  })");
  Kernel bound = std::move(substitute_params(k, {{"N", 100}})).value();
  DeviceConfig cfg;
  auto report = cycle_count(bound, cfg);
  REQUIRE(report.ok());
  REQUIRE(report->loops.size() == 1);
  CHECK(report->loops[0].latency == 5);
  CHECK(report->loops[0].ii == 1);
  CHECK(report->loops[0].cycles == 5 + 1 * (100 - 1));
  CHECK(report->total_cycles == 104);
}

TEST_CASE("target ii raises the initiation interval") {
  Kernel k = parse_or_die(R"(kernel f(N) {
    mem a[N]: i32 @0;
    mem b[N]: i32 @1;
    #pipeline ii 4
    for i in 0..N {
      b[i] = a[i];
    }
  })");
  Kernel bound = std::move(substitute_params(k, {{"N", 10}})).value();
  auto report = cycle_count(bound, DeviceConfig{});
  REQUIRE(report.ok());
  CHECK(report->loops[0].ii == 4);
  CHECK(report->loops[0].ii_reason == "target");
  CHECK(report->loops[0].cycles == report->loops[0].latency + 4 * 9);
}

TEST_CASE("nested non-pipelined loop pays inner fill per iteration") {
  // Outer loop over a pipelined inner loop plus a trailing statement:
  // C = N1 * (L0 + N0 - 1) + L1.
  Kernel k = parse_or_die(R"(kernel nest(N0, N1) {
    mem a[N1][N0]: i32 @0;
    mem b[N1][N0]: i32 @1;
    mem c[N1]: i32 @1;
    reg s: i32;
    for i in 0..N1 {
      #pipeline
      for j in 0..N0 {
        b[i][j] = a[i][j] + 1;
      }
      c[i] = i;
    }
  })");
  DeviceConfig cfg;
  for (auto [n0, n1] : {std::pair{4LL, 1000LL}, std::pair{16LL, 16LL}}) {
    Kernel bound = std::move(substitute_params(k, {{"N0", n0}, {"N1", n1}})).value();
    auto report = cycle_count(bound, cfg);
    REQUIRE(report.ok());
    REQUIRE(report->loops.size() == 1);
    long long l0 = report->loops[0].latency;
    // trailing statement: write of literal -> latency 1
    CHECK(report->total_cycles == n1 * (l0 + n0 - 1) + 1);
  }
}

TEST_CASE("coalesced perfect nest pipelines as one flat loop") {
  Kernel k = parse_or_die(R"(kernel flatten(N0, N1) {
    mem a[N1][N0]: i32 @0;
    mem b[N1][N0]: i32 @1;
    #pipeline
    for i in 0..N1 {
      for j in 0..N0 {
        b[i][j] = a[i][j] + 1;
      }
    }
  })");
  Kernel bound = std::move(substitute_params(k, {{"N0", 16}, {"N1", 16}})).value();
  auto report = cycle_count(bound, DeviceConfig{});
  REQUIRE(report.ok());
  REQUIRE(report->loops.size() == 1);
  CHECK(report->loops[0].trip == 256);
  CHECK(report->total_cycles == report->loops[0].latency + 255);
}

TEST_CASE("two-PE chain: latency additive, slowest actor sets the rate") {
  Kernel k = parse_or_die(R"(kernel chain(N) {
    mem in[N]: i32 @0;
    mem out[N]: i32 @1;
    fifo ch: i32 depth 16;
    pe producer {
      #pipeline
      for i in 0..N {
        ch.push(in[i]);
      }
    }
    pe consumer {
      #pipeline
      for i in 0..N {
        out[i] = ch.pop() + 1;
      }
    }
  })");
  Kernel bound = std::move(substitute_params(k, {{"N", 1000}})).value();
  auto report = cycle_count(bound, DeviceConfig{});
  REQUIRE(report.ok());
  REQUIRE(report->loops.size() == 2);
  long long l0 = report->loops[0].latency;
  long long l1 = report->loops[1].latency;
  long long cmax = std::max(report->loops[0].cycles, report->loops[1].cycles);
  long long lmin = report->loops[0].cycles >= report->loops[1].cycles ? l1 : l0;
  CHECK(report->total_cycles == cmax + lmin);
  // Composition identity for equal trip counts: sum of latencies plus
  // max(I) * (N - 1).
  CHECK(report->total_cycles == l0 + l1 + 1 * (1000 - 1));
}

TEST_CASE("estimate_resources counts unrolled compute units and buffer bits") {
  Kernel k = parse_or_die(R"(kernel r(N) {
    mem a[N]: f32 @0;
    mem b[N]: f32 @1;
    ram acc[16]: f32;
    #pipeline
    for i in 0..N/4 {
      #unroll
      for u in 0..4 {
        acc[u] = acc[u] + a[i*4+u] * b[i*4+u];
      }
    }
  })");
  Kernel bound = std::move(substitute_params(k, {{"N", 64}})).value();
  auto res = estimate_resources(bound, DeviceConfig{});
  CHECK(res.compute_units["add.float"] >= 4);
  CHECK(res.compute_units["mul.float"] >= 4);
  CHECK(res.onchip_bits == 16 * 32);
  CHECK(res.offchip_banks.size() == 2);
  CHECK(res.over_capacity.empty());
}

TEST_CASE("empty kernel has all-zero resources") {
  Kernel k = parse_or_die("kernel e(){}");
  auto res = estimate_resources(k, DeviceConfig{});
  CHECK(res.onchip_bits == 0);
  CHECK(res.compute_units.empty());
  CHECK(res.fifo_count == 0);
}

TEST_CASE("max vector width follows floor(B/(f*S))") {
  DeviceConfig cfg;  // 19.2e9 B/s per bank, 200 MHz
  CHECK(max_vector_width(0, DataType::f32(), cfg) == 24);
  CHECK(max_vector_width(0, DataType::f64(), cfg) == 12);
  BankConfig boundary;
  boundary.bandwidth_bytes_per_s = cfg.clock_hz * 4;  // B = f*S exactly
  CHECK(max_vector_width(boundary, DataType::f32(), cfg) == 1);
}

TEST_CASE("Eq.1 identity holds in every emitted record") {
  DeviceConfig cfg;
  Kernel bound = bound_matmul(6, 5, 7);
  auto report = cycle_count(bound, cfg);
  REQUIRE(report.ok());
  for (const auto& r : report->loops)
    CHECK(r.cycles == r.latency + r.ii * (r.trip - 1));
}

TEST_CASE("raising a latency table entry never decreases ii or cycles") {
  Kernel bound = bound_matmul(6, 6, 6);
  DeviceConfig base;
  auto r0 = cycle_count(bound, base);
  REQUIRE(r0.ok());
  std::mt19937_64 rng(3);
  const std::pair<const char*, DataType> keys[] = {
      {"add", DataType::f32()},
      {"mul", DataType::f32()},
      {"add", DataType::i32()},
      {"cmp", DataType::i32()}};
  for (int trial = 0; trial < 20; ++trial) {
    DeviceConfig raised = base;
    for (const auto& [op, type] : keys)
      if (rng() % 2)
        raised.latency_overrides[std::string(op) + "." +
                                 DeviceConfig::type_class(type)] =
            base.op_latency(op, type) + int(rng() % 8);
    auto r1 = cycle_count(bound, raised);
    REQUIRE(r1.ok());
    CHECK(r1->total_cycles >= r0->total_cycles);
    for (size_t i = 0; i < r0->loops.size(); ++i)
      CHECK(r1->loops[i].ii >= r0->loops[i].ii);
  }
}

TEST_CASE("ii is 1 when distances cover latencies and ports suffice") {
  // Property: distance >= path latency and single accesses per interface.
  Kernel k = parse_or_die(R"(kernel p(N, D) {
    mem a[N]: f32 @0;
    mem b[N]: f32 @1;
    ram acc[D]: f32;
    reg v: f32;
    #pipeline
    for i in 0..N {
      v = acc[i % D] + a[i];
      acc[i % D] = v;
      b[i] = v;
    }
  })");
  DeviceConfig cfg;
  for (long long d : {9LL, 16LL, 32LL}) {  // path = ram 1 + fadd 8 = 9
    Kernel bound = std::move(substitute_params(k, {{"N", 64}, {"D", d}})).value();
    auto ii = infer_ii("i", bound, cfg);
    REQUIRE(ii.ok());
    CHECK(ii->ii == 1);
  }
  // Below the latency the recurrence binds: ceil(9/4) = 3.
  Kernel bound = std::move(substitute_params(k, {{"N", 64}, {"D", 4}})).value();
  auto ii = infer_ii("i", bound, cfg);
  REQUIRE(ii.ok());
  CHECK(ii->ii == 3);
}

TEST_CASE("device config parsing") {
  auto empty = parse_device_config("");
  REQUIRE(empty.ok());
  CHECK(empty->clock_hz == 200e6);
  CHECK(empty->num_banks() == 2);

  auto cfg = parse_device_config(
      "latency.fadd.f32 = 10\n"
      "# comment\n"
      "clock_hz = 300e6\n"
      "bank.0.bandwidth = 9.6e9\n");
  REQUIRE(cfg.ok());
  CHECK(cfg->op_latency("add", DataType::f32()) == 10);
  CHECK(cfg->op_latency("add", DataType::f64()) == 8);  // untouched default
  CHECK(cfg->clock_hz == 300e6);
  CHECK(cfg->bank(0).bandwidth_bytes_per_s == 9.6e9);

  CHECK_FALSE(parse_device_config("bank.0.bandwidth = 0").ok());
  CHECK_FALSE(parse_device_config("latency.fadd.f32 = -1").ok());
  CHECK_FALSE(parse_device_config("nonsense").ok());
  CHECK_FALSE(parse_device_config("mystery_key = 3").ok());
}

TEST_CASE("unbound parameters are an error for cycle_count") {
  Kernel k = parse_or_die(test::naive_matmul_text());
  auto report = cycle_count(k, DeviceConfig{});
  REQUIRE_FALSE(report.ok());
  CHECK(report.error().find("unbound") != std::string::npos);
}
