#pragma once

// Built-in kernel corpus: a 4-point 2D stencil with chained timesteps, a
// dense matrix multiplication and an all-pairs interaction kernel, each with
// the optimization recipe that takes it from its naive form to a streaming
// architecture. `corpus` on the command line materializes these files.

#include <map>
#include <string>

#include "hlsopt/support.hpp"

namespace hlsopt {

struct CorpusEntry {
  std::string kernel;  // DSL text
  std::string recipe;
  std::map<std::string, long long> default_bindings;
};

inline const std::map<std::string, CorpusEntry>& corpus() {
  static const std::map<std::string, CorpusEntry> entries = {
      {"matmul",
       {
           R"(// Dense matrix multiplication: C = A * B + C.
// The accumulation into a single register serializes the inner loop.
kernel matmul(N, K, M) {
  mem A[N][K]: f32 @0;
  mem B[K][M]: f32 @1;
  mem C[N][M]: f32 @0;
  reg acc: f32;
  for n in 0..N {
    for m in 0..M {
      acc = C[n][m];
      #pipeline
      for k in 0..K {
        acc = acc + A[n][k] * B[k][m];
      }
      C[n][m] = acc;
    }
  }
}
)",
           R"(# Stage 1: enable pipelining and regularize memory accesses.
# Transposing the iteration space buffers one output row per column step,
# removing the accumulation recurrence; the write-out folds under a
# completion guard. Extraction moves all memory traffic into burst engines,
# and flattening removes the per-row pipeline drains.
interleave_accumulation k mode=transpose
extract_memory_accesses A
extract_memory_accesses B
extract_memory_accesses C

# Stage 2: spatial parallelism across the output row.
vectorize m W=8

# Stage 3: temporal parallelism across resident rows of A, then one PE per
# resident row with the B stream passed down the chain.
replicate n P=4 buffer=a share=B_r0
flatten_loop_nest k
flatten_loop_nest n
extract_streaming_dataflow compute pes=4 share=B_r0
)",
           {{"N", 64}, {"K", 64}, {"M", 64}},
       }},
      {"stencil",
       {
           R"(// 4-point stencil over a 2D grid, T chained timesteps.
// Plane t+1 is the neighbor average of plane t; the border rows and
// columns carry over unchanged.
kernel stencil(N, M, T) {
  mem grid[T + 1][N][M]: f32 @0;
  reg c: f32;
  for t in 0..T {
    #pipeline
    for i in 0..N {
      for j in 0..M {
        c = grid[t][i][j];
        grid[t + 1][i][j] = (1 <= i) * (i <= N - 2) * (1 <= j) * (j <= M - 2)
            ? (grid[t][i - 1][j] + grid[t][i][j - 1]
               + grid[t][i][j + 1] + grid[t][i + 1][j]) / 4
            : c;
      }
    }
  }
}
)",
           R"(# Stage 1: delay-buffer the sweep. Each element is read once and
# buffered until its last use two rows later; the sweep reaches one cell
# per cycle.
infer_delay_buffers i buffer=grid

# Reduce the iterator-update logic depth.
flatten_condition q

# Stage 2: one PE per timestep, planes streaming through the chain.
extract_streaming_dataflow t pes=4
)",
           {{"N", 16}, {"M", 16}, {"T", 4}},
       }},
      {"nbody",
       {
           R"(// All-pairs interactions: every body accumulates a softened
// contribution from every other body. The floating-point accumulation
// serializes the inner loop.
kernel nbody(N) {
  mem pos[N]: f32 @0;
  mem mass[N]: f32 @1;
  mem acc[N]: f32 @0;
  reg a: f32;
  for i in 0..N {
    a = 0;
    #pipeline
    for j in 0..N {
      a = a + mass[j] / ((pos[j] - pos[i]) * (pos[j] - pos[i]) + 1);
    }
    acc[i] = a;
  }
}
)",
           R"(# Interleave the accumulation across a tile of resident bodies:
# the recurrence distance grows to the tile size and the pipeline fills.
interleave_accumulation j mode=tiled T=16

# Stream the interacting bodies from memory at full burst rate, reading
# ahead of the compute logic through a widened engine.
extract_memory_accesses mass
oversubscribe_memory mass_r0 widen=4
)",
           {{"N", 256}},
       }},
  };
  return entries;
}

/// The device configuration text the acceptance suite pins: two DRAM banks,
/// 200 MHz, 8-cycle floating-point addition.
inline std::string default_device_config_text() {
  return R"(# Pinned defaults (matching the built-in configuration):
# two DRAM banks behind 64-byte buses, 200 MHz logic clock.
clock_hz = 200e6
banks = 2
bank.0.bandwidth = 19.2e9
bank.0.bus_width = 64
bank.1.bandwidth = 19.2e9
bank.1.bus_width = 64
latency.add.int = 1
latency.mul.int = 3
latency.div.int = 16
latency.fadd = 8
latency.fmul = 6
latency.fdiv = 24
ram_read_latency = 1
capacity.onchip_bits = 33554432
capacity.registers = 1024
capacity.fifo_count = 256
)";
}

}  // namespace hlsopt
