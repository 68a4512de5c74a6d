#pragma once

#include <string>

#include "hlsopt/ir.hpp"
#include "hlsopt/parse.hpp"

namespace hlsopt::test {

/// Parses as part of a test fixture; aborts the test on syntax errors.
inline Kernel parse_or_die(const std::string& text) {
  auto r = parse(text);
  if (!r) throw std::runtime_error("fixture parse error: " + r.error());
  return std::move(r).value();
}

/// The naive triple-loop matrix multiplication kernel used across tests.
inline std::string naive_matmul_text(const std::string& elem = "f32") {
  return R"(kernel matmul(N, K, M) {
  mem A[N][K]: )" + elem + R"( @0;
  mem B[K][M]: )" + elem + R"( @1;
  mem C[N][M]: )" + elem + R"( @0;
  reg acc: )" + elem + R"(;
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
)";
}

}  // namespace hlsopt::test
