#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "hlsopt/ir.hpp"
#include "hlsopt/parse.hpp"
#include "hlsopt/print.hpp"
#include "testutil.hpp"

using namespace hlsopt;
using hlsopt::test::parse_or_die;

TEST_CASE("naive matmul parses to a three-deep nest with pipelined k loop") {
  Kernel k = parse_or_die(test::naive_matmul_text());
  CHECK(k.name == "matmul");
  CHECK(k.parameters == std::vector<std::string>{"N", "K", "M"});
  REQUIRE(k.top.size() == 1);
  const Stmt& n = *k.top[0];
  REQUIRE(n.kind == StmtKind::Loop);
  REQUIRE(n.loop.body.size() == 1);
  const Stmt& m = *n.loop.body[0];
  REQUIRE(m.kind == StmtKind::Loop);
  REQUIRE(m.loop.body.size() == 3);
  const Stmt& kk = *m.loop.body[1];
  REQUIRE(kk.kind == StmtKind::Loop);
  CHECK(kk.loop.iterator == "k");
  CHECK(kk.loop.pragma.is_pipeline());
}

TEST_CASE("empty kernel parses to empty top") {
  Kernel k = parse_or_die("kernel k(){}");
  CHECK(k.name == "k");
  CHECK(k.top.empty());
  CHECK(k.buffers.empty());
  CHECK(validate(k).empty());
}

TEST_CASE("unclosed loop is a syntax error at end of input") {
  auto r = parse("kernel k(N){ mem a[N]: i32 @0; for i in 0..N {");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().find("expected") != std::string::npos);
}

TEST_CASE("duplicate declaration is rejected") {
  auto r = parse("kernel k(N){ mem a[N]: i32 @0; mem a[N]: i32 @0; }");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().find("duplicate") != std::string::npos);
}

TEST_CASE("unknown pragma is rejected") {
  auto r = parse("kernel k(N){ mem a[N]: i32 @0; #vectorize for i in 0..N { a[i] = 0; } }");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().find("unknown pragma") != std::string::npos);
}

TEST_CASE("round trip: parse(print(k)) == k") {
  const char* sources[] = {
      "kernel k(){}",
      R"(kernel s(N, M) {
        mem a[N][M]: f32 @0;
        mem b[N][M]: f32 @1;
        ram line[M]: f32;
        reg t: f32;
        fifo ch: vec<f32,4> depth 32;
        func helper {
          t = t + 1;
        }
        for i in 0..N {
          #pipeline ii 2
          for j in 0..M {
            t = i < N - 1 ? a[i][j] : cast<f32>(j);
            line[j] = min(t, b[i][j]) + max(t, 2) * 3;
            ch.push(t);
            if j == M - 1 {
              b[i][j] = line[j % M] / (t - 4);
              call helper;
            }
          }
        }
        #unroll 4
        for u in 0..4 {
          b[0][u] = 0 - line[u];
        }
      })",
  };
  for (const char* src : sources) {
    Kernel k = parse_or_die(src);
    std::string text = print(k);
    Kernel k2 = parse_or_die(text);
    CHECK(struct_equal(k, k2));
    CHECK(print(k2) == text);  // printing is a fixed point
  }
}

TEST_CASE("round trip for the matmul fixture") {
  Kernel k = parse_or_die(test::naive_matmul_text());
  Kernel k2 = parse_or_die(print(k));
  CHECK(struct_equal(k, k2));
}

TEST_CASE("pe blocks print one block per element with channel declarations") {
  Kernel k = parse_or_die(R"(kernel chain(N) {
    mem in[N]: i32 @0;
    mem out[N]: i32 @0;
    fifo ch: i32 depth 16;
    pe reader {
      #pipeline
      for i in 0..N {
        ch.push(in[i]);
      }
    }
    pe writer {
      #pipeline
      for i in 0..N {
        out[i] = ch.pop();
      }
    }
  })");
  REQUIRE(validate(k).empty());
  std::string text = print(k);
  CHECK(text.find("fifo ch: i32 depth 16;") != std::string::npos);
  CHECK(text.find("pe reader {") != std::string::npos);
  CHECK(text.find("pe writer {") != std::string::npos);
  Kernel k2 = parse_or_die(text);
  CHECK(struct_equal(k, k2));
}

TEST_CASE("parser is total on random byte strings") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> len(0, 200);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string s(len(rng), '\0');
    for (auto& c : s) c = static_cast<char>(byte(rng));
    auto r = parse(s);  // must return, never crash or hang
    (void)r;
  }
}

TEST_CASE("parser is total on random token soup") {
  // Structured garbage exercises deeper parser paths than raw bytes.
  const char* words[] = {"kernel", "for",  "in", "if",  "pe",   "func", "mem",
                         "{",      "}",    "(",  ")",   "[",    "]",    ";",
                         "..",     "=",    "+",  "*",   "?",    ":",    "i32",
                         "a",      "b",    "0",  "1",   "#",    "pipeline"};
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<size_t> pick(0, std::size(words) - 1);
  std::uniform_int_distribution<int> len(0, 60);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string s;
    int n = len(rng);
    for (int i = 0; i < n; ++i) {
      s += words[pick(rng)];
      s += ' ';
    }
    auto r = parse(s);
    (void)r;
  }
}

TEST_CASE("deeply nested input reports an error instead of overflowing") {
  std::string deep = "kernel k(N){ mem a[N]: i32 @0; a[";
  for (int i = 0; i < 5000; ++i) deep += "(";
  auto r = parse(deep);
  REQUIRE_FALSE(r.ok());
}
