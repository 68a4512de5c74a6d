#include <catch2/catch_amalgamated.hpp>

#include "hlsopt/analysis.hpp"
#include "hlsopt/corpus.hpp"
#include "hlsopt/equivalence.hpp"
#include "hlsopt/parse.hpp"
#include "hlsopt/print.hpp"
#include "hlsopt/transform/recipe.hpp"
#include "testutil.hpp"

using namespace hlsopt;
using hlsopt::test::parse_or_die;

namespace {

struct StageTrace {
  Kernel kernel;
  EquivalenceMap io_map;  // map of the final stage that introduced one
};

/// Applies a full recipe, checking validation and oracle equivalence after
/// every step (against both the previous stage and the original kernel).
StageTrace run_recipe(const std::string& name,
                      std::map<std::string, long long> bindings, int trials,
                      bool float_kernel) {
  const CorpusEntry& entry = corpus().at(name);
  Kernel original = std::move(
      substitute_params(parse_or_die(entry.kernel), bindings)).value();
  REQUIRE(validate(original).empty());
  auto steps = parse_recipe(entry.recipe);
  REQUIRE(steps.ok());

  DeviceConfig cfg;
  Kernel current = original;
  EquivalenceMap cumulative;
  for (const auto& step : *steps) {
    INFO("step: " << step.name << " " << step.target);
    auto r = apply_step(current, step, cfg);
    INFO((r.ok() ? "applied" : r.error()));
    REQUIRE(r.ok());
    REQUIRE(validate(r->kernel).empty());

    // step-local equivalence
    Verdict v = check_equivalence(current, r->kernel, trials, 11,
                                  float_kernel, r->io_map);
    INFO("stage equivalence: " << v.summary());
    CHECK(v.pass);

    if (!r->io_map.outputs.empty() || r->io_map.replicate_inputs > 1)
      cumulative = r->io_map;
    current = r->kernel;
  }

  // end-to-end equivalence against the untouched kernel
  Verdict v = check_equivalence(original, current, trials, 23, float_kernel,
                                cumulative);
  INFO("end-to-end equivalence: " << v.summary());
  CHECK(v.pass);
  return {current, cumulative};
}

}  // namespace

TEST_CASE("corpus kernels parse, validate and round-trip") {
  for (const auto& [name, entry] : corpus()) {
    INFO(name);
    Kernel k = parse_or_die(entry.kernel);
    CHECK(validate(k).empty());
    Kernel again = parse_or_die(print(k));
    CHECK(struct_equal(k, again));
    auto steps = parse_recipe(entry.recipe);
    REQUIRE(steps.ok());
    CHECK_FALSE(steps->empty());
    auto bound = substitute_params(k, entry.default_bindings);
    REQUIRE(bound.ok());
    CHECK(validate(*bound).empty());
  }
}

TEST_CASE("matmul recipe: every stage validates and stays equivalent") {
  auto result = run_recipe("matmul", {{"N", 16}, {"K", 16}, {"M", 16}}, 6, true);
  CHECK(result.kernel.has_pe_graph());
  // final architecture: B reader + A reader + C reader + C writer + 4 lanes
  CHECK(result.kernel.pes.size() >= 8);
}

TEST_CASE("matmul recipe preserves integer semantics exactly") {
  // Same recipe applied to an integer variant of the kernel.
  const CorpusEntry& entry = corpus().at("matmul");
  std::string text = entry.kernel;
  for (std::string::size_type pos = 0;
       (pos = text.find("f32", pos)) != std::string::npos;)
    text.replace(pos, 3, "i32");
  Kernel original = std::move(substitute_params(
      parse_or_die(text), {{"N", 16}, {"K", 16}, {"M", 16}})).value();
  auto steps = parse_recipe(entry.recipe);
  REQUIRE(steps.ok());
  DeviceConfig cfg;
  Kernel current = original;
  for (const auto& step : *steps) {
    auto r = apply_step(current, step, cfg);
    INFO(step.name << ": " << (r.ok() ? "ok" : r.error()));
    REQUIRE(r.ok());
    current = r->kernel;
  }
  Verdict v = check_equivalence(original, current, 6, 3, false);
  INFO(v.summary());
  CHECK(v.pass);
}

TEST_CASE("stencil recipe: delay buffers, condition flattening, PE chain") {
  auto result = run_recipe("stencil", {{"N", 8}, {"M", 8}, {"T", 4}}, 6, true);
  CHECK(result.kernel.has_pe_graph());
  CHECK(result.kernel.pes.size() == 4 + 2);  // sweeps + loader + writer
}

TEST_CASE("nbody recipe: tiled interleaving and oversubscribed reader") {
  auto result = run_recipe("nbody", {{"N", 64}}, 6, true);
  CHECK(result.kernel.has_pe_graph());
  DeviceConfig cfg;
  auto report = cycle_count(result.kernel, cfg);
  REQUIRE(report.ok());
}

TEST_CASE("matmul stage folds at the pinned 64-cube configuration") {
  const CorpusEntry& entry = corpus().at("matmul");
  Kernel original = std::move(substitute_params(
      parse_or_die(entry.kernel), entry.default_bindings)).value();
  auto steps = parse_recipe(entry.recipe);
  REQUIRE(steps.ok());
  DeviceConfig cfg;

  auto report0 = cycle_count(original, cfg);
  REQUIRE(report0.ok());
  // naive: ii 8 on the k loop
  CHECK(report0->dominant()->ii == 8);

  Kernel current = original;
  std::map<std::string, Kernel> stages;
  for (const auto& step : *steps) {
    auto r = apply_step(current, step, cfg);
    INFO(step.name << ": " << (r.ok() ? "ok" : r.error()));
    REQUIRE(r.ok());
    current = r->kernel;
    stages[step.name] = current;
  }

  // After stage 1 (extraction of C completes it): ii = 1.
  auto stage1 = cycle_count(stages.at("extract_memory_accesses"), cfg);
  REQUIRE(stage1.ok());
  CHECK(stage1->dominant()->ii == 1);
  // steady-state fold of stage 1 is exactly the removed recurrence: 8
  CHECK(report0->steady_cycles == 8 * stage1->steady_cycles);

  auto stage2 = cycle_count(stages.at("vectorize"), cfg);
  REQUIRE(stage2.ok());
  CHECK(stage2->dominant()->ii == 1);
  CHECK(stage1->steady_cycles == 8 * stage2->steady_cycles);

  auto stage3 = cycle_count(stages.at("extract_streaming_dataflow"), cfg);
  REQUIRE(stage3.ok());
  CHECK(stage2->steady_cycles == 4 * stage3->steady_cycles);
}
