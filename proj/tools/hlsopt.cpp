// Batch driver: parse a kernel, analyze it, apply a transformation recipe
// with per-stage reports and equivalence verdicts, query the transformation
// cheat sheet, run the interpreter or dataflow simulator, and materialize
// the built-in corpus.
//
// Exit codes: 0 success, 1 diagnostics or inapplicable transformation,
// 2 equivalence failure, 3 deadlock.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "hlsopt/advise.hpp"
#include "hlsopt/analysis.hpp"
#include "hlsopt/corpus.hpp"
#include "hlsopt/dataflow.hpp"
#include "hlsopt/device.hpp"
#include "hlsopt/equivalence.hpp"
#include "hlsopt/interp.hpp"
#include "hlsopt/parse.hpp"
#include "hlsopt/print.hpp"
#include "hlsopt/report.hpp"
#include "hlsopt/transform/recipe.hpp"

namespace fs = std::filesystem;
using namespace hlsopt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDiagnostics = 1;
constexpr int kExitEquivalence = 2;
constexpr int kExitDeadlock = 3;

Result<std::string> read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) return Result<std::string>::failure("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result<std::map<std::string, long long>> parse_bindings(const std::string& s) {
  using R = Result<std::map<std::string, long long>>;
  std::map<std::string, long long> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (cur.empty()) continue;
      auto eq = cur.find('=');
      if (eq == std::string::npos)
        return R::failure("binding '" + cur + "' is not NAME=VALUE");
      try {
        out[cur.substr(0, eq)] = std::stoll(cur.substr(eq + 1));
      } catch (...) {
        return R::failure("bad value in binding '" + cur + "'");
      }
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

struct LoadedKernel {
  Kernel kernel;
  DeviceConfig config;
};

Result<LoadedKernel> load_kernel(const std::string& path,
                                 const std::string& device_path,
                                 const std::string& bind) {
  using R = Result<LoadedKernel>;
  auto text = read_file(path);
  if (!text) return R::failure(text.error());
  auto parsed = parse(*text);
  if (!parsed) return R::failure(path + ": " + parsed.error());
  Kernel k = std::move(parsed).value();
  auto diags = validate(k);
  if (!diags.empty()) {
    std::string msg = path + ": kernel does not validate:";
    for (const auto& d : diags)
      msg += "\n  " + d.message +
             (d.span.valid() ? " at " + d.span.str() : "");
    return R::failure(msg);
  }
  DeviceConfig config;
  if (!device_path.empty()) {
    auto cfg = load_device_config(device_path);
    if (!cfg) return R::failure(cfg.error());
    config = std::move(cfg).value();
  }
  if (!bind.empty()) {
    auto bindings = parse_bindings(bind);
    if (!bindings) return R::failure(bindings.error());
    auto bound = substitute_params(k, *bindings);
    if (!bound) return R::failure(bound.error());
    k = std::move(bound).value();
  }
  return LoadedKernel{std::move(k), std::move(config)};
}

int run_analyze(const std::string& kernel_path, const std::string& device,
                const std::string& bind, const std::string& format) {
  auto loaded = load_kernel(kernel_path, device, bind);
  if (!loaded) {
    std::cerr << loaded.error() << "\n";
    return kExitDiagnostics;
  }
  auto report = cycle_count(loaded->kernel, loaded->config);
  if (!report) {
    std::cerr << report.error() << "\n";
    return kExitDiagnostics;
  }
  if (format == "json") std::cout << to_json(*report).dump(2) << "\n";
  else std::cout << perf_text(*report);
  return kExitOk;
}

int run_apply(const std::string& kernel_path, const std::string& recipe_path,
              const std::string& device, const std::string& bind,
              int verify_trials, unsigned long long seed,
              const std::string& emit, const std::string& format) {
  auto loaded = load_kernel(kernel_path, device, bind);
  if (!loaded) {
    std::cerr << loaded.error() << "\n";
    return kExitDiagnostics;
  }
  auto recipe_text = read_file(recipe_path);
  if (!recipe_text) {
    std::cerr << recipe_text.error() << "\n";
    return kExitDiagnostics;
  }
  auto steps = parse_recipe(*recipe_text);
  if (!steps) {
    std::cerr << steps.error() << "\n";
    return kExitDiagnostics;
  }
  if (verify_trials > 0) std::cout << "seed: " << seed << "\n";

  Kernel current = loaded->kernel;
  nlohmann::json stages_json = nlohmann::json::array();
  int exit_code = kExitOk;
  int stage_no = 0;
  for (const auto& step : *steps) {
    ++stage_no;
    auto before_perf = cycle_count(current, loaded->config);
    auto result = apply_step(current, step, loaded->config);
    if (!result) {
      std::cerr << "stage " << stage_no << " (" << step.name << " "
                << step.target << "): " << result.error() << "\n";
      return kExitDiagnostics;
    }
    auto after_perf = cycle_count(result->kernel, loaded->config);
    StageReport report;
    report.stage = stage_no;
    report.step = step;
    if (before_perf) report.before = *before_perf;
    if (after_perf) report.after = *after_perf;
    if (before_perf && after_perf && report.after.steady_cycles > 0)
      report.fold = static_cast<double>(report.before.steady_cycles) /
                    static_cast<double>(report.after.steady_cycles);
    if (before_perf && after_perf && report.after.total_cycles > 0)
      report.cycles_fold = static_cast<double>(report.before.total_cycles) /
                           static_cast<double>(report.after.total_cycles);
    report.notes = result->notes;
    if (verify_trials > 0) {
      report.verified = true;
      report.verdict =
          check_equivalence(current, result->kernel, verify_trials, seed,
                            result->needs_tolerance, result->io_map);
    }
    if (format == "json") stages_json.push_back(to_json(report));
    else std::cout << stage_text(report);
    if (report.verified && !report.verdict.pass) {
      if (report.verdict.error.find("deadlock") != std::string::npos)
        exit_code = kExitDeadlock;
      else exit_code = kExitEquivalence;
      std::cerr << "stage " << stage_no
                << ": equivalence check failed: " << report.verdict.summary()
                << "\n";
      break;
    }
    current = result->kernel;
  }
  if (format == "json") std::cout << stages_json.dump(2) << "\n";
  if (!emit.empty() && exit_code == kExitOk) {
    std::ofstream out(emit);
    if (!out) {
      std::cerr << "cannot write '" << emit << "'\n";
      return kExitDiagnostics;
    }
    out << print(current);
  }
  return exit_code;
}

int run_advise(const std::string& objectives, const std::string& format) {
  std::set<std::string> codes;
  std::string cur;
  for (char c : objectives + ",") {
    if (c == ',') {
      if (!cur.empty()) codes.insert(cur);
      cur.clear();
    } else {
      cur += static_cast<char>(std::toupper(c));
    }
  }
  auto advice = advise(codes);
  if (!advice) {
    std::cerr << advice.error() << "\n";
    return kExitDiagnostics;
  }
  if (format == "json") {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& a : *advice) {
      nlohmann::json e;
      e["transformation"] = a.info->name;
      e["class"] = a.info->category;
      e["objectives_matched"] = a.matched_objectives;
      nlohmann::json chars = nlohmann::json::object();
      for (size_t i = 0; i < characteristic_codes().size(); ++i)
        chars[characteristic_codes()[i]] = a.info->characteristics[i];
      e["characteristics"] = chars;
      j.push_back(e);
    }
    std::cout << j.dump(2) << "\n";
  } else {
    for (const auto& a : *advice) {
      std::cout << render_row(*a.info) << "  (" << a.info->category
                << "; matches";
      for (const auto& o : a.matched_objectives) std::cout << " " << o;
      std::cout << ")\n";
    }
  }
  return kExitOk;
}

int run_simulate(const std::string& kernel_path, const std::string& device,
                 const std::string& bind, const std::string& inputs_dir,
                 const std::string& out_dir) {
  auto loaded = load_kernel(kernel_path, device, bind);
  if (!loaded) {
    std::cerr << loaded.error() << "\n";
    return kExitDiagnostics;
  }
  MemoryImage inputs;
  if (!inputs_dir.empty()) {
    for (const auto& entry : fs::directory_iterator(inputs_dir)) {
      if (entry.path().extension() != ".mem") continue;
      auto text = read_file(entry.path().string());
      if (!text) {
        std::cerr << text.error() << "\n";
        return kExitDiagnostics;
      }
      auto parsed = parse_memory_text(*text);
      if (!parsed) {
        std::cerr << entry.path().string() << ": " << parsed.error() << "\n";
        return kExitDiagnostics;
      }
      inputs.buffers[parsed->first] = std::move(parsed->second);
    }
  }
  MemoryImage outputs;
  RunStats stats;
  if (loaded->kernel.has_pe_graph()) {
    auto run = run_dataflow(loaded->kernel, inputs);
    if (!run) {
      std::cerr << run.error() << "\n";
      return kExitDiagnostics;
    }
    const SimTrace& trace = run->trace;
    std::cout << "processing elements:\n";
    for (const auto& pe : trace.pes)
      std::cout << "  " << pe.name << ": " << pe.iterations << " iterations, "
                << pe.pushes << " pushes, " << pe.pops << " pops, "
                << pe.stalls << " stalls\n";
    std::cout << "channels:\n";
    for (const auto& c : trace.channels)
      std::cout << "  " << c.name << ": " << c.pushes << " pushed, " << c.pops
                << " popped, max occupancy " << c.max_occupancy << "/"
                << c.depth << "\n";
    stats = trace.stats;
    if (trace.deadlock) {
      std::cerr << "deadlock; blocked channels:";
      for (const auto& c : trace.blocked_channels) std::cerr << " " << c;
      std::cerr << "\n";
      return kExitDeadlock;
    }
    outputs = std::move(run->image);
  } else {
    auto run = run_sequential(loaded->kernel, inputs, {}, &stats);
    if (!run) {
      std::cerr << run.error() << "\n";
      return kExitDiagnostics;
    }
    outputs = std::move(run).value();
  }
  std::cout << "off-chip traffic: " << stats.offchip_reads << " reads, "
            << stats.offchip_writes << " writes, " << stats.offchip_bytes
            << " bytes\n";
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    for (const auto& b : loaded->kernel.buffers) {
      if (b.space.kind != MemorySpace::Kind::OffChip) continue;
      const BufferData* data = outputs.find(b.name);
      if (!data) continue;
      std::ofstream out(fs::path(out_dir) / (b.name + ".mem"));
      out << save_memory_text(b.name, *data);
    }
    std::cout << "outputs written to " << out_dir << "\n";
  }
  return kExitOk;
}

int run_corpus(const std::string& which, const std::string& out_dir) {
  std::vector<std::string> names;
  if (which == "all") {
    for (const auto& [name, entry] : corpus()) names.push_back(name);
  } else if (corpus().count(which)) {
    names.push_back(which);
  } else {
    std::cerr << "unknown corpus kernel '" << which
              << "' (stencil, matmul, nbody or all)\n";
    return kExitDiagnostics;
  }
  fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  fs::create_directories(dir);
  for (const auto& name : names) {
    const CorpusEntry& entry = corpus().at(name);
    {
      std::ofstream out(dir / (name + ".dsl"));
      out << entry.kernel;
    }
    {
      std::ofstream out(dir / (name + ".recipe"));
      out << entry.recipe;
    }
    std::string bind;
    for (const auto& [param, value] : entry.default_bindings)
      bind += (bind.empty() ? "" : ",") + param + "=" + std::to_string(value);
    std::cout << (dir / (name + ".dsl")).string() << " "
              << (dir / (name + ".recipe")).string()
              << "  (suggested: --bind " << bind << ")\n";
  }
  std::ofstream out(dir / "device.cfg");
  out << default_device_config_text();
  std::cout << (dir / "device.cfg").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "hlsopt: loop-nest kernel transformation engine with a pipeline cost "
      "model and interpreter-based equivalence oracles"};
  app.require_subcommand(1);

  std::string kernel_path, recipe_path, device, bind, format = "text";
  std::string emit, objectives, inputs_dir, out_dir, which;
  int verify_trials = 0;
  unsigned long long seed = 0;
  bool no_verify = false;

  auto* analyze = app.add_subcommand("analyze", "performance model report");
  analyze->add_option("kernel", kernel_path, "kernel DSL file")->required();
  analyze->add_option("--device", device, "device configuration file");
  analyze->add_option("--bind", bind, "parameter bindings N=v,M=v");
  analyze->add_option("--report", format, "text or json");

  auto* apply = app.add_subcommand("apply", "run a transformation recipe");
  apply->add_option("kernel", kernel_path, "kernel DSL file")->required();
  apply->add_option("recipe", recipe_path, "recipe file")->required();
  apply->add_option("--device", device, "device configuration file");
  apply->add_option("--bind", bind, "parameter bindings N=v,M=v");
  apply->add_option("--verify", verify_trials,
                    "equivalence trials per stage (0 = off)");
  apply->add_flag("--no-verify", no_verify, "skip equivalence checks");
  apply->add_option("--seed", seed, "random seed for verification (default 0)");
  apply->add_option("--emit", emit, "write the final kernel DSL here");
  apply->add_option("--report", format, "text or json");

  auto* advise_cmd = app.add_subcommand("advise", "transformation cheat sheet");
  advise_cmd->add_option("--objectives", objectives, "comma list: LD,IC,RE,CU,BW,PL,RT,RS")
      ->required();
  advise_cmd->add_option("--report", format, "text or json");

  auto* simulate = app.add_subcommand("simulate", "run the functional oracle");
  simulate->add_option("kernel", kernel_path, "kernel DSL file")->required();
  simulate->add_option("--inputs", inputs_dir, "directory of <buffer>.mem files");
  simulate->add_option("--out", out_dir, "directory for output .mem files");
  simulate->add_option("--device", device, "device configuration file");
  simulate->add_option("--bind", bind, "parameter bindings N=v,M=v");

  auto* corpus_cmd = app.add_subcommand("corpus", "materialize built-in kernels");
  corpus_cmd->add_option("name", which, "stencil, matmul, nbody or all")
      ->required();
  corpus_cmd->add_option("--out", out_dir, "output directory (default .)");

  CLI11_PARSE(app, argc, argv);

  if (analyze->parsed())
    return run_analyze(kernel_path, device, bind, format);
  if (apply->parsed())
    return run_apply(kernel_path, recipe_path, device, bind,
                     no_verify ? 0 : verify_trials, seed, emit, format);
  if (advise_cmd->parsed()) return run_advise(objectives, format);
  if (simulate->parsed())
    return run_simulate(kernel_path, device, bind, inputs_dir, out_dir);
  if (corpus_cmd->parsed()) return run_corpus(which, out_dir);
  return kExitDiagnostics;
}
