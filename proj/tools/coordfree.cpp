// Command-line pipeline: abstract -> synthesize -> coordfree -> simulate /
// render / verify, with every stage persisted as a hashed artifact.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

#include "coordfree/artifacts.hpp"
#include "coordfree/coordination.hpp"
#include "coordfree/render.hpp"
#include "coordfree/scenario.hpp"
#include "coordfree/set_io.hpp"
#include "coordfree/simulation.hpp"
#include "coordfree/synthesis.hpp"
#include "coordfree/trace_io.hpp"
#include "coordfree/verify.hpp"

using namespace coordfree;

namespace {

struct Globals {
  std::string fidelity;
  unsigned jobs = 1;
  std::size_t memory_budget_mb = 8192;

  std::optional<Fidelity> fidelity_override() const {
    if (fidelity.empty()) return std::nullopt;
    return parse_fidelity(fidelity);
  }
  ExecutionOptions exec() const { return {jobs}; }
  AbstractionOptions abstraction() const { return {jobs, memory_budget_mb << 20}; }
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Partition parse_partition_spec(const std::string& spec, std::size_t num_components) {
  std::vector<std::vector<std::size_t>> classes;
  std::stringstream ss(spec);
  std::string cls;
  while (std::getline(ss, cls, ';')) {
    std::vector<std::size_t> members;
    std::stringstream cs(cls);
    std::string item;
    while (std::getline(cs, item, ',')) {
      try {
        std::size_t used = 0;
        members.push_back(std::stoul(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ParseError("bad partition component '" + item + "' (expected e.g. \"0;1\" or \"0,1\")");
      }
    }
    classes.push_back(std::move(members));
  }
  return Partition::from_classes(classes, num_components);
}

std::string describe(const Partition& p) {
  std::string s;
  for (std::size_t l = 0; l < p.num_classes(); ++l) {
    if (l) s += ";";
    for (std::size_t i = 0; i < p.members(l).size(); ++i) s += (i ? "," : "") + std::to_string(p.members(l)[i]);
  }
  return s;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

LayersArtifact compute_layers(const SystemArtifact& sys, const ControllerArtifact& ctrl, const Partition& partition,
                              const ExecutionOptions& exec) {
  const StateSet w = ctrl.controller.domain();
  DelayChain chain = delay_robust_chain(sys.ts, ctrl.controller, partition, sys.safe, w, exec);
  LayersArtifact lay;
  lay.system_hash = sys.content_hash;
  lay.controller_hash = ctrl.content_hash;
  lay.partition = partition;
  lay.tau = sys.tau;
  lay.grid = sys.ts.state_grid();
  lay.layers = layer_map(chain.sets, chain.fixed_point);
  return lay;
}

int cmd_abstract(const Globals& g, const std::string& scenario, const std::string& out) {
  Stopwatch sw;
  const Scenario s = load_scenario(scenario, g.fidelity_override());
  SystemArtifact a;
  a.scenario_name = s.name;
  a.scenario_digest = scenario_digest(s);
  a.tau = s.tau();
  a.ts = build_system(s, g.abstraction());
  a.safe = safe_set(s, a.ts.state_grid());
  a.partition = s.partition;
  const Digest h = write_system(out, a);
  std::printf("scenario %s: %zu states, %zu joint inputs, %zu successor shapes, |K| = %zu\n", s.name.c_str(),
              a.ts.num_states(), a.ts.num_inputs(), a.ts.num_shapes(), a.safe.count());
  std::printf("wrote %s (sha256 %s) in %.2f s\n", out.c_str(), to_hex(h).c_str(), sw.seconds());
  return 0;
}

int cmd_synthesize(const Globals& g, const std::string& sys_file, const std::string& out) {
  Stopwatch sw;
  const SystemArtifact sys = read_system(sys_file);
  ControllerArtifact c;
  c.system_hash = sys.content_hash;
  c.controller = synthesize_safety_controller(sys.ts, sys.safe, g.exec());
  const Digest h = write_controller(out, c);
  std::printf("|W| = %zu of %zu states (|K| = %zu)\n", c.controller.domain().count(), sys.ts.num_states(),
              sys.safe.count());
  std::printf("wrote %s (sha256 %s) in %.2f s\n", out.c_str(), to_hex(h).c_str(), sw.seconds());
  return 0;
}

int cmd_coordfree(const Globals& g, const std::string& sys_file, const std::string& ctrl_file,
                  const std::string& partition_spec, const std::string& out) {
  Stopwatch sw;
  const SystemArtifact sys = read_system(sys_file);
  const ControllerArtifact ctrl = read_controller(ctrl_file);
  require_derived_from(ctrl.system_hash, sys.content_hash, "controller '" + ctrl_file + "'");
  const Partition partition = partition_spec.empty()
                                  ? sys.partition
                                  : parse_partition_spec(partition_spec, sys.ts.input_space().num_components());
  const LayersArtifact lay = compute_layers(sys, ctrl, partition, g.exec());
  const Digest h = write_layers(out, lay);
  const std::size_t f = lay.layers.fixed_point();
  std::printf("partition %s: F = %zu (F*tau = %g s)\n", describe(partition).c_str(), f,
              static_cast<double>(f) * lay.tau);
  for (std::size_t k = 0; k <= f; ++k) std::printf("  |T(%zu)| = %zu\n", k, lay.layers.layer(k).count());
  std::printf("wrote %s (sha256 %s) in %.2f s\n", out.c_str(), to_hex(h).c_str(), sw.seconds());
  return 0;
}

struct SimulateArgs {
  std::string scenario, mode = "selftrig", out, policy, partition, sys_file, ctrl_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs, delay, horizon;
};

int cmd_simulate(const Globals& g, const SimulateArgs& args) {
  Stopwatch sw;
  const Scenario s = load_scenario(args.scenario, g.fidelity_override());
  const auto exec = g.exec();
  SystemArtifact sys;
  if (!args.sys_file.empty()) {
    sys = read_system(args.sys_file);
    if (sys.scenario_digest != scenario_digest(s))
      throw PreconditionError("system '" + args.sys_file + "' was built from a different scenario");
  } else {
    sys.tau = s.tau();
    sys.ts = build_system(s, g.abstraction());
    sys.safe = safe_set(s, sys.ts.state_grid());
    sys.partition = s.partition;
  }
  Controller ctrl;
  if (!args.ctrl_file.empty()) {
    if (args.sys_file.empty()) throw PreconditionError("--ctrl needs --sys so its origin can be checked");
    auto c = read_controller(args.ctrl_file);
    require_derived_from(c.system_hash, sys.content_hash, "controller '" + args.ctrl_file + "'");
    ctrl = std::move(c.controller);
  } else {
    ctrl = synthesize_safety_controller(sys.ts, sys.safe, exec);
  }
  const Partition partition = args.partition.empty()
                                  ? s.partition
                                  : parse_partition_spec(args.partition, sys.ts.input_space().num_components());
  const ClosedLoopModel model = ClosedLoopModel::build(sys.ts, ctrl, partition, sys.safe, exec);
  if (model.invariant.empty()) throw PreconditionError("W is empty: there is no state to start from");
  const DelayChain chain = delay_robust_chain(sys.ts, ctrl, partition, sys.safe, model.invariant, exec);
  const LayerMap layers = layer_map(chain.sets, chain.fixed_point);

  SimulationSettings sim = s.simulation;
  if (args.seed) sim.seed = *args.seed;
  if (args.runs) sim.runs = *args.runs;
  if (args.delay) sim.delay_steps = *args.delay;
  if (args.horizon) sim.horizon_steps = *args.horizon;
  if (!args.policy.empty()) sim.policy = args.policy;
  if (args.mode == "coordinated") sim.delay_steps = 0;
  if (args.mode != "delay" && args.mode != "selftrig" && args.mode != "coordinated")
    throw ParseError("--mode must be delay, selftrig or coordinated");
  if (sim.delay_steps > sim.horizon_steps) throw ParseError("delay exceeds horizon");

  // Initial states: listed points (snapped), else uniform draws from W.
  const UniformGrid& grid = sys.ts.state_grid();
  std::vector<StateIndex> starts;
  for (const auto& p : sim.initial_points) {
    Vector v(static_cast<Eigen::Index>(p.size()));
    for (std::size_t i = 0; i < p.size(); ++i) v(static_cast<Eigen::Index>(i)) = p[i];
    const auto x = static_cast<StateIndex>(grid.index_of(v));
    if (!model.invariant.contains(x)) throw PreconditionError("initial point snaps to a state outside W");
    starts.push_back(x);
  }
  std::seed_seq seq{sim.seed, std::uint64_t{0x3c3c}};
  std::mt19937_64 start_rng(seq);
  const std::size_t wsize = model.invariant.count();

  std::ofstream out(args.out, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + args.out + "' for writing");
  TraceHeader header;
  header.scenario = s.name;
  header.mode = args.mode;
  header.policy = sim.policy;
  header.seed = sim.seed;
  header.runs = sim.runs;
  header.horizon_steps = sim.horizon_steps;
  header.delay_steps = sim.delay_steps;
  header.tau = sys.tau;
  header.fixed_point = chain.fixed_point;
  header.grid = grid;
  TraceWriter writer(out, header);

  std::size_t safe_runs = 0, unsafe_runs = 0, blocked_runs = 0;
  for (std::size_t r = 0; r < sim.runs; ++r) {
    const StateIndex x0 = starts.empty()
                              ? static_cast<StateIndex>(model.invariant.nth(
                                    std::uniform_int_distribution<std::size_t>(0, wsize - 1)(start_rng)))
                              : starts[r % starts.size()];
    const std::uint64_t run_seed = sim.seed ^ (0x9E3779B97F4A7C15ull * (r + 1));
    ResolutionPolicy policy = sim.policy == "fixed"         ? ResolutionPolicy::fixed_preference({})
                              : sim.policy == "adversarial" ? ResolutionPolicy::adversarial_greedy(layers, sys.safe)
                              : sim.policy == "exhaustive"  ? ResolutionPolicy::exhaustive(50'000'000, layers, sys.safe)
                                                            : ResolutionPolicy::uniform_random(run_seed);
    TraceRun tr;
    tr.run = r;
    if (args.mode == "selftrig") {
      try {
        tr.trace = run_self_triggered(model, layers, x0, sim.horizon_steps, policy);
        tr.verdict = "safe";
        for (const auto& rec : tr.trace.records)
          if (!rec.safe) {
            tr.verdict = "unsafe";
            tr.violation_step = rec.time;
            break;
          }
      } catch (const BlockingError& e) {
        tr.verdict = to_string(Verdict::UnsafeBlocked);
        tr.error = e.what();
      }
    } else {
      RunResult res = run_delay_scenario(model, x0, sim.delay_steps, sim.horizon_steps, policy);
      tr.trace = std::move(res.trace);
      tr.verdict = to_string(res.verdict);
      tr.violation_step = res.violation_step;
    }
    (tr.verdict == "safe" ? safe_runs : tr.verdict == "unsafe" ? unsafe_runs : blocked_runs)++;
    writer.write(tr);
  }
  std::printf("%s: %zu runs (%s, policy %s, F = %zu): %zu safe, %zu unsafe, %zu unsafe-blocked in %.2f s\n",
              s.name.c_str(), sim.runs, args.mode.c_str(), sim.policy.c_str(), chain.fixed_point, safe_runs,
              unsafe_runs, blocked_runs, sw.seconds());
  return 0;
}

struct RenderArgs {
  std::string input, out, slice = "0,1", fix;
  std::optional<std::size_t> depth, run;
};

int cmd_render(const RenderArgs& args) {
  const SliceSpec slice = parse_slice(args.slice, args.fix);
  std::string svg;
  if (artifact_kind(args.input) == "CFLAY") {
    const LayersArtifact lay = read_layers(args.input);
    RenderOptions opt;
    opt.depth = args.depth;
    svg = render_layers_svg(lay.grid, lay.layers, lay.tau, slice, opt);
  } else {
    svg = render_trace_svg(read_traces(args.input), slice, args.run.value_or(0));
  }
  write_text(args.out, svg);
  std::printf("wrote %s\n", args.out.c_str());
  return 0;
}

struct ExportArgs {
  std::string input, out, format = "json";
  std::size_t depth = 0;
};

int cmd_export(const ExportArgs& args) {
  const SetFormat format = args.format == "csv" ? SetFormat::Csv : SetFormat::Json;
  if (args.format != "csv" && args.format != "json") throw ParseError("--format must be json or csv");
  const std::string kind = artifact_kind(args.input);
  if (kind == "CFLAY") {
    const auto lay = read_layers(args.input);
    if (args.depth > lay.layers.fixed_point()) throw DomainError("depth exceeds F");
    export_set(lay.layers.chain_set(args.depth), lay.grid, args.out, format);
  } else if (kind == "CFSYS") {
    const auto sys = read_system(args.input);
    export_set(sys.safe, sys.ts.state_grid(), args.out, format);
  } else {
    throw ParseError("export reads a system (exports K) or a layers file (exports S_d)");
  }
  std::printf("wrote %s\n", args.out.c_str());
  return 0;
}

int cmd_verify(const Globals& g, const std::string& sys_file, const std::string& ctrl_file,
               const std::string& layers_file) {
  const SystemArtifact sys = read_system(sys_file);
  const ControllerArtifact ctrl = read_controller(ctrl_file);
  const LayersArtifact lay = read_layers(layers_file);
  VerifyOptions opt;
  opt.exec = g.exec();
  const auto results = verify_pipeline(sys, ctrl, lay, opt);
  for (const auto& r : results)
    std::printf("%s %s%s%s\n", r.skipped ? "SKIP" : r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.empty() ? "" : ": ", r.detail.c_str());
  const bool ok = all_passed(results);
  std::printf("%s\n", ok ? "verify: all checks passed" : "verify: FAILED");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coordination-free safety analysis on grid abstractions"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--fidelity", g.fidelity, "Builtin parameter set")->check(CLI::IsMember({"paper", "desk"}));
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::Range(1u, 1024u));
  app.add_option("--memory-budget", g.memory_budget_mb, "Transition table budget (MB)")->check(CLI::PositiveNumber);

  std::string scenario, sys_file, ctrl_file, layers_file, out, partition;
  auto* abs = app.add_subcommand("abstract", "Build and persist the transition system");
  abs->add_option("scenario", scenario, "Scenario file or builtin name")->required();
  abs->add_option("-o,--output", out, "System file")->required();

  auto* syn = app.add_subcommand("synthesize", "Maximally permissive safety controller and W");
  syn->add_option("system", sys_file)->required()->check(CLI::ExistingFile);
  syn->add_option("-o,--output", out, "Controller file")->required();

  auto* cf = app.add_subcommand("coordfree", "Delay-robust chain, F and the layer map");
  cf->add_option("system", sys_file)->required()->check(CLI::ExistingFile);
  cf->add_option("controller", ctrl_file)->required()->check(CLI::ExistingFile);
  cf->add_option("--partition", partition, "Classes separated by ';', members by ',' (default: scenario's)");
  cf->add_option("-o,--output", out, "Layers file")->required();

  SimulateArgs sim;
  auto* simc = app.add_subcommand("simulate", "Closed-loop runs written as JSON lines");
  simc->add_option("scenario", sim.scenario, "Scenario file or builtin name")->required();
  simc->add_option("--mode", sim.mode)->check(CLI::IsMember({"delay", "selftrig", "coordinated"}));
  simc->add_option("--seed", sim.seed);
  simc->add_option("--runs", sim.runs);
  simc->add_option("--delay", sim.delay, "Uncoordinated steps before coordination (delay mode)");
  simc->add_option("--horizon", sim.horizon, "Steps per run");
  simc->add_option("--policy", sim.policy)->check(CLI::IsMember({"uniform", "fixed", "adversarial", "exhaustive"}));
  simc->add_option("--partition", sim.partition);
  simc->add_option("--sys", sim.sys_file, "Reuse a system file built from this scenario")->check(CLI::ExistingFile);
  simc->add_option("--ctrl", sim.ctrl_file, "Reuse a controller file")->check(CLI::ExistingFile);
  simc->add_option("-o,--output", sim.out, "Trace file")->required();

  RenderArgs ren;
  auto* renc = app.add_subcommand("render", "SVG of a layer map slice or a trace");
  renc->add_option("input", ren.input, "Layers file or trace file")->required()->check(CLI::ExistingFile);
  renc->add_option("--slice", ren.slice, "Two free dimensions, e.g. 0,1");
  renc->add_option("--fix", ren.fix, "Values of the other dimensions, e.g. 2=0.5,3=2.8");
  renc->add_option("--depth", ren.depth, "Colour by membership in S_depth");
  renc->add_option("--run", ren.run, "Run to draw from a trace file");
  renc->add_option("-o,--output", ren.out, "SVG file")->required();

  ExportArgs exp;
  auto* expc = app.add_subcommand("export", "Dump K (system file) or S_d (layers file)");
  expc->add_option("input", exp.input)->required()->check(CLI::ExistingFile);
  expc->add_option("--depth", exp.depth);
  expc->add_option("--format", exp.format)->check(CLI::IsMember({"json", "csv"}));
  expc->add_option("-o,--output", exp.out)->required();

  auto* ver = app.add_subcommand("verify", "Recompute and cross-check a pipeline's artifacts");
  ver->add_option("system", sys_file)->required()->check(CLI::ExistingFile);
  ver->add_option("controller", ctrl_file)->required()->check(CLI::ExistingFile);
  ver->add_option("layers", layers_file)->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*abs) return cmd_abstract(g, scenario, out);
    if (*syn) return cmd_synthesize(g, sys_file, out);
    if (*cf) return cmd_coordfree(g, sys_file, ctrl_file, partition, out);
    if (*simc) return cmd_simulate(g, sim);
    if (*renc) return cmd_render(ren);
    if (*expc) return cmd_export(exp);
    if (*ver) return cmd_verify(g, sys_file, ctrl_file, layers_file);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ResourceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
