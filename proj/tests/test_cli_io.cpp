#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "coordfree/artifacts.hpp"
#include "coordfree/render.hpp"
#include "coordfree/scenario.hpp"
#include "coordfree/set_io.hpp"
#include "coordfree/synthesis.hpp"
#include "coordfree/trace_io.hpp"
#include "coordfree/verify.hpp"
#include "support/oracles.hpp"

using namespace coordfree;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "coordfree_test_cli_io";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string parse_error_of(const json& doc) {
  try {
    parse_scenario(doc);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

json small_custom() {
  return json::parse(R"({
    "builtin": "custom", "name": "tiny", "tau_s": 0.5,
    "system": {
      "grid_shape": [3], "input_sizes": [2, 2],
      "transitions": [
        {"x": 0, "u": [0, 0], "lo": 2, "hi": 2}, {"x": 0, "u": [1, 1], "lo": 2, "hi": 2},
        {"x": 0, "u": [1, 0], "lo": 1, "hi": 1}, {"x": 0, "u": [0, 1], "lo": 1, "hi": 1},
        {"x": 1, "u": 0, "lo": 1, "hi": 1}, {"x": 1, "u": 1, "lo": 1, "hi": 1},
        {"x": 1, "u": 2, "lo": 1, "hi": 1}, {"x": 1, "u": 3, "lo": 1, "hi": 1},
        {"x": 2, "u": 0, "lo": 2, "hi": 2}
      ],
      "safe_states": [0, 1]
    }
  })");
}

struct Pipeline {
  SystemArtifact sys;
  ControllerArtifact ctrl;
  LayersArtifact lay;
};

Pipeline circle_pipeline() {
  Pipeline p;
  const Scenario sc = builtin_scenario("circle", Fidelity::Desk);
  p.sys.scenario_name = sc.name;
  p.sys.scenario_digest = scenario_digest(sc);
  p.sys.tau = sc.tau();
  p.sys.ts = build_system(sc);
  p.sys.safe = safe_set(sc, p.sys.ts.state_grid());
  p.sys.partition = sc.partition;
  return p;
}

}  // namespace

TEST_CASE("builtin scenarios carry their parameters") {
  const Scenario c = builtin_scenario("circle", Fidelity::Paper);
  CHECK(c.tau() == doctest::Approx(0.01));
  CHECK(c.abstraction.state_eta == std::vector<double>{0.01, 0.01});
  CHECK(c.safe.radius == doctest::Approx(0.8));
  const Scenario i = builtin_scenario("intersection", Fidelity::Desk);
  CHECK(i.tau() == doctest::Approx(0.2));
  CHECK(i.drag == doctest::Approx(0.2));
  CHECK(i.partition.num_classes() == 2);
  const Scenario g = builtin_scenario("gridworld", Fidelity::Desk);
  CHECK(g.abstraction.input_components.size() == 2);
  CHECK(g.abstraction.input_components[0].epsilon.size() == 2);
  CHECK_THROWS_AS(builtin_scenario("maze", Fidelity::Desk), ParseError);
  CHECK(parse_fidelity("paper") == Fidelity::Paper);
  CHECK_THROWS_AS(parse_fidelity("fast"), ParseError);
  CHECK(scenario_digest(c) != scenario_digest(builtin_scenario("circle", Fidelity::Desk)));
  CHECK(scenario_digest(c) == scenario_digest(builtin_scenario("circle", Fidelity::Paper)));
}

TEST_CASE("scenario overrides and validation") {
  const Scenario s = parse_scenario(json::parse(R"({"builtin":"circle","fidelity":"desk",
      "overrides":{"tau_s":0.02,"state_eta":[0.05,0.05]},"safe":{"radius":0.5},
      "simulation":{"seed":7,"runs":3,"policy":"fixed","initial_points":[[0,0]]}})"));
  CHECK(s.tau() == doctest::Approx(0.02));
  CHECK(s.abstraction.state_eta == std::vector<double>{0.05, 0.05});
  CHECK(s.safe.radius == doctest::Approx(0.5));
  CHECK(s.simulation.seed == 7);
  CHECK(s.simulation.runs == 3);
  CHECK(s.simulation.initial_points.size() == 1);
  CHECK(parse_scenario(json::parse(R"({"builtin":"circle","fidelity":"desk"})"), Fidelity::Paper).fidelity ==
        Fidelity::Paper);

  CHECK(parse_error_of(json::parse(R"({"builtin":"circle","bogus":1})")).find("'bogus'") != std::string::npos);
  CHECK(parse_error_of(json::parse(R"({"builtin":"circle","overrides":{"state_eta":[0.1]}})"))
            .find("overrides.state_eta") != std::string::npos);
  CHECK(parse_error_of(json::parse(R"({"builtin":"circle","overrides":{"tau_s":-1}})"))
            .find("overrides.tau_s") != std::string::npos);
  CHECK(parse_error_of(json::parse(R"({"builtin":"circle","safe":{"half_width":1}})"))
            .find("safe.half_width") != std::string::npos);
  CHECK(parse_error_of(json::parse(R"({"builtin":"circle","simulation":{"policy":"lucky"}})"))
            .find("simulation.policy") != std::string::npos);
  CHECK(parse_error_of(json::parse(R"({"builtin":"circle","partition":[[0],[0]]})")).find("partition") !=
        std::string::npos);
  CHECK(parse_error_of(json::parse(R"({"builtin":"rocket"})")).find("builtin") != std::string::npos);
  CHECK(parse_error_of(json::parse(R"({"name":"x"})")).find("builtin") != std::string::npos);
  CHECK(parse_error_of(json::parse(R"({"builtin":"circle","overrides":{"drag":0.1}})")).find("overrides.drag") !=
        std::string::npos);

  const fs::path bad = scratch("broken.json");
  spit(bad, "{\n  \"builtin\": \"circle\",\n  oops\n}");
  try {
    load_scenario(bad.string());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(load_scenario(scratch("missing.json").string()), ParseError);
}

TEST_CASE("custom scenarios tabulate the system") {
  const Scenario s = parse_scenario(small_custom());
  REQUIRE(s.tabulated);
  const auto ts = build_system(s);
  const auto ref = oracle::head_on();
  // Same as the fixture except where the file leaves transitions out.
  CHECK(ts.successor_list(0, oracle::kChangeChange) == std::vector<StateIndex>{2});
  CHECK(ts.successor_list(0, oracle::kStayChange) == std::vector<StateIndex>{1});
  CHECK(ts.blocking(2, 1));
  CHECK(safe_set(s, ts.state_grid()) == StateSet::of(3, {0, 1}));
  CHECK(synthesize_safety_controller(ts, safe_set(s, ts.state_grid())) ==
        synthesize_safety_controller(ref.ts, StateSet::of(3, {0, 1})));
  CHECK(s.tau() == doctest::Approx(0.5));

  json bad = small_custom();
  bad["system"]["transitions"][0]["hi"] = 5;
  CHECK(parse_error_of(bad).find("system.transitions[0]") != std::string::npos);
  bad = small_custom();
  bad["system"]["transitions"][2]["u"] = json::array({1, 2});
  CHECK(parse_error_of(bad).find("system.transitions[2].u") != std::string::npos);
  bad = small_custom();
  bad["system"]["safe_states"] = json::array({9});
  CHECK(parse_error_of(bad).find("system.safe_states") != std::string::npos);
}

TEST_CASE("state sets round-trip through JSON and CSV") {
  std::mt19937_64 rng(11);
  const UniformGrid grid({-1, 0}, {1, 3}, {0.25, 0.5});
  for (int t = 0; t < 100; ++t) {
    const StateSet s = oracle::to_set(oracle::random_bits(rng, grid.size(), t % 3 == 0 ? 0.02 : 0.5));
    const auto from_json = set_from_json(set_to_json(s, grid));
    CHECK(from_json.set == s);
    CHECK(from_json.grid.size() == grid.size());
    CHECK(set_from_csv(set_to_csv(s, grid), grid) == s);
  }
  const StateSet s = StateSet::of(grid.size(), {0, 5, 17});
  const json doc = json::parse(set_to_json(s, grid));
  CHECK(doc["member_count"] == 3);
  CHECK(doc["cell_count"] == grid.size());
  CHECK(doc["members"] == json::array({0, 5, 17}));
  const std::string csv = set_to_csv(s, grid);
  CHECK(csv.rfind("index,x0,x1\n", 0) == 0);
  CHECK(csv.find("5,0.25,0\n") != std::string::npos);
  export_set(s, grid, scratch("set.json"), SetFormat::Json);
  export_set(s, grid, scratch("set.csv"), SetFormat::Csv);
  CHECK(import_set(scratch("set.json")).set == s);
  CHECK(import_set(scratch("set.csv"), grid).set == s);
  CHECK_THROWS_AS(import_set(scratch("set.csv")), PreconditionError);
  CHECK_THROWS_AS(set_from_json("{\"format\":\"other\"}"), ParseError);
  CHECK_THROWS_AS(set_from_csv("index,x0,x1\n999,0,0\n", grid), ParseError);
}

TEST_CASE("artifacts round-trip, chain by hash and detect corruption") {
  Pipeline p = circle_pipeline();
  const fs::path sys_path = scratch("c.sys"), ctl_path = scratch("c.ctl"), lay_path = scratch("c.lay");
  const Digest sh = write_system(sys_path, p.sys);
  const SystemArtifact sys = read_system(sys_path);
  CHECK(sys.content_hash == sh);
  CHECK(sys.ts == p.sys.ts);
  CHECK(sys.safe == p.sys.safe);
  CHECK(sys.scenario_digest == p.sys.scenario_digest);
  CHECK(sys.tau == p.sys.tau);
  CHECK(artifact_kind(sys_path) == "CFSYS");

  p.ctrl.system_hash = sh;
  p.ctrl.controller = synthesize_safety_controller(sys.ts, sys.safe);
  const Digest ch = write_controller(ctl_path, p.ctrl);
  const ControllerArtifact ctrl = read_controller(ctl_path);
  CHECK(ctrl.controller == p.ctrl.controller);
  CHECK_NOTHROW(require_derived_from(ctrl.system_hash, sys.content_hash, "controller"));

  const auto chain = delay_robust_chain(sys.ts, ctrl.controller, sys.partition, sys.safe, ctrl.controller.domain());
  p.lay = {sh, ch, sys.partition, sys.tau, sys.ts.state_grid(), layer_map(chain.sets, chain.fixed_point), {}};
  write_layers(lay_path, p.lay);
  const LayersArtifact lay = read_layers(lay_path);
  CHECK(lay.layers == p.lay.layers);
  CHECK(lay.controller_hash == ch);
  CHECK(artifact_kind(lay_path) == "CFLAY");
  CHECK(artifact_kind(scratch("set.json")).empty());

  // Identical content gives identical bytes.
  write_system(scratch("c2.sys"), p.sys);
  CHECK(slurp(scratch("c2.sys")) == slurp(sys_path));

  // A controller for another scenario does not chain.
  Pipeline other = circle_pipeline();
  other.sys.scenario_digest = scenario_digest(builtin_scenario("circle", Fidelity::Paper));
  const Digest other_hash = write_system(scratch("o.sys"), other.sys);
  CHECK(other_hash != sh);
  CHECK_THROWS_AS(require_derived_from(ctrl.system_hash, other_hash, "controller"), PreconditionError);

  // Flip one byte in the payload.
  std::string bytes = slurp(ctl_path);
  bytes[bytes.size() / 2] ^= 0x01;
  spit(scratch("bad.ctl"), bytes);
  CHECK_THROWS_AS(read_controller(scratch("bad.ctl")), ParseError);
  spit(scratch("short.ctl"), slurp(ctl_path).substr(0, 20));
  CHECK_THROWS_AS(read_controller(scratch("short.ctl")), ParseError);
  CHECK_THROWS_AS(read_system(ctl_path), ParseError);

  const auto results = verify_pipeline(sys, ctrl, lay);
  for (const auto& r : results) CHECK_MESSAGE(r.passed, r.name << ": " << r.detail);
  CHECK(all_passed(results));

  // A tampered controller fails verification.
  ControllerArtifact tampered = ctrl;
  const auto x = static_cast<StateIndex>(ctrl.controller.domain().nth(0));
  InputSet fewer = ctrl.controller.at(x);
  fewer.erase(fewer.nth(0));
  tampered.controller.set(x, fewer);
  CHECK_FALSE(all_passed(verify_pipeline(sys, tampered, lay)));
}

TEST_CASE("slices and rendering") {
  const UniformGrid grid({-1, -1}, {1, 1}, {0.5, 0.5});
  const SliceCells sc = slice_cells(grid, parse_slice("0,1", ""));
  CHECK(sc.nx == 5);
  CHECK(sc.ny == 5);
  CHECK(sc.cells.size() == 25);
  const UniformGrid g4({0, 0, 0, 0}, {1, 1, 1, 1}, {0.5, 0.5, 0.5, 0.5});
  const SliceCells s4 = slice_cells(g4, parse_slice("0,2", "1=0.5,3=1"));
  CHECK(s4.cells.size() == 9);
  CHECK(g4.point_of(s4.cells[0])(1) == doctest::Approx(0.5));
  CHECK(g4.point_of(s4.cells[0])(3) == doctest::Approx(1.0));
  CHECK_THROWS_AS(slice_cells(g4, parse_slice("0,2", "1=0.5")), DomainError);
  CHECK_THROWS_AS(slice_cells(g4, parse_slice("0,2", "1=0.5,3=7")), DomainError);
  CHECK_THROWS_AS(slice_cells(grid, parse_slice("0,0", "")), DomainError);
  CHECK_THROWS_AS(slice_cells(grid, parse_slice("0,5", "")), DomainError);

  std::vector<std::int32_t> labels(grid.size(), -1);
  for (std::size_t x = 0; x < labels.size(); ++x) {
    const Vector p = grid.point_of(x);
    const double r = std::max(std::abs(p(0)), std::abs(p(1)));
    labels[x] = r < 0.25 ? 2 : r < 0.75 ? 1 : -1;
  }
  const LayerMap lm(2, labels);
  const std::string a = render_layers_svg(grid, lm, 0.1, parse_slice("0,1", ""));
  const std::string b = render_layers_svg(grid, lm, 0.1, parse_slice("0,1", ""));
  CHECK(a == b);
  auto count = [](const std::string& s, const std::string& what) {
    std::size_t n = 0;
    for (auto pos = s.find(what); pos != std::string::npos; pos = s.find(what, pos + 1)) ++n;
    return n;
  };
  CHECK(count(a, "class=\"cell\"") == 25);
  CHECK(count(a, "fill=\"#ffffff\"/>") == 1);
  CHECK(a.find("F = 2") != std::string::npos);
  const std::string d1 = render_layers_svg(grid, lm, 0.1, parse_slice("0,1", ""), {1, 600});
  CHECK(count(d1, "fill=\"#ffffff\"/>") == 9);

  const LayerMap empty;
  const std::string legend_only = render_layers_svg(UniformGrid({0}, {0}, {1}), empty, 0.1, parse_slice("0,1", ""));
  CHECK(count(legend_only, "class=\"cell\"") == 0);
  CHECK(legend_only.find("class=\"legend\"") != std::string::npos);
}

TEST_CASE("trace files round-trip") {
  const UniformGrid grid = UniformGrid::integer_grid({3});
  TraceHeader h;
  h.scenario = "tiny";
  h.mode = "selftrig";
  h.policy = "uniform";
  h.seed = 42;
  h.runs = 2;
  h.horizon_steps = 2;
  h.tau = 0.5;
  h.fixed_point = 1;
  h.grid = grid;
  const fs::path path = scratch("t.jsonl");
  {
    std::ofstream out(path);
    TraceWriter w(out, h);
    TraceRun r0;
    r0.run = 0;
    r0.trace.records = {{0, 0, 1, 0, true, true}, {1, 1, 2, 1, false, true}, {2, 1, std::nullopt, 0, true, true}};
    r0.verdict = "safe";
    w.write(r0);
    TraceRun r1;
    r1.run = 1;
    r1.trace.records = {{0, 0, 0, std::nullopt, false, true}, {1, 2, std::nullopt, std::nullopt, false, false}};
    r1.verdict = "unsafe";
    r1.violation_step = 1;
    w.write(r1);
  }
  const TraceFile f = read_traces(path);
  CHECK(f.header.scenario == "tiny");
  CHECK(f.header.seed == 42);
  CHECK(f.header.fixed_point == std::optional<std::size_t>(1));
  REQUIRE(f.runs.size() == 2);
  CHECK(f.runs[0].trace.records.size() == 3);
  CHECK(f.runs[0].trace.records[1].countdown == std::optional<std::size_t>(1));
  CHECK(f.runs[0].trace.records[1].input == std::optional<InputIndex>(2));
  CHECK_FALSE(f.runs[0].trace.records[2].input.has_value());
  CHECK(f.runs[1].verdict == "unsafe");
  CHECK(f.runs[1].violation_step == std::optional<std::size_t>(1));
  CHECK_FALSE(f.runs[1].trace.records[1].safe);
  const std::string svg = render_trace_svg(f, parse_slice("0,0", ""), 0);
  CHECK(svg.find("<polyline") != std::string::npos);

  spit(scratch("bad.jsonl"), "{\"type\":\"step\"}\n");
  CHECK_THROWS_AS(read_traces(scratch("bad.jsonl")), ParseError);
}
