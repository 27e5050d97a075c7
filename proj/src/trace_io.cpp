#include "coordfree/trace_io.hpp"

#include <fstream>
#include <ostream>

#include <json.hpp>

namespace coordfree {

using nlohmann::json;

TraceWriter::TraceWriter(std::ostream& out, const TraceHeader& h) : out_(out), grid_(h.grid) {
  json j;
  j["type"] = "header";
  j["scenario"] = h.scenario;
  j["mode"] = h.mode;
  j["policy"] = h.policy;
  j["seed"] = h.seed;
  j["runs"] = h.runs;
  j["horizon_steps"] = h.horizon_steps;
  j["delay_steps"] = h.delay_steps;
  j["tau_s"] = h.tau;
  j["fixed_point"] = h.fixed_point ? json(*h.fixed_point) : json(nullptr);
  j["grid"] = {{"lower", h.grid.lower()}, {"upper", h.grid.upper()}, {"eta", h.grid.eta()}};
  out_ << j.dump() << '\n';
}

void TraceWriter::write(const TraceRun& run) {
  for (const auto& r : run.trace.records) {
    json j;
    j["type"] = "step";
    j["run"] = run.run;
    j["k"] = r.time;
    j["x"] = r.state;
    const Vector p = grid_.point_of(r.state);
    j["point"] = std::vector<double>(p.data(), p.data() + p.size());
    j["u"] = r.input ? json(*r.input) : json(nullptr);
    j["countdown"] = r.countdown ? json(*r.countdown) : json(nullptr);
    j["coordinated"] = r.coordinated;
    j["safe"] = r.safe;
    out_ << j.dump() << '\n';
  }
  json v;
  v["type"] = "verdict";
  v["run"] = run.run;
  v["verdict"] = run.verdict;
  v["violation_step"] = run.violation_step ? json(*run.violation_step) : json(nullptr);
  if (!run.error.empty()) v["error"] = run.error;
  out_ << v.dump() << '\n';
}

TraceFile read_traces(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace file '" + path.string() + "'");
  TraceFile tf;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  constexpr std::size_t kNoRun = static_cast<std::size_t>(-1);
  std::size_t open_run = kNoRun;
  auto current = [&](std::size_t run) -> TraceRun& {
    if (open_run != run) {
      tf.runs.push_back({});
      tf.runs.back().run = run;
      open_run = run;
    }
    return tf.runs.back();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type");
      if (type == "header") {
        auto& h = tf.header;
        h.scenario = j.at("scenario");
        h.mode = j.at("mode");
        h.policy = j.at("policy");
        h.seed = j.at("seed");
        h.runs = j.at("runs");
        h.horizon_steps = j.at("horizon_steps");
        h.delay_steps = j.at("delay_steps");
        h.tau = j.at("tau_s");
        if (!j.at("fixed_point").is_null()) h.fixed_point = j.at("fixed_point").get<std::size_t>();
        const auto& g = j.at("grid");
        h.grid = UniformGrid(g.at("lower").get<std::vector<double>>(), g.at("upper").get<std::vector<double>>(),
                             g.at("eta").get<std::vector<double>>());
        have_header = true;
      } else if (!have_header) {
        throw ParseError("record before header");
      } else if (type == "step") {
        TraceRecord r;
        r.time = j.at("k");
        r.state = j.at("x");
        if (r.state >= tf.header.grid.size()) throw ParseError("state index outside grid");
        if (!j.at("u").is_null()) r.input = j.at("u").get<InputIndex>();
        if (!j.at("countdown").is_null()) r.countdown = j.at("countdown").get<std::size_t>();
        r.coordinated = j.at("coordinated");
        r.safe = j.at("safe");
        current(j.at("run")).trace.records.push_back(r);
      } else if (type == "verdict") {
        TraceRun& run = current(j.at("run"));
        run.verdict = j.at("verdict");
        if (!j.at("violation_step").is_null()) run.violation_step = j.at("violation_step").get<std::size_t>();
        if (j.contains("error")) run.error = j.at("error");
        open_run = kNoRun;
      } else {
        throw ParseError("unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError("trace file '" + path.string() + "' line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("trace file '" + path.string() + "' line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DomainError& e) {
      throw ParseError("trace file '" + path.string() + "' line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw ParseError("trace file '" + path.string() + "' has no header");
  return tf;
}

}  // namespace coordfree
