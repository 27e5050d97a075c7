#include "coordfree/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "coordfree/digest.hpp"

namespace coordfree {

using nlohmann::json;

namespace {

constexpr double kPredicateTolerance = 1e-9;

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ParseError("scenario field '" + field + "': " + what);
}

// Typed access to a JSON object with the dotted field path kept for errors.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) field_error(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return obj_.contains(key) && !obj_.at(key).is_null(); }
  const json& raw(const std::string& key) const {
    if (!has(key)) field_error(name(key), "missing");
    return obj_.at(key);
  }

  double number(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number()) field_error(name(key), "expected a number");
    double d = v.get<double>();
    if (!std::isfinite(d)) field_error(name(key), "must be finite");
    return d;
  }
  double positive(const std::string& key) const {
    double d = number(key);
    if (!(d > 0)) field_error(name(key), "must be > 0");
    return d;
  }
  std::uint64_t count(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      field_error(name(key), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }
  std::string text(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_string()) field_error(name(key), "expected a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const std::string& key, std::size_t expected, bool require_positive) const {
    const json& v = raw(key);
    if (!v.is_array()) field_error(name(key), "expected an array of numbers");
    if (v.size() != expected)
      field_error(name(key), "expected " + std::to_string(expected) + " entries, got " + std::to_string(v.size()));
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) field_error(name(key) + "[" + std::to_string(i) + "]", "expected a number");
      double d = v[i].get<double>();
      if (!std::isfinite(d) || (require_positive && !(d > 0)))
        field_error(name(key) + "[" + std::to_string(i) + "]", require_positive ? "must be > 0" : "must be finite");
      out.push_back(d);
    }
    return out;
  }

  void reject_unknown(std::initializer_list<const char*> known) const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      bool ok = false;
      for (const char* k : known) ok = ok || it.key() == k;
      if (!ok) field_error(name(it.key()), "unknown field");
    }
  }

 private:
  const json& obj_;
  std::string path_;
};

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

AbstractionSpec::InputComponent interval_component(std::size_t dim, double lo, double hi, double eps) {
  return {std::vector<double>(dim, lo), std::vector<double>(dim, hi), std::vector<double>(dim, eps)};
}

DynamicsSpec integrator_dynamics(std::size_t n, double tau) {
  DynamicsSpec d;
  d.state_dim = n;
  d.input_dim = n;
  d.rhs = [](const Vector&, const Vector& u) { return u; };
  d.tau = tau;
  d.inflation = Vector::Zero(static_cast<Eigen::Index>(n));
  d.integrator = Integrator::ExactAffine;
  d.affine = true;
  return d;
}

DynamicsSpec intersection_dynamics(double tau, double drag) {
  DynamicsSpec d;
  d.state_dim = 4;
  d.input_dim = 2;
  d.rhs = [drag](const Vector& x, const Vector& u) {
    return vec({x(1), u(0) - drag * x(1) * x(1), x(3), u(1) - drag * x(3) * x(3)});
  };
  d.tau = tau;
  d.inflation = Vector::Zero(4);
  d.integrator = Integrator::RungeKutta4;
  d.substeps = 8;
  // d(dp)/dv = 1 and d(dv)/dv = -2 drag v <= drag for every v >= -0.5, a range
  // covering all unclamped excursions of one sampling period.
  d.growth_bound = Matrix::Zero(4, 4);
  d.growth_bound(0, 1) = 1.0;
  d.growth_bound(2, 3) = 1.0;
  d.growth_bound(1, 1) = drag;
  d.growth_bound(3, 3) = drag;
  d.clamp_lower = vec({-10, 0, -10, 0});
  d.clamp_upper = vec({10, 3, 10, 3});
  return d;
}

// The parameters as finally resolved; this is what artifacts are keyed on.
json canonical_form(const Scenario& s) {
  json c;
  c["name"] = s.name;
  c["builtin"] = to_string(s.kind);
  c["fidelity"] = to_string(s.fidelity);
  json parts = json::array();
  for (std::size_t l = 0; l < s.partition.num_classes(); ++l) parts.push_back(s.partition.members(l));
  c["partition"] = parts;
  if (s.kind == ScenarioKind::Custom) {
    c["system"] = s.canonical.at("system");
    c["tau_s"] = s.abstraction.dynamics.tau;
    return c;
  }
  const auto& a = s.abstraction;
  c["tau_s"] = a.dynamics.tau;
  c["substeps"] = a.dynamics.substeps;
  c["state_lower"] = a.state_lower;
  c["state_upper"] = a.state_upper;
  c["state_eta"] = a.state_eta;
  json comps = json::array();
  for (const auto& ic : a.input_components)
    comps.push_back({{"lower", ic.lower}, {"upper", ic.upper}, {"epsilon", ic.epsilon}});
  c["input_components"] = comps;
  switch (s.kind) {
    case ScenarioKind::Circle: c["safe"] = {{"radius", s.safe.radius}}; break;
    case ScenarioKind::Intersection:
      c["safe"] = {{"half_width", s.safe.half_width}};
      c["drag"] = s.drag;
      break;
    case ScenarioKind::Gridworld: c["safe"] = {{"collision_distance", s.safe.collision_distance}}; break;
    case ScenarioKind::Custom: break;
  }
  return c;
}

void rebuild_dynamics(Scenario& s) {
  const double tau = s.abstraction.dynamics.tau;
  const int substeps = s.abstraction.dynamics.substeps;
  switch (s.kind) {
    case ScenarioKind::Circle: s.abstraction.dynamics = integrator_dynamics(2, tau); break;
    case ScenarioKind::Gridworld: s.abstraction.dynamics = integrator_dynamics(4, tau); break;
    case ScenarioKind::Intersection: s.abstraction.dynamics = intersection_dynamics(tau, s.drag); break;
    case ScenarioKind::Custom: return;
  }
  s.abstraction.dynamics.substeps = substeps;
}

Partition parse_partition(const json& v, std::size_t num_components) {
  if (!v.is_array()) field_error("partition", "expected an array of component lists");
  std::vector<std::vector<std::size_t>> classes;
  for (std::size_t l = 0; l < v.size(); ++l) {
    const std::string f = "partition[" + std::to_string(l) + "]";
    if (!v[l].is_array() || v[l].empty()) field_error(f, "expected a nonempty array of component indices");
    std::vector<std::size_t> cls;
    for (const auto& c : v[l]) {
      if (!c.is_number_unsigned() && !(c.is_number_integer() && c.get<std::int64_t>() >= 0))
        field_error(f, "component indices must be nonnegative integers");
      cls.push_back(c.get<std::size_t>());
    }
    classes.push_back(std::move(cls));
  }
  try {
    return Partition::from_classes(classes, num_components);
  } catch (const DomainError& e) {
    field_error("partition", e.what());
  }
}

void parse_simulation(const json& v, SimulationSettings& sim, std::size_t state_dim) {
  Fields f(v, "simulation");
  f.reject_unknown({"horizon_steps", "delay_steps", "seed", "runs", "policy", "initial_points"});
  if (f.has("horizon_steps")) sim.horizon_steps = f.count("horizon_steps");
  if (f.has("delay_steps")) sim.delay_steps = f.count("delay_steps");
  if (f.has("seed")) sim.seed = f.count("seed");
  if (f.has("runs")) sim.runs = f.count("runs");
  if (f.has("policy")) sim.policy = f.text("policy");
  if (sim.horizon_steps == 0) field_error("simulation.horizon_steps", "must be >= 1");
  if (sim.delay_steps > sim.horizon_steps) field_error("simulation.delay_steps", "must not exceed horizon_steps");
  if (sim.runs == 0) field_error("simulation.runs", "must be >= 1");
  if (sim.policy != "uniform" && sim.policy != "fixed" && sim.policy != "adversarial" && sim.policy != "exhaustive")
    field_error("simulation.policy", "must be one of uniform, fixed, adversarial, exhaustive");
  if (f.has("initial_points")) {
    const json& pts = f.raw("initial_points");
    if (!pts.is_array()) field_error("simulation.initial_points", "expected an array of points");
    sim.initial_points.clear();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const std::string fi = "simulation.initial_points[" + std::to_string(i) + "]";
      if (!pts[i].is_array() || pts[i].size() != state_dim)
        field_error(fi, "expected a point with " + std::to_string(state_dim) + " coordinates");
      std::vector<double> p;
      for (const auto& c : pts[i]) {
        if (!c.is_number()) field_error(fi, "coordinates must be numbers");
        p.push_back(c.get<double>());
      }
      sim.initial_points.push_back(std::move(p));
    }
  }
}

std::vector<std::int64_t> parse_cell(const json& v, const std::string& field, std::size_t dim) {
  std::vector<std::int64_t> out;
  if (v.is_number_integer() && dim == 1) {
    out.push_back(v.get<std::int64_t>());
    return out;
  }
  if (!v.is_array() || v.size() != dim)
    field_error(field, "expected " + std::to_string(dim) + " integer cell coordinates");
  for (const auto& c : v) {
    if (!c.is_number_integer()) field_error(field, "cell coordinates must be integers");
    out.push_back(c.get<std::int64_t>());
  }
  return out;
}

void parse_custom_system(const json& v, Scenario& s) {
  Fields f(v, "system");
  f.reject_unknown({"grid_shape", "input_sizes", "transitions", "safe_states"});
  std::vector<std::size_t> shape, sizes;
  for (const char* key : {"grid_shape", "input_sizes"}) {
    const json& arr = f.raw(key);
    if (!arr.is_array() || arr.empty()) field_error(f.name(key), "expected a nonempty array of positive integers");
    for (const auto& c : arr) {
      if (!c.is_number_unsigned() || c.get<std::size_t>() == 0)
        field_error(f.name(key), "entries must be positive integers");
      (std::string(key) == "grid_shape" ? shape : sizes).push_back(c.get<std::size_t>());
    }
  }
  if (shape.size() > static_cast<std::size_t>(kMaxDim)) field_error("system.grid_shape", "at most 8 dimensions");
  UniformGrid grid = UniformGrid::integer_grid(shape);
  FactoredInputSpace space = FactoredInputSpace::finite(sizes);
  TransitionSystemBuilder builder(grid, space);
  const json& trans = f.raw("transitions");
  if (!trans.is_array()) field_error("system.transitions", "expected an array");
  for (std::size_t i = 0; i < trans.size(); ++i) {
    const std::string fi = "system.transitions[" + std::to_string(i) + "]";
    Fields t(trans[i], fi);
    t.reject_unknown({"x", "u", "lo", "hi"});
    const std::uint64_t x = t.count("x");
    if (x >= grid.size()) field_error(t.name("x"), "state index out of range");
    std::uint64_t u = 0;
    const json& uj = t.raw("u");
    if (uj.is_array()) {
      if (uj.size() != sizes.size()) field_error(t.name("u"), "expected one index per input component");
      std::vector<std::size_t> tuple;
      for (std::size_t c = 0; c < uj.size(); ++c) {
        if (!uj[c].is_number_unsigned() || uj[c].get<std::size_t>() >= sizes[c])
          field_error(t.name("u"), "component index out of range");
        tuple.push_back(uj[c].get<std::size_t>());
      }
      u = space.encode(tuple);
    } else {
      u = t.count("u");
      if (u >= space.size()) field_error(t.name("u"), "joint input index out of range");
    }
    SuccessorBox box{parse_cell(t.raw("lo"), t.name("lo"), shape.size()),
                     parse_cell(t.raw("hi"), t.name("hi"), shape.size())};
    for (std::size_t d = 0; d < shape.size(); ++d)
      if (box.lo[d] > box.hi[d] || box.lo[d] < 0 || box.hi[d] >= static_cast<std::int64_t>(shape[d]))
        field_error(fi, "successor box must satisfy 0 <= lo <= hi < grid_shape");
    try {
      builder.set(static_cast<StateIndex>(x), static_cast<InputIndex>(u), box);
    } catch (const DomainError& e) {
      field_error(fi, e.what());
    }
  }
  s.tabulated = std::move(builder).build();
  const json& safe = f.raw("safe_states");
  if (!safe.is_array()) field_error("system.safe_states", "expected an array of state indices");
  for (const auto& c : safe) {
    if (!c.is_number_unsigned() || c.get<std::size_t>() >= grid.size())
      field_error("system.safe_states", "state index out of range");
    s.tabulated_safe.push_back(c.get<std::size_t>());
  }
}

void apply_overrides(const json& v, Scenario& s) {
  Fields f(v, "overrides");
  f.reject_unknown({"tau_s", "state_eta", "input_epsilon", "substeps", "drag"});
  auto& a = s.abstraction;
  if (f.has("tau_s")) a.dynamics.tau = f.positive("tau_s");
  if (f.has("substeps")) {
    auto n = f.count("substeps");
    if (n == 0 || n > 100000) field_error("overrides.substeps", "must be in [1, 100000]");
    a.dynamics.substeps = static_cast<int>(n);
  }
  if (f.has("drag")) {
    if (s.kind != ScenarioKind::Intersection) field_error("overrides.drag", "only the intersection has drag");
    s.drag = f.number("drag");
    if (s.drag < 0) field_error("overrides.drag", "must be >= 0");
  }
  if (f.has("state_eta")) a.state_eta = f.numbers("state_eta", a.state_lower.size(), true);
  if (f.has("input_epsilon")) {
    std::size_t total = 0;
    for (const auto& c : a.input_components) total += c.epsilon.size();
    auto eps = f.numbers("input_epsilon", total, true);
    std::size_t k = 0;
    for (auto& c : a.input_components)
      for (auto& e : c.epsilon) e = eps[k++];
  }
}

void apply_safe(const json& v, Scenario& s) {
  Fields f(v, "safe");
  switch (s.kind) {
    case ScenarioKind::Circle:
      f.reject_unknown({"radius"});
      if (f.has("radius")) s.safe.radius = f.positive("radius");
      break;
    case ScenarioKind::Intersection:
      f.reject_unknown({"half_width"});
      if (f.has("half_width")) s.safe.half_width = f.positive("half_width");
      break;
    case ScenarioKind::Gridworld:
      f.reject_unknown({"collision_distance"});
      if (f.has("collision_distance")) s.safe.collision_distance = f.positive("collision_distance");
      break;
    case ScenarioKind::Custom: field_error("safe", "custom systems list safe states under system.safe_states");
  }
}

ScenarioKind parse_kind(const std::string& s) {
  if (s == "circle") return ScenarioKind::Circle;
  if (s == "intersection") return ScenarioKind::Intersection;
  if (s == "gridworld") return ScenarioKind::Gridworld;
  if (s == "custom") return ScenarioKind::Custom;
  field_error("builtin", "must be one of circle, intersection, gridworld, custom");
}

}  // namespace

Fidelity parse_fidelity(std::string_view s) {
  if (s == "paper") return Fidelity::Paper;
  if (s == "desk") return Fidelity::Desk;
  throw ParseError("fidelity must be 'paper' or 'desk', got '" + std::string(s) + "'");
}

const char* to_string(Fidelity f) { return f == Fidelity::Paper ? "paper" : "desk"; }

const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Circle: return "circle";
    case ScenarioKind::Intersection: return "intersection";
    case ScenarioKind::Gridworld: return "gridworld";
    case ScenarioKind::Custom: return "custom";
  }
  return "?";
}

double Scenario::tau() const { return abstraction.dynamics.tau; }

Scenario builtin_scenario(std::string_view name, Fidelity fidelity) {
  Scenario s;
  s.fidelity = fidelity;
  const bool paper = fidelity == Fidelity::Paper;
  if (name == "circle") {
    s.kind = ScenarioKind::Circle;
    const double eta = paper ? 0.01 : 0.02, eps = paper ? 0.05 : 0.1;
    s.abstraction.state_lower = {-1, -1};
    s.abstraction.state_upper = {1, 1};
    s.abstraction.state_eta = {eta, eta};
    s.abstraction.input_components = {interval_component(1, -1, 1, eps), interval_component(1, -1, 1, eps)};
    s.abstraction.dynamics = integrator_dynamics(2, 0.01);
  } else if (name == "intersection") {
    s.kind = ScenarioKind::Intersection;
    s.abstraction.state_lower = {-10, 0, -10, 0};
    s.abstraction.state_upper = {10, 3, 10, 3};
    s.abstraction.state_eta = paper ? std::vector<double>{.1, .1, .1, .1} : std::vector<double>{.5, .25, .5, .25};
    const double eps = paper ? 0.1 : 0.25;
    s.abstraction.input_components = {interval_component(1, -1, 1, eps), interval_component(1, -1, 1, eps)};
    s.abstraction.dynamics = intersection_dynamics(0.2, s.drag);
  } else if (name == "gridworld") {
    s.kind = ScenarioKind::Gridworld;
    const double eta = paper ? 0.01 : 0.02, eps = paper ? 0.2 : 0.4;
    s.abstraction.state_lower = std::vector<double>(4, -0.2);
    s.abstraction.state_upper = std::vector<double>(4, 0.2);
    s.abstraction.state_eta = std::vector<double>(4, eta);
    s.abstraction.input_components = {interval_component(2, -1, 1, eps), interval_component(2, -1, 1, eps)};
    s.abstraction.dynamics = integrator_dynamics(4, 0.01);
  } else {
    throw ParseError("unknown builtin scenario '" + std::string(name) + "' (circle, intersection, gridworld)");
  }
  s.name = std::string(name) + "-" + to_string(fidelity);
  s.partition = Partition::singletons(s.abstraction.input_components.size());
  s.canonical = canonical_form(s);
  return s;
}

Scenario parse_scenario(const json& doc, std::optional<Fidelity> fidelity_override) {
  Fields f(doc, "");
  f.reject_unknown({"name", "builtin", "fidelity", "overrides", "safe", "partition", "simulation", "system",
                    "tau_s"});
  const ScenarioKind kind = parse_kind(f.text("builtin"));
  Fidelity fid = Fidelity::Desk;
  if (f.has("fidelity")) {
    try {
      fid = parse_fidelity(f.text("fidelity"));
    } catch (const ParseError&) {
      field_error("fidelity", "must be 'paper' or 'desk'");
    }
  }
  if (fidelity_override) fid = *fidelity_override;

  Scenario s;
  if (kind == ScenarioKind::Custom) {
    if (f.has("overrides")) field_error("overrides", "not allowed for custom systems");
    s.kind = kind;
    s.fidelity = fid;
    parse_custom_system(f.raw("system"), s);
    s.abstraction.dynamics.tau = f.has("tau_s") ? f.positive("tau_s") : 1.0;
    s.canonical = json{{"system", f.raw("system")}};
  } else {
    if (f.has("system")) field_error("system", "only allowed for custom scenarios");
    if (f.has("tau_s")) field_error("tau_s", "set the builtin sampling period under overrides.tau_s");
    s = builtin_scenario(to_string(kind), fid);
    if (f.has("overrides")) apply_overrides(f.raw("overrides"), s);
    if (f.has("safe")) apply_safe(f.raw("safe"), s);
    rebuild_dynamics(s);
    try {
      s.abstraction.validate();
    } catch (const DomainError& e) {
      field_error("overrides", e.what());
    }
  }
  const std::size_t ncomp = s.tabulated ? s.tabulated->input_space().num_components()
                                        : s.abstraction.input_components.size();
  s.partition = f.has("partition") ? parse_partition(f.raw("partition"), ncomp) : Partition::singletons(ncomp);
  s.name = f.has("name") ? f.text("name") : std::string(to_string(kind)) + "-" + to_string(fid);
  const std::size_t sdim = s.tabulated ? s.tabulated->dim() : s.abstraction.state_lower.size();
  if (f.has("simulation")) parse_simulation(f.raw("simulation"), s.simulation, sdim);
  s.canonical = canonical_form(s);
  return s;
}

Scenario load_scenario(const std::string& spec, std::optional<Fidelity> fidelity_override) {
  if (spec == "circle" || spec == "intersection" || spec == "gridworld")
    return builtin_scenario(spec, fidelity_override.value_or(Fidelity::Desk));
  std::ifstream in(spec);
  if (!in) throw ParseError("cannot open scenario file '" + spec + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ParseError("scenario file '" + spec + "': " + e.what());
  }
  return parse_scenario(doc, fidelity_override);
}

std::string scenario_digest(const Scenario& s) { return to_hex(sha256(s.canonical.dump())); }

TransitionSystem build_system(const Scenario& s, const AbstractionOptions& options) {
  if (s.tabulated) return *s.tabulated;
  return abstract_system(s.abstraction, options);
}

StateSet safe_set(const Scenario& s, const UniformGrid& grid) {
  StateSet k(grid.size());
  if (s.kind == ScenarioKind::Custom) {
    for (auto x : s.tabulated_safe) {
      if (x >= grid.size()) throw DomainError("safe state outside the grid");
      k.insert(x);
    }
    return k;
  }
  const std::size_t expected = s.kind == ScenarioKind::Circle ? 2 : 4;
  if (grid.dim() != expected) throw DomainError("grid dimension does not match the scenario");
  for (std::size_t x = 0; x < grid.size(); ++x) {
    const Vector p = grid.point_of(x);
    bool ok = false;
    switch (s.kind) {
      case ScenarioKind::Circle:
        ok = p(0) * p(0) + p(1) * p(1) <= s.safe.radius * s.safe.radius + kPredicateTolerance;
        break;
      case ScenarioKind::Intersection:
        ok = std::abs(p(0)) >= s.safe.half_width - kPredicateTolerance ||
             std::abs(p(2)) >= s.safe.half_width - kPredicateTolerance;
        break;
      case ScenarioKind::Gridworld:
        ok = std::max(std::abs(p(0) - p(2)), std::abs(p(1) - p(3))) >=
             s.safe.collision_distance - kPredicateTolerance;
        break;
      case ScenarioKind::Custom: break;
    }
    if (ok) k.insert(x);
  }
  return k;
}

}  // namespace coordfree
