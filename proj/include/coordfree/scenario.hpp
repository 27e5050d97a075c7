#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "coordfree/abstraction.hpp"
#include "coordfree/core_model.hpp"

namespace coordfree {

enum class Fidelity { Paper, Desk };
enum class ScenarioKind { Circle, Intersection, Gridworld, Custom };

Fidelity parse_fidelity(std::string_view s);
const char* to_string(Fidelity f);
const char* to_string(ScenarioKind k);

/// Parameters of the safe-set predicates of the builtin scenarios.
struct SafeSetParams {
  double radius = 0.8;              ///< circle: x1^2 + x2^2 <= radius^2
  double half_width = 2.0;          ///< intersection: |p1| >= w or |p2| >= w
  double collision_distance = 0.1;  ///< gridworld: Chebyshev separation >= d
};

struct SimulationSettings {
  std::size_t horizon_steps = 1000;
  std::size_t delay_steps = 0;
  std::uint64_t seed = 1;
  std::size_t runs = 1;
  std::string policy = "uniform";  ///< uniform | fixed | adversarial | exhaustive
  /// Initial states as real points; empty means sample uniformly from W.
  std::vector<std::vector<double>> initial_points;
};

struct Scenario {
  std::string name;
  ScenarioKind kind = ScenarioKind::Circle;
  Fidelity fidelity = Fidelity::Desk;
  /// Builtin scenarios: grids and dynamics.
  AbstractionSpec abstraction;
  /// Drag constant of the intersection example.
  double drag = 0.2;
  SafeSetParams safe;
  /// Custom scenarios: the tabulated system and its safe states.
  std::optional<TransitionSystem> tabulated;
  std::vector<std::size_t> tabulated_safe;
  Partition partition;
  SimulationSettings simulation;
  /// Canonical JSON form, hashed into every artifact derived from it.
  nlohmann::json canonical;

  double tau() const;
};

/// Builtin scenario presets ("circle", "intersection", "gridworld").
Scenario builtin_scenario(std::string_view name, Fidelity fidelity);

/// Validating parser. Throws ParseError naming the offending field.
Scenario parse_scenario(const nlohmann::json& doc, std::optional<Fidelity> fidelity_override = std::nullopt);
/// Reads a scenario file; `spec` may also be a builtin name.
Scenario load_scenario(const std::string& spec, std::optional<Fidelity> fidelity_override = std::nullopt);

/// Hex SHA-256 of the canonical scenario.
std::string scenario_digest(const Scenario& s);

/// Builds the finite system (abstraction or tabulated table).
TransitionSystem build_system(const Scenario& s, const AbstractionOptions& options = {});
/// The safe set K evaluated on the cell centres of `grid`.
StateSet safe_set(const Scenario& s, const UniformGrid& grid);

}  // namespace coordfree
