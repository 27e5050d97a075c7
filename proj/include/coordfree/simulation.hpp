#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "coordfree/coordination.hpp"
#include "coordfree/core_model.hpp"

namespace coordfree {

/// Resolves the two kinds of nondeterminism in a closed loop: which admissible
/// joint input the agents end up applying, and which successor the dynamics
/// produce. Input and successor choices use independent seeded streams.
class ResolutionPolicy {
 public:
  enum class Kind { UniformRandom, FixedPreference, AdversarialGreedy, Exhaustive };

  static ResolutionPolicy uniform_random(std::uint64_t seed);
  /// Inputs are tried in `ranking` order, then the rest ascending; lowest
  /// successor index.
  static ResolutionPolicy fixed_preference(std::vector<InputIndex> ranking);
  /// Picks the input whose worst successor has the smallest countdown, then
  /// that successor. States outside the layer map score -1, states outside
  /// the safe set -2. Ties go to the lowest input, then the lowest successor.
  static ResolutionPolicy adversarial_greedy(std::optional<LayerMap> layers = std::nullopt,
                                             std::optional<StateSet> safe = std::nullopt);
  /// Delay runs search the whole run tree for a violation and replay it if
  /// one exists; otherwise (and for single steps) behaves like
  /// adversarial_greedy. `budget` bounds the number of explored edges.
  static ResolutionPolicy exhaustive(std::size_t budget = 50'000'000, std::optional<LayerMap> layers = std::nullopt,
                                     std::optional<StateSet> safe = std::nullopt);

  Kind kind() const { return kind_; }
  std::size_t budget() const { return budget_; }

  InputIndex choose_input(const TransitionSystem& ts, StateIndex x, const InputSet& allowed);
  StateIndex choose_successor(const TransitionSystem& ts, StateIndex x, InputIndex u);

 private:
  ResolutionPolicy() = default;
  int score(StateIndex s) const;

  Kind kind_ = Kind::UniformRandom;
  std::mt19937_64 input_rng_, successor_rng_;
  std::vector<InputIndex> ranking_;
  std::optional<LayerMap> layers_;
  std::optional<StateSet> safe_;
  std::size_t budget_ = 0;
};

struct StepResult {
  InputIndex input;
  StateIndex next;
};

/// One closed-loop transition. Throws BlockingError when `allowed` is empty
/// or the chosen input has no successor.
StepResult step(const TransitionSystem& ts, const InputSet& allowed, StateIndex x, ResolutionPolicy& policy);

/// Everything a closed loop needs, built once and shared by many runs.
struct ClosedLoopModel {
  const TransitionSystem* ts = nullptr;
  Controller coordinated;   ///< C
  Controller independent;   ///< IND_C
  StateSet safe;            ///< K
  StateSet invariant;       ///< W for C

  static ClosedLoopModel build(const TransitionSystem& ts, Controller ctrl, const Partition& partition,
                               const StateSet& safe, const ExecutionOptions& exec = {});
};

struct TraceRecord {
  std::size_t time = 0;
  StateIndex state = 0;
  std::optional<InputIndex> input;       ///< absent on the final record
  std::optional<std::size_t> countdown;  ///< self-triggered runs only
  bool coordinated = false;               ///< input drawn from C at this step
  bool safe = true;                       ///< state in K
};

struct Trace {
  std::vector<TraceRecord> records;
};

enum class Verdict { Safe, Unsafe, UnsafeBlocked };

struct RunResult {
  Trace trace;
  Verdict verdict = Verdict::Safe;
  std::optional<std::size_t> violation_step;
};

/// Steps [0, D) draw from IND_C, steps from D on draw from C. Safe iff every
/// visited state is in K, x[D] is in W, and no step blocks.
RunResult run_delay_scenario(const ClosedLoopModel& model, StateIndex x0, std::size_t delay, std::size_t horizon,
                             ResolutionPolicy& policy);

/// Self-triggered loop: with countdown i > 0 the input comes from IND_C and
/// i decreases; at i = 0 the agents coordinate (input from C) and the
/// countdown restarts at the layer of the next state.
Trace run_self_triggered(const ClosedLoopModel& model, const LayerMap& layers, StateIndex x0, std::size_t horizon,
                         ResolutionPolicy& policy);

/// Witness of a violating uncoordinated run (states x[0..j], inputs
/// u[0..j-1]), or none when every d-step run stays in K, never blocks and
/// ends in W.
struct AdversarialResult {
  bool violation_found = false;
  std::vector<StateIndex> states;
  std::vector<InputIndex> inputs;
};

/// Exhaustive search over all d-step runs of f o IND_C from x0. Throws
/// ResourceError instead of answering when `budget` edges are not enough.
AdversarialResult adversarial_reach_unsafe(const TransitionSystem& ts, const Controller& indctrl, StateIndex x0,
                                           std::size_t d, const StateSet& k, const StateSet& w,
                                           std::size_t budget = 50'000'000);

const char* to_string(Verdict v);

}  // namespace coordfree
