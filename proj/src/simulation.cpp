#include "coordfree/simulation.hpp"

#include <functional>
#include <limits>
#include <string>

#include "coordfree/synthesis.hpp"

namespace coordfree {

// --------------------------------------------------------- ResolutionPolicy

ResolutionPolicy ResolutionPolicy::uniform_random(std::uint64_t seed) {
  ResolutionPolicy p;
  p.kind_ = Kind::UniformRandom;
  std::seed_seq a{seed, std::uint64_t{0x1f1f}};
  std::seed_seq b{seed, std::uint64_t{0x2e2e}};
  p.input_rng_.seed(a);
  p.successor_rng_.seed(b);
  return p;
}

ResolutionPolicy ResolutionPolicy::fixed_preference(std::vector<InputIndex> ranking) {
  ResolutionPolicy p;
  p.kind_ = Kind::FixedPreference;
  p.ranking_ = std::move(ranking);
  return p;
}

ResolutionPolicy ResolutionPolicy::adversarial_greedy(std::optional<LayerMap> layers, std::optional<StateSet> safe) {
  ResolutionPolicy p;
  p.kind_ = Kind::AdversarialGreedy;
  p.layers_ = std::move(layers);
  p.safe_ = std::move(safe);
  return p;
}

ResolutionPolicy ResolutionPolicy::exhaustive(std::size_t budget, std::optional<LayerMap> layers,
                                              std::optional<StateSet> safe) {
  ResolutionPolicy p = adversarial_greedy(std::move(layers), std::move(safe));
  p.kind_ = Kind::Exhaustive;
  p.budget_ = budget;
  return p;
}

int ResolutionPolicy::score(StateIndex s) const {
  if (safe_ && !safe_->contains(s)) return -2;
  if (!layers_) return 0;
  auto c = countdown(*layers_, s);
  return c ? static_cast<int>(*c) : -1;
}

InputIndex ResolutionPolicy::choose_input(const TransitionSystem& ts, StateIndex x, const InputSet& allowed) {
  if (allowed.empty()) throw BlockingError("no admissible input at state " + std::to_string(x));
  switch (kind_) {
    case Kind::UniformRandom: {
      std::uniform_int_distribution<std::size_t> pick(0, allowed.count() - 1);
      return static_cast<InputIndex>(allowed.nth(pick(input_rng_)));
    }
    case Kind::FixedPreference: {
      for (auto u : ranking_)
        if (u < allowed.universe() && allowed.contains(u)) return u;
      return static_cast<InputIndex>(allowed.nth(0));
    }
    case Kind::AdversarialGreedy:
    case Kind::Exhaustive: {
      InputIndex best = static_cast<InputIndex>(allowed.nth(0));
      int best_score = std::numeric_limits<int>::max();
      allowed.for_each([&](std::size_t u) {
        auto id = ts.shape_id(x, static_cast<InputIndex>(u));
        // A blocking input is the worst outcome.
        int worst = -3;
        if (id != kBlockingEntry) {
          worst = std::numeric_limits<int>::max();
          ts.for_each_successor(x, id, [&](StateIndex s) {
            worst = std::min(worst, score(s));
            return true;
          });
        }
        if (worst < best_score) {
          best_score = worst;
          best = static_cast<InputIndex>(u);
        }
      });
      return best;
    }
  }
  return static_cast<InputIndex>(allowed.nth(0));
}

StateIndex ResolutionPolicy::choose_successor(const TransitionSystem& ts, StateIndex x, InputIndex u) {
  auto id = ts.shape_id(x, u);
  if (id == kBlockingEntry)
    throw BlockingError("input " + std::to_string(u) + " blocks at state " + std::to_string(x));
  switch (kind_) {
    case Kind::UniformRandom: {
      auto box = *ts.successors(x, u);
      std::vector<std::int64_t> cell(box.lo.size());
      for (std::size_t d = 0; d < cell.size(); ++d) {
        std::uniform_int_distribution<std::int64_t> pick(box.lo[d], box.hi[d]);
        cell[d] = pick(successor_rng_);
      }
      return static_cast<StateIndex>(ts.state_grid().flat_index(cell));
    }
    case Kind::FixedPreference: {
      StateIndex first = 0;
      ts.for_each_successor(x, id, [&](StateIndex s) {
        first = s;
        return false;
      });
      return first;
    }
    case Kind::AdversarialGreedy:
    case Kind::Exhaustive: {
      StateIndex best = 0;
      int best_score = std::numeric_limits<int>::max();
      ts.for_each_successor(x, id, [&](StateIndex s) {
        int sc = score(s);
        if (sc < best_score) {
          best_score = sc;
          best = s;
        }
        return true;
      });
      return best;
    }
  }
  return 0;
}

StepResult step(const TransitionSystem& ts, const InputSet& allowed, StateIndex x, ResolutionPolicy& policy) {
  if (allowed.universe() != ts.num_inputs()) throw DomainError("allowed set is not over the joint inputs");
  InputIndex u = policy.choose_input(ts, x, allowed);
  StateIndex next = policy.choose_successor(ts, x, u);
  return {u, next};
}

ClosedLoopModel ClosedLoopModel::build(const TransitionSystem& ts, Controller ctrl, const Partition& partition,
                                       const StateSet& safe, const ExecutionOptions& exec) {
  ClosedLoopModel m;
  m.ts = &ts;
  m.independent = ind_controller(ts.input_space(), ctrl, partition, exec);
  m.invariant = max_invariant(ts, ctrl, safe, exec).set;
  m.coordinated = std::move(ctrl);
  m.safe = safe;
  return m;
}

// ------------------------------------------------------- exhaustive search

namespace {

/// Memoised search for a violating run of a time-varying closed loop over
/// times 0..steps. A run violates if it visits a state outside K (at times
/// before `steps`, and at `steps` too when check_safe_at_end), misses the
/// checkpoint set at the checkpoint time, or meets an empty/blocking input.
class ViolationSearch {
 public:
  ViolationSearch(const TransitionSystem& ts, std::function<const Controller&(std::size_t)> ctrl_at,
                  const StateSet& safe, std::size_t steps, std::optional<std::size_t> checkpoint_time,
                  const StateSet* checkpoint, bool check_safe_at_end, std::size_t budget)
      : ts_(ts),
        ctrl_at_(std::move(ctrl_at)),
        safe_(safe),
        steps_(steps),
        checkpoint_time_(checkpoint_time),
        checkpoint_(checkpoint),
        check_safe_at_end_(check_safe_at_end),
        budget_(budget) {
    const double cells = static_cast<double>(ts.num_states()) * static_cast<double>(steps + 1);
    if (cells > static_cast<double>(budget))
      throw ResourceError("exhaustive search over " + std::to_string(ts.num_states()) + " states x " +
                          std::to_string(steps + 1) + " times exceeds the budget of " + std::to_string(budget));
    memo_.assign(ts.num_states() * (steps + 1), kUnknown);
  }

  bool violates(StateIndex x, std::size_t k) {
    auto& m = memo_[static_cast<std::size_t>(x) * (steps_ + 1) + k];
    if (m != kUnknown) return m == kBad;
    bool bad = immediate_violation(x, k) || (k < steps_ && successor_violation(x, k));
    m = bad ? kBad : kGood;
    return bad;
  }

  AdversarialResult witness(StateIndex x0) {
    AdversarialResult r;
    if (!violates(x0, 0)) return r;
    r.violation_found = true;
    StateIndex x = x0;
    for (std::size_t k = 0;; ++k) {
      r.states.push_back(x);
      if (immediate_violation(x, k)) return r;
      const InputSet& allowed = ctrl_at_(k).at(x);
      bool advanced = false;
      allowed.all_of([&](std::size_t ui) {
        auto u = static_cast<InputIndex>(ui);
        auto id = ts_.shape_id(x, u);
        if (id == kBlockingEntry) {
          r.inputs.push_back(u);
          return false;
        }
        StateIndex bad_next = 0;
        bool found = !ts_.for_each_successor(x, id, [&](StateIndex s) {
          if (violates(s, k + 1)) {
            bad_next = s;
            return false;
          }
          return true;
        });
        if (found) {
          r.inputs.push_back(u);
          x = bad_next;
          advanced = true;
          return false;
        }
        return true;
      });
      if (!advanced) return r;
    }
  }

 private:
  static constexpr std::uint8_t kUnknown = 0, kGood = 1, kBad = 2;

  bool immediate_violation(StateIndex x, std::size_t k) const {
    if (checkpoint_time_ && *checkpoint_time_ == k && !checkpoint_->contains(x)) return true;
    if ((k < steps_ || check_safe_at_end_) && !safe_.contains(x)) return true;
    if (k < steps_ && ctrl_at_(k).at(x).empty()) return true;
    return false;
  }

  bool successor_violation(StateIndex x, std::size_t k) {
    const InputSet& allowed = ctrl_at_(k).at(x);
    return allowed.any_of([&](std::size_t ui) {
      auto id = ts_.shape_id(x, static_cast<InputIndex>(ui));
      if (id == kBlockingEntry) return true;
      return !ts_.for_each_successor(x, id, [&](StateIndex s) {
        if (++edges_ > budget_)
          throw ResourceError("exhaustive search exceeded its budget of " + std::to_string(budget_) + " edges");
        return !violates(s, k + 1);
      });
    });
  }

  const TransitionSystem& ts_;
  std::function<const Controller&(std::size_t)> ctrl_at_;
  const StateSet& safe_;
  std::size_t steps_;
  std::optional<std::size_t> checkpoint_time_;
  const StateSet* checkpoint_;
  bool check_safe_at_end_;
  std::size_t budget_;
  std::size_t edges_ = 0;
  std::vector<std::uint8_t> memo_;
};

void check_model(const ClosedLoopModel& model, StateIndex x0) {
  if (!model.ts) throw PreconditionError("closed loop model has no system");
  if (x0 >= model.ts->num_states()) throw DomainError("initial state " + std::to_string(x0) + " out of range");
}

}  // namespace

AdversarialResult adversarial_reach_unsafe(const TransitionSystem& ts, const Controller& indctrl, StateIndex x0,
                                           std::size_t d, const StateSet& k, const StateSet& w,
                                           std::size_t budget) {
  if (indctrl.num_states() != ts.num_states() || k.universe() != ts.num_states() || w.universe() != ts.num_states())
    throw DomainError("system, controller and sets must share the state space");
  if (x0 >= ts.num_states()) throw DomainError("initial state out of range");
  ViolationSearch search(
      ts, [&](std::size_t) -> const Controller& { return indctrl; }, k, d, d, &w, false, budget);
  return search.witness(x0);
}

// ----------------------------------------------------------------- runs

RunResult run_delay_scenario(const ClosedLoopModel& model, StateIndex x0, std::size_t delay, std::size_t horizon,
                             ResolutionPolicy& policy) {
  check_model(model, x0);
  if (horizon < delay) throw PreconditionError("horizon must be at least the connection delay");
  const TransitionSystem& ts = *model.ts;
  auto ctrl_at = [&](std::size_t k) -> const Controller& {
    return k < delay ? model.independent : model.coordinated;
  };

  std::optional<AdversarialResult> plan;
  if (policy.kind() == ResolutionPolicy::Kind::Exhaustive) {
    ViolationSearch search(ts, ctrl_at, model.safe, horizon, delay, &model.invariant, true, policy.budget());
    plan = search.witness(x0);
    if (!plan->violation_found) plan.reset();
  }

  RunResult result;
  StateIndex x = x0;
  for (std::size_t k = 0;; ++k) {
    TraceRecord rec;
    rec.time = k;
    rec.state = x;
    rec.safe = model.safe.contains(x);
    rec.coordinated = k >= delay;
    auto fail = [&](Verdict v) {
      result.verdict = v;
      result.violation_step = k;
      result.trace.records.push_back(rec);
    };
    if (!rec.safe) {
      fail(Verdict::Unsafe);
      break;
    }
    if (k == delay && !model.invariant.contains(x)) {
      fail(Verdict::Unsafe);
      break;
    }
    if (k == horizon) {
      result.trace.records.push_back(rec);
      break;
    }
    const InputSet& allowed = ctrl_at(k).at(x);
    if (allowed.empty()) {
      fail(Verdict::UnsafeBlocked);
      break;
    }
    InputIndex u;
    StateIndex next;
    if (plan) {
      u = plan->inputs.at(k);
      if (ts.blocking(x, u)) {
        rec.input = u;
        fail(Verdict::UnsafeBlocked);
        break;
      }
      next = plan->states.at(k + 1);
    } else {
      u = policy.choose_input(ts, x, allowed);
      if (ts.blocking(x, u)) {
        rec.input = u;
        fail(Verdict::UnsafeBlocked);
        break;
      }
      next = policy.choose_successor(ts, x, u);
    }
    rec.input = u;
    result.trace.records.push_back(rec);
    x = next;
  }
  return result;
}

Trace run_self_triggered(const ClosedLoopModel& model, const LayerMap& layers, StateIndex x0, std::size_t horizon,
                         ResolutionPolicy& policy) {
  check_model(model, x0);
  if (layers.num_states() != model.ts->num_states()) throw DomainError("layer map is not over the system's states");
  auto start = countdown(layers, x0);
  if (!start) throw PreconditionError("initial state " + std::to_string(x0) + " is outside W");
  const TransitionSystem& ts = *model.ts;
  Trace trace;
  StateIndex x = x0;
  std::size_t i = *start;
  for (std::size_t k = 0;; ++k) {
    TraceRecord rec;
    rec.time = k;
    rec.state = x;
    rec.countdown = i;
    rec.safe = model.safe.contains(x);
    rec.coordinated = i == 0;
    if (k == horizon) {
      trace.records.push_back(rec);
      break;
    }
    const InputSet& allowed = i > 0 ? model.independent.at(x) : model.coordinated.at(x);
    StepResult s = step(ts, allowed, x, policy);
    rec.input = s.input;
    trace.records.push_back(rec);
    if (i > 0) {
      --i;
    } else {
      auto next = countdown(layers, s.next);
      if (!next) throw BlockingError("coordinated step left W at time " + std::to_string(k));
      i = *next;
    }
    x = s.next;
  }
  return trace;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Safe:
      return "safe";
    case Verdict::Unsafe:
      return "unsafe";
    case Verdict::UnsafeBlocked:
      return "unsafe-blocked";
  }
  return "unknown";
}

}  // namespace coordfree
