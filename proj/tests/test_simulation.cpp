#include <doctest.h>

#include <algorithm>
#include <random>

#include "coordfree/coordination.hpp"
#include "coordfree/simulation.hpp"
#include "coordfree/synthesis.hpp"
#include "support/oracles.hpp"

using namespace coordfree;
using oracle::to_bits;
using oracle::to_set;

namespace {

struct HeadOnLoop {
  oracle::ExplicitSystem s = oracle::head_on();
  StateSet k = StateSet::of(3, {0, 1});
  ClosedLoopModel model;
  LayerMap layers;
  HeadOnLoop() {
    const Controller c = synthesize_safety_controller(s.ts, k);
    model = ClosedLoopModel::build(s.ts, c, Partition::singletons(2), k);
    const auto chain = delay_robust_chain(s.ts, c, Partition::singletons(2), k, model.invariant);
    layers = layer_map(chain.sets, chain.fixed_point);
  }
};

}  // namespace

TEST_CASE("uniform policy is reproducible and stays inside the allowed set") {
  const auto s = oracle::head_on();
  const InputSet allowed = InputSet::of(4, {1, 2});
  auto a = ResolutionPolicy::uniform_random(5), b = ResolutionPolicy::uniform_random(5);
  std::vector<int> hits(4, 0);
  for (int i = 0; i < 400; ++i) {
    const auto ra = step(s.ts, allowed, 0, a), rb = step(s.ts, allowed, 0, b);
    CHECK(ra.input == rb.input);
    CHECK(ra.next == rb.next);
    CHECK(allowed.contains(ra.input));
    CHECK(ra.next == 1);
    ++hits[ra.input];
  }
  CHECK(hits[1] > 100);
  CHECK(hits[2] > 100);
}

TEST_CASE("fixed preference follows its ranking") {
  const auto s = oracle::head_on();
  auto p = ResolutionPolicy::fixed_preference({3, 2});
  CHECK(step(s.ts, InputSet::of(4, {1, 2}), 0, p).input == 2);
  CHECK(step(s.ts, InputSet::full(4), 0, p).input == 3);
  CHECK(step(s.ts, InputSet::of(4, {0, 1}), 0, p).input == 0);
}

TEST_CASE("adversarial greedy steers toward the unsafe state") {
  const auto s = oracle::head_on();
  auto p = ResolutionPolicy::adversarial_greedy(std::nullopt, StateSet::of(3, {0, 1}));
  const auto r = step(s.ts, InputSet::full(4), 0, p);
  CHECK(r.next == 2);
  CHECK((r.input == oracle::kChangeChange || r.input == oracle::kStayStay));
}

TEST_CASE("step reports blocking and mismatched sets") {
  TransitionSystemBuilder b(UniformGrid::integer_grid({2}), FactoredInputSpace::finite({2}));
  b.set(0, 0, 1, 1);
  const TransitionSystem ts = std::move(b).build();
  auto p = ResolutionPolicy::fixed_preference({1});
  CHECK_THROWS_AS(step(ts, InputSet(2), 0, p), BlockingError);
  CHECK_THROWS_AS(step(ts, InputSet::of(2, {1}), 0, p), BlockingError);
  CHECK_THROWS_AS(step(ts, InputSet(3), 0, p), DomainError);
}

TEST_CASE("head-on delay runs") {
  HeadOnLoop h;
  auto policy = ResolutionPolicy::exhaustive();
  // Coordinated from the start: safe.
  auto r0 = run_delay_scenario(h.model, 0, 0, 10, policy);
  CHECK(r0.verdict == Verdict::Safe);
  CHECK(r0.trace.records.size() == 11);
  // One uncoordinated step from x0 can crash.
  auto r1 = run_delay_scenario(h.model, 0, 1, 10, policy);
  CHECK(r1.verdict == Verdict::Unsafe);
  CHECK(r1.violation_step == std::optional<std::size_t>(1));
  CHECK(r1.trace.records.back().state == 2);
  CHECK_FALSE(r1.trace.records.front().coordinated);
  // From xS any delay is harmless.
  for (std::size_t d : {0, 1, 5, 10}) CHECK(run_delay_scenario(h.model, 1, d, 10, policy).verdict == Verdict::Safe);
  CHECK_THROWS_AS(run_delay_scenario(h.model, 0, 11, 10, policy), PreconditionError);
  CHECK_THROWS_AS(run_delay_scenario(h.model, 9, 0, 10, policy), DomainError);
}

TEST_CASE("delay runs flag blocking as unsafe-blocked") {
  TransitionSystemBuilder b(UniformGrid::integer_grid({2}), FactoredInputSpace::finite({2}));
  b.set(0, 0, 0, 0);
  b.set(1, 0, 1, 1);
  b.set(1, 1, 1, 1);
  const TransitionSystem ts = std::move(b).build();
  const StateSet k = StateSet::full(2);
  const Controller c = synthesize_safety_controller(ts, k);
  auto model = ClosedLoopModel::build(ts, c, Partition::singletons(1), k);
  // Force a blocking input through the uncoordinated controller.
  model.independent.set(0, InputSet::full(2));
  auto policy = ResolutionPolicy::fixed_preference({1});
  const auto r = run_delay_scenario(model, 0, 2, 5, policy);
  CHECK(r.verdict == Verdict::UnsafeBlocked);
  CHECK(r.violation_step == std::optional<std::size_t>(0));
  CHECK(std::string(to_string(r.verdict)) == "unsafe-blocked");
  CHECK(std::string(to_string(Verdict::Safe)) == "safe");
  CHECK(std::string(to_string(Verdict::Unsafe)) == "unsafe");
}

TEST_CASE("self-triggered rule on the head-on fixture") {
  HeadOnLoop h;
  auto policy = ResolutionPolicy::adversarial_greedy(h.layers, h.k);
  const Trace t = run_self_triggered(h.model, h.layers, 0, 6, policy);
  REQUIRE(t.records.size() == 7);
  CHECK(t.records[0].countdown == std::optional<std::size_t>(0));
  CHECK(t.records[0].coordinated);
  CHECK(t.records[1].state == 1);
  for (const auto& r : t.records) CHECK(r.safe);
  CHECK(t.records[1].countdown == std::optional<std::size_t>(1));
  CHECK_FALSE(t.records[1].coordinated);
  CHECK(t.records[2].countdown == std::optional<std::size_t>(0));
  CHECK_THROWS_AS(run_self_triggered(h.model, h.layers, 2, 6, policy), PreconditionError);
}

TEST_CASE("self-triggered countdowns follow the layers on random systems") {
  std::mt19937_64 rng(31337);
  for (int t = 0; t < 100; ++t) {
    auto s = oracle::random_system(rng);
    const StateSet k = to_set(s.safe);
    const Controller c = synthesize_safety_controller(s.ts, k);
    if (c.domain().empty()) continue;
    const auto model = ClosedLoopModel::build(s.ts, c, Partition::singletons(s.comp_sizes.size()), k);
    const auto chain = delay_robust_chain(s.ts, c, Partition::singletons(s.comp_sizes.size()), k, model.invariant);
    const LayerMap lm = layer_map(chain.sets, chain.fixed_point);
    for (int r = 0; r < 5; ++r) {
      const auto x0 = static_cast<StateIndex>(model.invariant.nth(
          std::uniform_int_distribution<std::size_t>(0, model.invariant.count() - 1)(rng)));
      auto policy = ResolutionPolicy::uniform_random(static_cast<std::uint64_t>(t * 10 + r));
      const Trace tr = run_self_triggered(model, lm, x0, 50, policy);
      for (std::size_t i = 0; i < tr.records.size(); ++i) {
        const auto& rec = tr.records[i];
        CHECK(rec.safe);
        REQUIRE(rec.countdown.has_value());
        auto label = lm.label(rec.state);
        // The state sits at least as deep as its countdown.
        CHECK(label >= static_cast<std::int32_t>(*rec.countdown));
        if (rec.input) {
          const auto& allowed = *rec.countdown > 0 ? model.independent.at(rec.state) : model.coordinated.at(rec.state);
          CHECK(allowed.contains(*rec.input));
        }
        if (i > 0 && *tr.records[i - 1].countdown == 0) CHECK(*rec.countdown == static_cast<std::size_t>(label));
      }
    }
  }
}

TEST_CASE("adversarial search matches the naive recursion") {
  std::mt19937_64 rng(555);
  for (int t = 0; t < 150; ++t) {
    auto s = oracle::random_system(rng);
    const StateSet k = to_set(s.safe);
    const Controller c = synthesize_safety_controller(s.ts, k);
    const Partition p = Partition::singletons(s.comp_sizes.size());
    const Controller ind = ind_controller(s.ts.input_space(), c, p);
    const auto table = oracle::to_table(ind);
    const StateSet w = c.domain();
    for (StateIndex x = 0; x < s.num_states; ++x) {
      if (!w.contains(x)) continue;
      for (std::size_t d = 0; d <= 4; ++d) {
        const auto res = adversarial_reach_unsafe(s.ts, ind, x, d, k, w);
        CHECK(res.violation_found == !oracle::safe_for(s, table, x, d, s.safe, to_bits(w)));
        if (!res.violation_found) continue;
        // The witness is a genuine run that ends in a violation.
        REQUIRE(!res.states.empty());
        CHECK(res.states.front() == x);
        REQUIRE(res.inputs.size() + 1 >= res.states.size());
        for (std::size_t i = 0; i + 1 < res.states.size(); ++i) {
          CHECK(ind.at(res.states[i]).contains(res.inputs[i]));
          const auto succ = s.succ[res.states[i]][res.inputs[i]];
          CHECK(std::find(succ.begin(), succ.end(), res.states[i + 1]) != succ.end());
        }
        const StateIndex last = res.states.back();
        const std::size_t j = res.states.size() - 1;
        const bool blocked = res.inputs.size() == res.states.size();
        CHECK((blocked || !k.contains(last) || (j == d && !w.contains(last)) || ind.at(last).empty()));
        CHECK(j <= d);
      }
    }
  }
}

TEST_CASE("adversarial search honors its budget") {
  HeadOnLoop h;
  CHECK_THROWS_AS(adversarial_reach_unsafe(h.s.ts, h.model.independent, 0, 100, h.k, h.model.invariant, 10),
                  ResourceError);
  const auto r = adversarial_reach_unsafe(h.s.ts, h.model.independent, 0, 1, h.k, h.model.invariant);
  CHECK(r.violation_found);
  CHECK(r.states == std::vector<StateIndex>{0, 2});
  CHECK_FALSE(adversarial_reach_unsafe(h.s.ts, h.model.independent, 0, 0, h.k, h.model.invariant).violation_found);
  CHECK_THROWS_AS(adversarial_reach_unsafe(h.s.ts, h.model.independent, 5, 1, h.k, h.model.invariant), DomainError);
}

TEST_CASE("delay runs from S_d survive d uncoordinated steps under every policy") {
  std::mt19937_64 rng(9001);
  for (int t = 0; t < 60; ++t) {
    auto s = oracle::random_system(rng);
    const StateSet k = to_set(s.safe);
    const Controller c = synthesize_safety_controller(s.ts, k);
    if (c.domain().empty()) continue;
    const Partition p = Partition::singletons(s.comp_sizes.size());
    const auto model = ClosedLoopModel::build(s.ts, c, p, k);
    const auto chain = delay_robust_chain(s.ts, c, p, k, model.invariant);
    const LayerMap lm = layer_map(chain.sets, chain.fixed_point);
    for (std::size_t d = 0; d <= chain.fixed_point + 1; ++d) {
      const StateSet sd = lm.chain_set(std::min(d, chain.fixed_point));
      sd.for_each([&](std::size_t x) {
        auto ex = ResolutionPolicy::exhaustive(50'000'000, lm, k);
        CHECK(run_delay_scenario(model, static_cast<StateIndex>(x), d, d + 20, ex).verdict == Verdict::Safe);
      });
    }
  }
}
