#include "coordfree/verify.hpp"

#include <algorithm>

#include "coordfree/simulation.hpp"
#include "coordfree/synthesis.hpp"

namespace coordfree {

namespace {

CheckResult check(std::string name, bool ok, std::string detail = {}) {
  return {std::move(name), ok, false, std::move(detail)};
}

}  // namespace

std::vector<CheckResult> verify_pipeline(const SystemArtifact& sys, const ControllerArtifact& ctrl,
                                         const LayersArtifact& lay, const VerifyOptions& options) {
  std::vector<CheckResult> out;
  const auto& exec = options.exec;
  const TransitionSystem& ts = sys.ts;
  const Controller& c = ctrl.controller;
  const StateSet& k = sys.safe;

  const bool linked = ctrl.system_hash == sys.content_hash && lay.system_hash == sys.content_hash &&
                      lay.controller_hash == ctrl.content_hash;
  out.push_back(check("artifact hashes link system, controller and layers", linked));
  const bool shaped = c.num_states() == ts.num_states() && c.num_inputs() == ts.num_inputs() &&
                      lay.layers.num_states() == ts.num_states() && lay.grid == ts.state_grid() &&
                      lay.partition.num_components() == ts.input_space().num_components();
  out.push_back(check("artifact dimensions agree", shaped));
  if (!shaped) return out;

  bool nonblocking = true;
  try {
    c.check_nonblocking(ts);
  } catch (const PreconditionError& e) {
    nonblocking = false;
    out.push_back(check("controller admits only nonblocking inputs", false, e.what()));
  }
  if (nonblocking) out.push_back(check("controller admits only nonblocking inputs", true));

  const StateSet w = c.domain();
  out.push_back(check("domain of C lies in K", w.is_subset_of(k),
                      std::to_string((w - k).count()) + " states of W outside K"));
  out.push_back(check("SPRE_K(W) = W", spre(ts, c, w, k, exec) == w));
  const auto inv = max_invariant(ts, c, k, exec);
  out.push_back(check("max_invariant(C, K) = dom(C)", inv.set == w,
                      "iterations " + std::to_string(inv.iterations)));
  out.push_back(check("C is the maximally permissive safety controller", synthesize_safety_controller(ts, k, exec) == c));

  DelayChain chain;
  try {
    chain = delay_robust_chain(ts, c, lay.partition, k, w, exec);
  } catch (const PreconditionError& e) {
    out.push_back(check("delay chain recomputes", false, e.what()));
    return out;
  }
  const LayerMap recomputed = layer_map(chain.sets, chain.fixed_point);
  out.push_back(check("stored layer map equals recomputed chain", recomputed == lay.layers,
                      "recomputed F = " + std::to_string(chain.fixed_point) + ", stored F = " +
                          std::to_string(lay.layers.fixed_point())));

  bool contains = true;
  for (std::size_t x = 0; x < ts.num_states() && contains; ++x)
    contains = c.at(static_cast<StateIndex>(x)).is_subset_of(chain.independent.at(static_cast<StateIndex>(x)));
  out.push_back(check("C(x) within IND_C(x)", contains));
  bool cpre_ok = true;
  for (const auto& s : chain.sets) cpre_ok = cpre_ok && cpre_ind(ts, chain.independent, s, exec).is_subset_of(pre(ts, c, s, exec));
  out.push_back(check("CPre(S_d) within PRE(S_d) for every d", cpre_ok));
  bool descending = true;
  for (std::size_t d = 0; d + 1 < chain.sets.size(); ++d) descending = descending && chain.sets[d + 1].is_subset_of(chain.sets[d]);
  out.push_back(check("chain descends", descending));

  // Chain membership against the exhaustive adversary.
  const std::size_t f = chain.fixed_point;
  auto member = [&](StateIndex x, std::size_t d) { return chain.sets[std::min(d, f)].contains(x); };
  std::vector<std::pair<StateIndex, std::size_t>> queries;
  const bool exhaustive = ts.num_states() <= options.exhaustive_oracle_states;
  if (exhaustive) {
    for (std::size_t x = 0; x < ts.num_states(); ++x)
      for (std::size_t d = 0; d <= f + 1; ++d) queries.emplace_back(static_cast<StateIndex>(x), d);
  } else {
    // Evenly spaced members of W, each probed at its own layer and one beyond.
    const auto members = w.members();
    const std::size_t n = std::min(options.oracle_samples, members.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = static_cast<StateIndex>(members[i * members.size() / n]);
      const auto l = static_cast<std::size_t>(lay.layers.label(x));
      queries.emplace_back(x, l);
      queries.emplace_back(x, l + 1);
    }
  }
  std::size_t agree = 0, disagree = 0, over_budget = 0;
  std::string first_bad;
  for (auto [x, d] : queries) {
    try {
      const bool violation =
          adversarial_reach_unsafe(ts, chain.independent, x, d, k, w, options.oracle_budget).violation_found;
      if (violation == !member(x, d)) {
        ++agree;
      } else {
        ++disagree;
        if (first_bad.empty()) first_bad = "state " + std::to_string(x) + " at d = " + std::to_string(d);
      }
    } catch (const ResourceError&) {
      ++over_budget;
    }
  }
  CheckResult oracle = check(std::string("chain membership matches the adversarial oracle (") +
                                 (exhaustive ? "all states" : "sampled") + ")",
                             disagree == 0 && agree > 0,
                             std::to_string(agree) + " agree, " + std::to_string(disagree) + " disagree, " +
                                 std::to_string(over_budget) + " over budget" +
                                 (first_bad.empty() ? "" : ", first mismatch " + first_bad));
  if (agree == 0 && disagree == 0) {
    oracle.skipped = true;
    oracle.passed = true;
  }
  out.push_back(oracle);
  return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

}  // namespace coordfree
