#include "coordfree/synthesis.hpp"

#include "predecessor.hpp"

namespace coordfree {

StateSet pre(const TransitionSystem& ts, const Controller& ctrl, const StateSet& z, const ExecutionOptions& exec) {
  return detail::universal_predecessor(ts, ctrl, z, exec);
}

StateSet spre(const TransitionSystem& ts, const Controller& ctrl, const StateSet& z, const StateSet& k,
              const ExecutionOptions& exec) {
  if (k.universe() != ts.num_states()) throw DomainError("safe set is not over the system's states");
  StateSet out = pre(ts, ctrl, z, exec);
  out &= z;
  out &= k;
  return out;
}

InvariantResult max_invariant(const TransitionSystem& ts, const Controller& ctrl, const StateSet& k,
                              const ExecutionOptions& exec) {
  InvariantResult r{StateSet::full(ts.num_states()), 0};
  while (true) {
    StateSet next = spre(ts, ctrl, r.set, k, exec);
    ++r.iterations;
    if (next == r.set) return r;
    r.set = std::move(next);
  }
}

namespace {

// K & {x : exists u, f(x,u) nonempty and within z}.
StateSet existential_step(const TransitionSystem& ts, const StateSet& z, const StateSet& k,
                          const ExecutionOptions& exec) {
  StateSet out(ts.num_states());
  const std::size_t nu = ts.num_inputs();
  parallel_for(ts.num_states(), exec.jobs, [&](std::size_t begin, std::size_t end) {
    detail::ShapeMemo memo(ts.num_shapes());
    for (std::size_t xi = begin; xi < end; ++xi) {
      if (!k.contains(xi)) continue;
      const auto x = static_cast<StateIndex>(xi);
      memo.next_state();
      for (std::size_t u = 0; u < nu; ++u) {
        auto id = ts.shape_id(x, static_cast<InputIndex>(u));
        if (id == kBlockingEntry) continue;
        if (memo.get(id, [&] { return ts.successors_within(x, id, z); })) {
          out.insert(xi);
          break;
        }
      }
    }
  });
  return out;
}

}  // namespace

Controller synthesize_safety_controller(const TransitionSystem& ts, const StateSet& k, const ExecutionOptions& exec) {
  if (k.universe() != ts.num_states()) throw DomainError("safe set is not over the system's states");
  StateSet w = k;
  while (true) {
    StateSet next = existential_step(ts, w, k, exec);
    if (next == w) break;
    w = std::move(next);
  }
  Controller ctrl(ts.num_states(), ts.num_inputs());
  const std::size_t nu = ts.num_inputs();
  parallel_for(ts.num_states(), exec.jobs, [&](std::size_t begin, std::size_t end) {
    detail::ShapeMemo memo(ts.num_shapes());
    for (std::size_t xi = begin; xi < end; ++xi) {
      if (!w.contains(xi)) continue;
      const auto x = static_cast<StateIndex>(xi);
      memo.next_state();
      InputSet allowed(nu);
      for (std::size_t u = 0; u < nu; ++u) {
        auto id = ts.shape_id(x, static_cast<InputIndex>(u));
        if (id == kBlockingEntry) continue;
        if (memo.get(id, [&] { return ts.successors_within(x, id, w); })) allowed.insert(u);
      }
      ctrl.set(x, std::move(allowed));
    }
  }, 1);
  return ctrl;
}

}  // namespace coordfree
