#pragma once

#include <string>
#include <vector>

#include "coordfree/core_model.hpp"
#include "coordfree/parallel.hpp"

namespace coordfree::detail {

inline void check_spaces(const TransitionSystem& ts, const Controller& ctrl, const StateSet& z) {
  if (ctrl.num_states() != ts.num_states() || ctrl.num_inputs() != ts.num_inputs())
    throw DomainError("controller spaces (" + std::to_string(ctrl.num_states()) + " x " +
                      std::to_string(ctrl.num_inputs()) + ") do not match the system (" +
                      std::to_string(ts.num_states()) + " x " + std::to_string(ts.num_inputs()) + ")");
  if (z.universe() != ts.num_states())
    throw DomainError("state set over " + std::to_string(z.universe()) + " states, system has " +
                      std::to_string(ts.num_states()));
}

/// Per-worker cache of "shape placed at the current state lies in Z",
/// invalidated by bumping the generation for every new state.
class ShapeMemo {
 public:
  explicit ShapeMemo(std::size_t shapes) : stamp_(shapes, 0), value_(shapes, 0) {}
  void next_state() { ++gen_; }
  template <class Compute>
  bool get(std::uint32_t id, Compute&& compute) {
    if (stamp_[id] != gen_) {
      stamp_[id] = gen_;
      value_[id] = compute() ? 1 : 0;
    }
    return value_[id] != 0;
  }

 private:
  std::vector<std::uint32_t> stamp_;
  std::vector<std::uint8_t> value_;
  std::uint32_t gen_ = 0;
};

/// {x : ctrl(x) nonempty and every u in ctrl(x) has nonempty successors in z}.
inline StateSet universal_predecessor(const TransitionSystem& ts, const Controller& ctrl, const StateSet& z,
                                      const ExecutionOptions& exec) {
  check_spaces(ts, ctrl, z);
  StateSet out(ts.num_states());
  parallel_for(ts.num_states(), exec.jobs, [&](std::size_t begin, std::size_t end) {
    ShapeMemo memo(ts.num_shapes());
    for (std::size_t xi = begin; xi < end; ++xi) {
      const auto x = static_cast<StateIndex>(xi);
      const InputSet& allowed = ctrl.at(x);
      if (allowed.empty()) continue;
      memo.next_state();
      bool ok = allowed.all_of([&](std::size_t u) {
        auto id = ts.shape_id(x, static_cast<InputIndex>(u));
        if (id == kBlockingEntry) return false;
        return memo.get(id, [&] { return ts.successors_within(x, id, z); });
      });
      if (ok) out.insert(xi);
    }
  });
  return out;
}

}  // namespace coordfree::detail
