#pragma once

#include <cstddef>

#include "coordfree/core_model.hpp"
#include "coordfree/parallel.hpp"

namespace coordfree {

/// PRE(Z) = {x in dom(C) : for all u in C(x), f(x,u) nonempty and within Z}.
StateSet pre(const TransitionSystem& ts, const Controller& ctrl, const StateSet& z,
             const ExecutionOptions& exec = {});

/// SPRE_K(Z) = Z & PRE(Z) & K.
StateSet spre(const TransitionSystem& ts, const Controller& ctrl, const StateSet& z, const StateSet& k,
              const ExecutionOptions& exec = {});

struct InvariantResult {
  StateSet set;
  /// Number of SPRE applications performed, including the one that
  /// confirmed the fixed point.
  std::size_t iterations = 0;
};

/// Limit of SPRE_K^i(X) by synchronous sweeps.
InvariantResult max_invariant(const TransitionSystem& ts, const Controller& ctrl, const StateSet& k,
                              const ExecutionOptions& exec = {});

/// Maximally permissive safety controller for K. Its domain is the greatest
/// fixed point W* of Z -> K & {x : exists u, f(x,u) nonempty and within Z},
/// and C(x) = {u : f(x,u) nonempty and within W*} on W*.
Controller synthesize_safety_controller(const TransitionSystem& ts, const StateSet& k,
                                        const ExecutionOptions& exec = {});

}  // namespace coordfree
