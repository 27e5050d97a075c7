#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "coordfree/core_model.hpp"
#include "coordfree/parallel.hpp"

namespace coordfree {

/// IND_C(x): product over partition classes of the projections of C(x). The
/// smallest coordination-free input set containing C(x).
Controller ind_controller(const FactoredInputSpace& space, const Controller& ctrl, const Partition& partition,
                          const ExecutionOptions& exec = {});

/// Coordination-free predecessor: states in dom(IND_C) from which every
/// u in IND_C(x) has nonempty successors inside Z.
StateSet cpre_ind(const TransitionSystem& ts, const Controller& indctrl, const StateSet& z,
                  const ExecutionOptions& exec = {});

/// Z & cpre_ind(Z) & K.
StateSet spre_ind(const TransitionSystem& ts, const Controller& indctrl, const StateSet& z, const StateSet& k,
                  const ExecutionOptions& exec = {});

/// Descending chain S_0 = W, S_{d+1} = spre_ind(S_d) up to its first repeat.
/// A state in S_d tolerates d uncoordinated steps and is back in W after them.
struct DelayChain {
  std::vector<StateSet> sets;  ///< S_0 .. S_F
  std::size_t fixed_point = 0;  ///< F
  Controller independent;       ///< IND_C used for every iterate
};

DelayChain delay_robust_chain(const TransitionSystem& ts, const Controller& ctrl, const Partition& partition,
                              const StateSet& k, const StateSet& w, const ExecutionOptions& exec = {});

/// Disjoint layers T(0..F) of W: T(k) = S_k \ S_{k+1} for k < F, T(F) = S_F.
class LayerMap {
 public:
  static constexpr std::int32_t kOutside = -1;

  LayerMap() = default;
  LayerMap(std::size_t fixed_point, std::vector<std::int32_t> labels);

  std::size_t fixed_point() const { return fixed_point_; }
  std::size_t num_states() const { return labels_.size(); }
  /// Layer of x, or kOutside when x is not in W.
  std::int32_t label(StateIndex x) const { return labels_[x]; }
  const std::vector<std::int32_t>& labels() const { return labels_; }

  StateSet layer(std::size_t k) const;
  /// S_d recovered from the labels: states with layer >= d.
  StateSet chain_set(std::size_t d) const;
  StateSet domain() const { return chain_set(0); }

  friend bool operator==(const LayerMap&, const LayerMap&) = default;

 private:
  std::size_t fixed_point_ = 0;
  std::vector<std::int32_t> labels_;
};

/// Throws DomainError unless the chain is strictly descending and its last
/// element is the first repeat.
LayerMap layer_map(const std::vector<StateSet>& chain, std::size_t fixed_point);

/// The unique k with x in T(k); none outside W. Zero means coordinate now.
std::optional<std::size_t> countdown(const LayerMap& layers, StateIndex x);

}  // namespace coordfree
