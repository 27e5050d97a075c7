#include "coordfree/coordination.hpp"

#include <string>

#include "coordfree/synthesis.hpp"
#include "predecessor.hpp"

namespace coordfree {

Controller ind_controller(const FactoredInputSpace& space, const Controller& ctrl, const Partition& partition,
                          const ExecutionOptions& exec) {
  if (ctrl.num_inputs() != space.size()) throw DomainError("controller is not over the given input space");
  const ClassCodec codec(space, partition);
  Controller out(ctrl.num_states(), ctrl.num_inputs());
  parallel_for(ctrl.num_states(), exec.jobs, [&](std::size_t begin, std::size_t end) {
    for (std::size_t x = begin; x < end; ++x) {
      const InputSet& c = ctrl.at(static_cast<StateIndex>(x));
      if (c.empty()) continue;
      out.set(static_cast<StateIndex>(x), codec.closure(c));
    }
  }, 1);
  return out;
}

StateSet cpre_ind(const TransitionSystem& ts, const Controller& indctrl, const StateSet& z,
                  const ExecutionOptions& exec) {
  return detail::universal_predecessor(ts, indctrl, z, exec);
}

StateSet spre_ind(const TransitionSystem& ts, const Controller& indctrl, const StateSet& z, const StateSet& k,
                  const ExecutionOptions& exec) {
  if (k.universe() != ts.num_states()) throw DomainError("safe set is not over the system's states");
  StateSet out = cpre_ind(ts, indctrl, z, exec);
  out &= z;
  out &= k;
  return out;
}

DelayChain delay_robust_chain(const TransitionSystem& ts, const Controller& ctrl, const Partition& partition,
                              const StateSet& k, const StateSet& w, const ExecutionOptions& exec) {
  if (w.universe() != ts.num_states()) throw DomainError("invariant set is not over the system's states");
  if (spre(ts, ctrl, w, k, exec) != w)
    throw PreconditionError("W is not invariant under the controller (SPRE_K(W) != W)");
  DelayChain chain;
  chain.independent = ind_controller(ts.input_space(), ctrl, partition, exec);
  chain.sets.push_back(w);
  while (true) {
    StateSet next = spre_ind(ts, chain.independent, chain.sets.back(), k, exec);
    if (next == chain.sets.back()) break;
    chain.sets.push_back(std::move(next));
  }
  chain.fixed_point = chain.sets.size() - 1;
  return chain;
}

LayerMap::LayerMap(std::size_t fixed_point, std::vector<std::int32_t> labels)
    : fixed_point_(fixed_point), labels_(std::move(labels)) {
  for (auto l : labels_)
    if (l < kOutside || l > static_cast<std::int32_t>(fixed_point_))
      throw DomainError("layer label " + std::to_string(l) + " outside [-1, F]");
}

StateSet LayerMap::layer(std::size_t k) const {
  StateSet s(labels_.size());
  for (std::size_t x = 0; x < labels_.size(); ++x)
    if (labels_[x] == static_cast<std::int32_t>(k)) s.insert(x);
  return s;
}

StateSet LayerMap::chain_set(std::size_t d) const {
  StateSet s(labels_.size());
  for (std::size_t x = 0; x < labels_.size(); ++x)
    if (labels_[x] >= static_cast<std::int32_t>(d)) s.insert(x);
  return s;
}

LayerMap layer_map(const std::vector<StateSet>& chain, std::size_t fixed_point) {
  if (chain.size() != fixed_point + 1) throw DomainError("chain must hold S_0 .. S_F");
  const std::size_t n = chain.front().universe();
  for (std::size_t d = 0; d + 1 < chain.size(); ++d) {
    if (chain[d + 1].universe() != n) throw DomainError("chain sets have different universes");
    if (!chain[d + 1].is_subset_of(chain[d]))
      throw DomainError("chain is not descending at index " + std::to_string(d + 1));
    if (chain[d + 1] == chain[d])
      throw DomainError("chain repeats at index " + std::to_string(d + 1) + " before F");
  }
  std::vector<std::int32_t> labels(n, LayerMap::kOutside);
  for (std::size_t d = 0; d < chain.size(); ++d)
    chain[d].for_each([&](std::size_t x) { labels[x] = static_cast<std::int32_t>(d); });
  return LayerMap(fixed_point, std::move(labels));
}

std::optional<std::size_t> countdown(const LayerMap& layers, StateIndex x) {
  if (x >= layers.num_states()) return std::nullopt;
  auto l = layers.label(x);
  if (l == LayerMap::kOutside) return std::nullopt;
  return static_cast<std::size_t>(l);
}

}  // namespace coordfree
