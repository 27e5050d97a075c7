#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "coordfree/errors.hpp"

namespace coordfree {

inline constexpr int kMaxDim = 8;

/// Real vectors of small runtime dimension, stored inline.
using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

using StateIndex = std::uint32_t;
using InputIndex = std::uint32_t;

/// Fixed-universe bit set. Used both for sets of abstract states and for sets
/// of joint (or per-class) input indices.
class IndexSet {
 public:
  IndexSet() = default;
  explicit IndexSet(std::size_t universe, bool full = false);

  static IndexSet full(std::size_t universe) { return IndexSet(universe, true); }
  static IndexSet of(std::size_t universe, std::initializer_list<std::size_t> members);

  std::size_t universe() const { return universe_; }
  bool contains(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void insert(std::size_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void erase(std::size_t i) { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
  void clear();

  std::size_t count() const;
  bool empty() const;
  bool is_subset_of(const IndexSet& other) const;

  IndexSet& operator|=(const IndexSet& other);
  IndexSet& operator&=(const IndexSet& other);
  IndexSet& operator-=(const IndexSet& other);
  IndexSet complement() const;

  friend IndexSet operator|(IndexSet a, const IndexSet& b) { return a |= b; }
  friend IndexSet operator&(IndexSet a, const IndexSet& b) { return a &= b; }
  friend IndexSet operator-(IndexSet a, const IndexSet& b) { return a -= b; }
  friend bool operator==(const IndexSet& a, const IndexSet& b) = default;

  /// Calls fn(i) for every member in increasing order.
  template <class Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t bits = words_[w];
      while (bits) {
        fn(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
        bits &= bits - 1;
      }
    }
  }

  /// True if pred holds for every member; stops at the first failure.
  template <class Pred>
  bool all_of(Pred&& pred) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t bits = words_[w];
      while (bits) {
        if (!pred(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)))) return false;
        bits &= bits - 1;
      }
    }
    return true;
  }
  template <class Pred>
  bool any_of(Pred&& pred) const {
    return !all_of([&](std::size_t i) { return !pred(i); });
  }

  /// The n-th smallest member (0-based); n < count().
  std::size_t nth(std::size_t n) const;
  std::vector<std::size_t> members() const;

  std::span<const std::uint64_t> words() const { return words_; }
  std::span<std::uint64_t> words() { return words_; }

 private:
  void check_same_universe(const IndexSet& other) const;
  void trim();

  std::size_t universe_ = 0;
  std::vector<std::uint64_t> words_;
};

using StateSet = IndexSet;
using InputSet = IndexSet;

/// Axis-aligned uniform grid. Along dimension d the points are the multiples
/// k * eta_d lying in [lower_d, upper_d]. Flat indices are mixed radix with
/// dimension 0 least significant.
class UniformGrid {
 public:
  UniformGrid() = default;
  UniformGrid(std::vector<double> lower, std::vector<double> upper, std::vector<double> eta);

  /// Grid with points 0, 1, ..., count-1 in each dimension.
  static UniformGrid integer_grid(std::vector<std::size_t> counts);

  std::size_t dim() const { return eta_.size(); }
  std::size_t size() const { return size_; }
  std::size_t count(std::size_t d) const { return counts_[d]; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<double>& eta() const { return eta_; }
  std::size_t stride(std::size_t d) const { return strides_[d]; }
  /// Value of the first grid point along d.
  double first(std::size_t d) const { return static_cast<double>(first_k_[d]) * eta_[d]; }
  double coordinate(std::size_t d, std::size_t i) const {
    return static_cast<double>(first_k_[d] + static_cast<std::int64_t>(i)) * eta_[d];
  }

  Vector point_of(std::size_t index) const;
  /// Nearest grid point (ties toward the lower index). Throws DomainError
  /// naming the dimension when the point is more than eta/2 outside.
  std::size_t index_of(const Vector& point) const;
  /// Nearest index along one dimension, same convention as index_of.
  std::size_t axis_index_of(std::size_t d, double value) const;

  void multi_index(std::size_t index, std::span<std::int64_t> out) const;
  std::vector<std::int64_t> multi_index(std::size_t index) const;
  std::size_t flat_index(std::span<const std::int64_t> multi) const;

  friend bool operator==(const UniformGrid&, const UniformGrid&) = default;

 private:
  std::vector<double> lower_, upper_, eta_;
  std::vector<std::int64_t> first_k_;
  std::vector<std::size_t> counts_, strides_;
  std::size_t size_ = 0;
};

/// Joint input space U = U_1 x ... x U_N, one grid per agent. Joint indices
/// are mixed radix over components with component 0 least significant.
class FactoredInputSpace {
 public:
  FactoredInputSpace() = default;
  explicit FactoredInputSpace(std::vector<UniformGrid> components);

  /// Components with the given sizes, each a 1-D integer grid.
  static FactoredInputSpace finite(std::vector<std::size_t> sizes);

  std::size_t num_components() const { return components_.size(); }
  const UniformGrid& component(std::size_t i) const { return components_[i]; }
  const std::vector<UniformGrid>& components() const { return components_; }
  std::size_t component_size(std::size_t i) const { return components_[i].size(); }
  std::size_t size() const { return size_; }
  /// Total real dimension (sum of component grid dimensions).
  std::size_t dim() const { return dim_; }

  InputIndex encode(std::span<const std::size_t> tuple) const;
  std::vector<std::size_t> decode(InputIndex joint) const;
  std::size_t component_index(InputIndex joint, std::size_t i) const {
    return (joint / strides_[i]) % components_[i].size();
  }
  Vector point_of(InputIndex joint) const;

  friend bool operator==(const FactoredInputSpace&, const FactoredInputSpace&) = default;

 private:
  std::vector<UniformGrid> components_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
  std::size_t dim_ = 0;
};

/// Assignment of input components to equivalence classes 0..P-1 (agents
/// sharing a class coordinate instantly).
class Partition {
 public:
  Partition() = default;
  explicit Partition(std::vector<std::size_t> class_of);

  static Partition singletons(std::size_t num_components);
  static Partition single_class(std::size_t num_components);
  static Partition from_classes(const std::vector<std::vector<std::size_t>>& classes,
                                std::size_t num_components);

  std::size_t num_components() const { return class_of_.size(); }
  std::size_t num_classes() const { return members_.size(); }
  std::size_t class_of(std::size_t component) const { return class_of_[component]; }
  const std::vector<std::size_t>& members(std::size_t cls) const { return members_[cls]; }
  const std::vector<std::size_t>& assignment() const { return class_of_; }

  friend bool operator==(const Partition& a, const Partition& b) { return a.class_of_ == b.class_of_; }

 private:
  std::vector<std::size_t> class_of_;
  std::vector<std::vector<std::size_t>> members_;
};

/// Projection of joint inputs onto the product space of one class. Class
/// tuples are mixed radix over the class members in ascending component
/// order, first member least significant.
class ClassCodec {
 public:
  ClassCodec(const FactoredInputSpace& space, const Partition& partition);

  std::size_t num_classes() const { return class_sizes_.size(); }
  std::size_t class_size(std::size_t cls) const { return class_sizes_[cls]; }
  std::size_t num_inputs() const { return num_inputs_; }
  std::size_t sub_index(std::size_t cls, InputIndex joint) const {
    return sub_[cls * num_inputs_ + joint];
  }

  InputSet project(const InputSet& joint, std::size_t cls) const;
  InputSet expand(std::span<const InputSet> per_class) const;
  /// expand(project(joint, l) for every l).
  InputSet closure(const InputSet& joint) const;

 private:
  std::size_t num_inputs_ = 0;
  std::vector<std::size_t> class_sizes_;
  std::vector<std::uint32_t> sub_;
};

InputSet project_inputs(const FactoredInputSpace& space, const Partition& partition,
                        const InputSet& inputs, std::size_t cls);
InputSet product_expand(const FactoredInputSpace& space, const Partition& partition,
                        std::span<const InputSet> per_class);

/// Closed index interval per state dimension.
struct SuccessorBox {
  std::vector<std::int64_t> lo, hi;

  std::size_t cell_count() const;
  friend bool operator==(const SuccessorBox&, const SuccessorBox&) = default;
};

inline constexpr std::uint32_t kBlockingEntry = 0xFFFFFFFFu;

/// Finite nondeterministic system f : X x U -> 2^X with box-shaped successor
/// sets. Boxes are stored once as offsets relative to the source cell
/// ("shapes") and each (x, u) entry refers to a shape or is blocking.
class TransitionSystem {
 public:
  TransitionSystem() = default;
  /// `shapes` holds 2*dim offsets per shape, interleaved (lo_0, hi_0, lo_1, ...).
  /// Shapes are canonicalised (sorted, unused ones dropped) and every entry is
  /// checked to stay inside the grid.
  TransitionSystem(UniformGrid states, FactoredInputSpace inputs, std::vector<std::int32_t> shapes,
                   std::vector<std::uint32_t> table);

  const UniformGrid& state_grid() const { return states_; }
  const FactoredInputSpace& input_space() const { return inputs_; }
  std::size_t num_states() const { return states_.size(); }
  std::size_t num_inputs() const { return inputs_.size(); }
  std::size_t num_shapes() const { return dim() ? shapes_.size() / (2 * dim()) : 0; }
  std::size_t dim() const { return states_.dim(); }

  std::uint32_t shape_id(StateIndex x, InputIndex u) const {
    return table_[static_cast<std::size_t>(x) * num_inputs() + u];
  }
  bool blocking(StateIndex x, InputIndex u) const { return shape_id(x, u) == kBlockingEntry; }
  std::span<const std::int32_t> shape(std::uint32_t id) const {
    return {shapes_.data() + static_cast<std::size_t>(id) * 2 * dim(), 2 * dim()};
  }
  std::span<const std::int32_t> shapes() const { return shapes_; }
  std::span<const std::uint32_t> table() const { return table_; }

  std::optional<SuccessorBox> successors(StateIndex x, InputIndex u) const;
  std::vector<StateIndex> successor_list(StateIndex x, InputIndex u) const;
  /// U(x): inputs with a nonempty successor set.
  InputSet nonblocking_inputs(StateIndex x) const;

  /// Calls fn(successor) for every cell of shape `id` placed at x, stopping
  /// early (and returning false) once fn returns false.
  template <class Fn>
  bool for_each_successor(StateIndex x, std::uint32_t id, Fn&& fn) const;
  bool successors_within(StateIndex x, std::uint32_t id, const StateSet& z) const {
    return for_each_successor(x, id, [&](StateIndex s) { return z.contains(s); });
  }

  friend bool operator==(const TransitionSystem&, const TransitionSystem&) = default;

 private:
  UniformGrid states_;
  FactoredInputSpace inputs_;
  std::vector<std::int32_t> shapes_;
  std::vector<std::uint32_t> table_;
};

/// Incremental construction of small systems (fixtures, tabulated scenarios).
class TransitionSystemBuilder {
 public:
  TransitionSystemBuilder(UniformGrid states, FactoredInputSpace inputs);
  void set(StateIndex x, InputIndex u, const SuccessorBox& box);
  /// 1-D convenience: successors are cells lo..hi.
  void set(StateIndex x, InputIndex u, std::int64_t lo, std::int64_t hi);
  TransitionSystem build() &&;

 private:
  UniformGrid states_;
  FactoredInputSpace inputs_;
  std::vector<std::int32_t> shapes_;
  std::vector<std::uint32_t> table_;
};

/// Memoryless permissive controller: admissible joint inputs per state.
class Controller {
 public:
  Controller() = default;
  Controller(std::size_t num_states, std::size_t num_inputs);

  std::size_t num_states() const { return sets_.size(); }
  std::size_t num_inputs() const { return num_inputs_; }
  const InputSet& at(StateIndex x) const { return sets_[x]; }
  void set(StateIndex x, InputSet inputs);
  void allow(StateIndex x, InputIndex u) { sets_[x].insert(u); }

  /// pi_X(C) = {x : C(x) nonempty}.
  StateSet domain() const;
  /// B = {x : C(x) empty}.
  StateSet blocking_states() const;
  /// Throws PreconditionError unless C(x) is within U(x) for all x.
  void check_nonblocking(const TransitionSystem& ts) const;

  friend bool operator==(const Controller&, const Controller&) = default;

 private:
  std::size_t num_inputs_ = 0;
  std::vector<InputSet> sets_;
};

template <class Fn>
bool TransitionSystem::for_each_successor(StateIndex x, std::uint32_t id, Fn&& fn) const {
  const std::size_t n = dim();
  std::int64_t base[kMaxDim];
  std::int64_t extent[kMaxDim];
  std::int64_t counter[kMaxDim];
  states_.multi_index(x, std::span<std::int64_t>(base, n));
  const std::int32_t* s = shapes_.data() + static_cast<std::size_t>(id) * 2 * n;
  std::size_t flat = 0;
  for (std::size_t d = 0; d < n; ++d) {
    flat += static_cast<std::size_t>(base[d] + s[2 * d]) * states_.stride(d);
    extent[d] = s[2 * d + 1] - s[2 * d];
    counter[d] = 0;
  }
  while (true) {
    if (!fn(static_cast<StateIndex>(flat))) return false;
    std::size_t d = 0;
    for (; d < n; ++d) {
      if (counter[d] < extent[d]) {
        ++counter[d];
        flat += states_.stride(d);
        break;
      }
      flat -= static_cast<std::size_t>(counter[d]) * states_.stride(d);
      counter[d] = 0;
    }
    if (d == n) return true;
  }
}

}  // namespace coordfree
