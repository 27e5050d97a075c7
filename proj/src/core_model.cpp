#include "coordfree/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace coordfree {

namespace {

constexpr double kGridTolerance = 1e-9;

std::size_t words_for(std::size_t bits) { return (bits + 63) / 64; }

}  // namespace

// ---------------------------------------------------------------- IndexSet

IndexSet::IndexSet(std::size_t universe, bool full)
    : universe_(universe), words_(words_for(universe), full ? ~std::uint64_t{0} : 0) {
  trim();
}

IndexSet IndexSet::of(std::size_t universe, std::initializer_list<std::size_t> members) {
  IndexSet s(universe);
  for (auto m : members) {
    if (m >= universe) throw DomainError("IndexSet::of: member " + std::to_string(m) + " outside universe");
    s.insert(m);
  }
  return s;
}

void IndexSet::clear() { std::fill(words_.begin(), words_.end(), 0); }

void IndexSet::trim() {
  if (universe_ % 64 != 0 && !words_.empty())
    words_.back() &= (std::uint64_t{1} << (universe_ % 64)) - 1;
}

std::size_t IndexSet::count() const {
  std::size_t c = 0;
  for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
  return c;
}

bool IndexSet::empty() const {
  return std::all_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w == 0; });
}

void IndexSet::check_same_universe(const IndexSet& other) const {
  if (universe_ != other.universe_)
    throw DomainError("set universes differ: " + std::to_string(universe_) + " vs " +
                      std::to_string(other.universe_));
}

bool IndexSet::is_subset_of(const IndexSet& other) const {
  check_same_universe(other);
  for (std::size_t w = 0; w < words_.size(); ++w)
    if (words_[w] & ~other.words_[w]) return false;
  return true;
}

IndexSet& IndexSet::operator|=(const IndexSet& other) {
  check_same_universe(other);
  for (std::size_t w = 0; w < words_.size(); ++w) words_[w] |= other.words_[w];
  return *this;
}

IndexSet& IndexSet::operator&=(const IndexSet& other) {
  check_same_universe(other);
  for (std::size_t w = 0; w < words_.size(); ++w) words_[w] &= other.words_[w];
  return *this;
}

IndexSet& IndexSet::operator-=(const IndexSet& other) {
  check_same_universe(other);
  for (std::size_t w = 0; w < words_.size(); ++w) words_[w] &= ~other.words_[w];
  return *this;
}

IndexSet IndexSet::complement() const {
  IndexSet r(*this);
  for (auto& w : r.words_) w = ~w;
  r.trim();
  return r;
}

std::size_t IndexSet::nth(std::size_t n) const {
  for (std::size_t w = 0; w < words_.size(); ++w) {
    auto c = static_cast<std::size_t>(std::popcount(words_[w]));
    if (n >= c) {
      n -= c;
      continue;
    }
    std::uint64_t bits = words_[w];
    for (std::size_t k = 0; k < n; ++k) bits &= bits - 1;
    return w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
  }
  throw DomainError("IndexSet::nth: rank beyond cardinality");
}

std::vector<std::size_t> IndexSet::members() const {
  std::vector<std::size_t> out;
  out.reserve(count());
  for_each([&](std::size_t i) { out.push_back(i); });
  return out;
}

// ------------------------------------------------------------- UniformGrid

UniformGrid::UniformGrid(std::vector<double> lower, std::vector<double> upper, std::vector<double> eta)
    : lower_(std::move(lower)), upper_(std::move(upper)), eta_(std::move(eta)) {
  const std::size_t n = eta_.size();
  if (n == 0 || n > static_cast<std::size_t>(kMaxDim))
    throw DomainError("grid dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  if (lower_.size() != n || upper_.size() != n)
    throw DomainError("grid bounds and step have different dimensions");
  first_k_.resize(n);
  counts_.resize(n);
  strides_.resize(n);
  std::size_t total = 1;
  for (std::size_t d = 0; d < n; ++d) {
    if (!std::isfinite(lower_[d]) || !std::isfinite(upper_[d]) || !std::isfinite(eta_[d]))
      throw DomainError("grid parameters must be finite (dimension " + std::to_string(d) + ")");
    if (!(eta_[d] > 0)) throw DomainError("grid step must be positive (dimension " + std::to_string(d) + ")");
    if (lower_[d] > upper_[d])
      throw DomainError("grid lower bound exceeds upper bound (dimension " + std::to_string(d) + ")");
    auto first = static_cast<std::int64_t>(std::ceil(lower_[d] / eta_[d] - kGridTolerance));
    auto last = static_cast<std::int64_t>(std::floor(upper_[d] / eta_[d] + kGridTolerance));
    if (last < first)
      throw DomainError("grid has no points in dimension " + std::to_string(d));
    first_k_[d] = first;
    counts_[d] = static_cast<std::size_t>(last - first + 1);
    strides_[d] = total;
    if (total > std::numeric_limits<std::uint32_t>::max() / counts_[d])
      throw ResourceError("grid has more than 2^32 points");
    total *= counts_[d];
  }
  size_ = total;
}

UniformGrid UniformGrid::integer_grid(std::vector<std::size_t> counts) {
  std::vector<double> lo(counts.size(), 0.0), hi, eta(counts.size(), 1.0);
  for (auto c : counts) {
    if (c == 0) throw DomainError("integer grid needs at least one point per dimension");
    hi.push_back(static_cast<double>(c - 1));
  }
  return UniformGrid(std::move(lo), std::move(hi), std::move(eta));
}

Vector UniformGrid::point_of(std::size_t index) const {
  if (index >= size_) throw DomainError("grid index " + std::to_string(index) + " out of range");
  Vector p(static_cast<Eigen::Index>(dim()));
  for (std::size_t d = 0; d < dim(); ++d) p[static_cast<Eigen::Index>(d)] = coordinate(d, (index / strides_[d]) % counts_[d]);
  return p;
}

std::size_t UniformGrid::axis_index_of(std::size_t d, double value) const {
  const double t = value / eta_[d] - static_cast<double>(first_k_[d]);
  const double hi = static_cast<double>(counts_[d]) - 0.5;
  if (!std::isfinite(t) || t < -0.5 - kGridTolerance || t > hi + kGridTolerance)
    throw DomainError("point outside grid in dimension " + std::to_string(d) + " (value " +
                      std::to_string(value) + ")");
  auto k = static_cast<std::int64_t>(std::ceil(t - 0.5));
  k = std::clamp<std::int64_t>(k, 0, static_cast<std::int64_t>(counts_[d]) - 1);
  return static_cast<std::size_t>(k);
}

std::size_t UniformGrid::index_of(const Vector& point) const {
  if (static_cast<std::size_t>(point.size()) != dim())
    throw DomainError("point dimension " + std::to_string(point.size()) + " does not match grid dimension " +
                      std::to_string(dim()));
  std::size_t index = 0;
  for (std::size_t d = 0; d < dim(); ++d) index += axis_index_of(d, point[static_cast<Eigen::Index>(d)]) * strides_[d];
  return index;
}

void UniformGrid::multi_index(std::size_t index, std::span<std::int64_t> out) const {
  for (std::size_t d = 0; d < dim(); ++d)
    out[d] = static_cast<std::int64_t>((index / strides_[d]) % counts_[d]);
}

std::vector<std::int64_t> UniformGrid::multi_index(std::size_t index) const {
  std::vector<std::int64_t> m(dim());
  multi_index(index, m);
  return m;
}

std::size_t UniformGrid::flat_index(std::span<const std::int64_t> multi) const {
  if (multi.size() != dim()) throw DomainError("multi-index has wrong dimension");
  std::size_t index = 0;
  for (std::size_t d = 0; d < dim(); ++d) {
    if (multi[d] < 0 || static_cast<std::size_t>(multi[d]) >= counts_[d])
      throw DomainError("multi-index outside grid in dimension " + std::to_string(d));
    index += static_cast<std::size_t>(multi[d]) * strides_[d];
  }
  return index;
}

// ------------------------------------------------------ FactoredInputSpace

FactoredInputSpace::FactoredInputSpace(std::vector<UniformGrid> components) : components_(std::move(components)) {
  if (components_.empty()) throw DomainError("input space needs at least one component");
  std::size_t total = 1;
  for (const auto& c : components_) {
    strides_.push_back(total);
    if (total > std::numeric_limits<std::uint32_t>::max() / c.size())
      throw ResourceError("joint input space has more than 2^32 elements");
    total *= c.size();
    dim_ += c.dim();
  }
  if (dim_ > static_cast<std::size_t>(kMaxDim))
    throw DomainError("joint input dimension exceeds " + std::to_string(kMaxDim));
  size_ = total;
}

FactoredInputSpace FactoredInputSpace::finite(std::vector<std::size_t> sizes) {
  std::vector<UniformGrid> grids;
  for (auto s : sizes) grids.push_back(UniformGrid::integer_grid({s}));
  return FactoredInputSpace(std::move(grids));
}

InputIndex FactoredInputSpace::encode(std::span<const std::size_t> tuple) const {
  if (tuple.size() != components_.size()) throw DomainError("input tuple has wrong number of components");
  std::size_t joint = 0;
  for (std::size_t i = 0; i < tuple.size(); ++i) {
    if (tuple[i] >= components_[i].size())
      throw DomainError("input component " + std::to_string(i) + " index out of range");
    joint += tuple[i] * strides_[i];
  }
  return static_cast<InputIndex>(joint);
}

std::vector<std::size_t> FactoredInputSpace::decode(InputIndex joint) const {
  if (joint >= size_) throw DomainError("joint input index " + std::to_string(joint) + " out of range");
  std::vector<std::size_t> t(components_.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = component_index(joint, i);
  return t;
}

Vector FactoredInputSpace::point_of(InputIndex joint) const {
  Vector p(static_cast<Eigen::Index>(dim_));
  Eigen::Index offset = 0;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    Vector c = components_[i].point_of(component_index(joint, i));
    p.segment(offset, c.size()) = c;
    offset += c.size();
  }
  return p;
}

// --------------------------------------------------------------- Partition

Partition::Partition(std::vector<std::size_t> class_of) : class_of_(std::move(class_of)) {
  if (class_of_.empty()) throw DomainError("partition must cover at least one component");
  std::size_t classes = *std::max_element(class_of_.begin(), class_of_.end()) + 1;
  members_.resize(classes);
  for (std::size_t i = 0; i < class_of_.size(); ++i) members_[class_of_[i]].push_back(i);
  for (std::size_t l = 0; l < classes; ++l)
    if (members_[l].empty()) throw DomainError("partition class " + std::to_string(l) + " is empty");
}

Partition Partition::singletons(std::size_t num_components) {
  std::vector<std::size_t> a(num_components);
  std::iota(a.begin(), a.end(), 0);
  return Partition(std::move(a));
}

Partition Partition::single_class(std::size_t num_components) {
  return Partition(std::vector<std::size_t>(num_components, 0));
}

Partition Partition::from_classes(const std::vector<std::vector<std::size_t>>& classes, std::size_t num_components) {
  constexpr auto unset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> a(num_components, unset);
  for (std::size_t l = 0; l < classes.size(); ++l) {
    if (classes[l].empty()) throw DomainError("partition class " + std::to_string(l) + " is empty");
    for (auto c : classes[l]) {
      if (c >= num_components) throw DomainError("partition names unknown component " + std::to_string(c));
      if (a[c] != unset) throw DomainError("component " + std::to_string(c) + " appears in two classes");
      a[c] = l;
    }
  }
  for (std::size_t c = 0; c < num_components; ++c)
    if (a[c] == unset) throw DomainError("component " + std::to_string(c) + " belongs to no class");
  return Partition(std::move(a));
}

// -------------------------------------------------------------- ClassCodec

ClassCodec::ClassCodec(const FactoredInputSpace& space, const Partition& partition) : num_inputs_(space.size()) {
  if (partition.num_components() != space.num_components())
    throw DomainError("partition covers " + std::to_string(partition.num_components()) +
                      " components but the input space has " + std::to_string(space.num_components()));
  const std::size_t p = partition.num_classes();
  class_sizes_.resize(p);
  std::vector<std::vector<std::size_t>> radix(p);
  for (std::size_t l = 0; l < p; ++l) {
    std::size_t size = 1;
    for (auto m : partition.members(l)) {
      radix[l].push_back(size);
      size *= space.component_size(m);
    }
    class_sizes_[l] = size;
  }
  sub_.resize(p * num_inputs_);
  for (std::size_t u = 0; u < num_inputs_; ++u) {
    for (std::size_t l = 0; l < p; ++l) {
      std::size_t s = 0;
      const auto& mem = partition.members(l);
      for (std::size_t j = 0; j < mem.size(); ++j)
        s += space.component_index(static_cast<InputIndex>(u), mem[j]) * radix[l][j];
      sub_[l * num_inputs_ + u] = static_cast<std::uint32_t>(s);
    }
  }
}

InputSet ClassCodec::project(const InputSet& joint, std::size_t cls) const {
  if (cls >= num_classes()) throw DomainError("unknown partition class " + std::to_string(cls));
  if (joint.universe() != num_inputs_) throw DomainError("input set is not over the joint input space");
  InputSet out(class_sizes_[cls]);
  const std::uint32_t* sub = sub_.data() + cls * num_inputs_;
  joint.for_each([&](std::size_t u) { out.insert(sub[u]); });
  return out;
}

InputSet ClassCodec::expand(std::span<const InputSet> per_class) const {
  if (per_class.size() != num_classes())
    throw DomainError("expected one component set per partition class");
  for (std::size_t l = 0; l < per_class.size(); ++l)
    if (per_class[l].universe() != class_sizes_[l])
      throw DomainError("component set for class " + std::to_string(l) + " has the wrong universe");
  InputSet out(num_inputs_);
  for (const auto& s : per_class)
    if (s.empty()) return out;
  for (std::size_t u = 0; u < num_inputs_; ++u) {
    bool in = true;
    for (std::size_t l = 0; l < per_class.size() && in; ++l) in = per_class[l].contains(sub_[l * num_inputs_ + u]);
    if (in) out.insert(u);
  }
  return out;
}

InputSet ClassCodec::closure(const InputSet& joint) const {
  std::vector<InputSet> proj;
  proj.reserve(num_classes());
  for (std::size_t l = 0; l < num_classes(); ++l) proj.push_back(project(joint, l));
  return expand(proj);
}

InputSet project_inputs(const FactoredInputSpace& space, const Partition& partition, const InputSet& inputs,
                        std::size_t cls) {
  return ClassCodec(space, partition).project(inputs, cls);
}

InputSet product_expand(const FactoredInputSpace& space, const Partition& partition,
                        std::span<const InputSet> per_class) {
  return ClassCodec(space, partition).expand(per_class);
}

// ------------------------------------------------------------ SuccessorBox

std::size_t SuccessorBox::cell_count() const {
  std::size_t n = 1;
  for (std::size_t d = 0; d < lo.size(); ++d) n *= static_cast<std::size_t>(hi[d] - lo[d] + 1);
  return n;
}

// -------------------------------------------------------- TransitionSystem

TransitionSystem::TransitionSystem(UniformGrid states, FactoredInputSpace inputs, std::vector<std::int32_t> shapes,
                                   std::vector<std::uint32_t> table)
    : states_(std::move(states)), inputs_(std::move(inputs)) {
  const std::size_t n = states_.dim();
  const std::size_t stride = 2 * n;
  if (table.size() != states_.size() * inputs_.size())
    throw DomainError("transition table size does not match |X| * |U|");
  if (shapes.size() % stride != 0) throw DomainError("successor shape array has wrong length");
  const std::size_t num = shapes.size() / stride;
  for (std::size_t s = 0; s < num; ++s)
    for (std::size_t d = 0; d < n; ++d)
      if (shapes[s * stride + 2 * d] > shapes[s * stride + 2 * d + 1])
        throw DomainError("successor box with lo > hi");

  std::vector<char> used(num, 0);
  for (auto id : table) {
    if (id == kBlockingEntry) continue;
    if (id >= num) throw DomainError("transition entry refers to unknown successor shape");
    used[id] = 1;
  }
  std::vector<std::uint32_t> order;
  for (std::uint32_t s = 0; s < num; ++s)
    if (used[s]) order.push_back(s);
  auto slice = [&](std::uint32_t s) {
    return std::span<const std::int32_t>(shapes.data() + static_cast<std::size_t>(s) * stride, stride);
  };
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    auto sa = slice(a), sb = slice(b);
    return std::lexicographical_compare(sa.begin(), sa.end(), sb.begin(), sb.end());
  });
  std::vector<std::uint32_t> remap(num, kBlockingEntry);
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto cur = slice(order[i]);
    if (i == 0 || !std::equal(cur.begin(), cur.end(), slice(order[i - 1]).begin())) {
      shapes_.insert(shapes_.end(), cur.begin(), cur.end());
    }
    remap[order[i]] = static_cast<std::uint32_t>(shapes_.size() / stride - 1);
  }
  for (auto& id : table)
    if (id != kBlockingEntry) id = remap[id];
  table_ = std::move(table);

  std::int64_t base[kMaxDim];
  const std::size_t nu = inputs_.size();
  for (std::size_t x = 0; x < states_.size(); ++x) {
    states_.multi_index(x, std::span<std::int64_t>(base, n));
    for (std::size_t u = 0; u < nu; ++u) {
      auto id = table_[x * nu + u];
      if (id == kBlockingEntry) continue;
      const std::int32_t* s = shapes_.data() + static_cast<std::size_t>(id) * stride;
      for (std::size_t d = 0; d < n; ++d) {
        if (base[d] + s[2 * d] < 0 || base[d] + s[2 * d + 1] >= static_cast<std::int64_t>(states_.count(d)))
          throw DomainError("successor box of state " + std::to_string(x) + ", input " + std::to_string(u) +
                            " leaves the grid in dimension " + std::to_string(d));
      }
    }
  }
}

std::optional<SuccessorBox> TransitionSystem::successors(StateIndex x, InputIndex u) const {
  if (x >= num_states() || u >= num_inputs()) throw DomainError("state or input index out of range");
  auto id = shape_id(x, u);
  if (id == kBlockingEntry) return std::nullopt;
  auto base = states_.multi_index(x);
  auto s = shape(id);
  SuccessorBox box;
  for (std::size_t d = 0; d < dim(); ++d) {
    box.lo.push_back(base[d] + s[2 * d]);
    box.hi.push_back(base[d] + s[2 * d + 1]);
  }
  return box;
}

std::vector<StateIndex> TransitionSystem::successor_list(StateIndex x, InputIndex u) const {
  std::vector<StateIndex> out;
  auto id = shape_id(x, u);
  if (id == kBlockingEntry) return out;
  for_each_successor(x, id, [&](StateIndex s) {
    out.push_back(s);
    return true;
  });
  return out;
}

InputSet TransitionSystem::nonblocking_inputs(StateIndex x) const {
  InputSet s(num_inputs());
  for (std::size_t u = 0; u < num_inputs(); ++u)
    if (!blocking(x, static_cast<InputIndex>(u))) s.insert(u);
  return s;
}

TransitionSystemBuilder::TransitionSystemBuilder(UniformGrid states, FactoredInputSpace inputs)
    : states_(std::move(states)), inputs_(std::move(inputs)), table_(states_.size() * inputs_.size(), kBlockingEntry) {}

void TransitionSystemBuilder::set(StateIndex x, InputIndex u, const SuccessorBox& box) {
  const std::size_t n = states_.dim();
  if (x >= states_.size() || u >= inputs_.size()) throw DomainError("state or input index out of range");
  if (box.lo.size() != n || box.hi.size() != n) throw DomainError("successor box has wrong dimension");
  auto base = states_.multi_index(x);
  for (std::size_t d = 0; d < n; ++d) {
    if (box.lo[d] > box.hi[d]) throw DomainError("successor box with lo > hi");
    if (box.lo[d] < 0 || box.hi[d] >= static_cast<std::int64_t>(states_.count(d)))
      throw DomainError("successor box leaves the grid in dimension " + std::to_string(d));
  }
  table_[static_cast<std::size_t>(x) * inputs_.size() + u] = static_cast<std::uint32_t>(shapes_.size() / (2 * n));
  for (std::size_t d = 0; d < n; ++d) {
    shapes_.push_back(static_cast<std::int32_t>(box.lo[d] - base[d]));
    shapes_.push_back(static_cast<std::int32_t>(box.hi[d] - base[d]));
  }
}

void TransitionSystemBuilder::set(StateIndex x, InputIndex u, std::int64_t lo, std::int64_t hi) {
  set(x, u, SuccessorBox{{lo}, {hi}});
}

TransitionSystem TransitionSystemBuilder::build() && {
  return TransitionSystem(std::move(states_), std::move(inputs_), std::move(shapes_), std::move(table_));
}

// -------------------------------------------------------------- Controller

Controller::Controller(std::size_t num_states, std::size_t num_inputs)
    : num_inputs_(num_inputs), sets_(num_states, InputSet(num_inputs)) {}

void Controller::set(StateIndex x, InputSet inputs) {
  if (inputs.universe() != num_inputs_) throw DomainError("controller input set has the wrong universe");
  sets_.at(x) = std::move(inputs);
}

StateSet Controller::domain() const {
  StateSet d(sets_.size());
  for (std::size_t x = 0; x < sets_.size(); ++x)
    if (!sets_[x].empty()) d.insert(x);
  return d;
}

StateSet Controller::blocking_states() const { return domain().complement(); }

void Controller::check_nonblocking(const TransitionSystem& ts) const {
  if (ts.num_states() != num_states() || ts.num_inputs() != num_inputs())
    throw DomainError("controller and system have different spaces");
  for (std::size_t x = 0; x < sets_.size(); ++x)
    sets_[x].for_each([&](std::size_t u) {
      if (ts.blocking(static_cast<StateIndex>(x), static_cast<InputIndex>(u)))
        throw PreconditionError("controller admits blocking input " + std::to_string(u) + " at state " +
                                std::to_string(x));
    });
}

}  // namespace coordfree
