#include <doctest.h>

#include <random>

#include "coordfree/core_model.hpp"
#include "support/oracles.hpp"

using namespace coordfree;

namespace {

Vector pt(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

}  // namespace

TEST_CASE("index sets behave like element-wise membership") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 200)(rng);
    auto a = oracle::random_bits(rng, n, 0.4), b = oracle::random_bits(rng, n, 0.6);
    IndexSet sa = oracle::to_set(a), sb = oracle::to_set(b);
    std::size_t ca = 0;
    bool subset = true;
    for (std::size_t i = 0; i < n; ++i) {
      ca += a[i];
      subset = subset && (!a[i] || b[i]);
      CHECK((sa | sb).contains(i) == (a[i] || b[i]));
      CHECK((sa & sb).contains(i) == (a[i] && b[i]));
      CHECK((sa - sb).contains(i) == (a[i] && !b[i]));
      CHECK(sa.complement().contains(i) == !a[i]);
    }
    CHECK(sa.count() == ca);
    CHECK(sa.is_subset_of(sb) == subset);
    CHECK(sa.complement().complement() == sa);
    CHECK(sa.complement().count() == n - ca);
    auto members = sa.members();
    REQUIRE(members.size() == ca);
    for (std::size_t k = 0; k < members.size(); ++k) CHECK(sa.nth(k) == members[k]);
  }
  CHECK_THROWS_AS(IndexSet::of(3, {3}), DomainError);
  IndexSet a(10), b(11);
  CHECK_THROWS_AS(a |= b, DomainError);
}

TEST_CASE("grid points are the multiples of eta inside the bounds") {
  UniformGrid g({-1.0}, {1.0}, {0.5});
  REQUIRE(g.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(g.coordinate(0, i) == doctest::Approx(-1.0 + 0.5 * i));
  // Bounds off the lattice only keep the multiples inside.
  UniformGrid h({-0.3}, {0.7}, {0.25});
  REQUIRE(h.size() == 4);
  CHECK(h.coordinate(0, 0) == doctest::Approx(-0.25));
  CHECK(h.coordinate(0, 3) == doctest::Approx(0.5));
  CHECK_THROWS_AS(UniformGrid({1.0}, {0.0}, {0.1}), DomainError);
  CHECK_THROWS_AS(UniformGrid({0.0}, {1.0}, {0.0}), DomainError);
}

TEST_CASE("index_of snaps to the nearest point and names the bad dimension") {
  UniformGrid g({-1.0}, {1.0}, {0.5});
  CHECK(g.index_of(pt({0.0})) == 2);
  CHECK(g.index_of(pt({0.24})) == 2);
  CHECK(g.index_of(pt({0.25})) == 2);  // tie goes to the lower index
  CHECK(g.index_of(pt({0.26})) == 3);
  CHECK(g.index_of(pt({-1.2})) == 0);
  CHECK_THROWS_AS(g.index_of(pt({1.3})), DomainError);

  UniformGrid g2({-1.0, -1.0}, {1.0, 1.0}, {0.01, 0.01});
  REQUIRE(g2.size() == 201u * 201u);
  const std::size_t fig = g2.index_of(pt({-0.62, -0.5}));
  const Vector c = g2.point_of(fig);
  CHECK(c(0) == doctest::Approx(-0.62).epsilon(1e-12));
  CHECK(c(1) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(fig == 38u + 201u * 50u);
  try {
    g2.index_of(pt({0.0, 1.5}));
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("dimension 1") != std::string::npos);
  }

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coord(-1.004, 1.004);
  for (int i = 0; i < 1000; ++i) {
    const Vector p = pt({coord(rng), coord(rng)});
    const Vector q = g2.point_of(g2.index_of(p));
    CHECK((q - p).cwiseAbs().maxCoeff() <= 0.005 + 1e-12);
  }
  for (std::size_t x = 0; x < g2.size(); x += 97) CHECK(g2.index_of(g2.point_of(x)) == x);
}

TEST_CASE("mixed-radix codecs round-trip") {
  UniformGrid g({0, 0, 0}, {3, 4, 2}, {1, 1, 1});
  for (std::size_t x = 0; x < g.size(); ++x) CHECK(g.flat_index(g.multi_index(x)) == x);
  CHECK(g.multi_index(1) == std::vector<std::int64_t>{1, 0, 0});

  FactoredInputSpace s = FactoredInputSpace::finite({7, 10, 11, 13});
  REQUIRE(s.size() == 10010);
  for (InputIndex u = 0; u < s.size(); ++u) {
    auto t = s.decode(u);
    CHECK(s.encode(t) == u);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(s.component_index(u, i) == t[i]);
  }
  CHECK(s.decode(1) == std::vector<std::size_t>{1, 0, 0, 0});
  CHECK_THROWS_AS(FactoredInputSpace(std::vector<UniformGrid>{}), DomainError);
}

TEST_CASE("partitions validate their classes") {
  CHECK_NOTHROW(Partition::from_classes({{0, 2}, {1}}, 3));
  CHECK_THROWS_AS(Partition::from_classes({{0}, {0, 1}}, 2), DomainError);
  CHECK_THROWS_AS(Partition::from_classes({{0}}, 2), DomainError);
  CHECK_THROWS_AS(Partition::from_classes({{0, 1}, {}}, 2), DomainError);
  auto p = Partition::singletons(3);
  CHECK(p.num_classes() == 3);
  CHECK(Partition::single_class(3).num_classes() == 1);
}

TEST_CASE("projection and product on the head-on input space") {
  const auto space = FactoredInputSpace::finite({2, 2});
  const auto part = Partition::singletons(2);
  const InputSet c = InputSet::of(4, {oracle::kChangeStay, oracle::kStayChange});
  CHECK(project_inputs(space, part, c, 1) == InputSet::of(2, {0, 1}));
  CHECK(project_inputs(space, part, InputSet(4), 0).empty());
  CHECK(project_inputs(space, part, InputSet::full(4), 1) == InputSet::full(2));
  CHECK_THROWS_AS(project_inputs(space, part, c, 2), DomainError);

  std::vector<InputSet> full{InputSet::full(2), InputSet::full(2)};
  CHECK(product_expand(space, part, full) == InputSet::full(4));
  std::vector<InputSet> single{InputSet::of(2, {0}), InputSet::of(2, {1})};
  CHECK(product_expand(space, part, single) == InputSet::of(4, {oracle::kChangeStay}));
  std::vector<InputSet> with_empty{InputSet::of(2, {0}), InputSet(2)};
  CHECK(product_expand(space, part, with_empty).empty());

  const auto one = Partition::single_class(2);
  std::vector<InputSet> joint{InputSet::of(4, {oracle::kChangeStay})};
  CHECK(product_expand(space, one, joint) == InputSet::of(4, {oracle::kChangeStay}));
}

TEST_CASE("closure contains the set and equals it exactly for products") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::size_t> sizes;
    std::size_t total = 1;
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
    for (std::size_t i = 0; i < n; ++i) {
      sizes.push_back(std::uniform_int_distribution<std::size_t>(1, 4)(rng));
      total *= sizes.back();
    }
    const auto space = FactoredInputSpace::finite(sizes);
    std::vector<std::size_t> cls(n);
    for (auto& c : cls) c = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    std::vector<std::vector<std::size_t>> classes;
    for (std::size_t l = 0; l < n; ++l) {
      std::vector<std::size_t> m;
      for (std::size_t i = 0; i < n; ++i)
        if (cls[i] == l) m.push_back(i);
      if (!m.empty()) classes.push_back(m);
    }
    const auto part = Partition::from_classes(classes, n);
    const ClassCodec codec(space, part);

    oracle::ExplicitSystem shape;
    shape.comp_sizes = sizes;
    shape.num_inputs = total;
    const auto a = oracle::random_bits(rng, total, 0.3);
    oracle::Table one_state{a};
    shape.num_states = 1;
    const auto expected = oracle::ind(shape, one_state, classes)[0];
    const InputSet sa = oracle::to_set(a);
    const InputSet closed = codec.closure(sa);
    CHECK(oracle::to_bits(closed) == expected);
    CHECK(sa.is_subset_of(closed));
    CHECK(codec.closure(closed) == closed);

    // Monotone projection.
    auto b = a;
    for (std::size_t u = 0; u < total; ++u) b[u] = b[u] || std::bernoulli_distribution(0.3)(rng);
    for (std::size_t l = 0; l < part.num_classes(); ++l)
      CHECK(codec.project(sa, l).is_subset_of(codec.project(oracle::to_set(b), l)));
  }
}

TEST_CASE("transition systems validate and canonicalise boxes") {
  TransitionSystemBuilder b(UniformGrid::integer_grid({4}), FactoredInputSpace::finite({2}));
  b.set(0, 0, 0, 1);
  b.set(1, 0, 1, 2);
  b.set(3, 1, 3, 3);
  CHECK_THROWS_AS(b.set(3, 0, 3, 4), DomainError);
  const TransitionSystem ts = std::move(b).build();
  CHECK(ts.num_shapes() == 2);  // {0,+1} and {0,0}
  CHECK(ts.successor_list(1, 0) == std::vector<StateIndex>{1, 2});
  CHECK(ts.blocking(2, 0));
  CHECK(!ts.successors(2, 1).has_value());
  CHECK(ts.nonblocking_inputs(3) == InputSet::of(2, {1}));
  CHECK(ts.nonblocking_inputs(0) == InputSet::of(2, {0}));

  // Equal content gives equal systems regardless of insertion order.
  TransitionSystemBuilder c(UniformGrid::integer_grid({4}), FactoredInputSpace::finite({2}));
  c.set(3, 1, 3, 3);
  c.set(1, 0, 1, 2);
  c.set(0, 0, 0, 1);
  CHECK(std::move(c).build() == ts);

  std::vector<std::int32_t> shapes{0, 5};
  std::vector<std::uint32_t> table(8, 0);
  CHECK_THROWS_AS(TransitionSystem(UniformGrid::integer_grid({4}), FactoredInputSpace::finite({2}), shapes, table),
                  DomainError);
}

TEST_CASE("successor enumeration matches the box in two dimensions") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = oracle::random_system(rng);
    for (StateIndex x = 0; x < s.num_states; ++x)
      for (InputIndex u = 0; u < s.num_inputs; ++u) {
        auto got = s.ts.successor_list(x, u);
        auto want = s.succ[x][u];
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        CHECK(got == want);
        CHECK(s.ts.blocking(x, u) == want.empty());
      }
  }
}

TEST_CASE("controllers expose domain and blocking set") {
  auto s = oracle::head_on();
  Controller c(3, 4);
  c.allow(0, oracle::kChangeStay);
  c.allow(1, 0);
  CHECK(c.domain() == IndexSet::of(3, {0, 1}));
  CHECK(c.blocking_states() == IndexSet::of(3, {2}));
  CHECK(c.blocking_states() == c.domain().complement());
  CHECK_NOTHROW(c.check_nonblocking(s.ts));

  TransitionSystemBuilder b(UniformGrid::integer_grid({2}), FactoredInputSpace::finite({2}));
  b.set(0, 0, 0, 0);
  auto ts = std::move(b).build();
  Controller bad(2, 2);
  bad.allow(0, 1);
  CHECK_THROWS_AS(bad.check_nonblocking(ts), PreconditionError);
}
