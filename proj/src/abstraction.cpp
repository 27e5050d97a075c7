#include "coordfree/abstraction.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>
#include <string>
#include <unordered_map>

namespace coordfree {

namespace {

// Boxes touching a cell boundary to within this many cells count as meeting
// the neighbouring (closed) cell.
constexpr double kTouchTolerance = 1e-7;

bool all_finite(const Vector& v) { return v.allFinite(); }

Eigen::MatrixXd to_dense(const Matrix& m) { return Eigen::MatrixXd(m); }

using ShapeKey = std::array<std::int32_t, 2 * kMaxDim>;

struct ShapeKeyHash {
  std::size_t operator()(const ShapeKey& k) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (auto v : k) {
      h ^= static_cast<std::uint32_t>(v);
      h *= 1099511628211ull;
    }
    return h;
  }
};

}  // namespace

void DynamicsSpec::validate() const {
  if (state_dim == 0 || state_dim > static_cast<std::size_t>(kMaxDim))
    throw DomainError("dynamics state dimension must be in [1, 8]");
  if (input_dim > static_cast<std::size_t>(kMaxDim)) throw DomainError("dynamics input dimension exceeds 8");
  if (!rhs) throw DomainError("dynamics has no right-hand side");
  if (!(tau > 0) || !std::isfinite(tau)) throw DomainError("sampling period tau must be positive");
  if (inflation.size() != 0) {
    if (static_cast<std::size_t>(inflation.size()) != state_dim)
      throw DomainError("inflation radii have wrong dimension");
    if ((inflation.array() < 0).any() || !inflation.allFinite())
      throw DomainError("inflation radii must be nonnegative");
  }
  if (integrator == Integrator::ExactAffine && !affine)
    throw DomainError("exact-affine integration requires dynamics declared affine");
  if (integrator == Integrator::RungeKutta4 && substeps < 1) throw DomainError("integrator needs at least one substep");
  if (growth_bound.size() != 0) {
    if (growth_bound.rows() != static_cast<Eigen::Index>(state_dim) ||
        growth_bound.cols() != static_cast<Eigen::Index>(state_dim))
      throw DomainError("growth bound must be n x n");
    for (Eigen::Index i = 0; i < growth_bound.rows(); ++i)
      for (Eigen::Index j = 0; j < growth_bound.cols(); ++j)
        if (i != j && growth_bound(i, j) < 0) throw DomainError("growth bound must have nonnegative off-diagonal");
  }
  for (const auto* c : {&clamp_lower, &clamp_upper})
    if (*c && static_cast<std::size_t>((*c)->size()) != state_dim)
      throw DomainError("clamp bounds have wrong dimension");
}

UniformGrid AbstractionSpec::state_grid() const { return UniformGrid(state_lower, state_upper, state_eta); }

FactoredInputSpace AbstractionSpec::input_space() const {
  std::vector<UniformGrid> comps;
  for (const auto& c : input_components) comps.emplace_back(c.lower, c.upper, c.epsilon);
  return FactoredInputSpace(std::move(comps));
}

void AbstractionSpec::validate() const {
  dynamics.validate();
  auto grid = state_grid();
  auto space = input_space();
  if (grid.dim() != dynamics.state_dim) throw DomainError("state grid and dynamics have different dimensions");
  if (space.dim() != dynamics.input_dim) throw DomainError("input grid and dynamics have different dimensions");
}

// ------------------------------------------------------ FlowOverapproximation

FlowOverapproximation::FlowOverapproximation(DynamicsSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const auto n = static_cast<Eigen::Index>(spec_.state_dim);
  const auto m = static_cast<Eigen::Index>(spec_.input_dim);
  if (spec_.inflation.size() == 0) spec_.inflation = Vector::Zero(n);
  if (spec_.growth_bound.size() == 0) spec_.growth_bound = Matrix::Zero(n, n);

  if (spec_.integrator == Integrator::ExactAffine) {
    const Vector x0 = Vector::Zero(n);
    const Vector u0 = Vector::Zero(m);
    c_ = spec_.rhs(x0, u0);
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      Vector e = x0;
      e[j] = 1.0;
      a.col(j) = spec_.rhs(e, u0) - c_;
    }
    b_.resize(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      Vector e = u0;
      e[j] = 1.0;
      b_.col(j) = spec_.rhs(x0, e) - c_;
    }
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    aug.topLeftCorner(n, n) = a * spec_.tau;
    aug.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n) * spec_.tau;
    Eigen::MatrixXd e = aug.exp();
    phi_ = e.topLeftCorner(n, n);
    psi_ = e.topRightCorner(n, n);
    abs_phi_ = phi_.cwiseAbs();
    if (!phi_.allFinite() || !psi_.allFinite() || !b_.allFinite() || !all_finite(c_))
      throw NumericError("affine flow is not finite");
  } else {
    const double h = spec_.tau / spec_.substeps;
    Eigen::MatrixXd step = (to_dense(spec_.growth_bound) * h).exp();
    radius_step_ = step;
    if (!radius_step_.allFinite()) throw NumericError("growth bound propagator is not finite");
  }
}

Vector FlowOverapproximation::integrate_rk4(Vector x, const Vector& u) const {
  const double h = spec_.tau / spec_.substeps;
  for (int s = 0; s < spec_.substeps; ++s) {
    Vector k1 = spec_.rhs(x, u);
    Vector k2 = spec_.rhs(x + 0.5 * h * k1, u);
    Vector k3 = spec_.rhs(x + 0.5 * h * k2, u);
    Vector k4 = spec_.rhs(x + h * k3, u);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

Vector FlowOverapproximation::affine_radius(const Vector& radius) const {
  return abs_phi_ * radius + spec_.inflation;
}

RealBox FlowOverapproximation::successor_box(const Vector& center, const Vector& radius, const Vector& u) const {
  const auto n = static_cast<Eigen::Index>(spec_.state_dim);
  if (center.size() != n || radius.size() != n) throw DomainError("cell centre/radius has wrong dimension");
  if (u.size() != static_cast<Eigen::Index>(spec_.input_dim)) throw DomainError("input has wrong dimension");
  Vector c, r;
  if (spec_.integrator == Integrator::ExactAffine) {
    c = state_term(center) + input_term(u);
    r = affine_radius(radius);
  } else {
    c = integrate_rk4(center, u);
    r = radius;
    for (int s = 0; s < spec_.substeps; ++s) r = radius_step_ * r;
    r += spec_.inflation;
  }
  if (!all_finite(c) || !all_finite(r)) throw NumericError("integration produced non-finite values");
  return RealBox{c - r, c + r};
}

void FlowOverapproximation::clamp(RealBox& box) const {
  if (spec_.clamp_lower) {
    box.lo = box.lo.cwiseMax(*spec_.clamp_lower);
    box.hi = box.hi.cwiseMax(*spec_.clamp_lower);
  }
  if (spec_.clamp_upper) {
    box.lo = box.lo.cwiseMin(*spec_.clamp_upper);
    box.hi = box.hi.cwiseMin(*spec_.clamp_upper);
  }
}

RealBox overapprox_successor_box(const DynamicsSpec& spec, const Vector& center, const Vector& radius,
                                 const Vector& u) {
  return FlowOverapproximation(spec).successor_box(center, radius, u);
}

// ------------------------------------------------------------ abstraction

std::size_t abstraction_footprint(const AbstractionSpec& spec) {
  auto grid = spec.state_grid();
  auto space = spec.input_space();
  const double entries = static_cast<double>(grid.size()) * static_cast<double>(space.size());
  const double bytes = entries * sizeof(std::uint32_t);
  if (bytes > 1e18) return static_cast<std::size_t>(1e18);
  return static_cast<std::size_t>(bytes);
}

TransitionSystem abstract_system(const AbstractionSpec& spec, const AbstractionOptions& options) {
  spec.validate();
  UniformGrid grid = spec.state_grid();
  FactoredInputSpace space = spec.input_space();
  const std::size_t footprint = abstraction_footprint(spec);
  if (footprint > options.memory_budget_bytes) {
    throw ResourceError("abstraction needs " + std::to_string(grid.size()) + " cells x " +
                        std::to_string(space.size()) + " inputs (about " + std::to_string(footprint >> 20) +
                        " MB of transitions), above the memory budget of " +
                        std::to_string(options.memory_budget_bytes >> 20) + " MB");
  }

  FlowOverapproximation flow(spec.dynamics);
  const std::size_t n = grid.dim();
  const std::size_t nx = grid.size();
  const std::size_t nu = space.size();
  const bool affine = spec.dynamics.integrator == Integrator::ExactAffine;

  Vector radius(static_cast<Eigen::Index>(n));
  for (std::size_t d = 0; d < n; ++d) radius[static_cast<Eigen::Index>(d)] = grid.eta()[d] / 2.0;
  std::vector<Vector> input_points(nu), input_terms;
  for (std::size_t u = 0; u < nu; ++u) input_points[u] = space.point_of(static_cast<InputIndex>(u));
  Vector affine_r;
  if (affine) {
    input_terms.resize(nu);
    for (std::size_t u = 0; u < nu; ++u) input_terms[u] = flow.input_term(input_points[u]);
    affine_r = flow.affine_radius(radius);
  }

  std::vector<std::uint32_t> table(nx * nu, kBlockingEntry);
  struct Chunk {
    std::size_t begin = 0, end = 0;
    std::vector<std::int32_t> shapes;
  };
  const unsigned jobs = std::max(1u, options.jobs);
  const std::size_t chunk_size = (nx + jobs - 1) / jobs;
  std::vector<Chunk> chunks;
  for (std::size_t b = 0; b < nx; b += chunk_size) chunks.push_back(Chunk{b, std::min(nx, b + chunk_size), {}});

  parallel_for(
      chunks.size(), jobs,
      [&](std::size_t cb, std::size_t ce) {
        for (std::size_t ci = cb; ci < ce; ++ci) {
          Chunk& chunk = chunks[ci];
          std::unordered_map<ShapeKey, std::uint32_t, ShapeKeyHash> local;
          std::int64_t base[kMaxDim];
          for (std::size_t x = chunk.begin; x < chunk.end; ++x) {
            grid.multi_index(x, std::span<std::int64_t>(base, n));
            const Vector center = grid.point_of(x);
            Vector state_part;
            if (affine) state_part = flow.state_term(center);
            for (std::size_t u = 0; u < nu; ++u) {
              RealBox box;
              if (affine) {
                Vector c = state_part + input_terms[u];
                box = RealBox{c - affine_r, c + affine_r};
              } else {
                box = flow.successor_box(center, radius, input_points[u]);
              }
              flow.clamp(box);
              ShapeKey key{};
              bool inside = true;
              for (std::size_t d = 0; d < n && inside; ++d) {
                const auto di = static_cast<Eigen::Index>(d);
                const double first = grid.first(d);
                const double eta = grid.eta()[d];
                const double lo_t = (box.lo[di] - first) / eta;
                const double hi_t = (box.hi[di] - first) / eta;
                if (!std::isfinite(lo_t) || !std::isfinite(hi_t))
                  throw NumericError("successor box is not finite at state " + std::to_string(x));
                const auto lo = static_cast<std::int64_t>(std::ceil(lo_t - 0.5 - kTouchTolerance));
                const auto hi = static_cast<std::int64_t>(std::floor(hi_t + 0.5 + kTouchTolerance));
                if (lo < 0 || hi >= static_cast<std::int64_t>(grid.count(d))) inside = false;
                key[2 * d] = static_cast<std::int32_t>(lo - base[d]);
                key[2 * d + 1] = static_cast<std::int32_t>(hi - base[d]);
              }
              if (!inside) continue;
              auto [it, fresh] = local.try_emplace(key, static_cast<std::uint32_t>(local.size()));
              if (fresh) chunk.shapes.insert(chunk.shapes.end(), key.begin(), key.begin() + 2 * n);
              table[x * nu + u] = it->second;
            }
          }
        }
      },
      1);

  // Merge chunk-local shape ids; the system constructor canonicalises order.
  std::vector<std::int32_t> shapes;
  std::size_t offset = 0;
  for (auto& chunk : chunks) {
    const auto local_count = static_cast<std::uint32_t>(chunk.shapes.size() / (2 * n));
    for (std::size_t i = chunk.begin * nu; i < chunk.end * nu; ++i)
      if (table[i] != kBlockingEntry) table[i] += static_cast<std::uint32_t>(offset);
    shapes.insert(shapes.end(), chunk.shapes.begin(), chunk.shapes.end());
    offset += local_count;
    chunk.shapes.clear();
    chunk.shapes.shrink_to_fit();
  }
  return TransitionSystem(std::move(grid), std::move(space), std::move(shapes), std::move(table));
}

}  // namespace coordfree
