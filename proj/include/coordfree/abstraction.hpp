#pragma once

#include <cstddef>
#include <functional>
#include <optional>

#include "coordfree/core_model.hpp"
#include "coordfree/parallel.hpp"

namespace coordfree {

enum class Integrator {
  /// Flow of an affine right-hand side, computed through matrix exponentials.
  ExactAffine,
  /// Fixed-step classical Runge-Kutta with a declared growth bound.
  RungeKutta4,
};

/// Sampled continuous dynamics dx/dt = g(x, u) held constant over tau.
struct DynamicsSpec {
  std::size_t state_dim = 0;
  std::size_t input_dim = 0;
  std::function<Vector(const Vector& x, const Vector& u)> rhs;
  double tau = 0.0;
  /// Added to the propagated radius in each dimension (disturbances, model error).
  Vector inflation;
  Integrator integrator = Integrator::RungeKutta4;
  int substeps = 8;
  /// Must be set for Integrator::ExactAffine.
  bool affine = false;
  /// Growth bound L (n x n, nonnegative off-diagonal): the cell radius evolves
  /// as r' = L r. Only used by RungeKutta4; defaults to zero.
  Matrix growth_bound;
  /// Optional saturation of the successor box, part of the system model
  /// (e.g. velocities that cannot leave [0, 3]).
  std::optional<Vector> clamp_lower, clamp_upper;

  /// Throws DomainError describing the first violated invariant.
  void validate() const;
};

/// Closed real box [lo, hi].
struct RealBox {
  Vector lo, hi;
};

/// Grid parameters for the abstraction. Each input component is an agent.
struct AbstractionSpec {
  std::vector<double> state_lower, state_upper, state_eta;
  struct InputComponent {
    std::vector<double> lower, upper, epsilon;
  };
  std::vector<InputComponent> input_components;
  DynamicsSpec dynamics;

  UniformGrid state_grid() const;
  FactoredInputSpace input_space() const;
  void validate() const;
};

struct AbstractionOptions {
  unsigned jobs = 1;
  /// Upper bound on the transition table footprint.
  std::size_t memory_budget_bytes = std::size_t{8} << 30;
};

/// Precomputed flow data for repeated successor queries.
class FlowOverapproximation {
 public:
  explicit FlowOverapproximation(DynamicsSpec spec);

  const DynamicsSpec& spec() const { return spec_; }

  /// Box containing the time-tau image of [center - radius, center + radius]
  /// under constant input u. Clamping is not applied here.
  RealBox successor_box(const Vector& center, const Vector& radius, const Vector& u) const;
  /// Applies the declared saturation to a box.
  void clamp(RealBox& box) const;

  /// ExactAffine only: the centre flow splits as state_term(x) + input_term(u)
  /// and the radius flow does not depend on x or u.
  Vector state_term(const Vector& x) const { return phi_ * x; }
  Vector input_term(const Vector& u) const { return psi_ * (b_ * u + c_); }
  Vector affine_radius(const Vector& radius) const;

 private:
  Vector integrate_rk4(Vector x, const Vector& u) const;

  DynamicsSpec spec_;
  // ExactAffine: x(tau) = phi x + psi (b u + c), r(tau) = |phi| r.
  Matrix phi_, abs_phi_, psi_, b_;
  Vector c_;
  // RungeKutta4: per-substep radius propagator exp(L h).
  Matrix radius_step_;
};

RealBox overapprox_successor_box(const DynamicsSpec& spec, const Vector& center, const Vector& radius,
                                 const Vector& u);

/// Bytes the transition table of `spec` would occupy.
std::size_t abstraction_footprint(const AbstractionSpec& spec);

/// Grid abstraction: the entry for (x, u) is the box of closed cells meeting
/// the over-approximated successor box, or blocking if that box leaves the
/// state grid.
TransitionSystem abstract_system(const AbstractionSpec& spec, const AbstractionOptions& options = {});

}  // namespace coordfree
