#pragma once

#include "geoobs/observer.hpp"

namespace geoobs {

/// Conservative Lagrangian system: L = ½ g(q̇, q̇) − U(q).
struct MechanicalSystem {
    ManifoldHandle manifold;  // kinetic-energy metric
    std::function<double(const Point&)> potential;
    double energy = 0.0;
    /// Chart gradient ∂U/∂q. Central differences are used when empty.
    std::function<Vec(const Point&)> potential_gradient;
};

Vec potential_gradient(const MechanicalSystem& sys, const Point& q);
double kinetic_energy(const MechanicalSystem& sys, const Tangent& state);
double total_energy(const MechanicalSystem& sys, const Tangent& state);

/// One RK4 step of q̈ = −Γ(q̇, q̇) − g⁻¹ ∂U. The potential force enters with a
/// minus sign; energy conservation confirms it.
Tangent true_dynamics_step(const MechanicalSystem& sys, const Tangent& state, double dt);

/// Jacobi metric ĝ = 2(E − U) g on the admissible region U < E.
class JacobiManifold {
public:
    JacobiManifold(MechanicalSystem sys, ManifoldHandle jacobi) : system_(std::move(sys)), manifold_(std::move(jacobi)) {}

    [[nodiscard]] const MechanicalSystem& system() const { return system_; }
    [[nodiscard]] const ManifoldHandle& manifold() const { return manifold_; }

    /// dτ/dt = 2(E − U(q)).
    [[nodiscard]] double clock_rate(const Point& q) const;
    /// dq/dτ from dq/dt.
    [[nodiscard]] Tangent to_maupertuis(const Tangent& qdot) const;
    /// dq/dt from dq/dτ.
    [[nodiscard]] Tangent to_physical(const Tangent& dq_dtau) const;

private:
    MechanicalSystem system_;
    ManifoldHandle manifold_;
};

/// `curvature_upper_bound` is passed through to the Jacobi manifold; the
/// Jacobi curvature is generally unknown, so it defaults to +∞.
JacobiManifold jacobi_wrap(const MechanicalSystem& sys, double curvature_upper_bound = kInfinity);

/// Accumulates Maupertuis time τ = ∫ 2(E − U(q(s))) ds by the trapezoid rule.
class MaupertuisClock {
public:
    void advance(double dt, double rate_begin, double rate_end) { tau_ += 0.5 * dt * (rate_begin + rate_end); }
    [[nodiscard]] double tau() const { return tau_; }

private:
    double tau_ = 0.0;
};

/// Real-time observer field dξ̂/dt = (2(E − U(q))/λ) log_ξ̂(q) in the Jacobi metric.
Tangent jacobi_observer_rhs(const JacobiManifold& jm, const ObserverState& obs, const Point& q_meas);

/// RK4 step of the real-time Jacobi observer.
ObserverState jacobi_observer_step(const JacobiManifold& jm, const ObserverState& obs, const Point& q_begin,
                                   const Point& q_end, double dt);
ObserverState jacobi_observer_step(const JacobiManifold& jm, const ObserverState& obs, const Point& q_begin,
                                   const Point& q_mid, const Point& q_end, double dt);

} // namespace geoobs
