#pragma once

#include "geoobs/manifold.hpp"

#include <functional>

namespace geoobs {

/// Internal state of the reduced velocity observer.
struct ObserverState {
    Point xi_hat;
    double lambda = 1.0;  // gain, units of time
    double t = 0.0;
};

/// Validates the gain and the starting point.
ObserverState make_observer_state(const ManifoldHandle& m, Point xi_hat, double lambda, double t = 0.0);

struct VelocityEstimate {
    Tangent v_hat;  // based at the measurement that produced it
};

/// Pursuit vector field at ξ̂: (1/λ) log_ξ̂(q). Equal to −(1/2λ) grad D²(·, q).
Tangent observer_rhs(const ManifoldHandle& m, const ObserverState& obs, const Point& q_meas);

/// Geometric Euler step ξ̂ ← exp_ξ̂(dt · rhs).
ObserverState observer_step(const ManifoldHandle& m, const ObserverState& obs, const Point& q_meas, double dt);

/// Optional multiplier on the pursuit field, evaluated at the measurement.
using TimeScale = std::function<double(const Point&)>;

/// Classical RK4 in coordinates with the measurement interpolated between the
/// samples at the start and end of the step (geodesic midpoint when a closed
/// form exists, coordinate midpoint otherwise). Stage points are projected
/// back onto the manifold.
ObserverState observer_step_rk4(const ManifoldHandle& m, const ObserverState& obs, const Point& q_begin,
                                const Point& q_end, double dt, const TimeScale& scale = {});

/// Same, with the mid-step measurement supplied by the caller.
ObserverState observer_step_rk4(const ManifoldHandle& m, const ObserverState& obs, const Point& q_begin,
                                const Point& q_mid, const Point& q_end, double dt, const TimeScale& scale = {});

/// v̂ = parallel transport of the pursuit field from ξ̂ to q.
VelocityEstimate velocity_estimate(const ManifoldHandle& m, const ObserverState& obs, const Point& q_meas);

/// ξ = exp_q(−λ q̇): the point the observer converges to.
Point reference_state(const ManifoldHandle& m, const Point& q, const Tangent& qdot, double lambda);

/// Point halfway along the geodesic from `a` to `b`.
Point measurement_midpoint(const ManifoldHandle& m, const Point& a, const Point& b);

/// Cubic through four equally spaced samples at nodes 0, 1, 2, 3, evaluated at
/// `x` in coordinates and projected onto the manifold. x = 1.5 gives the
/// interior midpoint (−p0 + 9p1 + 9p2 − p3)/16.
Point cubic_sample(const ManifoldHandle& m, const Point& p0, const Point& p1, const Point& p2, const Point& p3, double x);

} // namespace geoobs
