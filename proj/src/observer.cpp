#include "geoobs/observer.hpp"

#include <cmath>
#include <sstream>

namespace geoobs {

ObserverState make_observer_state(const ManifoldHandle& m, Point xi_hat, double lambda, double t) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        std::ostringstream os;
        os << "observer gain must be positive, got " << lambda;
        fail(ErrorKind::InvalidArgument, os.str());
    }
    m->require_in_domain(xi_hat);
    return {m->normalize(xi_hat), lambda, t};
}

Tangent observer_rhs(const ManifoldHandle& m, const ObserverState& obs, const Point& q_meas) {
    Tangent v = log_map(m, obs.xi_hat, q_meas);
    v.components /= obs.lambda;
    return v;
}

ObserverState observer_step(const ManifoldHandle& m, const ObserverState& obs, const Point& q_meas, double dt) {
    if (!(dt > 0.0)) fail(ErrorKind::InvalidArgument, "observer_step needs dt > 0");
    Tangent step = observer_rhs(m, obs, q_meas);
    step.components *= dt;
    return {m->normalize(exp_map(m, step)), obs.lambda, obs.t + dt};
}

Point measurement_midpoint(const ManifoldHandle& m, const Point& a, const Point& b) {
    if (m->closed_form()) {
        Tangent half = log_map(m, a, b);
        half.components *= 0.5;
        return exp_map(m, half);
    }
    return m->normalize(Point(a.coords + 0.5 * m->chart_difference(a, b)));
}

Point cubic_sample(const ManifoldHandle& m, const Point& p0, const Point& p1, const Point& p2, const Point& p3, double x) {
    // Offsets from p1 keep periodic charts continuous.
    const Vec d0 = m->chart_difference(p1, p0);
    const Vec d2 = m->chart_difference(p1, p2);
    const Vec d3 = m->chart_difference(p1, p3);
    const double w0 = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0;
    const double w2 = -x * (x - 1.0) * (x - 3.0) / 2.0;
    const double w3 = x * (x - 1.0) * (x - 2.0) / 6.0;
    return m->normalize(Point(p1.coords + w0 * d0 + w2 * d2 + w3 * d3));
}

ObserverState observer_step_rk4(const ManifoldHandle& m, const ObserverState& obs, const Point& q_begin,
                                const Point& q_end, double dt, const TimeScale& scale) {
    return observer_step_rk4(m, obs, q_begin, measurement_midpoint(m, q_begin, q_end), q_end, dt, scale);
}

ObserverState observer_step_rk4(const ManifoldHandle& m, const ObserverState& obs, const Point& q_begin,
                                const Point& q_mid, const Point& q_end, double dt, const TimeScale& scale) {
    if (!(dt > 0.0)) fail(ErrorKind::InvalidArgument, "observer_step_rk4 needs dt > 0");

    auto field = [&](const Vec& xi, const Point& q) -> Vec {
        ObserverState s{m->normalize(Point(xi)), obs.lambda, obs.t};
        Vec v = observer_rhs(m, s, q).components;
        if (scale) v *= scale(q);
        return v;
    };
    auto project = [&](const Vec& x) { return m->normalize(Point(x)).coords; };

    const Vec& xi = obs.xi_hat.coords;
    const Vec k1 = field(xi, q_begin);
    const Vec k2 = field(project(xi + 0.5 * dt * k1), q_mid);
    const Vec k3 = field(project(xi + 0.5 * dt * k2), q_mid);
    const Vec k4 = field(project(xi + dt * k3), q_end);
    Point next = m->normalize(Point(xi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)));
    m->require_in_domain(next);
    return {std::move(next), obs.lambda, obs.t + dt};
}

VelocityEstimate velocity_estimate(const ManifoldHandle& m, const ObserverState& obs, const Point& q_meas) {
    const Tangent rhs = observer_rhs(m, obs, q_meas);
    Tangent v = parallel_transport(m, rhs, q_meas);
    v.base = q_meas;
    return {std::move(v)};
}

Point reference_state(const ManifoldHandle& m, const Point& q, const Tangent& qdot, double lambda) {
    if (!(lambda >= 0.0)) fail(ErrorKind::InvalidArgument, "reference_state needs lambda >= 0");
    if (lambda == 0.0) return q;
    const double reach = lambda * norm(m, qdot);
    const double radius = m->injectivity_radius(q);
    if (reach >= radius) {
        std::ostringstream os;
        os << "injectivity violation: lambda * |qdot| = " << reach << " reaches the injectivity radius " << radius;
        GeometryError err(ErrorKind::InjectivityViolation, os.str());
        err.distance = reach;
        throw err;
    }
    return exp_map(m, Tangent(q, -lambda * qdot.components));
}

} // namespace geoobs
