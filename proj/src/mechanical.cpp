#include "geoobs/mechanical.hpp"

#include <cmath>
#include <sstream>

namespace geoobs {
namespace {

double admissibility_slack(double energy) { return 1e-9 * std::max(1.0, std::abs(energy)); }

void require_admissible(const MechanicalSystem& sys, const Point& q) {
    const double u = sys.potential(q);
    if (!(u <= sys.energy + admissibility_slack(sys.energy))) {
        std::ostringstream os;
        os << "U(q) = " << u << " exceeds E = " << sys.energy;
        fail(ErrorKind::InadmissibleRegion, os.str());
    }
}

Vec force_acceleration(const MechanicalSystem& sys, const Point& q) {
    const ManifoldHandle& m = sys.manifold;
    const Vec grad = potential_gradient(sys, q);
    if (m->embedded()) {
        // Ambient metric; the tangential part of −∂U is the constrained force.
        return m->normalize(Tangent(q, -grad)).components;
    }
    return -m->metric(q).ldlt().solve(grad);
}

Vec geodesic_acceleration(const ManifoldHandle& m, const Point& q, const Vec& v) {
    if (m->has_acceleration_override()) return m->acceleration_override(q, v);
    return -christoffel(m, q).contract(v, v);
}

} // namespace

Vec potential_gradient(const MechanicalSystem& sys, const Point& q) {
    if (sys.potential_gradient) return sys.potential_gradient(q);
    const Eigen::Index n = q.size();
    const double h = fd_step(q.coords);
    Vec grad(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Point plus = q, minus = q;
        plus.coords[i] += h;
        minus.coords[i] -= h;
        grad[i] = (sys.potential(plus) - sys.potential(minus)) / (2.0 * h);
    }
    return grad;
}

double kinetic_energy(const MechanicalSystem& sys, const Tangent& state) {
    return 0.5 * inner(sys.manifold, state.base, state.components, state.components);
}

double total_energy(const MechanicalSystem& sys, const Tangent& state) {
    return kinetic_energy(sys, state) + sys.potential(state.base);
}

Tangent true_dynamics_step(const MechanicalSystem& sys, const Tangent& state, double dt) {
    if (!(dt > 0.0)) fail(ErrorKind::InvalidArgument, "true_dynamics_step needs dt > 0");
    const ManifoldHandle& m = sys.manifold;
    m->require_in_domain(state.base);
    require_admissible(sys, state.base);

    auto accel = [&](const Vec& qc, const Vec& v) -> Vec {
        const Point q(qc);
        if (!m->in_domain(q)) {
            GeometryError err(ErrorKind::ChartExit, "chart exit: trajectory left the chart domain");
            err.last_valid = state;
            throw err;
        }
        require_admissible(sys, q);
        return geodesic_acceleration(m, q, v) + force_acceleration(sys, q);
    };

    const Vec& q = state.base.coords;
    const Vec& v = state.components;
    const Vec a1 = accel(q, v);
    const Vec q2 = q + 0.5 * dt * v, v2 = v + 0.5 * dt * a1;
    const Vec a2 = accel(q2, v2);
    const Vec q3 = q + 0.5 * dt * v2, v3 = v + 0.5 * dt * a2;
    const Vec a3 = accel(q3, v3);
    const Vec q4 = q + dt * v3, v4 = v + dt * a3;
    const Vec a4 = accel(q4, v4);
    Tangent out(Point(q + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)), v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4));
    out = m->normalize(out);
    m->require_in_domain(out.base);
    require_admissible(sys, out.base);
    return out;
}

// -- Jacobi metric -----------------------------------------------------------------

double JacobiManifold::clock_rate(const Point& q) const {
    const double rate = 2.0 * (system_.energy - system_.potential(q));
    if (!(rate > 0.0)) {
        std::ostringstream os;
        os << "E - U(q) = " << 0.5 * rate << " is not positive";
        fail(ErrorKind::InadmissibleRegion, os.str());
    }
    return rate;
}

Tangent JacobiManifold::to_maupertuis(const Tangent& qdot) const {
    return {qdot.base, qdot.components / clock_rate(qdot.base)};
}

Tangent JacobiManifold::to_physical(const Tangent& dq_dtau) const {
    return {dq_dtau.base, dq_dtau.components * clock_rate(dq_dtau.base)};
}

JacobiManifold jacobi_wrap(const MechanicalSystem& sys, double curvature_upper_bound) {
    if (!sys.manifold || !sys.potential) fail(ErrorKind::InvalidArgument, "mechanical system needs a manifold and a potential");
    if (sys.manifold->embedded())
        fail(ErrorKind::InvalidArgument, "jacobi_wrap needs a chart manifold, '" + sys.manifold->name() + "' is embedded");

    const ManifoldHandle base = sys.manifold;
    const auto potential = sys.potential;
    const double energy = sys.energy;

    ManifoldDefinition def;
    def.name = "jacobi(" + base->name() + ")";
    def.dim = base->dim();
    def.metric = [base, potential, energy](const Vec& q) -> Mat {
        const Point p(q);
        const double slack = energy - potential(p);
        if (!(slack > 0.0)) fail(ErrorKind::InadmissibleRegion, "Jacobi metric evaluated where U >= E");
        return 2.0 * slack * base->metric(p);
    };
    def.chart_domain = [base, potential, energy](const Point& q) { return base->in_domain(q) && potential(q) < energy; };
    // Conformal change ĝ = e^{2φ} g with φ = ½ ln 2(E − U):
    // Γ̂^i_jk = Γ^i_jk + δ^i_j ∂_kφ + δ^i_k ∂_jφ − g_jk g^{il} ∂_lφ.
    def.christoffel = [sys, base](const Point& q) {
        const double slack = sys.energy - sys.potential(q);
        if (!(slack > 0.0)) fail(ErrorKind::InadmissibleRegion, "Jacobi metric evaluated where U >= E");
        const Vec dphi = -potential_gradient(sys, q) / (2.0 * slack);
        const Mat g = base->metric(q);
        const Vec raised = g.ldlt().solve(dphi);
        Christoffel gamma = christoffel(base, q);
        const int n = gamma.dim();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    double extra = -g(j, k) * raised[i];
                    if (i == j) extra += dphi[k];
                    if (i == k) extra += dphi[j];
                    gamma(i, j, k) += extra;
                }
        return gamma;
    };
    def.curvature_upper_bound = curvature_upper_bound;
    return JacobiManifold(sys, Manifold::create(std::move(def)));
}

Tangent jacobi_observer_rhs(const JacobiManifold& jm, const ObserverState& obs, const Point& q_meas) {
    Tangent v = observer_rhs(jm.manifold(), obs, q_meas);
    v.components *= jm.clock_rate(q_meas);
    return v;
}

ObserverState jacobi_observer_step(const JacobiManifold& jm, const ObserverState& obs, const Point& q_begin,
                                   const Point& q_end, double dt) {
    return jacobi_observer_step(jm, obs, q_begin, measurement_midpoint(jm.manifold(), q_begin, q_end), q_end, dt);
}

ObserverState jacobi_observer_step(const JacobiManifold& jm, const ObserverState& obs, const Point& q_begin,
                                   const Point& q_mid, const Point& q_end, double dt) {
    return observer_step_rk4(jm.manifold(), obs, q_begin, q_mid, q_end, dt,
                             [&jm](const Point& q) { return jm.clock_rate(q); });
}

} // namespace geoobs
