#include "support.hpp"

#include "geoobs/mechanical.hpp"
#include "geoobs/observer.hpp"

#include <doctest.h>

using namespace geoobs;
using namespace geoobs::testing;

namespace {

const BuiltinSpec kAll[] = {BuiltinSpec::euclidean(2), BuiltinSpec::sphere2(), BuiltinSpec::hyperbolic2(),
                            BuiltinSpec::torus2()};

// Unit-speed equator q(t) = (cos t, sin t, 0).
Point equator(double t) { return Point{std::cos(t), std::sin(t), 0.0}; }

Point sphere_observer_endpoint(double dt, double T, bool rk4) {
    const auto m = make_builtin(BuiltinSpec::sphere2());
    ObserverState obs = make_observer_state(m, Point{0.0, 0.6, 0.8}, 0.5);
    const int steps = static_cast<int>(std::lround(T / dt));
    for (int k = 0; k < steps; ++k) {
        const double t = k * dt;
        obs = rk4 ? observer_step_rk4(m, obs, equator(t), equator(t + dt / 2), equator(t + dt), dt)
                  : observer_step(m, obs, equator(t), dt);
    }
    return obs.xi_hat;
}

} // namespace

TEST_SUITE("observer") {
    TEST_CASE("gain must be positive") {
        const auto m = make_builtin(BuiltinSpec::euclidean(1));
        CHECK_THROWS_AS(make_observer_state(m, Point{0.0}, 0.0), GeometryError);
        CHECK_THROWS_AS(make_observer_state(m, Point{0.0}, -1.0), GeometryError);
    }

    TEST_CASE("pursuit field vanishes on the measurement") {
        for (const auto& spec : kAll) {
            const auto m = make_builtin(spec);
            const Point q = Sampler(1).point(m);
            const ObserverState obs = make_observer_state(m, q, 0.7);
            CHECK(observer_rhs(m, obs, q).components.norm() < 1e-12);
            CHECK(m->chart_difference(observer_step(m, obs, q, 0.01).xi_hat, q).norm() < 1e-12);
        }
    }

    TEST_CASE("flat pursuit field is linear") {
        const auto m = make_builtin(BuiltinSpec::euclidean(2));
        const ObserverState obs = make_observer_state(m, Point{1.0, 3.0}, 0.5);
        const Tangent rhs = observer_rhs(m, obs, Point{2.0, -1.0});
        CHECK(rhs.components[0] == doctest::Approx(2.0));
        CHECK(rhs.components[1] == doctest::Approx(-8.0));
    }

    TEST_CASE("one Euler step in one dimension") {
        const auto m = make_builtin(BuiltinSpec::euclidean(1));
        const ObserverState next = observer_step(m, make_observer_state(m, Point{2.0}, 1.0), Point{0.0}, 0.1);
        CHECK(next.xi_hat[0] == doctest::Approx(1.8));
        CHECK(next.t == doctest::Approx(0.1));
    }

    TEST_CASE("flat velocity estimate") {
        const auto m = make_builtin(BuiltinSpec::euclidean(2));
        const VelocityEstimate ve = velocity_estimate(m, make_observer_state(m, Point{1.0, 3.0}, 0.5), Point{2.0, -1.0});
        CHECK(ve.v_hat.components[0] == doctest::Approx(2.0));
        CHECK(ve.v_hat.components[1] == doctest::Approx(-8.0));
        CHECK(ve.v_hat.base.coords == Point{2.0, -1.0}.coords);
    }

    TEST_CASE("reference state") {
        const auto flat = make_builtin(BuiltinSpec::euclidean(2));
        const Tangent qdot(Point{1.0, 1.0}, Vec::Unit(2, 0));
        CHECK(reference_state(flat, qdot.base, qdot, 0.0).coords == qdot.base.coords);
        CHECK(reference_state(flat, qdot.base, qdot, 0.5)[0] == doctest::Approx(0.5));

        const auto s = make_builtin(BuiltinSpec::sphere2());
        const Point q{1.0, 0.0, 0.0};
        const Point xi = reference_state(s, q, Tangent(q, Vec::Unit(3, 1)), pi / 4);
        CHECK(xi[0] == doctest::Approx(std::cos(pi / 4)));
        CHECK(xi[1] == doctest::Approx(-std::sin(pi / 4)));
        CHECK(xi[2] == doctest::Approx(0.0));
    }

    TEST_CASE("pursuit field is minus the scaled gradient of D squared") {
        Sampler s(31);
        const double lambda = 0.8, h = 1e-6;
        for (const auto& spec : kAll) {
            const auto m = make_builtin(spec);
            CAPTURE(m->name());
            for (int trial = 0; trial < 5; ++trial) {
                const Point xi = s.point(m);
                const Point q = exp_map(m, s.tangent(m, xi, s.uniform(0.2, 1.5)));
                auto D2 = [&](Vec x) {
                    const double d = distance(m, m->normalize(Point(std::move(x))), q);
                    return d * d;
                };
                Vec grad(xi.size());
                for (Eigen::Index i = 0; i < xi.size(); ++i) {
                    Vec a = xi.coords, b = xi.coords;
                    a[i] += h;
                    b[i] -= h;
                    grad[i] = (D2(a) - D2(b)) / (2 * h);
                }
                const Vec raised = m->metric(xi).ldlt().solve(grad);
                const Tangent rhs = observer_rhs(m, make_observer_state(m, xi, lambda), q);
                CHECK((-raised / (2 * lambda) - rhs.components).norm() < 1e-4);
            }
        }
    }

    TEST_CASE("velocity estimate norm is D / lambda") {
        Sampler s(37);
        for (const auto& spec : kAll) {
            const auto m = make_builtin(spec);
            for (int trial = 0; trial < 10; ++trial) {
                const Point xi = s.point(m);
                const Point q = exp_map(m, s.tangent(m, xi, s.uniform(0.0, 1.5)));
                const double lambda = s.uniform(0.2, 2.0);
                const VelocityEstimate ve = velocity_estimate(m, make_observer_state(m, xi, lambda), q);
                CHECK(std::abs(norm(m, ve.v_hat) - distance(m, xi, q) / lambda) < 1e-8);
            }
        }
    }

    TEST_CASE("flat observer decays exactly") {
        const auto m = make_builtin(BuiltinSpec::euclidean(2));
        const Vec q0 = (Vec(2) << 0.3, -0.2).finished(), v = (Vec(2) << 1.0, 0.5).finished();
        const double lambda = 0.5, dt = 1e-3;
        auto q = [&](double t) { return Point(Vec(q0 + t * v)); };
        const Vec e0 = (Vec(2) << 2.0, 1.0).finished();
        ObserverState obs = make_observer_state(m, Point(Vec(q0 - lambda * v + e0)), lambda);
        double worst = 0.0;
        for (int k = 1; k <= 5000; ++k) {
            const double t0 = (k - 1) * dt, t = k * dt;
            obs = observer_step_rk4(m, obs, q(t0), q(t0 + dt / 2), q(t), dt);
            const Vec e = e0 * std::exp(-t / lambda);
            const Vec v_hat = velocity_estimate(m, obs, q(t)).v_hat.components;
            worst = std::max({worst, (obs.xi_hat.coords - (q(t).coords - lambda * v + e)).norm(),
                              (v_hat - (v - e / lambda)).norm()});
        }
        CHECK(worst < 1e-6);
    }

    TEST_CASE("step-size convergence of Euler and RK4") {
        const double T = 2.0;
        const Point ref = sphere_observer_endpoint(1.25e-3, T, true);
        auto err = [&](double dt, bool rk4) { return (sphere_observer_endpoint(dt, T, rk4).coords - ref.coords).norm(); };
        const double euler_ratio = err(0.02, false) / err(0.01, false);
        const double rk4_ratio = err(0.04, true) / err(0.02, true);
        CHECK(euler_ratio == doctest::Approx(2.0).epsilon(0.1));
        CHECK(rk4_ratio == doctest::Approx(16.0).epsilon(0.2));
    }

    TEST_CASE("geodesic midpoint of a sphere arc") {
        const auto m = make_builtin(BuiltinSpec::sphere2());
        const Point mid = measurement_midpoint(m, equator(0.0), equator(1.0));
        CHECK((mid.coords - equator(0.5).coords).norm() < 1e-12);
    }

    TEST_CASE("cubic sample reproduces cubics") {
        const auto m = make_builtin(BuiltinSpec::euclidean(1));
        auto f = [](double x) { return 0.5 - x + 0.3 * x * x - 0.2 * x * x * x; };
        const Point p0{f(0)}, p1{f(1)}, p2{f(2)}, p3{f(3)};
        for (double x : {0.5, 1.5, 2.5}) CHECK(cubic_sample(m, p0, p1, p2, p3, x)[0] == doctest::Approx(f(x)).epsilon(1e-13));
    }

    TEST_CASE("injectivity violations carry the distance") {
        const auto m = make_builtin(BuiltinSpec::sphere2());
        try {
            (void)observer_rhs(m, make_observer_state(m, Point{-1.0, 0.0, 0.0}, 1.0), Point{1.0, 0.0, 0.0});
            FAIL("expected an injectivity violation");
        } catch (const GeometryError& e) {
            CHECK(e.kind() == ErrorKind::InjectivityViolation);
            CHECK(e.distance.value_or(0.0) == doctest::Approx(pi));
        }
    }
}

TEST_SUITE("mechanical") {
    MechanicalSystem harmonic(int n, double energy) {
        MechanicalSystem sys;
        sys.manifold = make_builtin(BuiltinSpec::euclidean(n));
        sys.potential = [](const Point& q) { return 0.5 * q.coords.squaredNorm(); };
        sys.energy = energy;
        return sys;
    }

    TEST_CASE("harmonic oscillator half period") {
        const MechanicalSystem sys = harmonic(1, 0.5);
        Tangent s(Point{1.0}, Vec::Zero(1));
        const int steps = 3142;
        for (int k = 0; k < steps; ++k) s = true_dynamics_step(sys, s, pi / steps);
        CHECK(s.base[0] == doctest::Approx(-1.0).epsilon(1e-9));
        CHECK(std::abs(s.components[0]) < 1e-9);
    }

    TEST_CASE("force points down the potential") {
        MechanicalSystem sys;
        sys.manifold = make_builtin(BuiltinSpec::euclidean(2));
        sys.potential = [](const Point& q) { return -2.0 * q[0]; };
        const Tangent s = true_dynamics_step(sys, zero_tangent(Point{0.0, 0.0}), 0.1);
        CHECK(s.components[0] == doctest::Approx(0.2));
        CHECK(potential_gradient(sys, Point{1.0, 1.0})[0] == doctest::Approx(-2.0));
    }

    TEST_CASE("zero potential reduces to the geodesic flow") {
        MechanicalSystem sys;
        sys.manifold = make_builtin(BuiltinSpec::hyperbolic2());
        sys.potential = [](const Point&) { return 0.0; };
        const Tangent s(Point{0.1, 1.2}, Vec((Vec(2) << 0.4, -0.3).finished()));
        const Tangent a = true_dynamics_step(sys, s, 0.01), b = geodesic_step(sys.manifold, s, 0.01);
        CHECK((a.base.coords - b.base.coords).norm() < 1e-14);
        CHECK((a.components - b.components).norm() < 1e-14);
    }

    TEST_CASE("energy is conserved") {
        const MechanicalSystem sys = harmonic(2, 1.0);
        Tangent s(Point{1.0, 0.0}, (Vec(2) << 0.2, std::sqrt(0.96)).finished());
        const double E0 = total_energy(sys, s);
        CHECK(E0 == doctest::Approx(1.0));
        for (int k = 0; k < 10000; ++k) s = true_dynamics_step(sys, s, 1e-3);
        CHECK(std::abs(total_energy(sys, s) - E0) < 1e-7);
    }

    TEST_CASE("Jacobi clock and velocity conversions") {
        const JacobiManifold jm = jacobi_wrap(harmonic(2, 1.0));
        const Point q{0.5, 0.5};
        CHECK(jm.clock_rate(q) == doctest::Approx(1.5));
        const Tangent qdot(q, (Vec(2) << 0.3, -0.6).finished());
        const Tangent w = jm.to_maupertuis(qdot);
        CHECK((w.components - qdot.components / 1.5).norm() < 1e-15);
        CHECK((jm.to_physical(w).components - qdot.components).norm() < 1e-15);
        try {
            (void)jm.clock_rate(Point{1.0, 1.0});
            FAIL("expected an inadmissible region error");
        } catch (const GeometryError& e) {
            CHECK(e.kind() == ErrorKind::InadmissibleRegion);
        }
    }

    TEST_CASE("Jacobi connection matches the conformal metric") {
        const JacobiManifold jm = jacobi_wrap(harmonic(2, 1.0));
        const auto conformal = make_chart_manifold(
            {"conformal", 2, [](const Vec& q) { return Mat(Mat::Identity(2, 2) * (2.0 - q.squaredNorm())); },
             [](const Point& q) { return q.coords.squaredNorm() < 2.0; }, kInfinity, {}});
        Sampler s(41);
        for (int trial = 0; trial < 10; ++trial) {
            const Point q{s.uniform(-0.9, 0.9), s.uniform(-0.9, 0.9)};
            const Christoffel a = christoffel(jm.manifold(), q), b = christoffel(conformal, q);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    for (int k = 0; k < 2; ++k) CHECK(a(i, j, k) == doctest::Approx(b(i, j, k)).epsilon(1e-7));
        }
    }

    TEST_CASE("Maupertuis speed is one along the trajectory") {
        const MechanicalSystem sys = harmonic(2, 1.0);
        const JacobiManifold jm = jacobi_wrap(sys);
        Tangent s(Point{1.0, 0.0}, (Vec(2) << 0.2, std::sqrt(0.96)).finished());
        for (int k = 0; k < 2000; ++k) {
            s = true_dynamics_step(sys, s, 1e-3);
            if (k % 100 == 0) CHECK(std::abs(norm(jm.manifold(), jm.to_maupertuis(s)) - 1.0) < 1e-5);
        }
    }

    TEST_CASE("real-time Jacobi observer equals the plain observer in Maupertuis time") {
        const MechanicalSystem sys = harmonic(2, 1.0);
        const JacobiManifold jm = jacobi_wrap(sys);
        const auto& g = jm.manifold();
        const Tangent start(Point{1.0, 0.0}, (Vec(2) << 0.2, std::sqrt(0.96)).finished());
        const Point xi0{0.8, 0.3};
        const double lambda = 0.5, dt = 0.01;
        const int steps = 100;

        // t-time: physical truth, real-time observer, Simpson accumulation of τ.
        ObserverState obs_t = make_observer_state(g, xi0, lambda);
        Tangent s = start;
        double tau = 0.0;
        for (int k = 0; k < steps; ++k) {
            const Tangent mid = true_dynamics_step(sys, s, dt / 2), end = true_dynamics_step(sys, mid, dt / 2);
            obs_t = jacobi_observer_step(jm, obs_t, s.base, mid.base, end.base, dt);
            tau += dt / 6 * (jm.clock_rate(s.base) + 4 * jm.clock_rate(mid.base) + jm.clock_rate(end.base));
            s = end;
        }

        // τ-time: Jacobi geodesic truth, plain observer on the Jacobi manifold.
        ObserverState obs_tau = make_observer_state(g, xi0, lambda);
        Tangent w = jm.to_maupertuis(start);
        const double dtau = tau / steps;
        for (int k = 0; k < steps; ++k) {
            const Tangent mid = geodesic_step(g, w, dtau / 2), end = geodesic_step(g, mid, dtau / 2);
            obs_tau = observer_step_rk4(g, obs_tau, w.base, mid.base, end.base, dtau);
            w = end;
        }
        CHECK((w.base.coords - s.base.coords).norm() < 1e-7);
        CHECK((obs_tau.xi_hat.coords - obs_t.xi_hat.coords).norm() < 1e-5);
    }
}
