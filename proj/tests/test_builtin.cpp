#include "support.hpp"

#include "geoobs/observer.hpp"

#include <doctest.h>

using namespace geoobs;
using namespace geoobs::testing;

namespace {

const BuiltinSpec kAll[] = {BuiltinSpec::euclidean(2), BuiltinSpec::sphere2(), BuiltinSpec::hyperbolic2(),
                            BuiltinSpec::torus2()};

double reach(const ManifoldHandle& m, const Point& q) {
    const double I = m->injectivity_radius(q);
    return std::isfinite(I) ? 0.9 * I : 2.0;
}

} // namespace

TEST_SUITE("builtin") {
    TEST_CASE("declared curvature bounds and injectivity radii") {
        const auto e = make_builtin(BuiltinSpec::euclidean(3));
        const auto s = make_builtin(BuiltinSpec::sphere2());
        const auto h = make_builtin(BuiltinSpec::hyperbolic2());
        const auto t = make_builtin(BuiltinSpec::torus2(2.0, 6.0));
        CHECK(e->dim() == 3);
        CHECK(e->curvature_upper_bound() == 0.0);
        CHECK(s->curvature_upper_bound() == 1.0);
        CHECK(h->curvature_upper_bound() <= 0.0);
        CHECK(t->curvature_upper_bound() == 0.0);
        CHECK(std::isinf(e->injectivity_radius(Point{0.0, 0.0, 0.0})));
        CHECK(s->injectivity_radius(Point{1.0, 0.0, 0.0}) == doctest::Approx(pi));
        CHECK(std::isinf(h->injectivity_radius(Point{0.0, 1.0})));
        CHECK(t->injectivity_radius(Point{0.0, 0.0}) == doctest::Approx(1.0));
    }

    TEST_CASE("torus exp wraps into the fundamental domain") {
        const auto m = make_builtin(BuiltinSpec::torus2());
        const Point p = exp_map(m, Tangent(Point{0.0, 0.0}, Vec::Unit(2, 0) * (3 * pi)));
        CHECK(p[0] == doctest::Approx(pi));
        CHECK(p[1] == doctest::Approx(0.0));
    }

    TEST_CASE("sphere closed forms match the great-circle oracle") {
        const auto m = make_builtin(BuiltinSpec::sphere2());
        Sampler s(2);
        for (int trial = 0; trial < 50; ++trial) {
            const Point q = s.point(m);
            const Tangent v = s.tangent(m, q, s.uniform(0.0, 3.0));
            const Point p = exp_map(m, v);
            CHECK((p.coords - oracle::sphere_exp(q.coords, v.components).coords).norm() < 1e-12);
            CHECK(distance(m, q, p) == doctest::Approx(oracle::sphere_distance(q.coords, p.coords)).epsilon(1e-9));
        }
    }

    TEST_CASE("half-plane distance matches the arccosh formula") {
        const auto m = make_builtin(BuiltinSpec::hyperbolic2());
        Sampler s(4);
        for (int trial = 0; trial < 50; ++trial) {
            const Point a = s.point(m), b = s.point(m);
            CHECK(distance(m, a, b) == doctest::Approx(oracle::hyperbolic_distance(a.coords, b.coords)).epsilon(1e-10));
        }
    }

    TEST_CASE("closed forms agree with the numeric routes") {
        Sampler s(7);
        for (const auto& spec : kAll) {
            const auto m = make_builtin(spec);
            CAPTURE(m->name());
            for (int trial = 0; trial < 4; ++trial) {
                const Point q = s.point(m);
                const Tangent v = s.tangent(m, q, s.uniform(0.1, reach(m, q)));
                const Point p = exp_map(m, v);
                CHECK(m->chart_difference(p, numeric::exp_map(m, v)).norm() < 1e-6);
                CHECK((log_map(m, q, p).components - numeric::log_map(m, q, p).components).norm() < 1e-6);
                const Tangent w = s.tangent(m, q, 1.0);
                CHECK((parallel_transport(m, w, p).components - numeric::parallel_transport(m, w, p).components).norm() < 1e-6);
            }
        }
    }

    TEST_CASE("exp and log are inverse on every built-in") {
        Sampler s(9);
        for (const auto& spec : kAll) {
            const auto m = make_builtin(spec);
            for (int trial = 0; trial < 50; ++trial) {
                const Point q = s.point(m);
                const double I = m->injectivity_radius(q);
                const Tangent v = s.tangent(m, q, s.uniform(0.0, std::isfinite(I) ? 0.5 * I : 3.0));
                CHECK((log_map(m, q, exp_map(m, v)).components - v.components).norm() < 1e-6);
            }
        }
    }

    TEST_CASE("constant sectional curvature at random points") {
        Sampler s(17);
        const double expected[] = {0.0, 1.0, -1.0, 0.0};
        for (int i = 0; i < 4; ++i) {
            const auto m = make_builtin(kAll[i]);
            for (int trial = 0; trial < 5; ++trial) {
                const Point q = s.point(m);
                const double k = sectional_curvature(m, q, s.tangent(m, q, 1.0).components, s.tangent(m, q, 1.0).components);
                CHECK(k == doctest::Approx(expected[i]).epsilon(1e-4));
            }
        }
    }

    TEST_CASE("sphere observer stays on the sphere over 1e5 steps") {
        const auto m = make_builtin(BuiltinSpec::sphere2());
        ObserverState obs = make_observer_state(m, Point{0.0, 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)}, pi / 4);
        Tangent q(Point{1.0, 0.0, 0.0}, Vec::Unit(3, 1));
        const double dt = 1e-3;
        for (int k = 0; k < 100000; ++k) {
            q = geodesic_step(m, q, dt);
            obs = observer_step(m, obs, q.base, dt);
        }
        CHECK(std::abs(obs.xi_hat.coords.norm() - 1.0) < 1e-9);
    }

    TEST_CASE("stereographic chart centres the given point") {
        const Point c{0.0, 0.6, 0.8};
        const LocalChart chart = sphere_stereographic_chart(c);
        CHECK(chart.to_chart(c).coords.norm() < 1e-14);
        const Point p{1.0, 0.0, 0.0};
        CHECK((chart.from_chart(chart.to_chart(p)).coords - p.coords).norm() < 1e-14);
    }
}
