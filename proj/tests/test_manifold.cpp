#include "support.hpp"

#include <doctest.h>

using namespace geoobs;
using namespace geoobs::testing;

namespace {

// Γ^i_jk = ½ g^il (∂_j g_lk + ∂_k g_lj − ∂_l g_jk) for diagonal metrics, written out by hand.
double polar_sphere_gamma_theta_phiphi(double theta) { return -std::sin(theta) * std::cos(theta); }
double half_plane_gamma_x_xy(double y) { return -1.0 / y; }

Tangent geodesic_flow(const ManifoldHandle& m, Tangent s, double T, int steps) {
    const double dt = T / steps;
    for (int k = 0; k < steps; ++k) s = geodesic_step(m, s, dt);
    return s;
}

} // namespace

TEST_SUITE("christoffel") {
    TEST_CASE("flat plane has zero symbols") {
        const auto m = make_chart_manifold({"flat", 2, [](const Vec&) { return Mat(Mat::Identity(2, 2)); }, {}, 0.0, {}});
        const Christoffel g = christoffel(m, Point{0.3, -1.7});
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k) CHECK(g(i, j, k) == doctest::Approx(0.0).epsilon(1e-12));
    }

    TEST_CASE("polar sphere chart at theta = pi/4") {
        const auto m = make_sphere_polar_chart();
        const Christoffel g = christoffel(m, Point{pi / 4, 0.4});
        CHECK(g(0, 1, 1) == doctest::Approx(polar_sphere_gamma_theta_phiphi(pi / 4)).epsilon(1e-8));
        CHECK(g(0, 1, 1) == doctest::Approx(-0.5).epsilon(1e-8));
        CHECK(g(1, 0, 1) == doctest::Approx(std::cos(pi / 4) / std::sin(pi / 4)).epsilon(1e-8));
    }

    TEST_CASE("half-plane chart at y = 2") {
        const auto m = make_half_plane_chart();
        const Christoffel g = christoffel(m, Point{0.7, 2.0});
        CHECK(g(0, 0, 1) == doctest::Approx(half_plane_gamma_x_xy(2.0)).epsilon(1e-8));
        CHECK(g(0, 0, 1) == doctest::Approx(-0.5).epsilon(1e-8));
        CHECK(g(1, 0, 0) == doctest::Approx(0.5).epsilon(1e-8));
        CHECK(g(1, 1, 1) == doctest::Approx(-0.5).epsilon(1e-8));
    }

    TEST_CASE("exact half-plane symbols match finite differences") {
        const auto exact = make_builtin(BuiltinSpec::hyperbolic2());
        const auto fd = make_half_plane_chart();
        Sampler s(11);
        for (int trial = 0; trial < 20; ++trial) {
            const Point q = s.point(exact);
            const Christoffel a = christoffel(exact, q);
            const Christoffel b = christoffel(fd, q);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    for (int k = 0; k < 2; ++k) CHECK(a(i, j, k) == doctest::Approx(b(i, j, k)).epsilon(1e-7));
        }
    }

    TEST_CASE("symbols are symmetric in the lower indices") {
        const auto m = make_chart_manifold({"skew", 2,
                                            [](const Vec& q) {
                                                Mat g(2, 2);
                                                g << 1.0 + q[0] * q[0], 0.3 * q[1], 0.3 * q[1], 2.0 + std::sin(q[0]);
                                                return g;
                                            },
                                            {}, kInfinity, {}});
        Sampler s(5);
        for (int trial = 0; trial < 10; ++trial) {
            const Christoffel g = christoffel(m, Point{s.uniform(-1, 1), s.uniform(-1, 1)});
            for (int i = 0; i < 2; ++i) CHECK(g(i, 0, 1) == g(i, 1, 0));
        }
    }

    TEST_CASE("singular metric and out-of-domain points are rejected") {
        const auto m = make_chart_manifold({"singular", 2, [](const Vec&) { return Mat(Mat::Zero(2, 2)); }, {}, kInfinity, {}});
        try {
            (void)christoffel(m, Point{0.0, 0.0});
            FAIL("expected a degenerate metric error");
        } catch (const GeometryError& e) {
            CHECK(e.kind() == ErrorKind::DegenerateMetric);
        }
        try {
            (void)christoffel(make_half_plane_chart(), Point{0.0, -1.0});
            FAIL("expected a domain error");
        } catch (const GeometryError& e) {
            CHECK(e.kind() == ErrorKind::Domain);
        }
    }

    TEST_CASE("finite-difference step scales with the point") {
        CHECK(fd_step(Vec::Zero(2)) == doctest::Approx(1e-5));
        CHECK(fd_step(Vec::Constant(2, -300.0)) == doctest::Approx(3e-3));
    }
}

TEST_SUITE("geodesic_step") {
    TEST_CASE("straight lines in the plane") {
        const auto m = make_builtin(BuiltinSpec::euclidean(2));
        const Tangent out = geodesic_step(m, Tangent(Point{1.0, 2.0}, Vec::Constant(2, 0.5)), 0.1);
        CHECK(out.base[0] == doctest::Approx(1.05));
        CHECK(out.base[1] == doctest::Approx(2.05));
        CHECK(out.components[0] == doctest::Approx(0.5));
    }

    TEST_CASE("equator run of length pi reaches the antipode") {
        const auto m = make_builtin(BuiltinSpec::sphere2());
        const Tangent start(Point{1.0, 0.0, 0.0}, Vec::Unit(3, 1));
        const Tangent end = geodesic_flow(m, start, pi, 3142);
        CHECK((end.base.coords - Vec::Unit(3, 0) * -1.0).norm() < 1e-9);
        CHECK(std::abs(end.components.norm() - 1.0) < 1e-9);
    }

    TEST_CASE("one step agrees with the Taylor expansion to second order") {
        const auto m = make_half_plane_chart();
        const Tangent s(Point{0.2, 1.3}, Vec((Vec(2) << 0.7, -0.4).finished()));
        auto defect = [&](double dt) {
            const Tangent out = geodesic_step(m, s, dt);
            const Vec acc = -christoffel(m, s.base).contract(s.components, s.components);
            const double dq = (out.base.coords - s.base.coords - dt * s.components).norm();
            const double dv = (out.components - s.components - dt * acc).norm();
            return std::hypot(dq, dv);
        };
        const double ratio = defect(1e-2) / defect(5e-3);
        CHECK(ratio == doctest::Approx(4.0).epsilon(0.05));
    }

    TEST_CASE("metric speed is conserved") {
        Sampler s(21);
        for (const auto& m : {make_half_plane_chart(), make_sphere_polar_chart()}) {
            Point q = m->name() == "half_plane" ? Point{0.0, 1.0} : Point{1.2, 0.3};
            Tangent state = s.tangent(m, q, 1.0);
            const double speed0 = norm(m, state);
            state = geodesic_flow(m, state, 1.0, 1000);
            CHECK(std::abs(norm(m, state) - speed0) < 1e-8);
        }
    }

    TEST_CASE("leaving the chart reports the last valid state") {
        const auto m = make_half_plane_chart();
        const Tangent s(Point{0.0, 0.01}, Vec((Vec(2) << 0.0, -1.0).finished()));
        try {
            (void)geodesic_step(m, s, 0.1);
            FAIL("expected a chart exit");
        } catch (const GeometryError& e) {
            CHECK(e.kind() == ErrorKind::ChartExit);
            REQUIRE(e.last_valid.has_value());
            CHECK(e.last_valid->base.coords == s.base.coords);
        }
    }
}

TEST_SUITE("exp_log") {
    TEST_CASE("quarter great circle") {
        const auto m = make_builtin(BuiltinSpec::sphere2());
        const Point p = exp_map(m, Tangent(Point{1.0, 0.0, 0.0}, Vec::Unit(3, 1) * (pi / 2)));
        CHECK((p.coords - Vec::Unit(3, 1)).norm() < 1e-12);
    }

    TEST_CASE("vertical half-plane geodesic") {
        const Tangent v(Point{0.0, 1.0}, Vec::Unit(2, 1));
        for (const auto& m : {make_builtin(BuiltinSpec::hyperbolic2()), make_half_plane_chart()}) {
            const Point p = exp_map(m, v);
            CHECK(p[0] == doctest::Approx(0.0));
            CHECK(p[1] == doctest::Approx(std::exp(1.0)).epsilon(1e-9));
        }
    }

    TEST_CASE("sphere log along the equator") {
        const auto m = make_builtin(BuiltinSpec::sphere2());
        const Tangent v = log_map(m, Point{1.0, 0.0, 0.0}, Point{0.0, 1.0, 0.0});
        CHECK(norm(m, v) == doctest::Approx(pi / 2));
        CHECK((v.components / v.components.norm() - Vec::Unit(3, 1)).norm() < 1e-12);
    }

    TEST_CASE("log inverts exp on random short tangents") {
        Sampler s(3);
        for (const auto& m : {make_half_plane_chart(), make_sphere_polar_chart()}) {
            for (int trial = 0; trial < 5; ++trial) {
                const Point q = m->name() == "half_plane" ? s.point(make_builtin(BuiltinSpec::hyperbolic2()))
                                                          : Point{s.uniform(0.8, 2.3), s.uniform(-1.0, 1.0)};
                const Tangent v = s.tangent(m, q, s.uniform(0.05, 0.6));
                const Tangent back = log_map(m, q, exp_map(m, v));
                CHECK((back.components - v.components).norm() < 1e-6);
            }
        }
    }

    TEST_CASE("antipodal points violate the injectivity radius") {
        const auto m = make_builtin(BuiltinSpec::sphere2());
        try {
            (void)log_map(m, Point{1.0, 0.0, 0.0}, Point{-1.0, 0.0, 0.0});
            FAIL("expected an injectivity violation");
        } catch (const GeometryError& e) {
            CHECK(e.kind() == ErrorKind::InjectivityViolation);
            REQUIRE(e.distance.has_value());
            CHECK(*e.distance == doctest::Approx(pi));
        }
    }
}

TEST_SUITE("distance") {
    TEST_CASE("torus wraps to the shorter arc") {
        const auto m = make_builtin(BuiltinSpec::torus2());
        CHECK(distance(m, Point{0.0, 0.0}, Point{3 * pi / 2, 0.0}) == doctest::Approx(pi / 2));
    }

    TEST_CASE("sphere near the antipode") {
        const auto m = make_builtin(BuiltinSpec::sphere2());
        const Point b{std::cos(3.0), std::sin(3.0), 0.0};
        CHECK(distance(m, Point{1.0, 0.0, 0.0}, b) == doctest::Approx(oracle::sphere_distance(Vec::Unit(3, 0), b.coords)));
        CHECK(distance(m, Point{1.0, 0.0, 0.0}, b) == doctest::Approx(3.0));
    }

    TEST_CASE("numeric half-plane distance") {
        const auto m = make_half_plane_chart();
        const Point a{0.0, 1.0}, b{0.8, 1.7};
        CHECK(distance(m, a, b) == doctest::Approx(oracle::hyperbolic_distance(a.coords, b.coords)).epsilon(1e-8));
    }
}

TEST_SUITE("parallel_transport") {
    TEST_CASE("identity when the endpoints coincide") {
        const auto m = make_half_plane_chart();
        const Tangent v(Point{0.1, 1.5}, Vec((Vec(2) << 0.3, 0.2).finished()));
        CHECK((parallel_transport(m, v, v.base).components - v.components).norm() < 1e-12);
    }

    TEST_CASE("flat components are unchanged") {
        const auto m = make_builtin(BuiltinSpec::euclidean(3));
        const Tangent v(Point{0.0, 1.0, 2.0}, Vec((Vec(3) << 0.3, -0.2, 5.0).finished()));
        CHECK(parallel_transport(m, v, Point{4.0, -1.0, 0.5}).components == v.components);
    }

    TEST_CASE("equator transport on the sphere") {
        const auto m = make_builtin(BuiltinSpec::sphere2());
        const Point from{1.0, 0.0, 0.0}, to{0.0, 1.0, 0.0};
        const Tangent normal = parallel_transport(m, Tangent(from, Vec::Unit(3, 2)), to);
        CHECK((normal.components - Vec::Unit(3, 2)).norm() < 1e-12);
        const Tangent along = parallel_transport(m, Tangent(from, Vec::Unit(3, 1)), to);
        CHECK((along.components + Vec::Unit(3, 0)).norm() < 1e-12);
    }

    TEST_CASE("transport preserves inner products") {
        Sampler s(8);
        const auto m = make_half_plane_chart();
        for (int trial = 0; trial < 4; ++trial) {
            const Point a = s.point(make_builtin(BuiltinSpec::hyperbolic2()));
            const Point b = s.point(make_builtin(BuiltinSpec::hyperbolic2()));
            const Tangent v = s.tangent(m, a, 1.0), w = s.tangent(m, a, 0.7);
            const Tangent tv = parallel_transport(m, v, b), tw = parallel_transport(m, w, b);
            CHECK(std::abs(inner(m, a, v.components, w.components) - inner(m, b, tv.components, tw.components)) < 1e-6);
        }
    }
}

TEST_SUITE("sectional_curvature") {
    TEST_CASE("constant curvature charts") {
        const Vec e0 = Vec::Unit(2, 0), e1 = Vec::Unit(2, 1);
        CHECK(sectional_curvature(make_builtin(BuiltinSpec::euclidean(2)), Point{0.4, 0.1}, e0, e1) ==
              doctest::Approx(0.0).epsilon(1e-4));
        CHECK(sectional_curvature(make_sphere_polar_chart(), Point{1.0, 0.5}, e0, e1) == doctest::Approx(1.0).epsilon(1e-4));
        CHECK(sectional_curvature(make_half_plane_chart(), Point{0.3, 1.4}, e0 + 0.3 * e1, e1) ==
              doctest::Approx(-1.0).epsilon(1e-4));
    }

    TEST_CASE("parallel vectors span no plane") {
        try {
            (void)sectional_curvature(make_half_plane_chart(), Point{0.0, 1.0}, Vec::Unit(2, 0), 2.0 * Vec::Unit(2, 0));
            FAIL("expected a degenerate plane error");
        } catch (const GeometryError& e) {
            CHECK(e.kind() == ErrorKind::DegeneratePlane);
        }
    }

    TEST_CASE("sampled curvatures respect the declared bound") {
        Sampler s(13);
        for (const auto& spec : {BuiltinSpec::euclidean(2), BuiltinSpec::sphere2(), BuiltinSpec::hyperbolic2(),
                                 BuiltinSpec::torus2()}) {
            const auto m = make_builtin(spec);
            const double A = m->curvature_upper_bound();
            for (int trial = 0; trial < 5; ++trial) {
                const Point q = s.point(m);
                const double k = sectional_curvature(m, q, s.tangent(m, q, 1.0).components, s.tangent(m, q, 1.0).components);
                CHECK(k <= A + 1e-6);
            }
        }
    }
}
