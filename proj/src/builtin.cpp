#include "geoobs/builtin.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

namespace geoobs {
namespace {

using std::numbers::pi;
using Complex = std::complex<double>;

void injectivity_failure(double d, double radius) {
    std::ostringstream os;
    os << "injectivity violation: distance " << d << " is not below the injectivity radius " << radius;
    GeometryError err(ErrorKind::InjectivityViolation, os.str());
    err.distance = d;
    throw err;
}

// -- Euclidean -------------------------------------------------------------------

class EuclideanGeometry final : public ClosedFormGeometry {
public:
    Point exp(const Tangent& v) const override { return Point(v.base.coords + v.components); }
    Tangent log(const Point& from, const Point& to) const override { return {from, to.coords - from.coords}; }
    Tangent transport(const Tangent& v, const Point& to) const override { return {to, v.components}; }
    double distance(const Point& a, const Point& b) const override { return (b.coords - a.coords).norm(); }
};

// -- flat torus --------------------------------------------------------------------

double wrap(double x, double period) {
    double r = x - period * std::floor(x / period);
    if (r >= period) r -= period;
    return r;
}

double wrap_centered(double x, double period) {
    double r = wrap(x + 0.5 * period, period) - 0.5 * period;
    return r;
}

class TorusGeometry final : public ClosedFormGeometry {
public:
    explicit TorusGeometry(std::array<double, 2> periods) : periods_(periods) {}

    Point wrap_point(const Vec& x) const {
        Vec out(2);
        out << wrap(x[0], periods_[0]), wrap(x[1], periods_[1]);
        return Point(out);
    }
    Vec difference(const Point& a, const Point& b) const {
        Vec d(2);
        d << wrap_centered(b[0] - a[0], periods_[0]), wrap_centered(b[1] - a[1], periods_[1]);
        return d;
    }
    double radius() const { return 0.5 * std::min(periods_[0], periods_[1]); }

    Point exp(const Tangent& v) const override { return wrap_point(v.base.coords + v.components); }
    Tangent log(const Point& from, const Point& to) const override {
        Tangent out(from, difference(from, to));
        const double d = out.components.norm();
        if (d >= radius()) injectivity_failure(d, radius());
        return out;
    }
    Tangent transport(const Tangent& v, const Point& to) const override {
        (void)log(v.base, to);
        return {to, v.components};
    }
    double distance(const Point& a, const Point& b) const override { return log(a, b).components.norm(); }

private:
    std::array<double, 2> periods_;
};

// -- unit sphere, embedded coordinates ----------------------------------------------

Vec project_to_tangent(const Vec& p, const Vec& v) { return v - v.dot(p) * p; }

class SphereGeometry final : public ClosedFormGeometry {
public:
    Point exp(const Tangent& v) const override {
        const Vec p = v.base.coords.normalized();
        const Vec w = project_to_tangent(p, v.components);
        const double t = w.norm();
        if (t < 1e-300) return Point(p);
        return Point((std::cos(t) * p + std::sin(t) * (w / t)).normalized());
    }

    Tangent log(const Point& from, const Point& to) const override {
        const Vec p = from.coords.normalized();
        const Vec y = to.coords.normalized();
        const Eigen::Vector3d p3 = p, y3 = y;
        const double s = p3.cross(y3).norm();
        const double c = p.dot(y);
        const double theta = std::atan2(s, c);
        if (theta >= pi - 1e-12) injectivity_failure(theta, pi);
        const Vec u = y - c * p;
        const double un = u.norm();
        if (un < 1e-300) return zero_tangent(from);
        return {from, theta * u / un};
    }

    Tangent transport(const Tangent& v, const Point& to) const override {
        const Eigen::Vector3d p = v.base.coords.normalized();
        const Eigen::Vector3d y = to.coords.normalized();
        const Eigen::Vector3d w = project_to_tangent(p, v.components);
        const Eigen::Vector3d axis = p.cross(y);
        const double s = axis.norm();
        const double c = p.dot(y);
        if (s < 1e-15) {
            if (c < 0.0) injectivity_failure(pi, pi);
            return {to, w};
        }
        const double theta = std::atan2(s, c);
        if (theta >= pi - 1e-12) injectivity_failure(theta, pi);
        const Eigen::Vector3d n = axis / s;
        // Rotation about the great-circle axis carries T_p onto T_y isometrically.
        const Eigen::Vector3d r = w * std::cos(theta) + n.cross(w) * std::sin(theta) + n * n.dot(w) * (1.0 - std::cos(theta));
        return {to, project_to_tangent(y, r)};
    }

    double distance(const Point& a, const Point& b) const override {
        const Eigen::Vector3d p = a.coords.normalized(), y = b.coords.normalized();
        return std::atan2(p.cross(y).norm(), p.dot(y));
    }
};

// -- upper half-plane ---------------------------------------------------------------

// Elliptic Möbius map fixing i whose derivative at i is e^{iα}.
Complex rotate_about_i(Complex z, double alpha) {
    const double c = std::cos(0.5 * alpha), s = std::sin(0.5 * alpha);
    return (c * z + s) / (-s * z + c);
}

class HalfPlaneGeometry final : public ClosedFormGeometry {
public:
    Point exp(const Tangent& v) const override {
        const double x0 = v.base[0], y0 = v.base[1];
        const double len = v.components.norm() / y0;
        if (len < 1e-300) return v.base;
        const double psi = std::atan2(v.components[1], v.components[0]);
        const Complex w = rotate_about_i(Complex(0.0, std::exp(len)), psi - 0.5 * pi);
        Point out{x0 + y0 * w.real(), y0 * w.imag()};
        return out;
    }

    Tangent log(const Point& from, const Point& to) const override {
        const double x0 = from[0], y0 = from[1];
        const double wx = (to[0] - x0) / y0, wy = to[1] / y0;
        const double d = half_plane_distance(0.0, 1.0, wx, wy);
        if (d == 0.0) return zero_tangent(from);
        // Tangent at i of the circle through i and w centred on the real axis.
        Eigen::Vector2d dir(2.0 * wx, wx * wx + wy * wy - 1.0);
        const Eigen::Vector2d chord(wx, wy - 1.0);
        if (dir.norm() < 1e-300) dir = chord;
        if (dir.dot(chord) < 0.0) dir = -dir;
        dir.normalize();
        return {from, y0 * d * Vec(dir)};
    }

    Tangent transport(const Tangent& v, const Point& to) const override {
        const Vec outgoing = log(v.base, to).components;
        const double on = outgoing.norm();
        if (on < 1e-300) return {to, v.components * (to[1] / v.base[1])};
        const Vec incoming = -log(to, v.base).components;
        const Eigen::Vector2d ep = outgoing / on;
        const Eigen::Vector2d eq = incoming.normalized();
        const Eigen::Vector2d w = v.components;
        // The metric is conformal, so chart angles equal metric angles.
        const double theta = std::atan2(ep.x() * w.y() - ep.y() * w.x(), ep.dot(w));
        const double scale = w.norm() * to[1] / v.base[1];
        const Eigen::Vector2d out(std::cos(theta) * eq.x() - std::sin(theta) * eq.y(),
                                  std::sin(theta) * eq.x() + std::cos(theta) * eq.y());
        return {to, scale * Vec(out)};
    }

    double distance(const Point& a, const Point& b) const override { return half_plane_distance(a[0], a[1], b[0], b[1]); }

    static double half_plane_distance(double ax, double ay, double bx, double by) {
        const double chord = std::hypot(bx - ax, by - ay);
        return 2.0 * std::asinh(chord / (2.0 * std::sqrt(ay * by)));
    }
};

Mat half_plane_metric(const Vec& q) {
    const double s = 1.0 / (q[1] * q[1]);
    return Mat::Identity(2, 2) * s;
}

bool upper_half(const Point& q) { return q[1] > 0.0; }

} // namespace

LocalChart sphere_stereographic_chart(const Point& center) {
    const Eigen::Vector3d c = center.coords.normalized();
    // Orthonormal basis of the plane orthogonal to c.
    Eigen::Vector3d helper = std::abs(c.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    const Eigen::Vector3d e1 = (helper - helper.dot(c) * c).normalized();
    const Eigen::Vector3d e2 = c.cross(e1);

    ManifoldDefinition def;
    def.name = "sphere-stereographic";
    def.dim = 2;
    def.metric = [](const Vec& x) -> Mat {
        const double s = 1.0 + x.squaredNorm();
        return Mat::Identity(2, 2) * (4.0 / (s * s));
    };
    def.curvature_upper_bound = 1.0;
    def.injectivity_radius = [](const Point&) { return pi; };
    // |x| = 1e3 is about 0.002 rad from the antipode.
    def.chart_domain = [](const Point& x) { return x.coords.squaredNorm() < 1e6; };

    LocalChart lc;
    lc.chart = Manifold::create(std::move(def));
    lc.to_chart = [c, e1, e2](const Point& p) {
        const Eigen::Vector3d y = p.coords.normalized();
        const double denom = 1.0 + y.dot(c);
        return Point{y.dot(e1) / denom, y.dot(e2) / denom};
    };
    lc.from_chart = [c, e1, e2](const Point& x) {
        const double r2 = x.coords.squaredNorm();
        const Eigen::Vector3d y = ((1.0 - r2) * c + 2.0 * (x[0] * e1 + x[1] * e2)) / (1.0 + r2);
        return Point(Vec(y));
    };
    lc.push = [c, e1, e2, to = lc.to_chart](const Tangent& v) {
        const Eigen::Vector3d y = v.base.coords.normalized();
        const Eigen::Vector3d w = v.components;
        const double denom = 1.0 + y.dot(c);
        Vec dx(2);
        dx << w.dot(e1) / denom - y.dot(e1) * w.dot(c) / (denom * denom),
              w.dot(e2) / denom - y.dot(e2) * w.dot(c) / (denom * denom);
        return Tangent(to(v.base), dx);
    };
    lc.pull = [c, e1, e2, from = lc.from_chart](const Tangent& v) {
        const Vec& x = v.base.coords;
        const Vec& dx = v.components;
        const double r2 = x.squaredNorm();
        const double s = 1.0 + r2;
        const double xd = x.dot(dx);
        const Eigen::Vector3d big_x = x[0] * e1 + x[1] * e2;
        const Eigen::Vector3d d_x = dx[0] * e1 + dx[1] * e2;
        const Eigen::Vector3d y_num = (1.0 - r2) * c + 2.0 * big_x;
        const Eigen::Vector3d dy = (-2.0 * xd * c + 2.0 * d_x) / s - y_num * (2.0 * xd) / (s * s);
        return Tangent(from(v.base), Vec(dy));
    };
    return lc;
}

ManifoldHandle make_builtin(const BuiltinSpec& spec) {
    ManifoldDefinition def;
    switch (spec.kind) {
        case BuiltinSpec::Kind::Euclidean: {
            if (spec.n <= 0) fail(ErrorKind::InvalidArgument, "euclidean dimension must be positive");
            const int n = spec.n;
            def.name = "euclidean";
            def.dim = n;
            def.metric = [n](const Vec&) -> Mat { return Mat::Identity(n, n); };
            def.christoffel = [n](const Point&) { return Christoffel(n); };
            def.curvature_upper_bound = 0.0;
            def.closed_form = std::make_shared<EuclideanGeometry>();
            break;
        }
        case BuiltinSpec::Kind::Sphere2: {
            def.name = "sphere2";
            def.dim = 2;
            def.coord_dim = 3;
            def.metric = [](const Vec&) -> Mat { return Mat::Identity(3, 3); };
            def.curvature_upper_bound = 1.0;
            def.injectivity_radius = [](const Point&) { return pi; };
            def.closed_form = std::make_shared<SphereGeometry>();
            def.chart_domain = [](const Point& q) {
                const double r = q.coords.norm();
                return r > 0.5 && r < 1.5;
            };
            def.normalize_point = [](const Point& q) { return Point(q.coords.normalized()); };
            def.normalize_tangent = [](const Tangent& v) {
                const Vec p = v.base.coords.normalized();
                return Tangent(Point(p), project_to_tangent(p, v.components));
            };
            def.chart_difference = [](const Point& a, const Point& b) -> Vec { return b.coords - a.coords; };
            // Constrained particle: q̈ = −|q̇|² q / |q|².
            def.geodesic_acceleration = [](const Point& q, const Vec& v) -> Vec {
                return -(v.squaredNorm() / q.coords.squaredNorm()) * q.coords;
            };
            def.local_chart = [](const Point& center) { return sphere_stereographic_chart(center); };
            break;
        }
        case BuiltinSpec::Kind::Hyperbolic2: {
            def.name = "hyperbolic2";
            def.dim = 2;
            def.metric = half_plane_metric;
            // Exact coefficients; a fixed difference step fails once y approaches it.
            def.christoffel = [](const Point& q) {
                const double inv = 1.0 / q[1];
                Christoffel gamma(2);
                gamma(0, 0, 1) = gamma(0, 1, 0) = -inv;
                gamma(1, 0, 0) = inv;
                gamma(1, 1, 1) = -inv;
                return gamma;
            };
            def.curvature_upper_bound = -1.0;
            def.closed_form = std::make_shared<HalfPlaneGeometry>();
            def.chart_domain = upper_half;
            break;
        }
        case BuiltinSpec::Kind::Torus2: {
            const auto periods = spec.periods;
            if (!(periods[0] > 0.0) || !(periods[1] > 0.0) || !std::isfinite(periods[0]) || !std::isfinite(periods[1]))
                fail(ErrorKind::InvalidArgument, "torus periods must be positive");
            auto geometry = std::make_shared<TorusGeometry>(periods);
            def.name = "torus2";
            def.dim = 2;
            def.metric = [](const Vec&) -> Mat { return Mat::Identity(2, 2); };
            def.christoffel = [](const Point&) { return Christoffel(2); };
            def.curvature_upper_bound = 0.0;
            const double radius = geometry->radius();
            def.injectivity_radius = [radius](const Point&) { return radius; };
            def.normalize_point = [geometry](const Point& q) { return geometry->wrap_point(q.coords); };
            def.normalize_tangent = [geometry](const Tangent& v) { return Tangent(geometry->wrap_point(v.base.coords), v.components); };
            def.chart_difference = [geometry](const Point& a, const Point& b) { return geometry->difference(a, b); };
            def.closed_form = geometry;
            break;
        }
    }
    return Manifold::create(std::move(def));
}

ManifoldHandle make_chart_manifold(ChartSpec spec) {
    if (!spec.metric) fail(ErrorKind::InvalidArgument, "chart manifold needs a metric");
    ManifoldDefinition def;
    def.name = std::move(spec.name);
    def.dim = spec.dim;
    def.metric = std::move(spec.metric);
    def.chart_domain = std::move(spec.domain);
    def.curvature_upper_bound = spec.curvature_upper_bound;
    def.injectivity_radius = std::move(spec.injectivity_radius);
    return Manifold::create(std::move(def));
}

ManifoldHandle make_sphere_polar_chart() {
    ChartSpec spec;
    spec.name = "sphere_polar";
    spec.dim = 2;
    spec.metric = [](const Vec& q) -> Mat {
        Mat g = Mat::Zero(2, 2);
        const double s = std::sin(q[0]);
        g(0, 0) = 1.0;
        g(1, 1) = s * s;
        return g;
    };
    spec.domain = [](const Point& q) { return q[0] > 0.0 && q[0] < pi; };
    spec.curvature_upper_bound = 1.0;
    spec.injectivity_radius = [](const Point&) { return pi; };
    return make_chart_manifold(std::move(spec));
}

ManifoldHandle make_half_plane_chart() {
    ChartSpec spec;
    spec.name = "half_plane";
    spec.dim = 2;
    spec.metric = half_plane_metric;
    spec.domain = upper_half;
    spec.curvature_upper_bound = -1.0;
    return make_chart_manifold(std::move(spec));
}

ManifoldHandle make_named_chart(const std::string& name) {
    if (name == "sphere_polar") return make_sphere_polar_chart();
    if (name == "half_plane") return make_half_plane_chart();
    fail(ErrorKind::InvalidArgument, "unknown chart '" + name + "' (known: sphere_polar, half_plane)");
}

} // namespace geoobs
