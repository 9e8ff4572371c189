#pragma once

#include "geoobs/builtin.hpp"
#include "geoobs/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace geoobs::testing {

inline constexpr double pi = std::numbers::pi;

/// Seeded source for property tests.
class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal() { return std::normal_distribution<double>()(rng_); }

    Vec gaussian(Eigen::Index n) {
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    /// A point inside a comfortable region of each built-in chart.
    Point point(const ManifoldHandle& m) {
        if (m->name() == "sphere2") return Point(gaussian(3).normalized());
        if (m->name() == "hyperbolic2" || m->name() == "half_plane") return Point{uniform(-1.0, 1.0), uniform(0.5, 2.0)};
        if (m->name() == "torus2") return Point{uniform(0.0, 2.0 * pi), uniform(0.0, 2.0 * pi)};
        return Point(gaussian(m->coord_dim()));
    }

    /// Tangent at `q` with metric norm `length`.
    Tangent tangent(const ManifoldHandle& m, const Point& q, double length) {
        Vec c = gaussian(m->coord_dim());
        if (m->name() == "sphere2") c -= c.dot(q.coords) * q.coords;
        Tangent v(q, c);
        v.components *= length / norm(m, v);
        return v;
    }

private:
    std::mt19937_64 rng_;
};

/// Independent oracles for the closed forms.
namespace oracle {

inline Point sphere_exp(const Vec& p, const Vec& v) {
    const double a = v.norm();
    if (a == 0.0) return Point(p);
    return Point(Vec(std::cos(a) * p + std::sin(a) * v / a));
}

inline double sphere_distance(const Vec& a, const Vec& b) { return std::acos(std::clamp(a.dot(b), -1.0, 1.0)); }

inline double hyperbolic_distance(const Vec& a, const Vec& b) {
    return std::acosh(1.0 + (a - b).squaredNorm() / (2.0 * a[1] * b[1]));
}

} // namespace oracle

} // namespace geoobs::testing
