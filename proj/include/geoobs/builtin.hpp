#pragma once

#include "geoobs/manifold.hpp"

#include <array>
#include <numbers>
#include <string>

namespace geoobs {

struct BuiltinSpec {
    enum class Kind { Euclidean, Sphere2, Hyperbolic2, Torus2 };

    Kind kind = Kind::Euclidean;
    int n = 2;  // euclidean dimension
    std::array<double, 2> periods{2.0 * std::numbers::pi, 2.0 * std::numbers::pi};  // torus

    static BuiltinSpec euclidean(int n) { return {Kind::Euclidean, n, {}}; }
    static BuiltinSpec sphere2() { return {Kind::Sphere2, 2, {}}; }
    static BuiltinSpec hyperbolic2() { return {Kind::Hyperbolic2, 2, {}}; }
    static BuiltinSpec torus2(double px = 2.0 * std::numbers::pi, double py = 2.0 * std::numbers::pi) {
        return {Kind::Torus2, 2, {px, py}};
    }
};

/// Instantiates a built-in manifold with its closed-form geometry.
///
/// - euclidean(n): identity metric, A = 0, infinite injectivity radius.
/// - sphere2: unit sphere in three embedded coordinates, renormalized after
///   every step; A = 1, injectivity radius π.
/// - hyperbolic2: upper half-plane (dx² + dy²)/y²; curvature −1, infinite
///   injectivity radius.
/// - torus2: flat torus with coordinates wrapped into [0, period); A = 0,
///   injectivity radius half the shortest period.
ManifoldHandle make_builtin(const BuiltinSpec& spec);

/// User metric on a single chart. Numeric geometry only.
struct ChartSpec {
    std::string name = "chart";
    int dim = 2;
    MetricField metric;
    std::function<bool(const Point&)> domain;
    double curvature_upper_bound = kInfinity;
    std::function<double(const Point&)> injectivity_radius;
};

ManifoldHandle make_chart_manifold(ChartSpec spec);

/// Unit sphere in the polar chart (θ, φ) with metric diag(1, sin²θ), 0 < θ < π.
ManifoldHandle make_sphere_polar_chart();

/// The upper half-plane metric as a plain chart (no closed form).
ManifoldHandle make_half_plane_chart();

/// Stereographic chart of the unit sphere projected from −center, so that
/// `center` maps to the chart origin. Metric 4 / (1 + |x|²)² · I.
LocalChart sphere_stereographic_chart(const Point& center);

/// Chart-manifold names accepted by scenario files.
ManifoldHandle make_named_chart(const std::string& name);

} // namespace geoobs
