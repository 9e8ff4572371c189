#pragma once

#include "geoobs/types.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace geoobs {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Maps chart coordinates to the symmetric positive-definite metric matrix.
using MetricField = std::function<Mat(const Vec&)>;

class Manifold;
using ManifoldHandle = std::shared_ptr<const Manifold>;

/// Closed-form geometry provider. Implementations must agree with the
/// numeric ODE routes in `geoobs::numeric`.
class ClosedFormGeometry {
public:
    virtual ~ClosedFormGeometry() = default;

    [[nodiscard]] virtual Point exp(const Tangent& v) const = 0;
    [[nodiscard]] virtual Tangent log(const Point& from, const Point& to) const = 0;
    [[nodiscard]] virtual Tangent transport(const Tangent& v, const Point& to) const = 0;
    [[nodiscard]] virtual double distance(const Point& a, const Point& b) const = 0;
};

/// Γ^i_{jk} stored densely; index as (i, j, k).
class Christoffel {
public:
    explicit Christoffel(int n) : n_(n), data_(static_cast<size_t>(n * n * n), 0.0) {}

    [[nodiscard]] int dim() const { return n_; }
    double& operator()(int i, int j, int k) { return data_[static_cast<size_t>((i * n_ + j) * n_ + k)]; }
    double operator()(int i, int j, int k) const { return data_[static_cast<size_t>((i * n_ + j) * n_ + k)]; }

    /// Γ^i_{jk} u^j w^k.
    [[nodiscard]] Vec contract(const Vec& u, const Vec& w) const;

private:
    int n_;
    std::vector<double> data_;
};

/// A chart in which numeric geometry of an embedded manifold is computed,
/// together with the coordinate and tangent maps in both directions.
struct LocalChart {
    ManifoldHandle chart;
    std::function<Point(const Point&)> to_chart;
    std::function<Point(const Point&)> from_chart;
    std::function<Tangent(const Tangent&)> push;  // handle tangent -> chart tangent
    std::function<Tangent(const Tangent&)> pull;  // chart tangent -> handle tangent
};

/// Everything needed to construct a manifold. Unset callables get defaults.
struct ManifoldDefinition {
    std::string name = "chart";
    int dim = 0;
    int coord_dim = 0;  // 0 means equal to dim
    MetricField metric;
    double curvature_upper_bound = kInfinity;
    std::function<double(const Point&)> injectivity_radius;
    std::shared_ptr<const ClosedFormGeometry> closed_form;
    std::function<bool(const Point&)> chart_domain;
    std::function<Point(const Point&)> normalize_point;
    std::function<Tangent(const Tangent&)> normalize_tangent;
    std::function<Vec(const Point&, const Point&)> chart_difference;
    /// Geodesic acceleration override, used by embedded manifolds whose
    /// coordinates are not a chart.
    std::function<Vec(const Point&, const Vec&)> geodesic_acceleration;
    /// Exact connection coefficients; replaces the finite-difference ones.
    std::function<Christoffel(const Point&)> christoffel;
    std::function<LocalChart(const Point&)> local_chart;
};

/// Immutable Riemannian manifold description. Shared between concurrent runs
/// through `ManifoldHandle`.
class Manifold {
public:
    static ManifoldHandle create(ManifoldDefinition def);

    [[nodiscard]] const std::string& name() const { return def_.name; }
    [[nodiscard]] int dim() const { return def_.dim; }
    [[nodiscard]] int coord_dim() const { return def_.coord_dim; }
    /// True when coordinates are ambient (not a chart); numeric geometry then
    /// goes through `local_chart`.
    [[nodiscard]] bool embedded() const { return def_.coord_dim != def_.dim; }
    [[nodiscard]] double curvature_upper_bound() const { return def_.curvature_upper_bound; }
    [[nodiscard]] const ClosedFormGeometry* closed_form() const { return def_.closed_form.get(); }

    [[nodiscard]] Mat metric(const Point& q) const;
    [[nodiscard]] double injectivity_radius(const Point& q) const;
    [[nodiscard]] bool in_domain(const Point& q) const;
    [[nodiscard]] Point normalize(const Point& q) const;
    [[nodiscard]] Tangent normalize(const Tangent& v) const;
    /// Chart displacement from `a` to `b` (wrapped on periodic charts).
    [[nodiscard]] Vec chart_difference(const Point& a, const Point& b) const;
    [[nodiscard]] bool has_acceleration_override() const { return static_cast<bool>(def_.geodesic_acceleration); }
    [[nodiscard]] Vec acceleration_override(const Point& q, const Vec& v) const;
    [[nodiscard]] bool has_christoffel_override() const { return static_cast<bool>(def_.christoffel); }
    [[nodiscard]] Christoffel christoffel_override(const Point& q) const { return def_.christoffel(q); }
    [[nodiscard]] LocalChart local_chart(const Point& center) const;

    /// Throws a domain error unless `q` has the right size, is finite and lies in the chart domain.
    void require_in_domain(const Point& q) const;

private:
    explicit Manifold(ManifoldDefinition def) : def_(std::move(def)) {}
    ManifoldDefinition def_;
};

/// Central-difference step for metric derivatives at `q`.
double fd_step(const Vec& q);

// -- metric helpers ----------------------------------------------------------

double inner(const ManifoldHandle& m, const Point& q, const Vec& u, const Vec& w);
double norm(const ManifoldHandle& m, const Tangent& v);
/// Metric angle between two tangents at the same base, clamped to [0, π].
double angle_between(const ManifoldHandle& m, const Point& q, const Vec& u, const Vec& w);

// -- core operations ---------------------------------------------------------
// These use the manifold's closed form when present and the numeric ODE
// routes otherwise.

Christoffel christoffel(const ManifoldHandle& m, const Point& q);

/// One RK4 step of the geodesic equation. Throws ChartExit carrying the input
/// state if any stage leaves the chart domain.
Tangent geodesic_step(const ManifoldHandle& m, const Tangent& state, double dt);

Point exp_map(const ManifoldHandle& m, const Tangent& v, double tol = 1e-10);
Tangent log_map(const ManifoldHandle& m, const Point& from, const Point& to, double tol = 1e-10);
double distance(const ManifoldHandle& m, const Point& a, const Point& b, double tol = 1e-10);
Tangent parallel_transport(const ManifoldHandle& m, const Tangent& v, const Point& to, double tol = 1e-10);

/// Sectional curvature of the plane spanned by `u` and `w` at `q`, from the
/// finite-difference Riemann tensor.
double sectional_curvature(const ManifoldHandle& m, const Point& q, const Vec& u, const Vec& w);

namespace numeric {

/// Geodesic endpoint after unit parameter; step count doubled until the
/// endpoint moves by less than `tol`.
Point exp_map(const ManifoldHandle& m, const Tangent& v, double tol = 1e-10);

/// Shooting with Newton iterations on a finite-difference Jacobian.
/// `guess`, when given, seeds the first iteration.
Tangent log_map(const ManifoldHandle& m, const Point& from, const Point& to, double tol = 1e-10,
                const Vec* guess = nullptr);

double distance(const ManifoldHandle& m, const Point& a, const Point& b, double tol = 1e-10);

Tangent parallel_transport(const ManifoldHandle& m, const Tangent& v, const Point& to, double tol = 1e-10);

} // namespace numeric

} // namespace geoobs
