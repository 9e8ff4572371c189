#include "geoobs/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace geoobs {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid argument";
        case ErrorKind::Domain: return "domain error";
        case ErrorKind::DegenerateMetric: return "degenerate metric";
        case ErrorKind::ChartExit: return "chart exit";
        case ErrorKind::LogDivergence: return "log divergence";
        case ErrorKind::InjectivityViolation: return "injectivity violation";
        case ErrorKind::DegeneratePlane: return "degenerate plane";
        case ErrorKind::InadmissibleRegion: return "inadmissible region";
        case ErrorKind::BoundInapplicable: return "bound inapplicable";
        case ErrorKind::OutsideContractionRegion: return "outside contraction region";
    }
    return "unknown";
}

void fail(ErrorKind kind, const std::string& what) {
    throw GeometryError(kind, std::string(to_string(kind)) + ": " + what);
}

// -- Manifold ----------------------------------------------------------------

ManifoldHandle Manifold::create(ManifoldDefinition def) {
    if (def.dim <= 0) fail(ErrorKind::InvalidArgument, "manifold dimension must be positive");
    if (def.coord_dim == 0) def.coord_dim = def.dim;
    if (def.coord_dim < def.dim) fail(ErrorKind::InvalidArgument, "coordinate count below dimension");
    if (!def.metric) fail(ErrorKind::InvalidArgument, "manifold '" + def.name + "' has no metric");
    if (def.coord_dim != def.dim && !def.local_chart)
        fail(ErrorKind::InvalidArgument, "embedded manifold '" + def.name + "' needs a local chart");
    if (!def.injectivity_radius) def.injectivity_radius = [](const Point&) { return kInfinity; };
    if (!def.chart_domain) def.chart_domain = [](const Point&) { return true; };
    if (!def.normalize_point) def.normalize_point = [](const Point& p) { return p; };
    if (!def.normalize_tangent) def.normalize_tangent = [](const Tangent& v) { return v; };
    if (!def.chart_difference) def.chart_difference = [](const Point& a, const Point& b) -> Vec { return b.coords - a.coords; };
    return ManifoldHandle(new Manifold(std::move(def)));
}

Mat Manifold::metric(const Point& q) const {
    Mat g = def_.metric(q.coords);
    if (g.rows() != def_.coord_dim || g.cols() != def_.coord_dim)
        fail(ErrorKind::InvalidArgument, "metric of '" + def_.name + "' has wrong shape");
    if (!g.allFinite()) fail(ErrorKind::DegenerateMetric, "metric not finite");
    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        fail(ErrorKind::DegenerateMetric, "metric not symmetric");
    return g;
}

double Manifold::injectivity_radius(const Point& q) const { return def_.injectivity_radius(q); }

bool Manifold::in_domain(const Point& q) const {
    return q.size() == def_.coord_dim && q.finite() && def_.chart_domain(q);
}

void Manifold::require_in_domain(const Point& q) const {
    if (q.size() != def_.coord_dim) {
        std::ostringstream os;
        os << "point has " << q.size() << " coordinates, '" << def_.name << "' expects " << def_.coord_dim;
        fail(ErrorKind::Domain, os.str());
    }
    if (!q.finite()) fail(ErrorKind::Domain, "point has non-finite coordinates");
    if (!def_.chart_domain(q)) fail(ErrorKind::Domain, "point outside the chart domain of '" + def_.name + "'");
}

Point Manifold::normalize(const Point& q) const { return def_.normalize_point(q); }
Tangent Manifold::normalize(const Tangent& v) const { return def_.normalize_tangent(v); }

Vec Manifold::chart_difference(const Point& a, const Point& b) const { return def_.chart_difference(a, b); }

Vec Manifold::acceleration_override(const Point& q, const Vec& v) const { return def_.geodesic_acceleration(q, v); }

LocalChart Manifold::local_chart(const Point& center) const {
    if (!def_.local_chart) {
        fail(ErrorKind::InvalidArgument, "manifold '" + def_.name + "' is already a chart");
    }
    return def_.local_chart(center);
}

// -- Christoffel ---------------------------------------------------------------

Vec Christoffel::contract(const Vec& u, const Vec& w) const {
    Vec out = Vec::Zero(n_);
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) {
            if (u[j] == 0.0) continue;
            for (int k = 0; k < n_; ++k) out[i] += (*this)(i, j, k) * u[j] * w[k];
        }
    return out;
}

double fd_step(const Vec& q) { return 1e-5 * std::max(1.0, q.lpNorm<Eigen::Infinity>()); }

namespace {

void require_chart(const ManifoldHandle& m, const char* op) {
    if (m->embedded())
        fail(ErrorKind::InvalidArgument,
             std::string(op) + " needs chart coordinates; '" + m->name() + "' is embedded (use its local chart)");
}

Mat checked_inverse(const Mat& g) {
    Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12) fail(ErrorKind::DegenerateMetric, "condition number above 1e12");
    return g.inverse();
}

Vec acceleration(const ManifoldHandle& m, const Point& q, const Vec& v) {
    if (m->has_acceleration_override()) return m->acceleration_override(q, v);
    return -christoffel(m, q).contract(v, v);
}

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

} // namespace

Christoffel christoffel(const ManifoldHandle& m, const Point& q) {
    require_chart(m, "christoffel");
    m->require_in_domain(q);
    if (m->has_christoffel_override()) return m->christoffel_override(q);
    const int n = m->coord_dim();
    const Mat g = m->metric(q);
    const Mat ginv = checked_inverse(g);
    const double h = fd_step(q.coords);

    std::vector<Mat> dg(static_cast<size_t>(n));  // dg[l] = ∂_l g
    for (int l = 0; l < n; ++l) {
        Point plus = q, minus = q;
        plus.coords[l] += h;
        minus.coords[l] -= h;
        dg[static_cast<size_t>(l)] = (m->metric(plus) - m->metric(minus)) / (2.0 * h);
    }
    auto d = [&](int l, int a, int b) { return dg[static_cast<size_t>(l)](a, b); };

    Christoffel gamma(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = j; k < n; ++k) {
                double s = 0.0;
                for (int l = 0; l < n; ++l) s += ginv(i, l) * (d(j, l, k) + d(k, j, l) - d(l, j, k));
                gamma(i, j, k) = 0.5 * s;
            }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < j; ++k) gamma(i, j, k) = gamma(i, k, j);
    return gamma;
}

// -- metric helpers ------------------------------------------------------------

double inner(const ManifoldHandle& m, const Point& q, const Vec& u, const Vec& w) {
    return u.dot(m->metric(q) * w);
}

double norm(const ManifoldHandle& m, const Tangent& v) {
    return std::sqrt(std::max(0.0, inner(m, v.base, v.components, v.components)));
}

double angle_between(const ManifoldHandle& m, const Point& q, const Vec& u, const Vec& w) {
    const Mat g = m->metric(q);
    const double nu = std::sqrt(std::max(0.0, u.dot(g * u)));
    const double nw = std::sqrt(std::max(0.0, w.dot(g * w)));
    if (nu == 0.0 || nw == 0.0) return 0.0;
    return std::acos(std::clamp(u.dot(g * w) / (nu * nw), -1.0, 1.0));
}

// -- geodesic flow ---------------------------------------------------------------

Tangent geodesic_step(const ManifoldHandle& m, const Tangent& state, double dt) {
    if (!(dt > 0.0)) fail(ErrorKind::InvalidArgument, "geodesic_step needs dt > 0");
    if (!m->has_acceleration_override()) require_chart(m, "geodesic_step");
    m->require_in_domain(state.base);

    auto stage = [&](const Vec& q, const Vec& v) -> Vec {
        const Point p(q);
        if (!m->in_domain(p)) {
            GeometryError err(ErrorKind::ChartExit, "chart exit: geodesic left the chart domain of '" + m->name() + "'");
            err.last_valid = state;
            throw err;
        }
        return acceleration(m, p, v);
    };

    const Vec& q = state.base.coords;
    const Vec& v = state.components;
    const Vec a1 = stage(q, v);
    const Vec q2 = q + 0.5 * dt * v, v2 = v + 0.5 * dt * a1;
    const Vec a2 = stage(q2, v2);
    const Vec q3 = q + 0.5 * dt * v2, v3 = v + 0.5 * dt * a2;
    const Vec a3 = stage(q3, v3);
    const Vec q4 = q + dt * v3, v4 = v + dt * a3;
    const Vec a4 = stage(q4, v4);

    Tangent out(Point(q + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)),
                v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4));
    if (!m->in_domain(out.base)) {
        GeometryError err(ErrorKind::ChartExit, "chart exit: geodesic left the chart domain of '" + m->name() + "'");
        err.last_valid = state;
        throw err;
    }
    return m->normalize(out);
}

// -- dispatching operations ------------------------------------------------------

Point exp_map(const ManifoldHandle& m, const Tangent& v, double tol) {
    if (!(tol > 0.0)) fail(ErrorKind::InvalidArgument, "exp_map needs tol > 0");
    if (!v.finite()) fail(ErrorKind::InvalidArgument, "exp_map of a non-finite vector");
    if (const auto* cf = m->closed_form()) return cf->exp(v);
    return numeric::exp_map(m, v, tol);
}

Tangent log_map(const ManifoldHandle& m, const Point& from, const Point& to, double tol) {
    if (const auto* cf = m->closed_form()) return cf->log(from, to);
    return numeric::log_map(m, from, to, tol);
}

double distance(const ManifoldHandle& m, const Point& a, const Point& b, double tol) {
    if (const auto* cf = m->closed_form()) return cf->distance(a, b);
    return numeric::distance(m, a, b, tol);
}

Tangent parallel_transport(const ManifoldHandle& m, const Tangent& v, const Point& to, double tol) {
    if (const auto* cf = m->closed_form()) return cf->transport(v, to);
    return numeric::parallel_transport(m, v, to, tol);
}

double sectional_curvature(const ManifoldHandle& m, const Point& q, const Vec& u, const Vec& w) {
    if (m->embedded()) {
        const LocalChart lc = m->local_chart(q);
        const Point qc = lc.to_chart(q);
        return sectional_curvature(lc.chart, qc, lc.push(Tangent(q, u)).components, lc.push(Tangent(q, w)).components);
    }
    m->require_in_domain(q);
    const int n = m->coord_dim();
    const Mat g = m->metric(q);
    const double uu = u.dot(g * u), ww = w.dot(g * w), uw = u.dot(g * w);
    if (!(uu > 0.0) || !(ww > 0.0)) fail(ErrorKind::DegeneratePlane, "zero vector spans no plane");
    const double gram = uu * ww - uw * uw;
    if (gram / (uu * ww) < 1e-12) fail(ErrorKind::DegeneratePlane, "vectors are parallel");

    const Christoffel gamma = christoffel(m, q);
    const double h = 1e-4 * std::max(1.0, inf_norm(q.coords));
    std::vector<Christoffel> dgamma;  // dgamma[k] = ∂_k Γ
    dgamma.reserve(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        Point plus = q, minus = q;
        plus.coords[k] += h;
        minus.coords[k] -= h;
        const Christoffel gp = christoffel(m, plus), gm = christoffel(m, minus);
        Christoffel d(n);
        for (int i = 0; i < n; ++i)
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) d(i, a, b) = (gp(i, a, b) - gm(i, a, b)) / (2.0 * h);
        dgamma.push_back(std::move(d));
    }

    // R^i_{jkl} = ∂_k Γ^i_{lj} − ∂_l Γ^i_{kj} + Γ^i_{km} Γ^m_{lj} − Γ^i_{lm} Γ^m_{kj}
    auto riemann = [&](int i, int j, int k, int l) {
        double r = dgamma[static_cast<size_t>(k)](i, l, j) - dgamma[static_cast<size_t>(l)](i, k, j);
        for (int mm = 0; mm < n; ++mm) r += gamma(i, k, mm) * gamma(mm, l, j) - gamma(i, l, mm) * gamma(mm, k, j);
        return r;
    };

    // R(u, w) w
    Vec rw = Vec::Zero(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) rw[i] += riemann(i, j, k, l) * w[j] * u[k] * w[l];
    return rw.dot(g * u) / gram;
}

// -- numeric routes ----------------------------------------------------------------

namespace numeric {
namespace {

constexpr int kMinSteps = 8;
constexpr int kMaxSteps = 1 << 16;

Tangent integrate_geodesic(const ManifoldHandle& m, const Tangent& start, int steps) {
    Tangent s = start;
    const double h = 1.0 / steps;
    for (int i = 0; i < steps; ++i) s = geodesic_step(m, s, h);
    return s;
}

/// Smallest step count (power of two, ≥ kMinSteps) for which doubling moves
/// the endpoint by less than `tol`.
int adaptive_steps(const ManifoldHandle& m, const Tangent& v, double tol, Point* endpoint) {
    int n = kMinSteps;
    Point a = integrate_geodesic(m, v, n).base;
    while (n < kMaxSteps) {
        Point b = integrate_geodesic(m, v, 2 * n).base;
        const double change = inf_norm(m->chart_difference(a, b));
        n *= 2;
        a = std::move(b);
        if (change < tol) break;
    }
    if (endpoint) *endpoint = a;
    return n;
}

/// Chart centre for two-point operations on embedded manifolds: the projected
/// midpoint keeps both endpoints near the chart origin.
Point chart_center(const ManifoldHandle& m, const Point& a, const Point& b) {
    const Point mid = m->normalize(Point(a.coords + 0.5 * m->chart_difference(a, b)));
    return m->in_domain(mid) ? mid : a;
}

void check_injectivity(const ManifoldHandle& m, const Tangent& v, const Point& to) {
    const double radius = m->injectivity_radius(to);
    if (!std::isfinite(radius)) return;
    const double d = norm(m, v);
    if (d >= radius) {
        std::ostringstream os;
        os << "distance " << d << " is not below the injectivity radius " << radius;
        GeometryError err(ErrorKind::InjectivityViolation, std::string(to_string(ErrorKind::InjectivityViolation)) + ": " + os.str());
        err.distance = d;
        throw err;
    }
}

} // namespace

Point exp_map(const ManifoldHandle& m, const Tangent& v, double tol) {
    if (!(tol > 0.0)) fail(ErrorKind::InvalidArgument, "exp_map needs tol > 0");
    if (m->embedded()) {
        const LocalChart lc = m->local_chart(v.base);
        return m->normalize(lc.from_chart(numeric::exp_map(lc.chart, lc.push(v), tol)));
    }
    m->require_in_domain(v.base);
    if (inf_norm(v.components) == 0.0) return v.base;
    Point end;
    adaptive_steps(m, v, tol, &end);
    return end;
}

Tangent log_map(const ManifoldHandle& m, const Point& from, const Point& to, double tol, const Vec* guess) {
    if (!(tol > 0.0)) fail(ErrorKind::InvalidArgument, "log_map needs tol > 0");
    if (m->embedded()) {
        const LocalChart lc = m->local_chart(chart_center(m, from, to));
        const Tangent vc = numeric::log_map(lc.chart, lc.to_chart(from), lc.to_chart(to), tol);
        Tangent v = m->normalize(lc.pull(vc));
        v.base = from;
        check_injectivity(m, v, to);
        return v;
    }
    m->require_in_domain(from);
    m->require_in_domain(to);

    Vec v = guess ? *guess : m->chart_difference(from, to);
    if (inf_norm(m->chart_difference(from, to)) == 0.0) return zero_tangent(from);

    auto endpoint = [&](const Vec& x, int steps) { return integrate_geodesic(m, Tangent(from, x), steps).base; };
    auto residual = [&](const Point& end) { return m->chart_difference(end, to); };
    auto recoverable = [](const GeometryError& e) {
        return e.kind() == ErrorKind::ChartExit || e.kind() == ErrorKind::Domain || e.kind() == ErrorKind::DegenerateMetric;
    };

    int steps = 0;
    Point end;
    for (int k = 0;; ++k) {
        try {
            steps = adaptive_steps(m, Tangent(from, v), tol, &end);
            break;
        } catch (const GeometryError& e) {
            // A long first guess can shoot out of the chart; shorten it.
            if (!recoverable(e) || k == 30) throw;
            v *= 0.5;
        }
    }
    Vec r = residual(end);
    const int n = static_cast<int>(v.size());
    for (int iter = 0; iter < 100; ++iter) {
        if (inf_norm(r) < tol) {
            // Confirm at the refined resolution before accepting.
            Point fine = endpoint(v, 2 * steps);
            const Vec r_fine = residual(fine);
            if (inf_norm(r_fine) < tol || steps >= kMaxSteps) {
                Tangent out(from, v);
                check_injectivity(m, out, to);
                return out;
            }
            steps *= 2;
            end = std::move(fine);
            r = r_fine;
        }
        Mat jac(n, n);
        const double h = 1e-7 * std::max(1.0, inf_norm(v));
        for (int j = 0; j < n; ++j) {
            Vec vp = v;
            vp[j] += h;
            jac.col(j) = m->chart_difference(end, endpoint(vp, steps)) / h;
        }
        const Vec dv = jac.fullPivLu().solve(r);
        if (!dv.allFinite()) break;

        // Backtracking keeps Newton from jumping out of the chart.
        double step = 1.0;
        bool accepted = false;
        for (int k = 0; k < 20; ++k, step *= 0.5) {
            const Vec trial = v + step * dv;
            try {
                Point trial_end = endpoint(trial, steps);
                const Vec rt = residual(trial_end);
                if (inf_norm(rt) < inf_norm(r) || inf_norm(rt) < tol) {
                    v = trial;
                    r = rt;
                    end = std::move(trial_end);
                    accepted = true;
                    break;
                }
            } catch (const GeometryError& e) {
                if (!recoverable(e)) throw;
            }
        }
        if (!accepted) break;
    }
    fail(ErrorKind::LogDivergence, "shooting did not converge within 100 iterations");
}

double distance(const ManifoldHandle& m, const Point& a, const Point& b, double tol) {
    return norm(m, numeric::log_map(m, a, b, tol));
}

Tangent parallel_transport(const ManifoldHandle& m, const Tangent& v, const Point& to, double tol) {
    if (!(tol > 0.0)) fail(ErrorKind::InvalidArgument, "parallel_transport needs tol > 0");
    if (m->embedded()) {
        const LocalChart lc = m->local_chart(chart_center(m, v.base, to));
        Tangent out = lc.pull(numeric::parallel_transport(lc.chart, lc.push(v), lc.to_chart(to), tol));
        out.base = to;
        return m->normalize(out);
    }
    m->require_in_domain(v.base);
    m->require_in_domain(to);
    if (inf_norm(m->chart_difference(v.base, to)) == 0.0) return Tangent(to, v.components);

    const Tangent path = numeric::log_map(m, v.base, to, tol);
    const int n = m->coord_dim();

    // State: position, velocity, transported vector; all integrated with RK4.
    auto run = [&](int steps) -> Vec {
        Vec q = v.base.coords, qd = path.components, V = v.components;
        const double h = 1.0 / steps;
        auto rhs = [&](const Vec& x, const Vec& xd, const Vec& W, Vec& dx, Vec& dxd, Vec& dW) {
            const Point p(x);
            if (!m->in_domain(p)) fail(ErrorKind::ChartExit, "transport path left the chart");
            const Christoffel gamma = christoffel(m, p);
            dx = xd;
            dxd = -gamma.contract(xd, xd);
            dW = -gamma.contract(xd, W);
        };
        Vec k1q(n), k1v(n), k1w(n), k2q(n), k2v(n), k2w(n), k3q(n), k3v(n), k3w(n), k4q(n), k4v(n), k4w(n);
        for (int s = 0; s < steps; ++s) {
            rhs(q, qd, V, k1q, k1v, k1w);
            rhs(q + 0.5 * h * k1q, qd + 0.5 * h * k1v, V + 0.5 * h * k1w, k2q, k2v, k2w);
            rhs(q + 0.5 * h * k2q, qd + 0.5 * h * k2v, V + 0.5 * h * k2w, k3q, k3v, k3w);
            rhs(q + h * k3q, qd + h * k3v, V + h * k3w, k4q, k4v, k4w);
            q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
            qd += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            V += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        }
        return V;
    };

    int steps = kMinSteps;
    Vec a = run(steps);
    while (steps < kMaxSteps) {
        Vec b = run(2 * steps);
        const double change = inf_norm(b - a);
        steps *= 2;
        a = std::move(b);
        if (change < tol) break;
    }
    return Tangent(to, a);
}

} // namespace numeric
} // namespace geoobs
