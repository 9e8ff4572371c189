#include "geoobs/analysis.hpp"

#include "geoobs/observer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace geoobs {
namespace {

using std::numbers::pi;

constexpr size_t kMaxBreachEvents = 100;

void require_trace(std::span<const TraceRecord> trace) {
    if (trace.size() < 10) fail(ErrorKind::InvalidArgument, "trace needs at least 10 samples");
}

void require_gain(double lambda) {
    if (!(lambda > 0.0)) fail(ErrorKind::InvalidArgument, "lambda must be positive");
}

double clock_of(const TraceRecord& r, Clock clock) { return clock == Clock::Maupertuis ? r.diagnostics.tau : r.t; }

/// Running min of (allowed − observed) with breach bookkeeping.
class BoundTracker {
public:
    explicit BoundTracker(std::string name) : check_{std::move(name), true, std::numeric_limits<double>::infinity()} {}

    void observe(double t, double observed, double allowed, std::vector<BreachEvent>& events) {
        const double margin = allowed - observed;
        check_.worst_margin = std::min(check_.worst_margin, margin);
        if (margin < 0.0 || !std::isfinite(observed)) {
            check_.satisfied = false;
            if (events.size() < kMaxBreachEvents) events.push_back({t, check_.name, observed});
        }
    }
    [[nodiscard]] BoundCheck result() const { return check_; }

private:
    BoundCheck check_;
};

} // namespace

bool BoundReport::all_satisfied() const {
    return std::all_of(bounds_satisfied.begin(), bounds_satisfied.end(), [](const BoundCheck& b) { return b.satisfied; });
}

const BoundCheck* BoundReport::find(const std::string& name) const {
    for (const auto& b : bounds_satisfied)
        if (b.name == name) return &b;
    return nullptr;
}

void to_json(nlohmann::json& j, const BoundReport& r) {
    auto finite_or_null = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
    j = nlohmann::json::object();
    j["check"] = r.check;
    j["rate_fit"] = finite_or_null(r.rate_fit);
    j["rate_required"] = finite_or_null(r.rate_required);
    j["bounds_satisfied"] = nlohmann::json::array();
    for (const auto& b : r.bounds_satisfied)
        j["bounds_satisfied"].push_back({{"name", b.name}, {"satisfied", b.satisfied}, {"worst_margin", finite_or_null(b.worst_margin)}});
    j["breach_events"] = nlohmann::json::array();
    for (const auto& e : r.breach_events)
        j["breach_events"].push_back({{"t", e.t}, {"bound", e.bound}, {"value", finite_or_null(e.value)}});
    j["values"] = nlohmann::json::object();
    for (const auto& [k, v] : r.values) j["values"][k] = finite_or_null(v);
    j["note"] = r.note;
}

double comparison_angle(double A, double lambda, double speed, double d_xi) {
    const double side = lambda * speed;
    if (!(side > 0.0) || !std::isfinite(A)) return pi;
    double factor;
    if (A > 0.0) {
        const double root = std::sqrt(A);
        const double s = std::sin(root * side);
        if (!(s > 0.0) || root * side >= pi) return pi;
        factor = root / s;
    } else {
        factor = 1.0 / side;
    }
    const double x = factor * d_xi;
    // The sine bound leaves two branches; the acute one is the comparison angle
    // while the bound is informative.
    return x < 1.0 ? std::asin(x) : pi;
}

ConvergenceDiagnostics compute_diagnostics(const ManifoldHandle& m, double A, double lambda, double t,
                                           const Point& q_true, const Tangent& qdot_true, const Tangent& v_hat,
                                           const Point& xi_hat, const Point& xi_ref) {
    ConvergenceDiagnostics d;
    d.t = t;
    d.tau = t;
    d.D_xi = distance(m, xi_hat, xi_ref);
    d.D_q = distance(m, xi_hat, q_true);

    const Point& at = v_hat.base;
    Tangent qdot = qdot_true;
    if (m->chart_difference(q_true, at).lpNorm<Eigen::Infinity>() > 0.0) qdot = parallel_transport(m, qdot_true, at);

    d.speed = norm(m, qdot_true);
    const Vec diff = v_hat.components - qdot.components;
    d.speed_err = std::sqrt(std::max(0.0, inner(m, at, diff, diff)));
    d.norm_err = std::abs(norm(m, v_hat) - norm(m, qdot));
    d.angle = angle_between(m, at, v_hat.components, qdot.components);
    d.angle_bound = comparison_angle(A, lambda, d.speed, d.D_xi);
    d.in_trap = A > 0.0 && std::isfinite(A) ? d.D_q < pi / (4.0 * std::sqrt(A)) : true;
    return d;
}

BoundReport check_contraction_bound(std::span<const TraceRecord> trace, double lambda, const AnalysisTolerances& tol,
                                    Clock clock) {
    require_trace(trace);
    require_gain(lambda);
    BoundReport report;
    report.check = "contraction";
    report.rate_required = 1.0 / lambda;

    const double t0 = clock_of(trace.front(), clock);
    const double d0 = trace.front().diagnostics.D_xi;
    BoundTracker contraction("contraction");
    BoundTracker monotone("monotone_decay");
    double prev = d0;
    for (const auto& r : trace) {
        const double s = clock_of(r, clock) - t0;
        const double allowed = std::exp(-s / lambda) * d0 * (1.0 + tol.relative_slack) + tol.integrator_tolerance;
        contraction.observe(r.t, r.diagnostics.D_xi, allowed, report.breach_events);
        monotone.observe(r.t, r.diagnostics.D_xi, prev * (1.0 + tol.relative_slack) + tol.integrator_tolerance,
                         report.breach_events);
        prev = r.diagnostics.D_xi;
    }
    report.bounds_satisfied = {contraction.result(), monotone.result()};

    // Least-squares slope of log D over the window above the numerical floor.
    const double floor = 100.0 * tol.integrator_tolerance;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    size_t n = 0;
    for (const auto& r : trace) {
        const double d = r.diagnostics.D_xi;
        if (!(d > floor)) continue;
        const double x = clock_of(r, clock) - t0, y = std::log(d);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    report.rate_fit = (n >= 2 && denom > 0.0) ? -(static_cast<double>(n) * sxy - sx * sy) / denom
                                              : std::numeric_limits<double>::quiet_NaN();
    report.values["fit_samples"] = static_cast<double>(n);
    report.values["D0"] = d0;
    report.values["D_end"] = trace.back().diagnostics.D_xi;
    if (n < 2) report.note = "too few samples above the numerical floor for a rate fit";
    return report;
}

BoundReport check_speed_bounds(std::span<const TraceRecord> trace, double lambda, double A, const AnalysisTolerances& tol) {
    require_trace(trace);
    require_gain(lambda);
    BoundReport report;
    report.check = "speed";
    report.rate_required = 1.0 / lambda;
    report.rate_fit = std::numeric_limits<double>::quiet_NaN();
    report.values["A"] = A;

    if (A > 0.0) {
        for (const auto& r : trace) {
            const double arg = std::sqrt(A) * lambda * r.diagnostics.speed;
            if (!(arg < pi)) {
                std::ostringstream os;
                os << "sqrt(A) * lambda * |qdot| = " << arg << " at t = " << r.t << " is not below pi";
                fail(ErrorKind::BoundInapplicable, os.str());
            }
        }
        BoundTracker norm_bound("norm_error");
        BoundTracker angle_bound("angle");
        for (const auto& r : trace) {
            const auto& d = r.diagnostics;
            const double allowed = d.D_xi * (1.0 + tol.relative_slack) + tol.integrator_tolerance;
            norm_bound.observe(r.t, lambda * d.norm_err, allowed, report.breach_events);
            const double alpha_a = comparison_angle(A, lambda, d.speed, d.D_xi);
            angle_bound.observe(r.t, d.angle, alpha_a + tol.angle_slack, report.breach_events);
        }
        report.bounds_satisfied = {norm_bound.result(), angle_bound.result()};
    } else {
        BoundTracker speed_bound("speed_error");
        for (const auto& r : trace) {
            const auto& d = r.diagnostics;
            speed_bound.observe(r.t, lambda * d.speed_err, d.D_xi * (1.0 + tol.relative_slack) + tol.integrator_tolerance,
                                report.breach_events);
        }
        report.bounds_satisfied = {speed_bound.result()};
    }
    return report;
}

BoundReport check_trap_region(std::span<const TraceRecord> trace, double lambda, double A, double speed) {
    if (trace.empty()) fail(ErrorKind::InvalidArgument, "empty trace");
    require_gain(lambda);
    if (!(A > 0.0)) fail(ErrorKind::InvalidArgument, "trap region needs A > 0");
    if (!(speed >= 0.0)) fail(ErrorKind::InvalidArgument, "speed must be non-negative");

    BoundReport report;
    report.check = "trap_region";
    report.rate_required = 1.0 / lambda;
    report.rate_fit = std::numeric_limits<double>::quiet_NaN();
    const double radius = pi / (4.0 * std::sqrt(A));
    const double threshold = speed > 0.0 ? pi / (4.0 * speed * std::sqrt(A)) : 0.0;
    const bool hypotheses = lambda > threshold && trace.front().diagnostics.D_q < radius;
    report.values["radius"] = radius;
    report.values["lambda_threshold"] = threshold;
    report.values["trailing_distance"] = lambda * speed;
    report.values["hypotheses_met"] = hypotheses ? 1.0 : 0.0;

    BoundTracker trap("trap_region");
    std::vector<BreachEvent> all;
    for (const auto& r : trace) trap.observe(r.t, r.diagnostics.D_q, radius, all);
    if (!all.empty()) report.breach_events.push_back(all.front());  // first breach only
    report.bounds_satisfied = {trap.result()};

    if (!hypotheses)
        report.note = "outside theorem hypotheses";
    else
        report.note = trap.result().satisfied ? "hypotheses met; trap held" : "hypotheses met; trap breached";
    if (!report.breach_events.empty()) report.values["first_breach_t"] = report.breach_events.front().t;
    return report;
}

ProbeResult contraction_probe(const ManifoldHandle& m, const Point& P, const Point& x, double lambda, double delta,
                              const ProbeOptions& options) {
    require_gain(lambda);
    if (!(delta > 0.0)) fail(ErrorKind::InvalidArgument, "delta must be positive");
    const double d = distance(m, P, x);
    const double radius = m->injectivity_radius(P);
    const double A = m->curvature_upper_bound();
    std::ostringstream why;
    if (!(d < radius)) why << "D(P, x) = " << d << " is not below the injectivity radius " << radius;
    else if (A > 0.0 && !(d < pi / (4.0 * std::sqrt(A)))) why << "D(P, x) = " << d << " is not below pi / (4 sqrt(A))";
    if (!why.str().empty()) fail(ErrorKind::OutsideContractionRegion, why.str());

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double h = options.step_fraction * lambda;
    const ObserverState at_x{x, lambda, 0.0};
    const Point x_next = observer_step_rk4(m, at_x, P, P, h).xi_hat;

    ProbeResult result;
    result.required = -2.0 / lambda;
    result.worst_rate = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < options.directions; ++k) {
        Vec raw(x.size());
        for (Eigen::Index i = 0; i < raw.size(); ++i) raw[i] = normal(rng);
        Tangent dir = m->normalize(Tangent(x, raw));
        const double len = norm(m, dir);
        if (!(len > 0.0)) continue;
        dir.components *= delta / len;
        const Point x_eps = exp_map(m, dir);

        const Point x_eps_next = observer_step_rk4(m, ObserverState{x_eps, lambda, 0.0}, P, P, h).xi_hat;
        const double d0 = distance(m, x, x_eps);
        const double d1 = distance(m, x_next, x_eps_next);
        const double rate = 2.0 * std::log(d1 / d0) / h;
        result.worst_rate = std::max(result.worst_rate, rate);
    }
    result.satisfied = result.worst_rate <= result.required + options.slack;
    return result;
}

std::string summary_table(const std::vector<BoundReport>& reports) {
    std::ostringstream os;
    os << std::left << std::setw(14) << "check" << std::setw(16) << "bound" << std::setw(8) << "ok" << std::setw(16)
       << "worst_margin" << std::setw(12) << "rate_fit" << "rate_required\n";
    for (const auto& r : reports) {
        for (const auto& b : r.bounds_satisfied) {
            os << std::left << std::setw(14) << r.check << std::setw(16) << b.name << std::setw(8)
               << (b.satisfied ? "yes" : "NO") << std::setw(16) << std::setprecision(6) << b.worst_margin
               << std::setw(12) << std::setprecision(6) << r.rate_fit << r.rate_required << "\n";
        }
        if (!r.note.empty()) os << "  note: " << r.note << "\n";
    }
    return os.str();
}

} // namespace geoobs
