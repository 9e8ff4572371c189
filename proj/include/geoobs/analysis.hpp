#pragma once

#include "geoobs/manifold.hpp"
#include "geoobs/trace.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace geoobs {

/// Numerical slack used by every bound check.
struct AnalysisTolerances {
    double relative_slack = 1e-3;        // trace bounds
    double integrator_tolerance = 1e-9;  // absolute floor; rate fits use D > 100× this
    double angle_slack = 1e-3;           // radians
    double probe_slack = 1e-2;           // contraction-rate probe, absolute
};

struct BoundCheck {
    std::string name;
    bool satisfied = true;
    double worst_margin = 0.0;  // min(allowed − observed); negative on breach
};

struct BreachEvent {
    double t = 0.0;
    std::string bound;
    double value = 0.0;
};

struct BoundReport {
    std::string check;
    double rate_fit = 0.0;
    double rate_required = 0.0;
    std::vector<BoundCheck> bounds_satisfied;
    std::vector<BreachEvent> breach_events;
    std::map<std::string, double> values;
    std::string note;

    [[nodiscard]] bool all_satisfied() const;
    [[nodiscard]] const BoundCheck* find(const std::string& name) const;
};

void to_json(nlohmann::json& j, const BoundReport& r);

/// Which clock the contraction bound is measured against.
enum class Clock { Physical, Maupertuis };

/// α_A: comparison angle from the law of sines on the constant-curvature-A
/// triangle. Non-positive A uses the flat comparison. Returns π when the
/// bound carries no information.
double comparison_angle(double A, double lambda, double speed, double d_xi);

/// Diagnostics for one sample. `qdot_true` is transported to the base of
/// `v_hat` when the two differ (noisy measurements).
ConvergenceDiagnostics compute_diagnostics(const ManifoldHandle& m, double A, double lambda, double t,
                                           const Point& q_true, const Tangent& qdot_true, const Tangent& v_hat,
                                           const Point& xi_hat, const Point& xi_ref);

/// D(ξ̂(t), ξ(t)) ≤ e^{−t/λ} D(ξ̂(0), ξ(0)) pointwise, plus an exponential
/// rate fit over the informative window.
BoundReport check_contraction_bound(std::span<const TraceRecord> trace, double lambda,
                                    const AnalysisTolerances& tol = {}, Clock clock = Clock::Physical);

/// Speed-error bounds. A ≤ 0: λ‖v̂ − q̇‖ ≤ D(ξ̂, ξ). A > 0: λ|‖v̂‖ − ‖q̇‖| ≤ D(ξ̂, ξ)
/// and α ≤ α_A.
BoundReport check_speed_bounds(std::span<const TraceRecord> trace, double lambda, double A,
                               const AnalysisTolerances& tol = {});

/// Trapping-region check for A > 0 with the gain condition λ > π/(4‖q̇‖√A).
BoundReport check_trap_region(std::span<const TraceRecord> trace, double lambda, double A, double speed);

struct ProbeOptions {
    int directions = 16;
    std::uint64_t seed = 0;
    double step_fraction = 1e-3;  // flow step as a fraction of λ
    double slack = 1e-2;
};

struct ProbeResult {
    double worst_rate = 0.0;  // max over directions of d/dt ‖δx‖² / ‖δx‖²
    double required = 0.0;    // −2/λ
    bool satisfied = false;   // worst_rate ≤ required + slack
};

/// Virtual-displacement probe of the pursuit flow towards a fixed point P.
ProbeResult contraction_probe(const ManifoldHandle& m, const Point& P, const Point& x, double lambda,
                              double delta = 1e-4, const ProbeOptions& options = {});

/// Fixed-width table of bound results for terminal output.
std::string summary_table(const std::vector<BoundReport>& reports);

} // namespace geoobs
