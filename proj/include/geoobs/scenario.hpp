#pragma once

#include "geoobs/analysis.hpp"
#include "geoobs/builtin.hpp"
#include "geoobs/mechanical.hpp"
#include "geoobs/trace.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace geoobs {

/// Built-in manifold or a named chart manifold.
struct ManifoldSpec {
    std::optional<BuiltinSpec> builtin;
    std::string chart;  // used when `builtin` is empty
};

ManifoldHandle make_manifold(const ManifoldSpec& spec);

enum class Mode { Geodesic, Stationary, Mechanical };

struct MechanicalConfig {
    std::string potential = "harmonic";  // harmonic | linear | none
    double stiffness = 1.0;              // harmonic: U = ½ k |q|²
    Vec force;                           // linear: U = −force · q
    /// Total energy. When set, q̇(0) is rescaled to match it; otherwise it is
    /// taken from the initial state.
    std::optional<double> energy;
};

struct ObserverInit {
    enum class Kind { Explicit, AtQ0, Reference };
    Kind kind = Kind::AtQ0;
    Point point;                          // Explicit
    std::optional<double> lambda;         // Reference; defaults to the run's gain
};

struct NoiseConfig {
    enum class Distribution { Gaussian, Uniform };
    /// Amplitude as a fraction of the largest coordinate magnitude of the true
    /// trajectory. Gaussian noise uses it as the standard deviation, uniform
    /// noise as the half-width.
    double fraction = 0.0;
    Distribution distribution = Distribution::Gaussian;
    std::uint64_t seed = 0;
};

enum class Integrator { Rk4, Euler };

struct SweepConfig {
    std::string parameter = "lambda";
    std::vector<double> values;
};

struct OutputConfig {
    bool trace_csv = true;
    bool report_json = true;
    bool plot_data = true;
};

struct ScenarioConfig {
    std::string name = "scenario";
    ManifoldSpec manifold;
    Mode mode = Mode::Geodesic;
    MechanicalConfig mechanical;
    Point q0;
    Vec qdot0;
    ObserverInit xi_hat0;
    double lambda = 1.0;
    double dt = 1e-3;
    double t_end = 20.0;
    NoiseConfig noise;
    OutputConfig outputs;
    std::optional<SweepConfig> sweep;
    Integrator integrator = Integrator::Rk4;
    int measurement_every = 1;  // >1: zero-order hold between samples (experimental)
    int record_every = 1;
    double converged_threshold = 0.01;
    bool allow_large_dt = false;
    /// Mechanical runs: emit v̂ once Maupertuis time reaches handoff_k · λ.
    std::optional<double> handoff_k;
};

ScenarioConfig parse_scenario(const nlohmann::json& j);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Checks the invariants. Returns warnings for tolerated deviations (a large
/// step with `allow_large_dt`, zero-order hold).
std::vector<std::string> validate(const ScenarioConfig& cfg);

/// Velocity estimate handed to a downstream full-state observer.
struct Handoff {
    double t = 0.0;
    double tau = 0.0;
    Tangent v_hat;  // physical units, dq/dt
    Tangent qdot_true;
};

struct RunResult {
    std::string name;
    double lambda = 0.0;
    double curvature_bound = 0.0;
    std::vector<TraceRecord> trace;
    bool diverged = false;
    std::optional<BreachEvent> breach;
    std::string termination;
    double D0 = 0.0;
    double D_end = 0.0;
    bool converged = false;
    std::vector<BoundReport> reports;
    std::vector<std::string> warnings;
    std::optional<Handoff> handoff;
};

/// Truth, noisy measurement, observer and diagnostics on a fixed dt grid.
/// Deterministic given the config. An injectivity breach ends the run early.
/// Mechanical runs observe in the Jacobi metric: diagnostics use that metric
/// and Maupertuis velocities, while the recorded q̇ and v̂ are dq/dt.
RunResult run_scenario(const ScenarioConfig& cfg);

/// Contraction, speed and (A > 0) trap checks on a recorded trace.
std::vector<BoundReport> analyse_trace(std::span<const TraceRecord> trace, double lambda, double A,
                                       Clock clock = Clock::Physical);

/// Recomputes the gain- and curvature-dependent diagnostics (angle bound,
/// trap membership) of a saved trace for new λ and A.
void rebind_diagnostics(std::vector<TraceRecord>& trace, double lambda, double A);

struct SweepRow {
    double value = 0.0;
    bool converged = false;
    bool diverged = false;
    double D0 = 0.0;
    double D_end = 0.0;
    std::string termination;
};

/// Noise-free runs over `cfg.sweep`, one per worker thread; run i uses seed
/// `cfg.noise.seed + i`.
std::vector<SweepRow> run_sweep(const ScenarioConfig& cfg, unsigned threads = 0);

void write_sweep_csv(std::ostream& os, const std::string& parameter, const std::vector<SweepRow>& rows);
void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace_csv(std::istream& is);
nlohmann::json run_report_json(const RunResult& result);

/// Writes the configured outputs into `dir` and returns the paths written.
std::vector<std::filesystem::path> write_outputs(const RunResult& result, const OutputConfig& outputs,
                                                 const std::filesystem::path& dir);

/// The sphere experiment: q(0) = (1, 0, 0), q̇(0) = (0, 1, 0),
/// ξ̂(0) = (0, 1, 1)/√2, λ = π/4, 20% Gaussian noise, dt = 1e−3, t_end = 20.
ScenarioConfig sphere_preset_config(double noise_fraction = 0.2, std::uint64_t seed = 1);

} // namespace geoobs
