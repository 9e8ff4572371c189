#include "geoobs/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <locale>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

namespace geoobs {
namespace {

using nlohmann::json;
using std::numbers::pi;

Vec to_vec(const json& j, const std::string& field) {
    if (!j.is_array() || j.empty()) fail(ErrorKind::InvalidArgument, field + " must be a non-empty array of numbers");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) fail(ErrorKind::InvalidArgument, field + " must contain numbers only");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

ManifoldSpec parse_manifold(const json& j) {
    ManifoldSpec spec;
    const std::string kind = j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
    if (kind == "euclidean") {
        spec.builtin = BuiltinSpec::euclidean(j.is_object() ? j.value("n", 2) : 2);
    } else if (kind == "sphere2") {
        spec.builtin = BuiltinSpec::sphere2();
    } else if (kind == "hyperbolic2") {
        spec.builtin = BuiltinSpec::hyperbolic2();
    } else if (kind == "torus2") {
        BuiltinSpec t = BuiltinSpec::torus2();
        if (j.is_object() && j.contains("periods")) {
            const Vec p = to_vec(j.at("periods"), "manifold.periods");
            if (p.size() != 2) fail(ErrorKind::InvalidArgument, "manifold.periods needs two entries");
            t = BuiltinSpec::torus2(p[0], p[1]);
        }
        spec.builtin = t;
    } else if (kind == "chart") {
        spec.chart = j.at("name").get<std::string>();
    } else {
        fail(ErrorKind::InvalidArgument, "unknown manifold kind '" + kind + "'");
    }
    return spec;
}

ObserverInit parse_init(const json& j) {
    ObserverInit init;
    if (j.is_array()) {
        init.kind = ObserverInit::Kind::Explicit;
        init.point = Point(to_vec(j, "xi_hat0"));
        return init;
    }
    if (j.is_object() && j.contains("reference")) {
        init.kind = ObserverInit::Kind::Reference;
        init.lambda = j.at("reference").get<double>();
        return init;
    }
    if (!j.is_string()) fail(ErrorKind::InvalidArgument, "xi_hat0 must be a point, \"at_q0\" or \"reference\"");
    const std::string s = j.get<std::string>();
    if (s == "at_q0") {
        init.kind = ObserverInit::Kind::AtQ0;
    } else if (s == "reference") {
        init.kind = ObserverInit::Kind::Reference;
    } else if (s.rfind("reference(", 0) == 0 && s.back() == ')') {
        init.kind = ObserverInit::Kind::Reference;
        const std::string inner = s.substr(10, s.size() - 11);
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), value);
        if (ec != std::errc() || ptr != inner.data() + inner.size())
            fail(ErrorKind::InvalidArgument, "cannot read the gain in '" + s + "'");
        init.lambda = value;
    } else {
        fail(ErrorKind::InvalidArgument, "unknown xi_hat0 marker '" + s + "'");
    }
    return init;
}

MechanicalSystem make_system(const MechanicalConfig& mc, const ManifoldHandle& m) {
    MechanicalSystem sys;
    sys.manifold = m;
    const int n = m->coord_dim();
    if (mc.potential == "harmonic") {
        const double k = mc.stiffness;
        sys.potential = [k](const Point& q) { return 0.5 * k * q.coords.squaredNorm(); };
        sys.potential_gradient = [k](const Point& q) -> Vec { return k * q.coords; };
    } else if (mc.potential == "linear") {
        if (mc.force.size() != n) fail(ErrorKind::InvalidArgument, "mechanical.force must match the chart dimension");
        const Vec f = mc.force;
        sys.potential = [f](const Point& q) { return -f.dot(q.coords); };
        sys.potential_gradient = [f](const Point&) -> Vec { return -f; };
    } else if (mc.potential == "none") {
        sys.potential = [](const Point&) { return 0.0; };
        sys.potential_gradient = [n](const Point&) -> Vec { return Vec::Zero(n); };
    } else {
        fail(ErrorKind::InvalidArgument, "unknown potential '" + mc.potential + "'");
    }
    return sys;
}

class NoiseSource {
public:
    NoiseSource(const NoiseConfig& cfg, double sigma) : cfg_(cfg), sigma_(sigma), rng_(cfg.seed) {}

    Vec draw(Eigen::Index n) {
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (cfg_.distribution == NoiseConfig::Distribution::Gaussian)
                v[i] = sigma_ * normal_(rng_);
            else
                v[i] = sigma_ * (2.0 * unit_(rng_) - 1.0);
        }
        return v;
    }

private:
    NoiseConfig cfg_;
    double sigma_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

std::string format_double(double x) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << x;
    return os.str();
}

double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(ErrorKind::InvalidArgument, "bad number '" + s + "' in trace");
    return value;
}

bool is_breach(const GeometryError& e) {
    return e.kind() == ErrorKind::InjectivityViolation || e.kind() == ErrorKind::LogDivergence;
}

std::vector<BoundReport> analyse(const RunResult& r, Mode mode, bool noisy) {
    const Clock clock = mode == Mode::Mechanical ? Clock::Maupertuis : Clock::Physical;
    auto out = analyse_trace(r.trace, r.lambda, r.curvature_bound, clock);
    if (noisy)
        for (auto& rep : out)
            rep.note += std::string(rep.note.empty() ? "" : "; ") + "noisy run, bounds assume exact measurements";
    return out;
}

} // namespace

std::vector<BoundReport> analyse_trace(std::span<const TraceRecord> trace, double lambda, double A, Clock clock) {
    std::vector<BoundReport> out;
    if (trace.size() < 10) return out;
    auto guarded = [&](const std::string& name, auto&& fn) {
        try {
            out.push_back(fn());
        } catch (const GeometryError& e) {
            BoundReport skipped;
            skipped.check = name;
            skipped.rate_fit = std::numeric_limits<double>::quiet_NaN();
            skipped.rate_required = 1.0 / lambda;
            skipped.note = e.what();
            out.push_back(std::move(skipped));
        }
    };
    guarded("contraction", [&] { return check_contraction_bound(trace, lambda, {}, clock); });
    if (std::isfinite(A)) guarded("speed", [&] { return check_speed_bounds(trace, lambda, A); });
    if (std::isfinite(A) && A > 0.0)
        guarded("trap_region", [&] { return check_trap_region(trace, lambda, A, trace.front().diagnostics.speed); });
    return out;
}

void rebind_diagnostics(std::vector<TraceRecord>& trace, double lambda, double A) {
    for (auto& r : trace) {
        auto& d = r.diagnostics;
        d.angle_bound = comparison_angle(A, lambda, d.speed, d.D_xi);
        d.in_trap = A > 0.0 && std::isfinite(A) ? d.D_q < pi / (4.0 * std::sqrt(A)) : true;
    }
}

ManifoldHandle make_manifold(const ManifoldSpec& spec) {
    if (spec.builtin) return make_builtin(*spec.builtin);
    return make_named_chart(spec.chart);
}

ScenarioConfig parse_scenario(const json& j) {
    if (!j.is_object()) fail(ErrorKind::InvalidArgument, "scenario must be a JSON object");
    ScenarioConfig cfg;
    try {
        cfg.name = j.value("name", cfg.name);
        cfg.manifold = parse_manifold(j.at("manifold"));

        const std::string mode = j.value("mode", std::string("geodesic"));
        if (mode == "geodesic") cfg.mode = Mode::Geodesic;
        else if (mode == "stationary") cfg.mode = Mode::Stationary;
        else if (mode == "mechanical") cfg.mode = Mode::Mechanical;
        else fail(ErrorKind::InvalidArgument, "unknown mode '" + mode + "'");

        if (j.contains("mechanical")) {
            const json& mj = j.at("mechanical");
            cfg.mechanical.potential = mj.value("potential", cfg.mechanical.potential);
            cfg.mechanical.stiffness = mj.value("stiffness", cfg.mechanical.stiffness);
            if (mj.contains("force")) cfg.mechanical.force = to_vec(mj.at("force"), "mechanical.force");
            if (mj.contains("energy")) cfg.mechanical.energy = mj.at("energy").get<double>();
        }

        cfg.q0 = Point(to_vec(j.at("q0"), "q0"));
        cfg.qdot0 = j.contains("qdot0") ? to_vec(j.at("qdot0"), "qdot0") : Vec::Zero(cfg.q0.size());
        if (j.contains("xi_hat0")) cfg.xi_hat0 = parse_init(j.at("xi_hat0"));
        cfg.lambda = j.at("lambda").get<double>();
        cfg.dt = j.value("dt", cfg.dt);
        cfg.t_end = j.value("t_end", cfg.t_end);

        if (j.contains("noise")) {
            const json& nj = j.at("noise");
            cfg.noise.fraction = nj.value("fraction", 0.0);
            const std::string dist = nj.value("distribution", std::string("gaussian"));
            if (dist == "gaussian") cfg.noise.distribution = NoiseConfig::Distribution::Gaussian;
            else if (dist == "uniform") cfg.noise.distribution = NoiseConfig::Distribution::Uniform;
            else fail(ErrorKind::InvalidArgument, "unknown noise distribution '" + dist + "'");
            cfg.noise.seed = nj.value("seed", std::uint64_t{0});
        }

        if (j.contains("outputs")) {
            cfg.outputs = {false, false, false};
            for (const auto& o : j.at("outputs")) {
                const std::string s = o.get<std::string>();
                if (s == "trace_csv") cfg.outputs.trace_csv = true;
                else if (s == "report_json") cfg.outputs.report_json = true;
                else if (s == "plot_data") cfg.outputs.plot_data = true;
                else fail(ErrorKind::InvalidArgument, "unknown output '" + s + "'");
            }
        }

        if (j.contains("sweep")) {
            SweepConfig sw;
            sw.parameter = j.at("sweep").value("parameter", sw.parameter);
            sw.values = [&] {
                const Vec v = to_vec(j.at("sweep").at("values"), "sweep.values");
                return std::vector<double>(v.data(), v.data() + v.size());
            }();
            cfg.sweep = sw;
        }

        const std::string integ = j.value("integrator", std::string("rk4"));
        if (integ == "rk4") cfg.integrator = Integrator::Rk4;
        else if (integ == "euler") cfg.integrator = Integrator::Euler;
        else fail(ErrorKind::InvalidArgument, "unknown integrator '" + integ + "'");

        cfg.measurement_every = j.value("measurement_every", 1);
        cfg.record_every = j.value("record_every", 1);
        cfg.converged_threshold = j.value("converged_threshold", cfg.converged_threshold);
        cfg.allow_large_dt = j.value("allow_large_dt", false);
        if (j.contains("handoff_k")) cfg.handoff_k = j.at("handoff_k").get<double>();
    } catch (const json::exception& e) {
        fail(ErrorKind::InvalidArgument, std::string("scenario: ") + e.what());
    }
    return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::InvalidArgument, "cannot open scenario file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
    }
    return parse_scenario(j);
}

std::vector<std::string> validate(const ScenarioConfig& cfg) {
    std::vector<std::string> warnings;
    auto bad = [](const std::string& what) { fail(ErrorKind::InvalidArgument, what); };
    if (!(cfg.lambda > 0.0) || !std::isfinite(cfg.lambda)) bad("lambda must be positive");
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) bad("dt must be positive");
    if (!(cfg.t_end > 0.0) || !std::isfinite(cfg.t_end)) bad("t_end must be positive");
    if (cfg.t_end < cfg.dt) bad("t_end must cover at least one step");
    if (!(cfg.noise.fraction >= 0.0 && cfg.noise.fraction <= 1.0)) bad("noise.fraction must lie in [0, 1]");
    if (cfg.measurement_every < 1) bad("measurement_every must be at least 1");
    if (cfg.record_every < 1) bad("record_every must be at least 1");
    if (!(cfg.converged_threshold > 0.0 && cfg.converged_threshold < 1.0)) bad("converged_threshold must lie in (0, 1)");
    if (cfg.qdot0.size() != cfg.q0.size()) bad("qdot0 and q0 must have the same length");
    if (cfg.xi_hat0.kind == ObserverInit::Kind::Reference && cfg.xi_hat0.lambda && !(*cfg.xi_hat0.lambda >= 0.0))
        bad("reference gain must be non-negative");
    if (cfg.sweep) {
        if (cfg.sweep->parameter != "lambda") bad("only lambda sweeps are supported");
        if (cfg.sweep->values.empty()) bad("sweep needs values");
        for (double v : cfg.sweep->values)
            if (!(v > 0.0)) bad("sweep values must be positive");
    }
    if (!(cfg.dt < cfg.lambda / 10.0)) {
        std::ostringstream os;
        os << "dt = " << cfg.dt << " is not below lambda / 10 = " << cfg.lambda / 10.0;
        if (!cfg.allow_large_dt) bad(os.str() + " (set allow_large_dt to override)");
        warnings.push_back(os.str());
    }
    if (cfg.handoff_k && !(*cfg.handoff_k > 0.0)) bad("handoff_k must be positive");
    if (cfg.handoff_k && cfg.mode != Mode::Mechanical) bad("handoff_k applies to mechanical runs only");
    if (cfg.measurement_every > 1) warnings.push_back("zero-order hold between measurements is experimental");
    return warnings;
}

RunResult run_scenario(const ScenarioConfig& cfg) {
    RunResult res;
    res.name = cfg.name;
    res.lambda = cfg.lambda;
    res.warnings = validate(cfg);

    const ManifoldHandle m = make_manifold(cfg.manifold);
    m->require_in_domain(cfg.q0);
    Tangent state = m->normalize(Tangent(m->normalize(cfg.q0), cfg.qdot0));
    if (cfg.mode == Mode::Stationary) state.components.setZero();

    std::optional<MechanicalSystem> sys;
    std::optional<JacobiManifold> jm;
    ManifoldHandle om = m;
    if (cfg.mode == Mode::Mechanical) {
        sys = make_system(cfg.mechanical, m);
        const double u0 = sys->potential(state.base);
        if (cfg.mechanical.energy) {
            sys->energy = *cfg.mechanical.energy;
            const double speed = norm(m, state);
            const double kinetic = sys->energy - u0;
            if (!(kinetic > 0.0)) fail(ErrorKind::InadmissibleRegion, "energy must exceed U(q0)");
            if (!(speed > 0.0)) fail(ErrorKind::InvalidArgument, "qdot0 must be non-zero to fix the energy");
            state.components *= std::sqrt(2.0 * kinetic) / speed;
        } else {
            sys->energy = total_energy(*sys, state);
        }
        jm = jacobi_wrap(*sys);
        om = jm->manifold();
    }
    res.curvature_bound = om->curvature_upper_bound();
    const double A = res.curvature_bound;
    const double lambda = cfg.lambda;

    const long steps = std::lround(cfg.t_end / cfg.dt);
    const double dt = cfg.dt;

    std::vector<Tangent> truth;
    truth.reserve(static_cast<size_t>(steps) + 1);
    truth.push_back(state);
    for (long k = 0; k < steps; ++k) {
        if (cfg.mode == Mode::Geodesic) state = geodesic_step(m, state, dt);
        else if (cfg.mode == Mode::Mechanical) state = true_dynamics_step(*sys, state, dt);
        truth.push_back(state);
    }

    std::vector<double> tau(truth.size(), 0.0);
    if (jm) {
        MaupertuisClock clock;
        for (size_t k = 1; k < truth.size(); ++k) {
            clock.advance(dt, jm->clock_rate(truth[k - 1].base), jm->clock_rate(truth[k].base));
            tau[k] = clock.tau();
        }
    } else {
        for (size_t k = 0; k < truth.size(); ++k) tau[k] = static_cast<double>(k) * dt;
    }

    double scale = 0.0;
    for (const auto& s : truth) scale = std::max(scale, s.base.coords.lpNorm<Eigen::Infinity>());
    if (!(scale > 0.0)) scale = 1.0;
    const double sigma = cfg.noise.fraction * scale;
    NoiseSource noise(cfg.noise, sigma);
    std::vector<Point> meas(truth.size());
    std::vector<double> noise_mag(truth.size(), 0.0);
    for (size_t k = 0; k < truth.size(); ++k) {
        if (k % static_cast<size_t>(cfg.measurement_every) != 0) {
            meas[k] = meas[k - 1];
            noise_mag[k] = noise_mag[k - 1];
            continue;
        }
        const Point& q = truth[k].base;
        if (sigma == 0.0) {
            meas[k] = q;
            continue;
        }
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            const Vec n = noise.draw(q.size());
            Point p = m->normalize(Point(q.coords + n));
            if (om->in_domain(p)) {
                meas[k] = std::move(p);
                noise_mag[k] = n.norm();
                ok = true;
            }
        }
        if (!ok) fail(ErrorKind::Domain, "noisy measurement keeps leaving the chart domain");
    }

    auto observer_velocity = [&](const Tangent& s) { return jm ? jm->to_maupertuis(s) : s; };
    auto physical = [&](const Tangent& v) { return jm ? jm->to_physical(v) : v; };

    Point xi0;
    switch (cfg.xi_hat0.kind) {
        case ObserverInit::Kind::Explicit: xi0 = cfg.xi_hat0.point; break;
        case ObserverInit::Kind::AtQ0: xi0 = truth.front().base; break;
        case ObserverInit::Kind::Reference:
            xi0 = reference_state(om, truth.front().base, observer_velocity(truth.front()),
                                  cfg.xi_hat0.lambda.value_or(lambda));
            break;
    }
    ObserverState obs = make_observer_state(om, xi0, lambda);

    // Mid-step measurement for RK4: the geodesic midpoint where a closed form
    // exists (exact for geodesic truth), otherwise cubic interpolation of the
    // surrounding samples, one-sided at the ends of the run.
    auto mid_measurement = [&](size_t k) -> Point {
        const size_t n = meas.size();
        if (om->closed_form() || cfg.measurement_every > 1 || n < 4) return measurement_midpoint(om, meas[k], meas[k + 1]);
        const size_t first = std::min(k == 0 ? 0 : k - 1, n - 4);
        const double x = static_cast<double>(k - first) + 0.5;
        return cubic_sample(om, meas[first], meas[first + 1], meas[first + 2], meas[first + 3], x);
    };

    auto breach = [&](double t, const GeometryError& e) {
        res.diverged = true;
        res.breach = BreachEvent{t, to_string(e.kind()), e.distance.value_or(std::numeric_limits<double>::quiet_NaN())};
        res.termination = e.what();
    };

    res.trace.reserve(truth.size() / static_cast<size_t>(cfg.record_every) + 1);
    for (long k = 0; k <= steps; ++k) {
        const auto ku = static_cast<size_t>(k);
        const double t = static_cast<double>(k) * dt;
        if (k % cfg.record_every == 0 || k == steps) {
            try {
                const Tangent& s = truth[ku];
                const Tangent qd = observer_velocity(s);
                const Point xi_ref = reference_state(om, s.base, qd, lambda);
                const VelocityEstimate ve = velocity_estimate(om, obs, meas[ku]);
                ConvergenceDiagnostics d =
                    compute_diagnostics(om, A, lambda, t, s.base, qd, ve.v_hat, obs.xi_hat, xi_ref);
                d.tau = tau[ku];
                d.noise = noise_mag[ku];
                res.trace.push_back({t, s.base, s, meas[ku], obs.xi_hat, physical(ve.v_hat), xi_ref, d});
            } catch (const GeometryError& e) {
                if (!is_breach(e)) throw;
                breach(t, e);
                break;
            }
        }
        if (jm && cfg.handoff_k && !res.handoff && tau[ku] >= *cfg.handoff_k * lambda) {
            const VelocityEstimate ve = velocity_estimate(om, obs, meas[ku]);
            res.handoff = Handoff{t, tau[ku], physical(ve.v_hat), truth[ku]};
        }
        if (k == steps) break;
        try {
            if (cfg.integrator == Integrator::Rk4) {
                const Point q_mid = mid_measurement(ku);
                obs = jm ? jacobi_observer_step(*jm, obs, meas[ku], q_mid, meas[ku + 1], dt)
                         : observer_step_rk4(om, obs, meas[ku], q_mid, meas[ku + 1], dt);
            } else {
                const double h = jm ? dt * jm->clock_rate(meas[ku]) : dt;
                obs = observer_step(om, obs, meas[ku], h);
                obs.t = t + dt;
            }
        } catch (const GeometryError& e) {
            if (!is_breach(e)) throw;
            breach(t + dt, e);
            break;
        }
    }

    if (res.termination.empty()) res.termination = "completed";
    if (!res.trace.empty()) {
        res.D0 = res.trace.front().diagnostics.D_xi;
        res.D_end = res.trace.back().diagnostics.D_xi;
    }
    // The absolute floor admits runs that start on the reference point.
    res.converged = !res.diverged && !res.trace.empty() && res.D_end <= cfg.converged_threshold * res.D0 + 1e-12;
    res.reports = analyse(res, cfg.mode, sigma > 0.0);
    return res;
}

std::vector<SweepRow> run_sweep(const ScenarioConfig& cfg, unsigned threads) {
    if (!cfg.sweep) fail(ErrorKind::InvalidArgument, "scenario has no sweep section");
    (void)validate(cfg);
    const auto& values = cfg.sweep->values;
    std::vector<SweepRow> rows(values.size());
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(values.size()));

    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (size_t i = next++; i < values.size(); i = next++) {
            ScenarioConfig run = cfg;
            run.sweep.reset();
            run.lambda = values[i];
            run.noise.fraction = 0.0;
            run.noise.seed = cfg.noise.seed + i;
            run.name = cfg.name + "_" + std::to_string(i);
            SweepRow& row = rows[i];
            row.value = values[i];
            try {
                const RunResult r = run_scenario(run);
                row.converged = r.converged;
                row.diverged = r.diverged;
                row.D0 = r.D0;
                row.D_end = r.D_end;
                row.termination = r.termination;
            } catch (const std::exception& e) {
                row.termination = std::string("error: ") + e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return rows;
}

void write_sweep_csv(std::ostream& os, const std::string& parameter, const std::vector<SweepRow>& rows) {
    os << parameter << ",classification,D0,D_end,termination\n";
    for (const auto& r : rows) {
        std::string term = r.termination;
        std::replace(term.begin(), term.end(), ',', ';');
        std::replace(term.begin(), term.end(), '\n', ' ');
        os << format_double(r.value) << ',' << (r.converged ? "converged" : "not_converged") << ','
           << format_double(r.D0) << ',' << format_double(r.D_end) << ',' << term << '\n';
    }
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace) {
    if (trace.empty()) {
        os << "t\n";
        return;
    }
    const auto& f = trace.front();
    auto header = [&](const std::string& name, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) os << ',' << name << '_' << i;
    };
    os << 't';
    header("q_true", f.q_true.size());
    header("qdot_true", f.qdot_true.size());
    header("q_meas", f.q_meas.size());
    header("xi_hat", f.xi_hat.size());
    header("v_hat", f.v_hat.size());
    header("xi_ref", f.xi_ref.size());
    os << ",D_xi,D_q,speed_err,norm_err,angle,angle_bound,in_trap,speed,tau,noise\n";

    for (const auto& r : trace) {
        os << format_double(r.t);
        auto put = [&](const Vec& v) {
            for (Eigen::Index i = 0; i < v.size(); ++i) os << ',' << format_double(v[i]);
        };
        put(r.q_true.coords);
        put(r.qdot_true.components);
        put(r.q_meas.coords);
        put(r.xi_hat.coords);
        put(r.v_hat.components);
        put(r.xi_ref.coords);
        const auto& d = r.diagnostics;
        for (double x : {d.D_xi, d.D_q, d.speed_err, d.norm_err, d.angle, d.angle_bound}) os << ',' << format_double(x);
        os << ',' << (d.in_trap ? 1 : 0);
        for (double x : {d.speed, d.tau, d.noise}) os << ',' << format_double(x);
        os << '\n';
    }
}

std::vector<TraceRecord> read_trace_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) fail(ErrorKind::InvalidArgument, "trace is empty");
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cell;
        std::istringstream ss(s);
        while (std::getline(ss, cell, ',')) {
            if (!cell.empty() && cell.back() == '\r') cell.pop_back();
            out.push_back(cell);
        }
        return out;
    };
    const auto names = split(line);
    std::map<std::string, size_t> column;
    for (size_t i = 0; i < names.size(); ++i) column[names[i]] = i;
    auto col = [&](const std::string& name) {
        const auto it = column.find(name);
        if (it == column.end()) fail(ErrorKind::InvalidArgument, "trace lacks column '" + name + "'");
        return it->second;
    };
    auto width = [&](const std::string& prefix) {
        Eigen::Index n = 0;
        while (column.count(prefix + "_" + std::to_string(n))) ++n;
        if (n == 0) fail(ErrorKind::InvalidArgument, "trace lacks columns '" + prefix + "_*'");
        return n;
    };
    const Eigen::Index nq = width("q_true");
    const Eigen::Index nv = width("qdot_true");

    std::vector<TraceRecord> trace;
    size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != names.size()) {
            std::ostringstream os;
            os << "trace row " << row << " has " << cells.size() << " cells, expected " << names.size();
            fail(ErrorKind::InvalidArgument, os.str());
        }
        auto num = [&](const std::string& name) { return parse_double(cells[col(name)]); };
        auto vec = [&](const std::string& prefix, Eigen::Index n) {
            Vec v(n);
            for (Eigen::Index i = 0; i < n; ++i) v[i] = num(prefix + "_" + std::to_string(i));
            return v;
        };
        TraceRecord r;
        r.t = num("t");
        r.q_true = Point(vec("q_true", nq));
        r.qdot_true = Tangent(r.q_true, vec("qdot_true", nv));
        r.q_meas = Point(vec("q_meas", nq));
        r.xi_hat = Point(vec("xi_hat", nq));
        r.v_hat = Tangent(r.q_meas, vec("v_hat", nv));
        r.xi_ref = Point(vec("xi_ref", nq));
        auto& d = r.diagnostics;
        d.t = r.t;
        d.D_xi = num("D_xi");
        d.D_q = num("D_q");
        d.speed_err = num("speed_err");
        d.norm_err = num("norm_err");
        d.angle = num("angle");
        d.angle_bound = num("angle_bound");
        d.in_trap = num("in_trap") != 0.0;
        d.speed = num("speed");
        d.tau = num("tau");
        d.noise = num("noise");
        trace.push_back(std::move(r));
    }
    return trace;
}

nlohmann::json run_report_json(const RunResult& result) {
    json j;
    j["scenario"] = result.name;
    j["lambda"] = result.lambda;
    j["curvature_bound"] = std::isfinite(result.curvature_bound) ? json(result.curvature_bound) : json(nullptr);
    j["samples"] = result.trace.size();
    j["diverged"] = result.diverged;
    j["converged"] = result.converged;
    j["termination"] = result.termination;
    j["D0"] = result.D0;
    j["D_end"] = result.D_end;
    if (result.breach) {
        const auto& b = *result.breach;
        j["breach"] = {{"t", b.t}, {"bound", b.bound}, {"value", std::isfinite(b.value) ? json(b.value) : json(nullptr)}};
    } else {
        j["breach"] = nullptr;
    }
    if (result.handoff) {
        const auto& h = *result.handoff;
        auto arr = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
        j["handoff"] = {{"t", h.t}, {"tau", h.tau}, {"v_hat", arr(h.v_hat.components)}, {"qdot_true", arr(h.qdot_true.components)}};
    }
    j["reports"] = json::array();
    for (const auto& r : result.reports) j["reports"].push_back(r);
    j["warnings"] = result.warnings;
    return j;
}

std::vector<std::filesystem::path> write_outputs(const RunResult& result, const OutputConfig& outputs,
                                                 const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    auto open = [&](const std::string& suffix) {
        const auto path = dir / (result.name + suffix);
        std::ofstream out(path);
        if (!out) fail(ErrorKind::InvalidArgument, "cannot write " + path.string());
        written.push_back(path);
        return out;
    };
    if (outputs.trace_csv) {
        auto out = open("_trace.csv");
        write_trace_csv(out, result.trace);
    }
    if (outputs.report_json) {
        auto out = open("_report.json");
        out << run_report_json(result).dump(2) << '\n';
    }
    if (outputs.plot_data) {
        const std::pair<const char*, double ConvergenceDiagnostics::*> series[] = {
            {"D", &ConvergenceDiagnostics::D_xi},
            {"speed_err", &ConvergenceDiagnostics::speed_err},
            {"angle", &ConvergenceDiagnostics::angle},
        };
        for (const auto& [label, field] : series) {
            auto out = open(std::string("_") + label + ".csv");
            out << "t," << label << '\n';
            for (const auto& r : result.trace) out << format_double(r.t) << ',' << format_double(r.diagnostics.*field) << '\n';
        }
    }
    return written;
}

ScenarioConfig sphere_preset_config(double noise_fraction, std::uint64_t seed) {
    ScenarioConfig cfg;
    cfg.name = noise_fraction > 0.0 ? "sphere_noisy" : "sphere_clean";
    cfg.manifold.builtin = BuiltinSpec::sphere2();
    cfg.mode = Mode::Geodesic;
    cfg.q0 = Point{1.0, 0.0, 0.0};
    cfg.qdot0 = Vec::Unit(3, 1);
    cfg.xi_hat0.kind = ObserverInit::Kind::Explicit;
    cfg.xi_hat0.point = Point{0.0, 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
    cfg.lambda = pi / 4.0;
    cfg.dt = 1e-3;
    cfg.t_end = 20.0;
    cfg.noise.fraction = noise_fraction;
    cfg.noise.distribution = NoiseConfig::Distribution::Gaussian;
    cfg.noise.seed = seed;
    return cfg;
}

} // namespace geoobs
