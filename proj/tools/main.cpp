#include "geoobs/scenario.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace geoobs;

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kDiverged = 2;

fs::path default_out_dir() {
    if (const char* env = std::getenv("GEOOBS_OUT_DIR"); env && *env) return env;
    return "out";
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

int report_run(const RunResult& result, const ScenarioConfig& cfg, const fs::path& out_dir, bool quiet) {
    const auto written = write_outputs(result, cfg.outputs, out_dir);
    if (!quiet) {
        std::cout << result.name << ": " << result.termination << ", D0 = " << result.D0
                  << ", D_end = " << result.D_end << (result.converged ? " (converged)" : " (not converged)") << '\n';
        if (result.handoff)
            std::cout << "handoff at t = " << result.handoff->t << " (tau = " << result.handoff->tau << ")\n";
        std::cout << summary_table(result.reports);
        for (const auto& p : written) std::cout << "wrote " << p.string() << '\n';
    }
    return result.diverged ? kDiverged : kOk;
}

int cmd_run(const fs::path& scenario, const fs::path& out_dir, std::optional<std::uint64_t> seed,
            std::optional<double> dt, bool quiet) {
    ScenarioConfig cfg = load_scenario(scenario);
    if (seed) cfg.noise.seed = *seed;
    if (dt) cfg.dt = *dt;
    print_warnings(validate(cfg));
    return report_run(run_scenario(cfg), cfg, out_dir, quiet);
}

int cmd_sweep(const fs::path& scenario, const std::string& param, const std::vector<double>& values,
              const fs::path& out_dir, unsigned threads, bool quiet) {
    if (param != "lambda") throw std::invalid_argument("only 'lambda' can be swept, got '" + param + "'");
    ScenarioConfig cfg = load_scenario(scenario);
    if (!values.empty()) cfg.sweep = SweepConfig{param, values};
    if (!cfg.sweep || cfg.sweep->values.empty()) throw std::invalid_argument("no sweep values given");
    for (double v : cfg.sweep->values) {
        ScenarioConfig probe = cfg;
        probe.lambda = v;
        print_warnings(validate(probe));
    }
    const auto rows = run_sweep(cfg, threads);

    fs::create_directories(out_dir);
    const fs::path path = out_dir / (cfg.name + "_sweep.csv");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_sweep_csv(out, param, rows);
    if (!quiet) {
        write_sweep_csv(std::cout, param, rows);
        std::cout << "wrote " << path.string() << '\n';
    }
    bool any_diverged = false;
    for (const auto& r : rows) {
        if (r.termination.rfind("error", 0) == 0) throw std::runtime_error("sweep run failed: " + r.termination);
        any_diverged = any_diverged || r.diverged;
    }
    return any_diverged ? kDiverged : kOk;
}

int cmd_check(const fs::path& trace_path, double lambda, double A, const std::string& clock_name) {
    if (!(lambda > 0.0)) throw std::invalid_argument("--lambda must be positive");
    std::ifstream in(trace_path);
    if (!in) throw std::runtime_error("cannot read " + trace_path.string());
    auto trace = read_trace_csv(in);
    rebind_diagnostics(trace, lambda, A);
    const Clock clock = clock_name == "maupertuis" ? Clock::Maupertuis : Clock::Physical;
    const auto reports = analyse_trace(trace, lambda, A, clock);

    std::cout << summary_table(reports);
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : reports) j.push_back(r);
    std::cout << j.dump(2) << '\n';
    for (const auto& r : reports)
        if (!r.all_satisfied()) return kDiverged;
    return kOk;
}

int cmd_sphere_preset(const fs::path& out_dir, std::uint64_t seed, double noise, bool quiet) {
    int status = kOk;
    for (double fraction : {noise, 0.0}) {
        const ScenarioConfig cfg = sphere_preset_config(fraction, seed);
        print_warnings(validate(cfg));
        status = std::max(status, report_run(run_scenario(cfg), cfg, out_dir, quiet));
    }
    return status;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reduced-order velocity observer on Riemannian manifolds"};
    app.require_subcommand(1);

    fs::path out_dir = default_out_dir();
    bool quiet = false;

    auto* run = app.add_subcommand("run", "Run one scenario and write its trace and report");
    fs::path run_scenario_path;
    std::optional<std::uint64_t> run_seed;
    std::optional<double> run_dt;
    run->add_option("scenario", run_scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--out-dir", out_dir, "Output directory (default $GEOOBS_OUT_DIR or ./out)");
    run->add_option("--seed", run_seed, "Override the noise seed");
    run->add_option("--dt", run_dt, "Override the step size");
    run->add_flag("--quiet", quiet, "Only write files");

    auto* sweep = app.add_subcommand("sweep", "Noise-free runs over a list of gains");
    fs::path sweep_scenario_path;
    std::string sweep_param = "lambda";
    std::vector<double> sweep_values;
    unsigned threads = 0;
    sweep->add_option("scenario", sweep_scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
    sweep->add_option("--param", sweep_param, "Swept parameter")->capture_default_str();
    sweep->add_option("--values", sweep_values, "Comma-separated values")->delimiter(',');
    sweep->add_option("--out-dir", out_dir, "Output directory (default $GEOOBS_OUT_DIR or ./out)");
    sweep->add_option("--threads", threads, "Worker threads (0: hardware concurrency)");
    sweep->add_flag("--quiet", quiet, "Only write files");

    auto* check = app.add_subcommand("check", "Re-run the bound analysis on a saved trace");
    fs::path trace_path;
    double check_lambda = 0.0;
    double check_A = 0.0;
    std::string clock_name = "physical";
    check->add_option("trace", trace_path, "Trace CSV")->required()->check(CLI::ExistingFile);
    check->add_option("--lambda", check_lambda, "Observer gain")->required();
    check->add_option("--curvature", check_A, "Sectional curvature upper bound A")->required();
    check->add_option("--clock", clock_name, "Time axis of the contraction bound")
        ->check(CLI::IsMember({"physical", "maupertuis"}))
        ->capture_default_str();

    auto* sphere = app.add_subcommand("paper-sphere", "Noisy and noise-free runs of the sphere preset");
    std::uint64_t sphere_seed = 1;
    double sphere_noise = 0.2;
    sphere->add_option("--out-dir", out_dir, "Output directory (default $GEOOBS_OUT_DIR or ./out)");
    sphere->add_option("--seed", sphere_seed, "Noise seed")->capture_default_str();
    sphere->add_option("--noise", sphere_noise, "Noise fraction")->capture_default_str();
    sphere->add_flag("--quiet", quiet, "Only write files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kError;
    }

    try {
        if (*run) return cmd_run(run_scenario_path, out_dir, run_seed, run_dt, quiet);
        if (*sweep) return cmd_sweep(sweep_scenario_path, sweep_param, sweep_values, out_dir, threads, quiet);
        if (*check) return cmd_check(trace_path, check_lambda, check_A, clock_name);
        if (*sphere) return cmd_sphere_preset(out_dir, sphere_seed, sphere_noise, quiet);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kError;
    }
    return kError;
}
