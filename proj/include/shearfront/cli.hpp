#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "shearfront/eigensolver.hpp"
#include "shearfront/error.hpp"
#include "shearfront/pde_oracle.hpp"
#include "shearfront/shear.hpp"
#include "shearfront/spectral_grid.hpp"
#include "shearfront/sweeps.hpp"
#include "shearfront/variational.hpp"
#include "shearfront/version.hpp"

namespace shearfront::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitUsage = 64;

/// Everything a command can read. JSON config keys are the flag names with
/// dashes replaced by underscores; explicit flags win over the file.
struct RunConfig {
    std::string command;

    double delta = 0.0;
    int freq = 0;
    double fprime0 = 1.0;
    /// "NYxNT"; empty picks default_grid(delta, freq).
    std::string grid;
    /// Tabulated shear (i_y,i_tau,value); replaces delta and freq.
    std::string shear_csv;

    double lambda_min = 0.05;
    double lambda_max = 5.0;
    int lambda_steps = 100;

    std::vector<double> deltas;
    std::vector<int> freqs;
    bool warm_start = false;

    std::string records;
    std::string range = "0:inf";

    double domain_length = 200.0;
    int nx = 2000;
    int ny = 32;
    double dt = 0.0;
    double t_final = 40.0;
    double window = 0.5;
    /// NaN means half the domain.
    double step_position = std::numeric_limits<double>::quiet_NaN();

    std::string out;
};

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j{
        {"command", c.command},
        {"delta", c.delta},
        {"freq", c.freq},
        {"fprime0", c.fprime0},
        {"grid", c.grid},
        {"shear_csv", c.shear_csv},
        {"lambda_min", c.lambda_min},
        {"lambda_max", c.lambda_max},
        {"lambda_steps", c.lambda_steps},
        {"deltas", c.deltas},
        {"freqs", c.freqs},
        {"warm_start", c.warm_start},
        {"records", c.records},
        {"range", c.range},
        {"domain_length", c.domain_length},
        {"nx", c.nx},
        {"ny", c.ny},
        {"dt", c.dt},
        {"t_final", c.t_final},
        {"window", c.window},
        {"out", c.out},
    };
    // JSON has no NaN.
    j["step_position"] = std::isnan(c.step_position) ? nlohmann::json(nullptr)
                                                     : nlohmann::json(c.step_position);
    return j;
}

/// Fills `c` from a config object; unknown keys are rejected so that typos
/// do not silently fall back to defaults.
inline void apply_json(const nlohmann::json& j, RunConfig& c) {
    if (!j.is_object()) throw DomainError("config file must hold a JSON object");
    const nlohmann::json known = to_json(c);
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw DomainError("unknown config key '" + key + "'");
    }
    auto get = [&](const char* key, auto& slot) {
        if (!j.contains(key)) return;
        try {
            j.at(key).get_to(slot);
        } catch (const nlohmann::json::exception&) {
            throw DomainError(std::string("config key '") + key + "' has the wrong type");
        }
    };
    get("command", c.command);
    get("delta", c.delta);
    get("freq", c.freq);
    get("fprime0", c.fprime0);
    get("grid", c.grid);
    get("shear_csv", c.shear_csv);
    get("lambda_min", c.lambda_min);
    get("lambda_max", c.lambda_max);
    get("lambda_steps", c.lambda_steps);
    get("deltas", c.deltas);
    get("freqs", c.freqs);
    get("warm_start", c.warm_start);
    get("records", c.records);
    get("range", c.range);
    get("domain_length", c.domain_length);
    get("nx", c.nx);
    get("ny", c.ny);
    get("dt", c.dt);
    get("t_final", c.t_final);
    get("window", c.window);
    get("out", c.out);
    if (j.contains("step_position") && !j["step_position"].is_null()) {
        get("step_position", c.step_position);
    }
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config " + path);
    RunConfig c;
    try {
        apply_json(nlohmann::json::parse(in), c);
    } catch (const nlohmann::json::parse_error& e) {
        throw DomainError("config " + path + ": " + e.what());
    }
    return c;
}

inline GridSpec parse_grid(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw DomainError("grid must look like NYxNT, got '" + s + "'");
    auto num = [&](const std::string& part) {
        if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos) {
            throw DomainError("grid must look like NYxNT, got '" + s + "'");
        }
        return static_cast<std::size_t>(std::stoul(part));
    };
    return GridSpec(num(s.substr(0, x)), num(s.substr(x + 1)));
}

inline std::pair<double, double> parse_range(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw DomainError("range must look like LO:HI");
    auto num = [&](const std::string& part) {
        char* end = nullptr;
        const double v = std::strtod(part.c_str(), &end);
        if (part.empty() || end != part.c_str() + part.size()) {
            throw DomainError("range must look like LO:HI, got '" + s + "'");
        }
        return v;
    };
    const double lo = num(s.substr(0, colon));
    const double hi = num(s.substr(colon + 1));
    if (!(lo < hi)) throw DomainError("range needs LO < HI");
    return {lo, hi};
}

/// Shear and grid for speed, curve and oracle.
struct Problem {
    ShearSpec shear;
    GridSpec grid;
};

inline Problem problem(const RunConfig& c) {
    if (!(c.fprime0 > 0.0) || !std::isfinite(c.fprime0)) {
        throw DomainError("fprime0 must be positive and finite");
    }
    if (!c.shear_csv.empty()) {
        ShearSpec s = read_shear_csv(c.shear_csv);
        const GridSpec table_grid(s.table().n_y, s.table().n_tau);
        if (!c.grid.empty() && !(parse_grid(c.grid) == table_grid)) {
            throw DomainError("--grid does not match the tabulated shear " + to_string(table_grid));
        }
        return {std::move(s), table_grid};
    }
    ShearSpec s = ShearSpec::parametric(c.delta, c.freq);
    return {s, c.grid.empty() ? default_grid(c.delta, c.freq) : parse_grid(c.grid)};
}

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

/// Output stream for CSV results: the --out file, or `fallback`.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
        if (!path.empty()) {
            file_.open(path, std::ios::binary);
            if (!file_) throw IoError("cannot write " + path);
            out_ = &file_;
        }
    }
    std::ostream& stream() { return *out_; }

private:
    std::ofstream file_;
    std::ostream* out_;
};

inline nlohmann::json result_json(const SpeedResult& r, double fprime0) {
    return {{"c_star", r.c_star},
            {"lambda_star", r.lambda_star},
            {"h_star", r.h_star},
            {"mu_at_star", r.mu_at_star},
            {"enhancement", enhancement(r, fprime0)},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"gradient", r.gradient},
            {"gradient_fd", r.gradient_fd},
            {"residual", r.residual},
            {"identity_error", r.identity_error},
            {"used_golden", r.used_golden},
            {"grid", to_string(r.grid)},
            {"warnings", r.warnings}};
}

// Validation happens in the prepare_* functions; run_* only computes.

inline int run_speed(const RunConfig& c, std::ostream& out) {
    const Problem p = problem(c);
    const ShearField field = sample(p.shear, p.grid);
    const SpeedResult r = minimize_h(field, p.grid, c.fprime0);
    nlohmann::json meta{{"tool", "shearfront"},
                        {"version", kVersion},
                        {"config", to_json(c)},
                        {"result", result_json(r, c.fprime0)}};
    out << "grid        " << to_string(p.grid) << '\n'
        << "lambda*     " << fmt(r.lambda_star) << '\n'
        << "c*          " << fmt(r.c_star) << '\n'
        << "enhancement " << fmt(enhancement(r, c.fprime0)) << '\n'
        << "iterations  " << r.iterations << (r.used_golden ? " (golden section used)" : "")
        << '\n'
        << "h'(lambda*) " << fmt(r.gradient) << '\n'
        << "residual    " << fmt(r.residual) << '\n';
    for (const auto& w : r.warnings) out << "warning: " << w << '\n';
    out << "config " << to_json(c).dump() << '\n';
    out << "c_star=" << fmt(r.c_star) << " lambda_star=" << fmt(r.lambda_star) << '\n';
    if (!c.out.empty()) write_json(meta, c.out);
    return r.converged ? kExitOk : kExitNumerical;
}

inline void prepare_curve(const RunConfig& c) {
    problem(c);
    if (!(c.lambda_min > 0.0) || !(c.lambda_min < c.lambda_max) || !std::isfinite(c.lambda_max)) {
        throw DomainError("curve needs 0 < lambda_min < lambda_max");
    }
    if (c.lambda_steps < 2) throw DomainError("curve needs lambda_steps >= 2");
}

inline int run_curve(const RunConfig& c, std::ostream& out, std::ostream& err) {
    prepare_curve(c);
    const Problem p = problem(c);
    const ShearField field = sample(p.shear, p.grid);
    const HFunction hf(field, p.grid, c.fprime0);
    Sink sink(c.out, out);
    sink.stream() << "lambda,mu,mu_over_lambda\n";
    const double span = c.lambda_max - c.lambda_min;
    for (int i = 0; i < c.lambda_steps; ++i) {
        const double lambda =
            i + 1 == c.lambda_steps ? c.lambda_max : c.lambda_min + span * i / (c.lambda_steps - 1);
        double mu = 0.0;
        try {
            mu = hf.mu(lambda);
        } catch (const Error& e) {
            throw Error("lambda=" + fmt(lambda) + ": " + e.what());
        }
        sink.stream() << fmt(lambda) << ',' << fmt(mu) << ',' << fmt(mu / lambda) << '\n';
    }
    const nlohmann::json meta{{"tool", "shearfront"},
                              {"version", kVersion},
                              {"grid", to_string(p.grid)},
                              {"config", to_json(c)}};
    if (c.out.empty()) {
        err << "config " << meta.dump() << '\n';
    } else {
        write_json(meta, c.out + ".json");
    }
    return kExitOk;
}

inline SweepConfig prepare_sweep(const RunConfig& c) {
    SweepConfig s;
    s.deltas = c.deltas;
    s.freqs = c.freqs;
    s.fprime0 = c.fprime0;
    s.warm_start = c.warm_start;
    s.output_path = c.out;
    if (!c.grid.empty()) s.grid = parse_grid(c.grid);
    s.validate();
    return s;
}

inline int run_sweep_cmd(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const SweepConfig s = prepare_sweep(c);
    const SweepOutcome outcome = run_sweep(s);
    Sink sink(c.out, out);
    write_records(sink.stream(), outcome.records);
    nlohmann::json meta = sweep_metadata(s, outcome);
    meta["config"] = to_json(c);
    if (c.out.empty()) {
        err << "config " << meta.dump() << '\n';
    } else {
        write_metadata(meta, c.out + ".json");
    }
    for (const auto& f : outcome.failures) {
        err << "failed delta=" << fmt(f.delta) << " freq=" << f.freq << ": " << f.message << '\n';
    }
    return outcome.failures.empty() ? kExitOk : kExitNumerical;
}

inline int run_fit(const RunConfig& c, std::ostream& out) {
    const auto [lo, hi] = parse_range(c.range);
    const auto records = read_records(c.records);
    const SlopeFit fit = fit_loglog(records, lo, hi);
    for (const auto& w : fit.warnings) out << "warning: " << w << '\n';
    out << "config " << to_json(c).dump() << '\n';
    out << "slope=" << fmt(fit.slope) << " intercept=" << fmt(fit.intercept)
        << " points=" << fit.points << '\n';
    if (!c.out.empty()) {
        write_json({{"tool", "shearfront"},
                    {"version", kVersion},
                    {"config", to_json(c)},
                    {"slope", fit.slope},
                    {"intercept", fit.intercept},
                    {"points", fit.points},
                    {"warnings", fit.warnings}},
                   c.out);
    }
    return kExitOk;
}

inline OracleConfig prepare_oracle(const RunConfig& c) {
    if (c.nx < 1 || c.ny < 1) throw DomainError("nx and ny must be positive");
    if (!(c.fprime0 >= 0.0)) throw DomainError("fprime0 must be >= 0 for the oracle");
    if (!(c.window > 0.0 && c.window <= 1.0)) throw DomainError("window must lie in (0, 1]");
    if (!(c.t_final > 0.0) || !(c.domain_length > 0.0)) {
        throw DomainError("t_final and domain_length must be positive");
    }
    OracleConfig o;
    o.shear = c.shear_csv.empty() ? ShearSpec::parametric(c.delta, c.freq)
                                  : read_shear_csv(c.shear_csv);
    o.fprime0 = c.fprime0;
    o.domain_length = c.domain_length;
    o.n_x = static_cast<std::size_t>(c.nx);
    o.n_y = static_cast<std::size_t>(c.ny);
    o.dt = c.dt;
    o.t_final = c.t_final;
    o.measure_window = c.window;
    o.step_position = c.step_position;
    oracle_dt(o);
    return o;
}

inline int run_oracle(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const OracleConfig o = prepare_oracle(c);
    FrontTrace trace;
    try {
        trace = evolve(o);
    } catch (const BoundaryContaminationError& e) {
        if (!c.out.empty()) write_trace(e.partial_trace(), c.out);
        throw;
    }
    const SpeedEstimate est = estimate_speed(trace, o.measure_window);
    if (!c.out.empty()) write_trace(trace, c.out);
    const nlohmann::json meta{{"tool", "shearfront"},
                              {"version", kVersion},
                              {"config", to_json(c)},
                              {"dt", trace.dt},
                              {"dx", trace.dx},
                              {"speed", est.speed},
                              {"samples", est.samples},
                              {"low_confidence", est.low_confidence},
                              {"min_u", trace.min_u},
                              {"max_u", trace.max_u}};
    if (!c.out.empty()) write_json(meta, c.out + ".json");
    if (est.low_confidence) err << "warning: front position is not monotone in the window\n";
    out << "dt          " << fmt(trace.dt) << '\n'
        << "dx          " << fmt(trace.dx) << '\n'
        << "samples     " << est.samples << '\n'
        << "config " << to_json(c).dump() << '\n'
        << "speed=" << fmt(est.speed) << '\n';
    return kExitOk;
}

namespace detail {

template <class T>
std::string default_text(const T& v) {
    if constexpr (std::is_same_v<T, std::string>) {
        return v.empty() ? "\"\"" : v;
    } else if constexpr (std::is_same_v<T, bool>) {
        return v ? "true" : "false";
    } else if constexpr (std::is_floating_point_v<T>) {
        if (std::isnan(v)) return "L/2";
        std::ostringstream s;
        s << v;
        return s.str();
    } else {
        return std::to_string(v);
    }
}

/// Optional flag slots; a set slot overrides the config file.
struct Flags {
    std::optional<std::string> config;
    std::optional<double> delta, fprime0, lambda_min, lambda_max, domain_length, dt, t_final,
        window, step_position;
    std::optional<int> freq, lambda_steps, nx, ny;
    std::optional<std::string> grid, shear_csv, records, range, out;
    std::optional<std::vector<double>> deltas;
    std::optional<std::vector<int>> freqs;
    bool warm_start = false;

    void apply(RunConfig& c) const {
        auto put = [](const auto& flag, auto& slot) {
            if (flag) slot = *flag;
        };
        put(delta, c.delta);
        put(freq, c.freq);
        put(fprime0, c.fprime0);
        put(grid, c.grid);
        put(shear_csv, c.shear_csv);
        put(lambda_min, c.lambda_min);
        put(lambda_max, c.lambda_max);
        put(lambda_steps, c.lambda_steps);
        put(deltas, c.deltas);
        put(freqs, c.freqs);
        if (warm_start) c.warm_start = true;
        put(records, c.records);
        put(range, c.range);
        put(domain_length, c.domain_length);
        put(nx, c.nx);
        put(ny, c.ny);
        put(dt, c.dt);
        put(t_final, c.t_final);
        put(window, c.window);
        put(step_position, c.step_position);
        put(out, c.out);
    }
};

template <class T, class D>
CLI::Option* add(CLI::App* app, const std::string& name, std::optional<T>& slot, const D& def,
                 const std::string& desc) {
    return app->add_option(name, slot, desc)->default_str(default_text(def));
}

inline void shear_flags(CLI::App* app, Flags& f, const RunConfig& d) {
    add(app, "--delta", f.delta, d.delta, "shear amplitude delta [velocity, nondimensional]");
    add(app, "--freq", f.freq, d.freq, "temporal frequency n of the shear [cycles per unit time]");
    add(app, "--fprime0", f.fprime0, d.fprime0, "reaction rate f'(0) [1/time]");
    add(app, "--shear-csv", f.shear_csv, d.shear_csv,
        "tabulated shear CSV (i_y,i_tau,value); overrides --delta/--freq");
}

inline void common_flags(CLI::App* app, Flags& f, const RunConfig& d) {
    add(app, "--config", f.config, std::string(), "JSON config; explicit flags take precedence");
    add(app, "--out", f.out, d.out, "output path (stdout when empty)");
}

}  // namespace detail

/// Parses argv and runs one command. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    const RunConfig d;
    detail::Flags f;
    CLI::App app("Minimal KPP front speed in space-time periodic shear flows.", "shearfront");
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1, 1);

    using detail::add;
    auto* speed = app.add_subcommand("speed", "minimal speed c* = -inf mu(lambda)/lambda");
    detail::shear_flags(speed, f, d);
    add(speed, "--grid", f.grid, std::string("auto"),
        "collocation grid NYxNT (auto scales with delta and freq)");
    detail::common_flags(speed, f, d);
    speed->footer("--out writes the result and effective config as JSON.");

    auto* curve = app.add_subcommand("curve", "CSV of lambda, mu(lambda), mu(lambda)/lambda");
    detail::shear_flags(curve, f, d);
    add(curve, "--grid", f.grid, std::string("auto"), "collocation grid NYxNT");
    add(curve, "--lambda-min", f.lambda_min, d.lambda_min, "smallest lambda [1/length]");
    add(curve, "--lambda-max", f.lambda_max, d.lambda_max, "largest lambda [1/length]");
    add(curve, "--lambda-steps", f.lambda_steps, d.lambda_steps,
        "number of equally spaced lambdas (>= 2)");
    detail::common_flags(curve, f, d);

    auto* sweep = app.add_subcommand("sweep", "records CSV over a delta x freq table");
    add(sweep, "--deltas", f.deltas, std::string("none"),
        "ascending shear amplitudes, comma separated [nondimensional]")
        ->delimiter(',');
    add(sweep, "--freqs", f.freqs, std::string("none"), "ascending temporal frequencies")
        ->delimiter(',');
    add(sweep, "--fprime0", f.fprime0, d.fprime0, "reaction rate f'(0) [1/time]");
    add(sweep, "--grid", f.grid, std::string("auto"), "one grid NYxNT for every pair");
    sweep->add_flag("--warm-start", f.warm_start,
                    "start each delta at the previous lambda* (default false)");
    detail::common_flags(sweep, f, d);
    sweep->footer("With --out, metadata goes to <out>.json.");

    auto* fit = app.add_subcommand("fit", "log-log slope of enhancement against delta");
    add(fit, "--records", f.records, d.records, "records CSV written by sweep");
    add(fit, "--range", f.range, d.range, "delta range LO:HI, inclusive");
    detail::common_flags(fit, f, d);

    auto* oracle = app.add_subcommand("oracle", "direct PDE simulation of a front");
    detail::shear_flags(oracle, f, d);
    add(oracle, "--domain-length", f.domain_length, d.domain_length, "domain length L [length]");
    add(oracle, "--nx", f.nx, d.nx, "points along x, ends included");
    add(oracle, "--ny", f.ny, d.ny, "points across the periodic y cell (even)");
    add(oracle, "--dt", f.dt, std::string("auto"),
        "time step [time]; auto is min(0.01, dx/(2 max|b|)) with 1/dt an integer");
    add(oracle, "--t-final", f.t_final, d.t_final, "simulated time [time]");
    add(oracle, "--window", f.window, d.window, "trailing fraction of the run used for the fit");
    add(oracle, "--step-position", f.step_position, d.step_position,
        "x where the initial step rises from 0 to 1 [length]");
    detail::common_flags(oracle, f, d);
    oracle->footer("--out writes the time,position trace; metadata goes to <out>.json.");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    RunConfig c;
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (f.config) c = load_config(*f.config);
        if (!c.command.empty() && c.command != command) {
            throw DomainError("config is for '" + c.command + "', not '" + command + "'");
        }
        c.command = command;
        f.apply(c);
        if (command == "speed") problem(c);
        if (command == "curve") prepare_curve(c);
        if (command == "sweep") prepare_sweep(c);
        if (command == "fit") {
            parse_range(c.range);
            if (c.records.empty()) throw DomainError("fit needs --records");
            read_records(c.records);
        }
        if (command == "oracle") prepare_oracle(c);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n'
            << "run 'shearfront " << command << " --help' for usage\n";
        return kExitUsage;
    }

    try {
        if (command == "speed") return run_speed(c, out);
        if (command == "curve") return run_curve(c, out, err);
        if (command == "sweep") return run_sweep_cmd(c, out, err);
        if (command == "fit") return run_fit(c, out);
        return run_oracle(c, out, err);
    } catch (const NonConvergenceError& e) {
        err << "error: " << e.what() << " (best lambda " << fmt(e.best_lambda()) << ", h "
            << fmt(e.best_h()) << ")\n";
    } catch (const BoundaryContaminationError& e) {
        err << "error: " << e.what() << " at t=" << fmt(e.partial_trace().times.empty()
                                                           ? 0.0
                                                           : e.partial_trace().times.back())
            << '\n';
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
    }
    return kExitNumerical;
}

}  // namespace shearfront::cli
