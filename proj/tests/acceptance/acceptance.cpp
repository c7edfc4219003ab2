// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "shearfront/cli.hpp"
#include "shearfront/eigensolver.hpp"
#include "shearfront/pde_oracle.hpp"
#include "shearfront/sweeps.hpp"
#include "shearfront/variational.hpp"

using namespace shearfront;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Identity residuals |mu - weighted potential| of every eigenpair from AC1-AC7.
struct IdentityCheck {
    std::string label;
    double mu = 0.0;
    double error = 0.0;
};
std::vector<IdentityCheck> identities;

void note_identity(const std::string& label, const SpeedResult& r) {
    identities.push_back({label, r.mu_at_star, r.identity_error});
}

void note_identity(const std::string& label, const OperatorMatrix& op, const EigenPair& p) {
    identities.push_back({label, p.mu, std::abs(p.mu - weighted_potential(op, p.vector))});
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ShearField parametric(double delta, int freq, const GridSpec& g) {
    return sample(ShearSpec::parametric(delta, freq), g);
}

SpeedResult solve(double delta, int freq, const GridSpec& g, double fprime0 = 1.0) {
    return minimize_h(parametric(delta, freq, g), g, fprime0);
}

// Same pairs and grids as run_sweep, keeping each eigenpair for AC8.
std::vector<SweepRecord> sweep(const char* id, const std::vector<double>& deltas, int freq) {
    std::vector<SweepRecord> out;
    for (double delta : deltas) {
        const auto r = solve(delta, freq, default_grid(delta, freq));
        note_identity(fmt("%s delta=%g", id, delta), r);
        out.push_back(make_record(delta, freq, r, 1.0));
    }
    return out;
}

std::string join(const std::vector<SweepRecord>& r) {
    std::string s;
    for (const auto& x : r) s += fmt(" %g:%.6g", x.delta, x.enhancement);
    return s;
}

Outcome ac1() {
    const auto meta = (std::filesystem::temp_directory_path() / "shearfront_ac1.json").string();
    double c[2] = {0, 0};
    const double fp[2] = {1.0, 4.0};
    for (int i = 0; i < 2; ++i) {
        const std::string f = fmt("%g", fp[i]);
        const char* argv[] = {"shearfront", "speed",   "--delta", "0",           "--fprime0",
                              f.c_str(),    "--grid", "16x16",   "--out", meta.c_str()};
        std::ostringstream out, err;
        if (cli::run(10, argv, out, err) != cli::kExitOk) return {false, "speed failed: " + err.str()};
        const auto j = nlohmann::json::parse(std::ifstream(meta));
        c[i] = j["result"]["c_star"].get<double>();
        identities.push_back({"AC1 f'=" + f, j["result"]["mu_at_star"].get<double>(),
                              j["result"]["identity_error"].get<double>()});
    }
    std::filesystem::remove(meta);
    const bool ok = std::abs(c[0] + 2.0) <= 1e-8 && std::abs(c[1] + 4.0) <= 1e-8;
    return {ok, fmt("c*(f'=1)=%.12f c*(f'=4)=%.12f (tol 1e-8)", c[0], c[1])};
}

Outcome ac2() {
    double mu[3];
    const std::size_t n[3] = {8, 16, 32};
    for (int i = 0; i < 3; ++i) {
        const GridSpec g = GridSpec::square(n[i]);
        const OperatorMatrix op = assemble(g, parametric(1.0, 1, g), 1.0, 1.0);
        const EigenPair p = principal_eigenpair(op);
        note_identity(fmt("AC2 %zux%zu", n[i], n[i]), op, p);
        mu[i] = p.mu;
    }
    const double coarse = std::abs(mu[0] - mu[1]);
    const double fine = std::abs(mu[1] - mu[2]);
    return {fine <= 0.1 * coarse && coarse < 1e-3,
            fmt("|mu8-mu16|=%.3e |mu16-mu32|=%.3e", coarse, fine)};
}

Outcome ac3() {
    const auto r = sweep("AC3", {0.1, 0.2, 0.4, 0.6, 0.8, 1.0}, 1);
    const double p = fit_loglog_slope(r, 0.0, 10.0);
    return {p >= 1.85 && p <= 2.10, fmt("slope %.4f in [1.85, 2.10];", p) + join(r)};
}

Outcome ac4() {
    const auto r = sweep("AC4", {20, 40, 60, 80, 100}, 1);
    const double p = fit_loglog_slope(r, 0.0, 1e9);
    return {p >= 0.95 && p <= 1.20, fmt("slope %.4f in [0.95, 1.20];", p) + join(r)};
}

Outcome ac5() {
    double e[5];
    for (int n = 0; n <= 4; ++n) {
        const auto r = solve(1.0, n, default_grid(1.0, n));
        note_identity(fmt("AC5 n=%d", n), r);
        e[n] = enhancement(r, 1.0);
    }
    const double s = -1e-8;
    const bool ok = e[4] - e[0] > s && e[3] - e[4] >= s && e[2] - e[3] >= s && e[1] - e[2] >= s;
    return {ok, fmt("enhancement n=0..4: %.6g %.6g %.6g %.6g %.6g", e[0], e[1], e[2], e[3], e[4])};
}

Outcome ac6() {
    const GridSpec g = GridSpec::square(16);
    bool ok = true;
    double worst = std::numeric_limits<double>::infinity();
    for (double delta : {0.5, 1.0}) {
        for (int n : {1, 2}) {
            const auto f = parametric(delta, n, g);
            const auto avg = time_average(f);
            const auto r = minimize_h(f, g, 1.0);
            const auto ra = minimize_h(avg, g, 1.0);
            note_identity(fmt("AC6 delta=%g n=%d", delta, n), r);
            note_identity(fmt("AC6 delta=%g n=%d averaged", delta, n), ra);
            const double margin = std::abs(r.c_star) - std::abs(ra.c_star);
            worst = std::min(worst, margin);
            ok = ok && margin >= -1e-8;
        }
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(g.size()));
    for (std::size_t it = 0; it < g.n_tau(); ++it) {
        for (std::size_t iy = 0; iy < g.n_y(); ++iy) {
            v(static_cast<Eigen::Index>(flatten_index(g, iy, it))) =
                1.3 * std::sin(2.0 * std::numbers::pi * g.tau(it)) +
                0.4 * std::cos(4.0 * std::numbers::pi * g.tau(it));
        }
    }
    const auto pure = minimize_h(tabulated_field(g, v), g, 1.0);
    note_identity("AC6 pure tau shear", pure);
    const double dev = std::abs(std::abs(pure.c_star) - 2.0);
    ok = ok && dev <= 1e-6;
    return {ok, fmt("min |c*|-|c*avg| = %.3e (>= -1e-8); pure-tau ||c*|-2| = %.2e", worst, dev)};
}

Outcome ac7() {
    const GridSpec g = GridSpec::square(16);
    const std::pair<double, int> configs[] = {{0.5, 1}, {1.0, 0}, {1.0, 1},
                                              {2.0, 3}, {3.0, 2}, {5.0, 1}};
    EigenOptions eo{EigenOptions::Method::shift_invert};
    bool ok = true;
    std::string detail;
    for (auto [delta, n] : configs) {
        const auto f = parametric(delta, n, g);
        const HFunction hf(f, g, 1.0);
        auto h_at = [&](double lambda) {
            const OperatorMatrix op = hf.speed_operator(lambda);
            const EigenPair p = principal_eigenpair(op, eo);
            note_identity(fmt("AC7 delta=%g n=%d lambda=%g", delta, n, lambda), op, p);
            return p.mu / lambda;
        };
        const auto logl = log_spaced(0.05, 5.0, 60);
        std::vector<double> h;
        for (double l : logl) h.push_back(h_at(l));
        const int changes = slope_sign_changes(h);
        const double step = 0.005;
        const auto lin = linear_spaced(0.05, 5.0, step);
        std::vector<double> dense;
        for (double l : lin) dense.push_back(h_at(l));
        const auto best = scan_minimum(lin, dense);
        const auto r = minimize_h(f, g, 1.0);
        note_identity(fmt("AC7 delta=%g n=%d minimizer", delta, n), r);
        const double gap = std::abs(r.lambda_star - best.lambda);
        ok = ok && changes == 1 && gap <= step;
        detail += fmt(" (%g,%d): %d change, |dlambda|=%.4f;", delta, n, changes, gap);
    }
    return {ok, detail};
}

Outcome ac8() {
    double worst = 0.0;
    std::string where;
    std::size_t checked = 0;
    for (const auto& c : identities) {
        ++checked;
        const double rel = c.error / (1.0 + std::abs(c.mu));
        if (rel >= worst) {
            worst = rel;
            where = c.label;
        }
    }
    return {worst < 1e-8 && checked > 0,
            fmt("%zu eigenpairs, worst %.2e at %s (tol 1e-8 relative)", checked, worst,
                where.c_str())};
}

Outcome ac9() {
    const GridSpec g = GridSpec::square(16);
    const auto f = parametric(1.0, 1, g);
    double worst = std::numeric_limits<double>::infinity();
    for (double c : {-2.5, -3.0}) {
        std::vector<double> rho;
        for (int k = 1; k <= 12; ++k) rho.push_back(rho_c(f, g, 0.25 * k, c));
        for (std::size_t i = 1; i + 1 < rho.size(); ++i) {
            worst = std::min(worst, rho[i + 1] - 2.0 * rho[i] + rho[i - 1]);
        }
    }
    return {worst >= -1e-8, fmt("min second difference %.3e (>= -1e-8)", worst)};
}

Outcome ac10() {
    // Long run so the logarithmic lag of step-started fronts stays under 1%.
    OracleConfig base;
    base.domain_length = 450.0;
    base.n_x = 4500;
    base.step_position = 420.0;
    base.t_final = 100.0;
    OracleConfig flat = base;
    flat.n_y = 4;
    const double s0 = estimate_speed(evolve(flat), flat.measure_window).speed;
    OracleConfig shear = base;
    shear.shear = ShearSpec::parametric(1.0, 1);
    shear.n_y = 32;
    const double s1 = estimate_speed(evolve(shear), shear.measure_window).speed;
    const double c1 = solve(1.0, 1, default_grid(1.0, 1)).c_star;
    const double e0 = std::abs(s0 + 2.0) / 2.0;
    const double e1 = std::abs(s1 - c1) / std::abs(c1);
    return {e0 <= 0.02 && e1 <= 0.02,
            fmt("delta=0: %.4f vs -2 (%.2f%%); delta=1,n=1: %.4f vs %.6f (%.2f%%)", s0, 100 * e0,
                s1, c1, 100 * e1)};
}

Outcome ac11() {
    SweepConfig cfg;
    cfg.deltas = {0.04, 0.08, 0.12, 0.16, 0.2};
    cfg.freqs = {0, 1, 2, 3, 4};
    cfg.grid = GridSpec::square(8);
    const auto out = run_sweep(cfg);
    if (out.records.size() != 25) return {false, fmt("%zu records", out.records.size())};
    const auto path = (std::filesystem::temp_directory_path() / "shearfront_ac11.csv").string();
    write_records(out.records, path);
    const auto back = read_records(path);
    std::filesystem::remove(path);
    std::size_t equal = 0;
    for (std::size_t i = 0; i < back.size() && i < 25; ++i) equal += back[i] == out.records[i];
    return {back.size() == 25 && equal == 25, fmt("%zu/25 records identical after write/read", equal)};
}

}  // namespace

int main() {
    struct Criterion {
        const char* id;
        const char* name;
        double budget_s;  // <= 0: no runtime bound
        std::function<Outcome()> run;
    };
    const Criterion criteria[] = {
        {"AC1", "zero-shear baseline", 5, ac1},
        {"AC2", "spectral convergence", 30, ac2},
        {"AC3", "quadratic small-amplitude law", 300, ac3},
        {"AC4", "linear large-amplitude law", 1800, ac4},
        {"AC5", "frequency monotonicity", 180, ac5},
        {"AC6", "time-average comparison", 120, ac6},
        {"AC7", "unimodality", 300, ac7},
        {"AC8", "eigen identity", 0, ac8},
        {"AC9", "convexity of rho_c", 60, ac9},
        {"AC10", "oracle cross-validation", 1200, ac10},
        {"AC11", "persistence round trip", 0, ac11},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0 && secs > c.budget_s) {
            o.pass = false;
            o.detail += fmt(" [over the %.0f s budget]", c.budget_s);
        }
        failures += !o.pass;
        std::printf("%s %s  %s: %s (%.1f s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name,
                    o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
