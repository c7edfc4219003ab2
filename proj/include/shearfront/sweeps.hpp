#pragma once

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "shearfront/error.hpp"
#include "shearfront/shear.hpp"
#include "shearfront/spectral_grid.hpp"
#include "shearfront/variational.hpp"
#include "shearfront/version.hpp"

namespace shearfront {

/// Square grid size used for amplitude delta and temporal frequency n when a
/// sweep does not fix one: max(32, 8 n, 12 delta^(1/4)) rounded up to even,
/// at most 64.
///
/// The eigenfunction at the minimizer flattens as delta grows (lambda* falls
/// roughly like 1/delta), so resolution needs grow far more slowly than
/// sqrt(delta); enhancements at delta = 100 agree to 1e-10 between 16x16 and
/// 38x38.
inline GridSpec default_grid(double delta, int freq) {
    const double amp = 12.0 * std::pow(std::max(delta, 0.0), 0.25);
    std::size_t n = std::max<std::size_t>({32, 8 * static_cast<std::size_t>(std::max(freq, 0)),
                                           static_cast<std::size_t>(std::ceil(amp))});
    n += n % 2;
    return GridSpec::square(std::min<std::size_t>(n, 64));
}

struct SweepConfig {
    std::vector<double> deltas;
    std::vector<int> freqs;
    double fprime0 = 1.0;
    /// Fixed grid for every pair; default_grid(delta, n) when empty.
    std::optional<GridSpec> grid;
    std::string output_path;
    /// Start each minimization at lambda* of the previous delta with the same n.
    bool warm_start = false;
    MinimizeOptions minimize{};

    void validate() const {
        if (deltas.empty() || freqs.empty()) {
            throw DomainError("sweep needs at least one delta and one frequency");
        }
        if (!std::is_sorted(deltas.begin(), deltas.end()) ||
            !std::is_sorted(freqs.begin(), freqs.end())) {
            throw DomainError("sweep deltas and frequencies must be sorted ascending");
        }
        if (deltas.front() < 0.0 || freqs.front() < 0) {
            throw DomainError("sweep deltas and frequencies must be nonnegative");
        }
        if (!(fprime0 > 0.0)) throw DomainError("f'(0) must be positive");
    }

    GridSpec grid_for(double delta, int freq) const {
        return grid ? *grid : default_grid(delta, freq);
    }
};

struct SweepRecord {
    double delta = 0.0;
    int freq = 0;
    double lambda_star = 0.0;
    double c_star = 0.0;
    double enhancement = 0.0;
    int iterations = 0;
    double residual = 0.0;

    friend bool operator==(const SweepRecord&, const SweepRecord&) = default;
};

struct SweepFailure {
    double delta = 0.0;
    int freq = 0;
    std::string message;
};

struct SweepOutcome {
    std::vector<SweepRecord> records;
    std::vector<SweepFailure> failures;
};

inline SweepRecord make_record(double delta, int freq, const SpeedResult& r, double fprime0) {
    return {delta, freq, r.lambda_star, r.c_star, enhancement(r, fprime0), r.iterations,
            r.residual};
}

/// Minimal speed for every (delta, n) pair, n outer and delta inner.
/// A failing pair is logged in `failures` and the sweep goes on.
inline SweepOutcome run_sweep(const SweepConfig& config) {
    config.validate();
    SweepOutcome out;
    for (int n : config.freqs) {
        double previous = 0.0;
        for (double delta : config.deltas) {
            const GridSpec grid = config.grid_for(delta, n);
            MinimizeOptions opts = config.minimize;
            if (config.warm_start && previous > 0.0) opts.lambda0 = previous;
            try {
                const SpeedResult r =
                    minimize_h(sample(ShearSpec::parametric(delta, n), grid), grid,
                               config.fprime0, opts);
                out.records.push_back(make_record(delta, n, r, config.fprime0));
                previous = r.lambda_star;
            } catch (const Error& e) {
                out.failures.push_back({delta, n, e.what()});
            }
        }
    }
    return out;
}

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;  // of log(enhancement) against log(delta)
    std::size_t points = 0;
    std::vector<std::string> warnings;
};

/// Least-squares slope of log(enhancement) against log(delta) over records
/// with lo <= delta <= hi. Records with nonpositive enhancement are skipped
/// with a warning.
inline SlopeFit fit_loglog(const std::vector<SweepRecord>& records, double lo, double hi) {
    SlopeFit fit;
    std::vector<double> x, y;
    for (const auto& r : records) {
        if (r.delta < lo || r.delta > hi) continue;
        if (!(r.enhancement > 0.0) || !(r.delta > 0.0)) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "skipped delta=%.6g n=%d: enhancement %.3g", r.delta,
                          r.freq, r.enhancement);
            fit.warnings.emplace_back(buf);
            continue;
        }
        x.push_back(std::log(r.delta));
        y.push_back(std::log(r.enhancement));
    }
    fit.points = x.size();
    if (x.size() < 3) {
        throw InsufficientDataError("log-log fit needs 3 usable points in [" + std::to_string(lo) +
                                    ", " + std::to_string(hi) + "], have " +
                                    std::to_string(x.size()));
    }
    const double k = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= k;
    my /= k;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw InsufficientDataError("log-log fit needs distinct deltas");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

inline double fit_loglog_slope(const std::vector<SweepRecord>& records, double lo, double hi) {
    return fit_loglog(records, lo, hi).slope;
}

inline constexpr const char* kRecordHeader =
    "delta,freq,lambda_star,c_star,enhancement,iterations,residual";

inline void write_records(std::ostream& out, const std::vector<SweepRecord>& records) {
    out << kRecordHeader << '\n';
    char buf[512];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g,%.17g,%d,%.17g\n", r.delta, r.freq,
                      r.lambda_star, r.c_star, r.enhancement, r.iterations, r.residual);
        out << buf;
    }
}

inline void write_records(const std::vector<SweepRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_records(out, records);
    if (!out) throw IoError("write failed for " + path);
}

namespace detail {

// strtod rather than stod: stod rejects subnormals, which %.17g can emit.
inline double parse_double(const std::string& s, std::size_t line) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || std::isspace(static_cast<unsigned char>(s[0]))) {
        throw ParseError("bad number '" + s + "'", line);
    }
    return v;
}

inline int parse_int(const std::string& s, std::size_t line) {
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(s, &pos);
    } catch (const std::logic_error&) {
        pos = 0;
    }
    if (s.empty() || pos != s.size() || v < std::numeric_limits<int>::min() ||
        v > std::numeric_limits<int>::max()) {
        throw ParseError("bad integer '" + s + "'", line);
    }
    return static_cast<int>(v);
}

}  // namespace detail

inline std::vector<SweepRecord> read_records(std::istream& in) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw ParseError("empty records file", line_no);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kRecordHeader) {
        throw ParseError(std::string("expected header '") + kRecordHeader + "'", line_no);
    }
    std::vector<SweepRecord> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) cols.push_back(cell);
        if (!line.empty() && line.back() == ',') cols.emplace_back();
        if (cols.size() != 7) {
            throw ParseError("expected 7 columns, got " + std::to_string(cols.size()), line_no);
        }
        SweepRecord r;
        r.delta = detail::parse_double(cols[0], line_no);
        r.freq = detail::parse_int(cols[1], line_no);
        r.lambda_star = detail::parse_double(cols[2], line_no);
        r.c_star = detail::parse_double(cols[3], line_no);
        r.enhancement = detail::parse_double(cols[4], line_no);
        r.iterations = detail::parse_int(cols[5], line_no);
        r.residual = detail::parse_double(cols[6], line_no);
        out.push_back(r);
    }
    return out;
}

inline std::vector<SweepRecord> read_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return read_records(in);
}

/// Sidecar describing how a records file was produced.
inline nlohmann::json sweep_metadata(const SweepConfig& config, const SweepOutcome& outcome) {
    nlohmann::json grids = nlohmann::json::array();
    for (int n : config.freqs) {
        for (double d : config.deltas) {
            const GridSpec g = config.grid_for(d, n);
            grids.push_back({{"delta", d}, {"freq", n}, {"n_y", g.n_y()}, {"n_tau", g.n_tau()}});
        }
    }
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : outcome.failures) {
        failures.push_back({{"delta", f.delta}, {"freq", f.freq}, {"error", f.message}});
    }
    const auto& m = config.minimize;
    return {
        {"tool", "shearfront"},
        {"version", kVersion},
        {"fprime0", config.fprime0},
        {"deltas", config.deltas},
        {"freqs", config.freqs},
        {"grids", grids},
        {"warm_start", config.warm_start},
        {"tolerances",
         {{"grad_tol", m.grad_tol},
          {"step_tol", m.step_tol},
          {"max_iterations", m.max_iterations},
          {"max_halvings", m.max_halvings},
          {"bracket", {m.bracket_lo, m.bracket_hi}},
          {"dense_validation", m.validate_dense}}},
        {"enhancement", "-2 sqrt(fprime0) - c_star"},
        {"failures", failures},
    };
}

inline void write_metadata(const nlohmann::json& meta, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << meta.dump(2) << '\n';
}

}  // namespace shearfront
