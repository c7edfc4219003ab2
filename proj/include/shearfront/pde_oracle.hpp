#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "shearfront/error.hpp"
#include "shearfront/shear.hpp"

namespace shearfront {

/// Direct simulation of u_t = u_xx + u_yy + b(y, t) u_x + f'(0) u (1 - u) on
/// [0, L] x [0, 1), periodic in y, with u = 0 at x = 0 and u = 1 at x = L.
struct OracleConfig {
    ShearSpec shear = ShearSpec::parametric(0.0, 0);
    /// Zero turns the reaction off.
    double fprime0 = 1.0;
    double domain_length = 200.0;
    std::size_t n_x = 2000;
    std::size_t n_y = 32;
    /// Nonpositive selects min(0.01, dx / (2 max|b|)), shrunk so that 1/dt is
    /// an integer and every tau period has a whole number of steps.
    double dt = 0.0;
    double t_final = 40.0;
    double front_level = 0.5;
    /// Fraction of the run, counted back from t_final, used by estimate_speed.
    double measure_window = 0.5;
    double sample_interval = 0.1;
    /// Where the initial step rises from 0 to 1; NaN means L / 2.
    double step_position = std::numeric_limits<double>::quiet_NaN();
    /// The front must stay this many cells away from either end.
    std::size_t edge_cells = 10;

    double dx() const { return domain_length / static_cast<double>(n_x - 1); }
    double dy() const { return 1.0 / static_cast<double>(n_y); }
};

struct FrontTrace {
    std::vector<double> times;
    std::vector<double> positions;
    std::vector<double> mass_history;  // integral of u over the domain
    double dx = 0.0;
    double dt = 0.0;
    double min_u = 0.0;  // extremes of u over all recorded states
    double max_u = 1.0;
};

/// The front came within edge_cells of the domain boundary.
class BoundaryContaminationError : public Error {
public:
    BoundaryContaminationError(const std::string& what, FrontTrace partial)
        : Error(what), partial_(std::move(partial)) {}
    const FrontTrace& partial_trace() const noexcept { return partial_; }

private:
    FrontTrace partial_;
};

namespace detail {

/// max |b| over the cell, sampled on the oracle grid.
inline double shear_bound(const OracleConfig& cfg) {
    const ShearSpec& s = cfg.shear;
    if (s.kind() == ShearSpec::Kind::tabulated) return s.table().values.cwiseAbs().maxCoeff();
    // |sin(2 pi y)| (1 + sin) <= 2 delta; the sampled bound is sharper.
    double m = 0.0;
    for (std::size_t j = 0; j < cfg.n_y; ++j) {
        const double sy = std::abs(std::sin(2.0 * std::numbers::pi * cfg.dy() * j));
        m = std::max(m, sy);
    }
    return 2.0 * s.delta() * m;
}

/// b(y_j, t) for every y node.
inline void shear_column(const OracleConfig& cfg, double t, std::vector<double>& out) {
    out.resize(cfg.n_y);
    const ShearSpec& s = cfg.shear;
    const double tau = t - std::floor(t);
    if (s.kind() == ShearSpec::Kind::parametric) {
        for (std::size_t j = 0; j < cfg.n_y; ++j) out[j] = s.evaluate(cfg.dy() * j, tau);
        return;
    }
    // Tabulated: nodes in y must match, linear interpolation in tau.
    const ShearTable& tb = s.table();
    const double pos = tau * static_cast<double>(tb.n_tau);
    const auto k0 = static_cast<std::size_t>(std::floor(pos)) % tb.n_tau;
    const std::size_t k1 = (k0 + 1) % tb.n_tau;
    const double w = pos - std::floor(pos);
    for (std::size_t j = 0; j < cfg.n_y; ++j) {
        const auto i0 = static_cast<Eigen::Index>(k0 * tb.n_y + j);
        const auto i1 = static_cast<Eigen::Index>(k1 * tb.n_y + j);
        out[j] = (1.0 - w) * tb.values(i0) + w * tb.values(i1);
    }
}

/// Solves a tridiagonal system in place: lower a, diagonal b, upper c, rhs d.
/// `scratch` must have the system size.
inline void thomas(const double* a, const double* b, const double* c, double* d,
                   std::vector<double>& scratch, std::size_t n) {
    scratch[0] = c[0] / b[0];
    d[0] /= b[0];
    for (std::size_t i = 1; i < n; ++i) {
        const double m = 1.0 / (b[i] - a[i] * scratch[i - 1]);
        scratch[i] = c[i] * m;
        d[i] = (d[i] - a[i] * d[i - 1]) * m;
    }
    for (std::size_t i = n - 1; i-- > 0;) d[i] -= scratch[i] * d[i + 1];
}

/// Leftmost crossing of `level` by the y-maximum of u, linearly interpolated.
inline double front_position(const std::vector<double>& u, std::size_t nx, std::size_t ny,
                             double dx, double level) {
    double prev = 0.0;
    for (std::size_t i = 0; i < nx; ++i) {
        double m = 0.0;
        for (std::size_t j = 0; j < ny; ++j) m = std::max(m, u[j * nx + i]);
        if (m >= level) {
            if (i == 0) return 0.0;
            return dx * (static_cast<double>(i - 1) + (level - prev) / (m - prev));
        }
        prev = m;
    }
    return dx * static_cast<double>(nx - 1);
}

inline double auto_dt(const OracleConfig& cfg) {
    const double bmax = shear_bound(cfg);
    double dt = 0.01;
    if (bmax > 0.0) dt = std::min(dt, 0.5 * cfg.dx() / bmax);
    return 1.0 / std::ceil(1.0 / dt);
}

}  // namespace detail

/// Time step the oracle will use, after validation.
inline double oracle_dt(const OracleConfig& cfg) {
    if (cfg.n_x < 2 * cfg.edge_cells + 3 || cfg.n_y < 4) {
        throw DomainError("oracle grid needs n_x >= 2 edge_cells + 3 and n_y >= 4");
    }
    if (!(cfg.domain_length > 0.0) || !(cfg.t_final > 0.0) || !(cfg.sample_interval > 0.0)) {
        throw DomainError("domain length, final time and sample interval must be positive");
    }
    if (!(cfg.front_level > 0.0 && cfg.front_level < 1.0)) {
        throw DomainError("front level must lie in (0, 1)");
    }
    if (!(cfg.fprime0 >= 0.0)) throw DomainError("f'(0) must be >= 0");
    if (cfg.shear.kind() == ShearSpec::Kind::tabulated && cfg.shear.table().n_y != cfg.n_y) {
        throw DimensionMismatchError("tabulated shear has " +
                                     std::to_string(cfg.shear.table().n_y) +
                                     " y nodes, oracle uses " + std::to_string(cfg.n_y));
    }
    const double dt = cfg.dt > 0.0 ? cfg.dt : detail::auto_dt(cfg);
    const double bmax = detail::shear_bound(cfg);
    const double dx = cfg.dx();
    // Central advection keeps the implicit x step monotone only below cell
    // Peclet number 1; the Courant bound keeps the time error of advection
    // at first order in dt.
    if (bmax * dx / 2.0 >= 1.0) {
        throw CflViolationError("cell Peclet number max|b| dx / 2 = " +
                                std::to_string(bmax * dx / 2.0) + " must be < 1; refine n_x");
    }
    if (bmax > 0.0 && dt > dx / bmax) {
        throw CflViolationError("dt = " + std::to_string(dt) + " exceeds the advective bound " +
                                std::to_string(dx / bmax));
    }
    return dt;
}

/// Evolves a step initial state and records the front position.
///
/// Each step applies the exact logistic reaction, then an implicit x step
/// (diffusion plus central advection, one tridiagonal solve per y line), then
/// an implicit periodic y diffusion. Every substep maps [0, 1] into itself.
inline FrontTrace evolve(const OracleConfig& cfg) {
    const double dt = oracle_dt(cfg);
    const std::size_t nx = cfg.n_x, ny = cfg.n_y;
    const double dx = cfg.dx(), dy = cfg.dy();
    const double x0 = std::isnan(cfg.step_position) ? cfg.domain_length / 2.0 : cfg.step_position;

    std::vector<double> u(nx * ny);
    for (std::size_t i = 0; i < nx; ++i) {
        const double x = dx * static_cast<double>(i);
        const double v = 0.5 * (1.0 + std::tanh((x - x0) / (2.0 * dx)));
        for (std::size_t j = 0; j < ny; ++j) u[j * nx + i] = v;
    }
    for (std::size_t j = 0; j < ny; ++j) {
        u[j * nx] = 0.0;
        u[j * nx + nx - 1] = 1.0;
    }

    FrontTrace trace;
    trace.dx = dx;
    trace.dt = dt;
    trace.min_u = 0.0;
    trace.max_u = 1.0;

    auto record = [&](double t) {
        const auto [lo, hi] = std::minmax_element(u.begin(), u.end());
        trace.min_u = std::min(trace.min_u, *lo);
        trace.max_u = std::max(trace.max_u, *hi);
        if (*lo < -1e-6 || *hi > 1.0 + 1e-6) {
            throw Error("oracle state left [0, 1]: min " + std::to_string(*lo) + ", max " +
                        std::to_string(*hi));
        }
        const double pos = detail::front_position(u, nx, ny, dx, cfg.front_level);
        double mass = 0.0;
        for (double v : u) mass += v;
        trace.times.push_back(t);
        trace.positions.push_back(pos);
        trace.mass_history.push_back(mass * dx * dy);
        const double margin = static_cast<double>(cfg.edge_cells) * dx;
        // A front pressed against x = 0 stalls with its level crossing just
        // outside the margin, so the state at the margin cell is checked too.
        double edge = 0.0;
        for (std::size_t j = 0; j < ny; ++j) edge = std::max(edge, u[j * nx + cfg.edge_cells]);
        if (pos < margin || pos > cfg.domain_length - margin || edge > 0.1 * cfg.front_level) {
            throw BoundaryContaminationError(
                "front at x = " + std::to_string(pos) + " is within " +
                    std::to_string(cfg.edge_cells) + " cells of the boundary at t = " +
                    std::to_string(t),
                trace);
        }
    };

    // y diffusion: the same cyclic system for every x, so it is solved for all
    // columns at once by Sherman-Morrison on top of a Thomas sweep.
    const double ry = dt / (dy * dy);
    const double rx = dt / (dx * dx);
    const double growth = std::exp(cfg.fprime0 * dt);

    std::vector<double> la(nx), lb(nx), lc(nx), rhs(nx), scratch(nx);
    std::vector<double> b_col;
    // Cyclic tridiagonal in y: diag 1 + 2 ry, off -ry. Modified diagonal for
    // Sherman-Morrison with gamma = -diag.
    const double diag = 1.0 + 2.0 * ry, off = -ry, gamma = -diag;
    std::vector<double> ya(ny, off), yb(ny, diag), yc(ny, off), ys(ny), z(ny, 0.0);
    yb[0] = diag - gamma;
    yb[ny - 1] = diag - off * off / gamma;
    z[0] = gamma;
    z[ny - 1] = off;
    detail::thomas(ya.data(), yb.data(), yc.data(), z.data(), ys, ny);
    const double zfac = 1.0 + z[0] + off / gamma * z[ny - 1];
    std::vector<double> col(ny);

    const auto steps = static_cast<long>(std::llround(cfg.t_final / dt));
    const auto every = std::max<long>(1, std::llround(cfg.sample_interval / dt));
    record(0.0);
    for (long n = 1; n <= steps; ++n) {
        const double t = dt * static_cast<double>(n);
        for (double& v : u) v = v * growth / (1.0 + v * (growth - 1.0));

        detail::shear_column(cfg, t, b_col);
        for (std::size_t j = 0; j < ny; ++j) {
            const double adv = b_col[j] * dt / (2.0 * dx);
            double* line = &u[j * nx];
            // Interior unknowns 1..nx-2; boundary values enter the rhs.
            const std::size_t m = nx - 2;
            for (std::size_t k = 0; k < m; ++k) {
                la[k] = -(rx - adv);
                lb[k] = 1.0 + 2.0 * rx;
                lc[k] = -(rx + adv);
                rhs[k] = line[k + 1];
            }
            rhs[0] += (rx - adv) * line[0];
            rhs[m - 1] += (rx + adv) * line[nx - 1];
            detail::thomas(la.data(), lb.data(), lc.data(), rhs.data(), scratch, m);
            std::copy(rhs.begin(), rhs.begin() + static_cast<long>(m), line + 1);
        }

        for (std::size_t i = 1; i + 1 < nx; ++i) {
            for (std::size_t j = 0; j < ny; ++j) col[j] = u[j * nx + i];
            detail::thomas(ya.data(), yb.data(), yc.data(), col.data(), ys, ny);
            const double f = (col[0] + off / gamma * col[ny - 1]) / zfac;
            for (std::size_t j = 0; j < ny; ++j) u[j * nx + i] = col[j] - f * z[j];
        }

        if (n % every == 0) record(t);
    }
    return trace;
}

struct SpeedEstimate {
    double speed = 0.0;  // negative when the front moves toward x = 0
    std::size_t samples = 0;
    /// Positions moved against the fitted direction by more than one cell.
    bool low_confidence = false;
};

/// Least-squares slope of position against time over the last `window`
/// fraction of the trace.
inline SpeedEstimate estimate_speed(const FrontTrace& trace, double window) {
    if (!(window > 0.0 && window <= 1.0)) throw DomainError("window must lie in (0, 1]");
    if (trace.times.empty()) throw InsufficientDataError("empty front trace");
    const double t_end = trace.times.back();
    const double t_start = trace.times.front();
    const double cut = t_end - window * (t_end - t_start);
    std::vector<double> t, x;
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
        if (trace.times[i] >= cut - 1e-12) {
            t.push_back(trace.times[i]);
            x.push_back(trace.positions[i]);
        }
    }
    if (t.size() < 10) {
        throw InsufficientDataError("speed fit needs 10 samples in the window, have " +
                                    std::to_string(t.size()));
    }
    const double k = static_cast<double>(t.size());
    double mt = 0.0, mx = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        mt += t[i];
        mx += x[i];
    }
    mt /= k;
    mx /= k;
    double stt = 0.0, stx = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        stt += (t[i] - mt) * (t[i] - mt);
        stx += (t[i] - mt) * (x[i] - mx);
    }
    SpeedEstimate est;
    est.speed = stx / stt;
    est.samples = t.size();
    const double dir = est.speed < 0.0 ? -1.0 : 1.0;
    const double tol = trace.dx > 0.0 ? trace.dx : 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (dir * (x[i] - x[i - 1]) < -tol) {
            est.low_confidence = true;
            break;
        }
    }
    return est;
}

inline void write_trace(std::ostream& out, const FrontTrace& trace) {
    out << "time,position\n";
    char buf[96];
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", trace.times[i], trace.positions[i]);
        out << buf;
    }
}

inline void write_trace(const FrontTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_trace(out, trace);
}

}  // namespace shearfront
