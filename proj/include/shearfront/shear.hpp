#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "shearfront/error.hpp"
#include "shearfront/spectral_grid.hpp"

namespace shearfront {

/// Node values of a shear on an n_y x n_tau grid, flat with y fastest.
struct ShearTable {
    std::size_t n_y = 0;
    std::size_t n_tau = 0;
    Eigen::VectorXd values;
};

/// Description of a shear b(y, tau).
///
/// The parametric family is b(y, tau) = delta sin(2 pi y) (1 + sin(2 pi freq tau))
/// on the unit cell. Anything else enters as a table of node values.
class ShearSpec {
public:
    enum class Kind { parametric, tabulated };

    static ShearSpec parametric(double delta, int freq) {
        if (!(delta >= 0.0) || !std::isfinite(delta)) {
            throw DomainError("shear amplitude delta must be finite and >= 0");
        }
        if (freq < 0) {
            throw DomainError("temporal frequency must be >= 0");
        }
        ShearSpec s;
        s.kind_ = Kind::parametric;
        s.delta_ = delta;
        s.freq_ = freq;
        return s;
    }

    static ShearSpec tabulated(ShearTable table) {
        GridSpec::validate_points(table.n_y, "table n_y");
        GridSpec::validate_points(table.n_tau, "table n_tau");
        if (static_cast<std::size_t>(table.values.size()) != table.n_y * table.n_tau) {
            throw DimensionMismatchError("shear table has " + std::to_string(table.values.size()) +
                                         " values for a " + std::to_string(table.n_y) + "x" +
                                         std::to_string(table.n_tau) + " grid");
        }
        ShearSpec s;
        s.kind_ = Kind::tabulated;
        s.table_ = std::move(table);
        return s;
    }

    Kind kind() const noexcept { return kind_; }
    double delta() const noexcept { return delta_; }
    int freq() const noexcept { return freq_; }
    const ShearTable& table() const noexcept { return table_; }

    /// Analytic value; only meaningful for the parametric kind.
    double evaluate(double y, double tau) const {
        const double two_pi = 2.0 * std::numbers::pi;
        return delta_ * std::sin(two_pi * y) *
               (1.0 + std::sin(two_pi * static_cast<double>(freq_) * tau));
    }

private:
    Kind kind_ = Kind::parametric;
    double delta_ = 0.0;
    int freq_ = 0;
    ShearTable table_;
};

/// Shear sampled on a grid.
class ShearField {
public:
    ShearField(GridSpec grid, Eigen::VectorXd values, ShearSpec source)
        : grid_(grid), values_(std::move(values)), source_(std::move(source)) {
        if (static_cast<std::size_t>(values_.size()) != grid_.size()) {
            throw DimensionMismatchError("shear field length does not match grid " +
                                         to_string(grid_));
        }
        if (!values_.allFinite()) {
            throw DomainError("shear field contains non-finite values");
        }
    }

    const GridSpec& grid() const noexcept { return grid_; }
    const Eigen::VectorXd& values() const noexcept { return values_; }
    const ShearSpec& source() const noexcept { return source_; }

    double at(std::size_t i_y, std::size_t i_tau) const {
        return values_(static_cast<Eigen::Index>(flatten_index(grid_, i_y, i_tau)));
    }

    double max_abs() const { return values_.cwiseAbs().maxCoeff(); }

private:
    GridSpec grid_;
    Eigen::VectorXd values_;
    ShearSpec source_;
};

inline ShearField sample(const ShearSpec& spec, const GridSpec& grid) {
    Eigen::VectorXd values(static_cast<Eigen::Index>(grid.size()));
    if (spec.kind() == ShearSpec::Kind::tabulated) {
        const auto& t = spec.table();
        if (t.n_y != grid.n_y() || t.n_tau != grid.n_tau()) {
            throw DimensionMismatchError("tabulated shear is " + std::to_string(t.n_y) + "x" +
                                         std::to_string(t.n_tau) + " but grid is " +
                                         to_string(grid));
        }
        values = t.values;
    } else {
        for (std::size_t it = 0; it < grid.n_tau(); ++it) {
            for (std::size_t iy = 0; iy < grid.n_y(); ++iy) {
                values(static_cast<Eigen::Index>(flatten_index(grid, iy, it))) =
                    spec.evaluate(grid.y(iy), grid.tau(it));
            }
        }
    }
    return ShearField(grid, std::move(values), spec);
}

/// Shear given as a tabulated field built from grid values.
inline ShearField tabulated_field(const GridSpec& grid, Eigen::VectorXd values) {
    ShearTable table{grid.n_y(), grid.n_tau(), values};
    return ShearField(grid, std::move(values), ShearSpec::tabulated(std::move(table)));
}

/// Grid average of the field (exact trapezoid rule on a periodic uniform grid).
inline double mean_over_cell(const ShearField& field) { return field.values().mean(); }

/// Discrete integral of |d b / d y|^2 over the cell. Values below
/// kDegenerateThreshold mean the shear is degenerate.
inline double check_nondegenerate(const ShearField& field) {
    const auto& g = field.grid();
    const auto ny = static_cast<Eigen::Index>(g.n_y());
    const auto nt = static_cast<Eigen::Index>(g.n_tau());
    const DiffMatrix dy = first_derivative_matrix(g.n_y(), g.period_y());
    // Columns are tau slices.
    const Eigen::Map<const Eigen::MatrixXd> b(field.values().data(), ny, nt);
    const Eigen::MatrixXd db = dy.entries() * b;
    return db.squaredNorm() * g.h_y() * g.h_tau();
}

inline constexpr double kDegenerateThreshold = 1e-12;

inline bool is_degenerate(const ShearField& field) {
    return check_nondegenerate(field) < kDegenerateThreshold;
}

/// Field constant in tau whose y profile is the tau average of the input.
inline ShearField time_average(const ShearField& field) {
    const auto& g = field.grid();
    const auto ny = static_cast<Eigen::Index>(g.n_y());
    const auto nt = static_cast<Eigen::Index>(g.n_tau());
    const Eigen::Map<const Eigen::MatrixXd> b(field.values().data(), ny, nt);
    const Eigen::VectorXd profile = b.rowwise().mean();
    Eigen::MatrixXd avg = profile.replicate(1, nt);
    return tabulated_field(g, Eigen::Map<Eigen::VectorXd>(avg.data(), ny * nt));
}

/// Cyclic shift by (shift_y, shift_tau) grid cells.
inline ShearField cyclic_shift(const ShearField& field, std::size_t shift_y, std::size_t shift_tau) {
    const auto& g = field.grid();
    Eigen::VectorXd out(field.values().size());
    for (std::size_t it = 0; it < g.n_tau(); ++it) {
        for (std::size_t iy = 0; iy < g.n_y(); ++iy) {
            const std::size_t sy = (iy + shift_y) % g.n_y();
            const std::size_t st = (it + shift_tau) % g.n_tau();
            out(static_cast<Eigen::Index>(flatten_index(g, sy, st))) = field.at(iy, it);
        }
    }
    return tabulated_field(g, std::move(out));
}

/// Reads a tabulated shear from CSV with header `i_y,i_tau,value`.
/// Every node must appear exactly once.
inline ShearSpec read_shear_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) {
        throw ParseError("empty shear CSV", 1);
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "i_y,i_tau,value") {
        throw ParseError("expected header 'i_y,i_tau,value'", line_no);
    }
    struct Entry {
        std::size_t iy, it;
        double v;
    };
    std::vector<Entry> entries;
    std::size_t ny = 0, nt = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string a, b, c, extra;
        if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c, ',') ||
            std::getline(row, extra, ',')) {
            throw ParseError("expected 3 columns", line_no);
        }
        try {
            std::size_t pos = 0;
            const long iy = std::stol(a, &pos);
            if (pos != a.size() || iy < 0) throw std::invalid_argument(a);
            const long it = std::stol(b, &pos);
            if (pos != b.size() || it < 0) throw std::invalid_argument(b);
            const double v = std::stod(c, &pos);
            if (pos != c.size()) throw std::invalid_argument(c);
            entries.push_back({static_cast<std::size_t>(iy), static_cast<std::size_t>(it), v});
            ny = std::max(ny, static_cast<std::size_t>(iy) + 1);
            nt = std::max(nt, static_cast<std::size_t>(it) + 1);
        } catch (const std::logic_error&) {
            throw ParseError("malformed shear row '" + line + "'", line_no);
        }
    }
    if (entries.size() != ny * nt) {
        throw ParseError("shear CSV does not cover a full " + std::to_string(ny) + "x" +
                             std::to_string(nt) + " grid",
                         line_no);
    }
    ShearTable table{ny, nt, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(ny * nt), NAN)};
    for (const auto& e : entries) {
        auto& slot = table.values(static_cast<Eigen::Index>(e.it * ny + e.iy));
        if (!std::isnan(slot)) {
            throw ParseError("duplicate node (" + std::to_string(e.iy) + ", " +
                                 std::to_string(e.it) + ")",
                             line_no);
        }
        slot = e.v;
    }
    return ShearSpec::tabulated(std::move(table));
}

inline ShearSpec read_shear_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open shear file " + path);
    return read_shear_csv(in);
}

inline void write_shear_csv(std::ostream& out, const ShearField& field) {
    const auto& g = field.grid();
    out << "i_y,i_tau,value\n";
    char buf[64];
    for (std::size_t it = 0; it < g.n_tau(); ++it) {
        for (std::size_t iy = 0; iy < g.n_y(); ++iy) {
            std::snprintf(buf, sizeof buf, "%.17g", field.at(iy, it));
            out << iy << ',' << it << ',' << buf << '\n';
        }
    }
}

}  // namespace shearfront
