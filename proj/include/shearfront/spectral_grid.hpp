#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>

#include "shearfront/error.hpp"

namespace shearfront {

/// Uniform periodic collocation grid on the (y, tau) cell.
///
/// Node j in y sits at y_j = j * h_y, j = 0..n_y-1 (likewise in tau). Values
/// on the grid are stored flat with y varying fastest, so the flat index of
/// (i_y, i_tau) is i_tau * n_y + i_y. Operators built on this layout act as
/// I_tau (x) M_y on the y direction and M_tau (x) I_y on the tau direction.
class GridSpec {
public:
    GridSpec(std::size_t n_y, std::size_t n_tau, double period_y = 1.0, double period_tau = 1.0)
        : n_y_(n_y), n_tau_(n_tau), period_y_(period_y), period_tau_(period_tau) {
        validate_points(n_y, "n_y");
        validate_points(n_tau, "n_tau");
        validate_period(period_y, "period_y");
        validate_period(period_tau, "period_tau");
    }

    /// Square n x n grid on the unit cell.
    static GridSpec square(std::size_t n) { return GridSpec(n, n); }

    std::size_t n_y() const noexcept { return n_y_; }
    std::size_t n_tau() const noexcept { return n_tau_; }
    double period_y() const noexcept { return period_y_; }
    double period_tau() const noexcept { return period_tau_; }
    double h_y() const noexcept { return period_y_ / static_cast<double>(n_y_); }
    double h_tau() const noexcept { return period_tau_ / static_cast<double>(n_tau_); }
    std::size_t size() const noexcept { return n_y_ * n_tau_; }

    double y(std::size_t i_y) const noexcept { return static_cast<double>(i_y) * h_y(); }
    double tau(std::size_t i_tau) const noexcept { return static_cast<double>(i_tau) * h_tau(); }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;

    static void validate_points(std::size_t n, const char* name) {
        if (n < 4 || n % 2 != 0) {
            throw InvalidGridError(std::string(name) + " must be even and >= 4, got " +
                                   std::to_string(n));
        }
    }

    static void validate_period(double period, const char* name) {
        if (!(period > 0.0) || !std::isfinite(period)) {
            throw InvalidGridError(std::string(name) + " must be positive and finite");
        }
    }

private:
    std::size_t n_y_;
    std::size_t n_tau_;
    double period_y_;
    double period_tau_;
};

inline std::string to_string(const GridSpec& grid) {
    return std::to_string(grid.n_y()) + "x" + std::to_string(grid.n_tau());
}

/// Flat storage index of node (i_y, i_tau); y is the fastest-varying index.
inline std::size_t flatten_index(const GridSpec& grid, std::size_t i_y, std::size_t i_tau) {
    if (i_y >= grid.n_y() || i_tau >= grid.n_tau()) {
        throw IndexError("grid index (" + std::to_string(i_y) + ", " + std::to_string(i_tau) +
                         ") outside " + to_string(grid));
    }
    return i_tau * grid.n_y() + i_y;
}

/// Inverse of flatten_index; returns (i_y, i_tau).
inline std::pair<std::size_t, std::size_t> unflatten_index(const GridSpec& grid, std::size_t flat) {
    if (flat >= grid.size()) {
        throw IndexError("flat index " + std::to_string(flat) + " outside " + to_string(grid));
    }
    return {flat % grid.n_y(), flat / grid.n_y()};
}

/// Dense Fourier collocation differentiation matrix for period-periodic data.
class DiffMatrix {
public:
    DiffMatrix(int order, double period, Eigen::MatrixXd entries)
        : order_(order), period_(period), entries_(std::move(entries)) {}

    int order() const noexcept { return order_; }
    double period() const noexcept { return period_; }
    Eigen::Index size() const noexcept { return entries_.rows(); }
    const Eigen::MatrixXd& entries() const noexcept { return entries_; }

    Eigen::VectorXd apply(const Eigen::VectorXd& samples) const {
        if (samples.size() != entries_.cols()) {
            throw DimensionMismatchError("differentiation matrix of size " +
                                         std::to_string(entries_.cols()) +
                                         " applied to vector of length " +
                                         std::to_string(samples.size()));
        }
        return entries_ * samples;
    }

private:
    int order_;
    double period_;
    Eigen::MatrixXd entries_;
};

namespace detail {

inline void check_diff_args(std::size_t n, double period) {
    GridSpec::validate_points(n, "n");
    GridSpec::validate_period(period, "period");
}

inline double alternating_sign(long k) { return (k % 2 == 0) ? 1.0 : -1.0; }

}  // namespace detail

/// First-derivative collocation matrix (even n).
///
/// On [0, 2pi) the entries are 0 on the diagonal and
/// 1/2 (-1)^(i-j) cot((i-j) h / 2) off it, h = 2pi/n; the result is scaled by
/// 2pi/period.
inline DiffMatrix first_derivative_matrix(std::size_t n, double period = 1.0) {
    detail::check_diff_args(n, period);
    const double h = 2.0 * std::numbers::pi / static_cast<double>(n);
    const double scale = 2.0 * std::numbers::pi / period;
    const auto size = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(size, size);
    for (Eigen::Index i = 0; i < size; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            const long k = static_cast<long>(i - j);
            const double v =
                0.5 * detail::alternating_sign(k) / std::tan(static_cast<double>(k) * h / 2.0);
            d(i, j) = scale * v;
            d(j, i) = -scale * v;
        }
    }
    return DiffMatrix(1, period, std::move(d));
}

/// Second-derivative collocation matrix (even n).
///
/// On [0, 2pi) the diagonal is -pi^2/(3h^2) - 1/6 and the off-diagonal
/// entries are -(-1)^(i-j) / (2 sin^2((i-j) h / 2)); scaled by (2pi/period)^2.
inline DiffMatrix second_derivative_matrix(std::size_t n, double period = 1.0) {
    detail::check_diff_args(n, period);
    const double pi = std::numbers::pi;
    const double h = 2.0 * pi / static_cast<double>(n);
    const double scale = std::pow(2.0 * pi / period, 2);
    const auto size = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd d(size, size);
    const double diag = -pi * pi / (3.0 * h * h) - 1.0 / 6.0;
    for (Eigen::Index i = 0; i < size; ++i) {
        d(i, i) = scale * diag;
        for (Eigen::Index j = 0; j < i; ++j) {
            const long k = static_cast<long>(i - j);
            const double s = std::sin(static_cast<double>(k) * h / 2.0);
            const double v = -detail::alternating_sign(k) / (2.0 * s * s);
            d(i, j) = scale * v;
            d(j, i) = scale * v;
        }
    }
    return DiffMatrix(2, period, std::move(d));
}

}  // namespace shearfront
