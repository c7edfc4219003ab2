#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "shearfront/eigensolver.hpp"
#include "shearfront/error.hpp"
#include "shearfront/shear.hpp"
#include "shearfront/spectral_grid.hpp"

namespace shearfront {

/// Outcome of minimizing h(lambda) = mu(lambda) / lambda.
struct SpeedResult {
    double c_star = 0.0;
    double lambda_star = 0.0;
    double h_star = 0.0;  // = -c_star = mu_at_star / lambda_star
    int iterations = 0;
    bool converged = false;
    double mu_at_star = 0.0;
    GridSpec grid{4, 4};
    ShearSpec shear;

    double gradient = 0.0;        // h'(lambda_star) from the eigenvectors
    double gradient_fd = 0.0;     // central-difference h'(lambda_star), step fd_step
    double residual = 0.0;        // max |A phi - mu phi| of the validating eigenpair
    double identity_error = 0.0;  // |mu - weighted potential average|
    bool used_golden = false;
    std::vector<double> h_history;  // h at each accepted iterate
    std::vector<std::string> warnings;
};

struct MinimizeOptions {
    double grad_tol = 1e-8;
    double step_tol = 1e-8;
    int max_iterations = 100;
    int max_halvings = 30;
    double bracket_lo = 1e-3;
    double bracket_hi = 50.0;
    /// Starting iterate; nonpositive means sqrt(f'(0)).
    double lambda0 = 0.0;
    /// Recompute the eigenpair at lambda* from the full dense spectrum.
    bool validate_dense = true;
    EigenOptions eigen{EigenOptions::Method::shift_invert};
};

inline double fd_step(double lambda) { return std::max(1e-5, 1e-5 * lambda); }

/// h(lambda) = mu(lambda) / lambda for one shear; reuses the lambda-free part
/// of the operator across calls.
class HFunction {
public:
    HFunction(const ShearField& field, const GridSpec& grid, double fprime0,
              EigenOptions eigen = {EigenOptions::Method::shift_invert})
        : op_(check_grid(field, grid)), fprime0_(fprime0), eigen_(eigen) {
        if (!(fprime0 > 0.0) || !std::isfinite(fprime0)) {
            throw DomainError("f'(0) must be positive and finite");
        }
    }

    double operator()(double lambda) const { return mu(lambda) / lambda; }

    /// h without the dense fallback; throws where shift-invert cannot certify.
    double probe(double lambda) const {
        EigenOptions quick = eigen_;
        quick.dense_fallback = false;
        ++evaluations_;
        return principal_eigenpair(op_.speed_operator(lambda, fprime0_), quick).mu / lambda;
    }

    double mu(double lambda) const {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) {
            throw DomainError("lambda must be positive, got " + std::to_string(lambda));
        }
        ++evaluations_;
        return principal_eigenpair(op_.speed_operator(lambda, fprime0_), eigen_).mu;
    }

    EigenPair pair(double lambda, const EigenOptions& opts) const {
        return principal_eigenpair(op_.speed_operator(lambda, fprime0_), opts);
    }

    struct Sample {
        double h = 0.0;
        double slope = 0.0;  // dh/dlambda from the left/right eigenvectors
        double noise = 0.0;  // roundoff level of h
    };

    /// h and its exact derivative (lambda mu' - mu) / lambda^2, where
    /// mu' = psi^T (2 lambda + b) phi / psi^T phi.
    Sample sample(double lambda) const {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) {
            throw DomainError("lambda must be positive, got " + std::to_string(lambda));
        }
        ++evaluations_;
        const OperatorMatrix op = op_.speed_operator(lambda, fprime0_);
        const EigenPair p = principal_eigenpair(op, eigen_);
        const Eigen::VectorXd dpot = (2.0 * lambda) + op_.field().values().array();
        const double dmu = eigenvalue_derivative(op, p, dpot);
        return {p.mu / lambda, (lambda * dmu - p.mu) / (lambda * lambda),
                detail::residual_tolerance(op.entries) / lambda};
    }

    OperatorMatrix speed_operator(double lambda) const {
        return op_.speed_operator(lambda, fprime0_);
    }

    double fprime0() const noexcept { return fprime0_; }
    long evaluations() const noexcept { return evaluations_; }

private:
    static const ShearField& check_grid(const ShearField& field, const GridSpec& grid) {
        if (!(field.grid() == grid)) {
            throw DimensionMismatchError("shear sampled on " + to_string(field.grid()) +
                                         " but operator grid is " + to_string(grid));
        }
        return field;
    }

    LinearizedOperator op_;
    double fprime0_;
    EigenOptions eigen_;
    mutable long evaluations_ = 0;
};

inline double h(const ShearField& field, const GridSpec& grid, double lambda, double fprime0,
                const EigenOptions& opts = {}) {
    if (!(lambda > 0.0)) {
        throw DomainError("lambda must be positive, got " + std::to_string(lambda));
    }
    return HFunction(field, grid, fprime0, opts)(lambda);
}

namespace detail {

/// Central-difference h'(lambda) with step fd_step(lambda).
inline double fd_gradient(const HFunction& hf, double lambda) {
    const double s = fd_step(lambda);
    return (hf(lambda + s) - hf(lambda - s)) / (2.0 * s);
}

/// Second difference of h with a step wide enough that roundoff in h stays
/// well below the curvature signal.
inline double curvature(const HFunction& hf, double lambda, double h0) {
    const double s = 1e-3 * lambda;
    return (hf(lambda + s) - 2.0 * h0 + hf(lambda - s)) / (s * s);
}

/// Value of h, or +inf where the eigensolver cannot certify a principal pair
/// (large lambda times amplitude on a coarse grid). With `quick` the dense
/// fallback is skipped, which only matters for cost.
inline double h_or_inf(const HFunction& hf, double lambda, bool quick = false) {
    try {
        return quick ? hf.probe(lambda) : hf(lambda);
    } catch (const PositivityViolationError&) {
        return std::numeric_limits<double>::infinity();
    } catch (const ComplexPrincipalError&) {
        return std::numeric_limits<double>::infinity();
    }
}

inline std::pair<double, double> golden_section(const HFunction& hf, double lo, double hi,
                                                double xtol, int& evals) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double x1 = b - r * (b - a), x2 = a + r * (b - a);
    double f1 = h_or_inf(hf, x1, true), f2 = h_or_inf(hf, x2, true);
    evals += 2;
    while (b - a > xtol * (1.0 + std::abs(a))) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = h_or_inf(hf, x1, true);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = h_or_inf(hf, x2, true);
        }
        ++evals;
    }
    return f1 <= f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

}  // namespace detail

/// Minimizes h over lambda > 0 by safeguarded Newton iteration.
///
/// The slope comes from the left and right principal eigenvectors and the
/// curvature from a second difference of h. Accepted steps satisfy an Armijo
/// decrease, relaxed by the roundoff level of h so that the endgame is not
/// decided by noise. If the line search fails away from a stationary point, a
/// golden-section search on [bracket_lo, bracket_hi] relocates the iterate
/// and Newton resumes; h is unimodal on lambda > 0, so this cannot miss the
/// minimum.
inline SpeedResult minimize_h(const ShearField& field, const GridSpec& grid, double fprime0,
                              const MinimizeOptions& opts = {}) {
    const HFunction hf(field, grid, fprime0, opts.eigen);
    SpeedResult out;
    out.grid = grid;
    out.shear = field.source();
    const double mean = mean_over_cell(field);
    if (std::abs(mean) > 1e-10) {
        out.warnings.push_back("shear mean " + std::to_string(mean) + " is not zero");
    }

    const double lo = opts.bracket_lo;
    const double hi = opts.bracket_hi;
    double lambda = opts.lambda0 > 0.0 ? opts.lambda0 : std::sqrt(fprime0);
    lambda = std::clamp(lambda, lo, hi);
    HFunction::Sample cur;
    bool golden_done = false;
    auto relocate = [&] {
        int evals = 0;
        const double x = detail::golden_section(hf, lo, hi, 1e-5, evals).first;
        golden_done = true;
        out.used_golden = true;
        return x;
    };
    try {
        cur = hf.sample(lambda);
    } catch (const PositivityViolationError&) {
        lambda = relocate();
        cur = hf.sample(lambda);
    } catch (const ComplexPrincipalError&) {
        lambda = relocate();
        cur = hf.sample(lambda);
    }
    double best_lambda = lambda, best_h = cur.h;
    out.h_history.push_back(cur.h);
    int iter = 0;

    for (; iter < opts.max_iterations; ++iter) {
        const double hc = cur.h;
        const double g = cur.slope;
        const double c2 = detail::curvature(hf, lambda, hc);
        double step = c2 > 0.0 ? -g / c2 : (g > 0.0 ? -0.5 : 0.5) * lambda;
        if (std::abs(g) < opts.grad_tol && std::abs(step) < opts.step_tol) {
            out.converged = true;
            break;
        }
        // Stay inside the bracket and within a factor 4 of the current iterate.
        step = std::clamp(step, std::max(lo, 0.25 * lambda) - lambda,
                          std::min(hi, 4.0 * lambda) - lambda);

        bool accepted = false;
        double t = 1.0;
        for (int k = 0; k <= opts.max_halvings; ++k, t *= 0.5) {
            const double trial = lambda + t * step;
            const double ht = detail::h_or_inf(hf, trial);
            if (ht <= hc + 1e-4 * t * g * step + cur.noise) {
                lambda = trial;
                cur = hf.sample(lambda);
                accepted = true;
                break;
            }
        }
        if (accepted) {
            out.h_history.push_back(cur.h);
            if (cur.h < best_h) {
                best_h = cur.h;
                best_lambda = lambda;
            }
            continue;
        }
        if (golden_done) break;
        const double x = relocate();
        if (detail::h_or_inf(hf, x) < hc) {
            lambda = x;
            cur = hf.sample(lambda);
            out.h_history.push_back(cur.h);
            best_lambda = lambda;
            best_h = cur.h;
        }
    }
    if (!out.converged) {
        throw NonConvergenceError("minimization of h did not converge in " +
                                      std::to_string(iter) + " iterations (|h'| = " +
                                      std::to_string(std::abs(cur.slope)) + ")",
                                  best_lambda, best_h);
    }

    out.iterations = iter;
    out.lambda_star = lambda;
    out.gradient = cur.slope;
    out.gradient_fd = detail::fd_gradient(hf, lambda);
    EigenOptions check = opts.eigen;
    if (opts.validate_dense) check.method = EigenOptions::Method::dense_spectrum;
    const OperatorMatrix op = hf.speed_operator(lambda);
    const EigenPair p = principal_eigenpair(op, check);
    if (std::abs(p.mu - cur.h * lambda) > 1e-9 * (1.0 + std::abs(p.mu))) {
        out.warnings.push_back("dense validation moved mu by " +
                               std::to_string(p.mu - cur.h * lambda));
    }
    out.mu_at_star = p.mu;
    out.h_star = p.mu / lambda;
    out.c_star = -out.h_star;
    out.residual = p.residual;
    out.identity_error = std::abs(p.mu - weighted_potential(op, p.vector));
    return out;
}

/// Speed-up over the analytic zero-shear speed: |c*| - 2 sqrt(f'(0)).
inline double enhancement(const SpeedResult& result, double fprime0) {
    return -2.0 * std::sqrt(fprime0) - result.c_star;
}

/// n points spaced evenly in log between a and b (inclusive).
inline std::vector<double> log_spaced(double a, double b, int n) {
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double t = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
        out[static_cast<std::size_t>(i)] = std::exp(std::log(a) + t * (std::log(b) - std::log(a)));
    }
    return out;
}

/// lo, lo + step, ... up to hi (inclusive within half a step).
inline std::vector<double> linear_spaced(double lo, double hi, double step) {
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 0.5));
    for (long i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
    return out;
}

inline std::vector<double> scan_h(const HFunction& hf, const std::vector<double>& lambdas) {
    std::vector<double> out;
    out.reserve(lambdas.size());
    for (double l : lambdas) out.push_back(hf(l));
    return out;
}

/// Number of sign changes in the discrete slope of `values`; differences
/// with magnitude <= tol count as flat and are skipped.
inline int slope_sign_changes(const std::vector<double>& values, double tol = 1e-9) {
    int changes = 0;
    int last = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        const double d = values[i] - values[i - 1];
        if (std::abs(d) <= tol) continue;
        const int s = d > 0.0 ? 1 : -1;
        if (last != 0 && s != last) ++changes;
        last = s;
    }
    return changes;
}

struct ScanMinimum {
    double lambda = 0.0;
    double h = 0.0;
    std::size_t index = 0;
};

inline ScanMinimum scan_minimum(const std::vector<double>& lambdas,
                                const std::vector<double>& values) {
    const auto it = std::min_element(values.begin(), values.end());
    const auto i = static_cast<std::size_t>(it - values.begin());
    return {lambdas[i], *it, i};
}

}  // namespace shearfront
