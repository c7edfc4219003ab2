#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "shearfront/error.hpp"
#include "shearfront/shear.hpp"
#include "shearfront/spectral_grid.hpp"

extern "C" {
// LAPACK general nonsymmetric eigenvalue driver.
void dgeev_(const char* jobvl, const char* jobvr, const int* n, double* a, const int* lda,
            double* wr, double* wi, double* vl, const int* ldvl, double* vr, const int* ldvr,
            double* work, const int* lwork, int* info);
}

namespace shearfront {

/// Dense discretization of  Delta_y - d_tau + diag(potential)  on a grid.
///
/// For the speed problem the potential is lambda^2 + f'(0) + lambda b; for the
/// auxiliary problem it is lambda (b + c).
struct OperatorMatrix {
    enum class Kind { speed, auxiliary };

    Eigen::MatrixXd entries;
    Eigen::VectorXd potential;
    double lambda = 0.0;
    double fprime0 = 0.0;  // unused for Kind::auxiliary
    double c = 0.0;        // only for Kind::auxiliary
    Kind kind = Kind::speed;
    GridSpec grid;
};

/// I_tau (x) D2_y - D_tau (x) I_y under the y-fastest layout.
inline Eigen::MatrixXd transport_diffusion_matrix(const GridSpec& grid) {
    const auto ny = static_cast<Eigen::Index>(grid.n_y());
    const auto nt = static_cast<Eigen::Index>(grid.n_tau());
    const Eigen::MatrixXd d2y = second_derivative_matrix(grid.n_y(), grid.period_y()).entries();
    const Eigen::MatrixXd dt = first_derivative_matrix(grid.n_tau(), grid.period_tau()).entries();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(ny * nt, ny * nt);
    for (Eigen::Index bt = 0; bt < nt; ++bt) {
        a.block(bt * ny, bt * ny, ny, ny) = d2y;
        for (Eigen::Index ct = 0; ct < nt; ++ct) {
            const double w = dt(bt, ct);
            if (w == 0.0) continue;
            for (Eigen::Index k = 0; k < ny; ++k) a(bt * ny + k, ct * ny + k) -= w;
        }
    }
    return a;
}

/// Holds the shear-independent part of the operator for one field so that
/// repeated assemblies over lambda reuse it.
class LinearizedOperator {
public:
    explicit LinearizedOperator(ShearField field)
        : field_(std::move(field)), base_(transport_diffusion_matrix(field_.grid())) {}

    const ShearField& field() const noexcept { return field_; }
    const GridSpec& grid() const noexcept { return field_.grid(); }

    OperatorMatrix speed_operator(double lambda, double fprime0) const {
        if (!std::isfinite(lambda)) throw DomainError("lambda must be finite");
        if (!(fprime0 > 0.0) || !std::isfinite(fprime0)) {
            throw DomainError("f'(0) must be positive and finite");
        }
        Eigen::VectorXd pot = (lambda * lambda + fprime0) + lambda * field_.values().array();
        OperatorMatrix op{base_, std::move(pot), lambda, fprime0, 0.0,
                          OperatorMatrix::Kind::speed, grid()};
        op.entries.diagonal() += op.potential;
        return op;
    }

    OperatorMatrix auxiliary_operator(double lambda, double c) const {
        if (!std::isfinite(lambda) || !std::isfinite(c)) {
            throw DomainError("lambda and c must be finite");
        }
        Eigen::VectorXd pot = lambda * (field_.values().array() + c);
        OperatorMatrix op{base_, std::move(pot), lambda, 0.0, c,
                          OperatorMatrix::Kind::auxiliary, grid()};
        op.entries.diagonal() += op.potential;
        return op;
    }

private:
    ShearField field_;
    Eigen::MatrixXd base_;
};

inline OperatorMatrix assemble(const GridSpec& grid, const ShearField& field, double lambda,
                               double fprime0) {
    if (!(field.grid() == grid)) {
        throw DimensionMismatchError("shear sampled on " + to_string(field.grid()) +
                                     " but operator grid is " + to_string(grid));
    }
    return LinearizedOperator(field).speed_operator(lambda, fprime0);
}

/// Principal eigenvalue with its positive eigenvector.
struct EigenPair {
    double mu = 0.0;
    Eigen::VectorXd vector;  // strictly positive, unit sum
    double residual = 0.0;   // max |A v - mu v| with v as stored
    /// mu minus the next real eigenvalue below it; NaN when the spectrum was not computed.
    double spectral_gap = std::numeric_limits<double>::quiet_NaN();
};

struct EigenOptions {
    enum class Method {
        /// Full dense spectrum (LAPACK), then eigenvector by inverse iteration.
        dense_spectrum,
        /// Shift-invert iteration from a shift above the principal eigenvalue.
        /// Falls back to dense_spectrum if it cannot certify a positive vector.
        shift_invert,
    };
    Method method = Method::dense_spectrum;
    double imag_tol = 1e-8;
    double positivity_floor = 1e-12;
    /// Real eigenvalues within this relative distance of the largest real part
    /// are candidates for the principal one.
    double top_window = 1e-2;
    int max_power_iterations = 1000;
    /// Whether shift_invert retries with dense_spectrum when it cannot certify.
    bool dense_fallback = true;
};

namespace detail {

/// All eigenvalues of a dense real matrix.
inline std::vector<std::complex<double>> dense_eigenvalues(Eigen::MatrixXd a) {
    const int n = static_cast<int>(a.rows());
    std::vector<double> wr(static_cast<std::size_t>(n)), wi(static_cast<std::size_t>(n));
    const char no = 'N';
    const int one = 1;
    int info = 0;
    int lwork = -1;
    double query = 0.0;
    dgeev_(&no, &no, &n, a.data(), &n, wr.data(), wi.data(), nullptr, &one, nullptr, &one, &query,
           &lwork, &info);
    lwork = std::max(1, static_cast<int>(query));
    std::vector<double> work(static_cast<std::size_t>(lwork));
    dgeev_(&no, &no, &n, a.data(), &n, wr.data(), wi.data(), nullptr, &one, nullptr, &one,
           work.data(), &lwork, &info);
    if (info != 0) {
        throw Error("dgeev failed with info = " + std::to_string(info));
    }
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = {wr[i], wi[i]};
    return out;
}

struct Refined {
    double mu = 0.0;
    Eigen::VectorXd v;  // unit sum
    double scaled_residual = std::numeric_limits<double>::infinity();
};

/// Removes the tau-Nyquist component (-1)^i_tau g(y) from v.
///
/// The even-n first-derivative matrix annihilates that pattern, so for a
/// tau-independent potential s * phi is an exact eigenvector with the same
/// eigenvalue as phi. Filtering keeps iterates out of that copy.
inline void remove_tau_nyquist(const GridSpec& grid, Eigen::VectorXd& v) {
    const auto ny = static_cast<Eigen::Index>(grid.n_y());
    const auto nt = static_cast<Eigen::Index>(grid.n_tau());
    Eigen::Map<Eigen::MatrixXd> m(v.data(), ny, nt);
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(ny);
    for (Eigen::Index t = 0; t < nt; ++t) coef += (t % 2 == 0 ? 1.0 : -1.0) * m.col(t);
    coef /= static_cast<double>(nt);
    for (Eigen::Index t = 0; t < nt; ++t) m.col(t) -= (t % 2 == 0 ? 1.0 : -1.0) * coef;
}

/// Inverse iteration with a fixed shift, started from `start`.
///
/// The eigenvalue estimate mu = shift + sum(v) / sum(w) uses the sum
/// functional, the same one that normalizes the vector. Iterates are
/// tau-Nyquist filtered first; if the filtered vector does not reach `tol`,
/// unfiltered steps restore the small Nyquist content of the true vector.
inline Refined inverse_iteration(const OperatorMatrix& op, double shift, Eigen::VectorXd start,
                                 int max_iter, double tol) {
    const Eigen::MatrixXd& a = op.entries;
    Eigen::MatrixXd shifted = a;
    shifted.diagonal().array() -= shift;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(shifted);

    auto run = [&](Eigen::VectorXd v, bool filter) {
        Refined best;
        if (filter) remove_tau_nyquist(op.grid, v);
        v /= v.sum();
        double prev = std::numeric_limits<double>::infinity();
        int stalled = 0;
        for (int it = 0; it < max_iter; ++it) {
            Eigen::VectorXd w = lu.solve(v);
            if (filter) remove_tau_nyquist(op.grid, w);
            const double sw = w.sum();
            if (!std::isfinite(sw) || sw == 0.0) break;
            const double mu = shift + v.sum() / sw;
            v = w / sw;
            const double res = (a * v - mu * v).cwiseAbs().maxCoeff() / v.cwiseAbs().maxCoeff();
            if (res < best.scaled_residual) best = {mu, v, res};
            if (res <= tol) break;
            stalled = (res > 0.5 * prev) ? stalled + 1 : 0;
            if (stalled >= 3 && it > 6) break;
            prev = res;
        }
        return best;
    };

    Refined filtered = run(std::move(start), true);
    if (filtered.scaled_residual <= tol || filtered.v.size() == 0) return filtered;
    Refined polished = run(filtered.v, false);
    return polished.scaled_residual < filtered.scaled_residual ? polished : filtered;
}

/// Flip so the largest-magnitude entry is positive, scale to unit sum, and
/// return the smallest entry.
inline double sign_normalize(Eigen::VectorXd& v) {
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0.0) v = -v;
    const double s = v.sum();
    if (s > 0.0) v /= s;
    return v.minCoeff();
}

inline double residual_tolerance(const Eigen::MatrixXd& a) {
    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    return 64.0 * std::numeric_limits<double>::epsilon() * norm;
}

inline EigenPair finish(const OperatorMatrix& op, Refined r, double gap) {
    EigenPair p;
    p.mu = r.mu;
    p.vector = std::move(r.v);
    p.residual = (op.entries * p.vector - p.mu * p.vector).cwiseAbs().maxCoeff();
    p.spectral_gap = gap;
    return p;
}

inline void require_small_residual(const EigenPair& p) {
    if (!(p.residual < 1e-8 * (1.0 + std::abs(p.mu)))) {
        throw Error("principal eigenpair residual " + std::to_string(p.residual) +
                    " exceeds tolerance");
    }
}

inline EigenPair principal_dense(const OperatorMatrix& op, const EigenOptions& opts) {
    const auto eig = dense_eigenvalues(op.entries);
    double top_re = -std::numeric_limits<double>::infinity();
    for (const auto& z : eig) top_re = std::max(top_re, z.real());
    const double window = opts.top_window * (1.0 + std::abs(top_re));

    std::vector<double> real_eigs;
    for (const auto& z : eig) {
        if (std::abs(z.imag()) <= opts.imag_tol * (1.0 + std::abs(z.real()))) {
            real_eigs.push_back(z.real());
        }
    }
    std::sort(real_eigs.begin(), real_eigs.end(), std::greater<>());
    std::vector<double> candidates;
    for (double x : real_eigs) {
        if (x >= top_re - window) candidates.push_back(x);
    }
    if (candidates.empty()) {
        throw ComplexPrincipalError("no real eigenvalue within " + std::to_string(window) +
                                    " of the largest real part " + std::to_string(top_re));
    }

    const Eigen::Index n = op.entries.rows();
    const double tol = residual_tolerance(op.entries);
    double worst_min = -std::numeric_limits<double>::infinity();
    double tried = std::numeric_limits<double>::quiet_NaN();
    for (double cand : candidates) {
        // Duplicates share the eigenspace already tried.
        if (std::abs(cand - tried) <= 1e-9 * (1.0 + std::abs(cand))) continue;
        tried = cand;
        const double shift = cand + 1e-9 * (1.0 + std::abs(cand));
        Refined r = inverse_iteration(op, shift, Eigen::VectorXd::Ones(n), 50, tol);
        if (r.v.size() == 0) continue;
        const double min_entry = sign_normalize(r.v);
        worst_min = std::max(worst_min, min_entry);
        if (min_entry < opts.positivity_floor) continue;

        const double self_tol = 1e-9 * (1.0 + std::abs(r.mu));
        double next = -std::numeric_limits<double>::infinity();
        for (double x : real_eigs) {
            if (x < r.mu - self_tol) {
                next = x;
                break;
            }
        }
        const double gap = r.mu - next;
        EigenPair p = finish(op, std::move(r), gap);
        require_small_residual(p);
        return p;
    }
    throw PositivityViolationError(
        "no eigenvector near the top of the spectrum is positive (best min entry " +
            std::to_string(worst_min) + "); grid likely under-resolved",
        worst_min);
}

/// Shift-invert route. Returns false in `ok` if it could not certify a
/// positive eigenvector.
inline EigenPair principal_shift_invert(const OperatorMatrix& op, const EigenOptions& opts,
                                        bool& ok) {
    ok = false;
    const Eigen::Index n = op.entries.rows();
    const double top = op.potential.maxCoeff();
    // A positive eigenvector has eigenvalue equal to a positive average of the
    // potential, so it lies at or below `top`.
    const double shift0 = top + 1e-2 * (1.0 + std::abs(top));

    Eigen::MatrixXd shifted = op.entries;
    shifted.diagonal().array() -= shift0;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(shifted);
    Eigen::VectorXd v = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    double mu = top;
    double prev_mu = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opts.max_power_iterations; ++it) {
        Eigen::VectorXd w = lu.solve(v);
        remove_tau_nyquist(op.grid, w);
        const double sw = w.sum();
        if (!std::isfinite(sw) || sw == 0.0) return {};
        mu = shift0 + v.sum() / sw;
        v = w / sw;
        if (std::abs(mu - prev_mu) <= 1e-10 * (1.0 + std::abs(mu))) break;
        prev_mu = mu;
    }
    const double tol = residual_tolerance(op.entries);
    Refined r = inverse_iteration(op, mu + 1e-9 * (1.0 + std::abs(mu)), v, 50, tol);
    if (r.v.size() == 0) return {};
    const double min_entry = sign_normalize(r.v);
    if (min_entry < opts.positivity_floor) return {};
    EigenPair p = finish(op, std::move(r), std::numeric_limits<double>::quiet_NaN());
    if (!(p.residual < 1e-8 * (1.0 + std::abs(p.mu)))) return {};
    ok = true;
    return p;
}

}  // namespace detail

/// Principal eigenvalue (real, positive eigenvector) of the assembled operator.
///
/// The discrete spectrum contains copies mu + 2 pi i k / period_tau of the
/// principal eigenvalue whose real parts carry discretization error, and the
/// even-n tau derivative adds a real near-copy with a sign-alternating vector.
/// Selection therefore takes the largest real eigenvalue near the top of the
/// spectrum whose eigenvector is positive, rather than the largest real part.
inline EigenPair principal_eigenpair(const OperatorMatrix& op, const EigenOptions& opts = {}) {
    if (opts.method == EigenOptions::Method::shift_invert) {
        bool ok = false;
        EigenPair p = detail::principal_shift_invert(op, opts, ok);
        if (ok) return p;
        if (!opts.dense_fallback) {
            throw PositivityViolationError("shift-invert iteration found no positive eigenvector",
                                           -std::numeric_limits<double>::infinity());
        }
    }
    return detail::principal_dense(op, opts);
}

/// mu(lambda) for the speed operator.
inline double mu_of_lambda(const ShearField& field, const GridSpec& grid, double lambda,
                           double fprime0, const EigenOptions& opts = {}) {
    return principal_eigenpair(assemble(grid, field, lambda, fprime0), opts).mu;
}

/// Principal eigenvalue of Delta_y - d_tau + lambda (b + c).
inline double rho_c(const ShearField& field, const GridSpec& grid, double lambda, double c,
                    const EigenOptions& opts = {}) {
    if (!(field.grid() == grid)) {
        throw DimensionMismatchError("shear grid does not match operator grid");
    }
    return principal_eigenpair(LinearizedOperator(field).auxiliary_operator(lambda, c), opts).mu;
}

/// d mu / d theta for an operator whose diagonal moves by `dpotential` per
/// unit theta: psi^T (dpotential .* phi) / psi^T phi with psi the left
/// principal eigenvector, found by inverse iteration on the transpose.
inline double eigenvalue_derivative(const OperatorMatrix& op, const EigenPair& pair,
                                    const Eigen::VectorXd& dpotential) {
    OperatorMatrix adj = op;
    adj.entries.transposeInPlace();
    const double tol = detail::residual_tolerance(adj.entries);
    detail::Refined left = detail::inverse_iteration(
        adj, pair.mu + 1e-9 * (1.0 + std::abs(pair.mu)),
        Eigen::VectorXd::Ones(adj.entries.rows()), 50, tol);
    if (left.v.size() == 0 || detail::sign_normalize(left.v) < 0.0) {
        throw PositivityViolationError("left principal eigenvector is not positive",
                                       left.v.size() ? left.v.minCoeff() : 0.0);
    }
    return left.v.dot(dpotential.cwiseProduct(pair.vector)) / left.v.dot(pair.vector);
}

/// Potential-weighted average sum(p_i v_i) / sum(v_i); equals mu for an exact
/// eigenpair because every column of the differentiation blocks sums to zero.
inline double weighted_potential(const OperatorMatrix& op, const Eigen::VectorXd& v) {
    return op.potential.dot(v) / v.sum();
}

}  // namespace shearfront
