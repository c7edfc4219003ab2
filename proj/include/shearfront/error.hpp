#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shearfront {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidGridError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class DimensionMismatchError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

/// The selected eigenvector could not be normalized to be strictly positive.
/// Usually means the grid does not resolve the eigenfunction.
class PositivityViolationError : public Error {
public:
    PositivityViolationError(const std::string& what, double min_entry)
        : Error(what), min_entry_(min_entry) {}
    double min_entry() const noexcept { return min_entry_; }

private:
    double min_entry_;
};

/// No real eigenvalue sits at the top of the spectrum.
class ComplexPrincipalError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class CflViolationError : public Error {
public:
    using Error::Error;
};

/// Minimization ran out of iterations; carries the best iterate seen.
class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, double best_lambda, double best_h)
        : Error(what), best_lambda_(best_lambda), best_h_(best_h) {}
    double best_lambda() const noexcept { return best_lambda_; }
    double best_h() const noexcept { return best_h_; }

private:
    double best_lambda_;
    double best_h_;
};

}  // namespace shearfront
